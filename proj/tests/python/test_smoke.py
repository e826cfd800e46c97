import json

import pytest

import structedit as se


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    se.generate_dataset(groups_per_subtype=1, seed=7, out_dir=str(out))
    return out


@pytest.fixture(scope="module")
def taxonomy(dataset_dir):
    return se.Taxonomy.load(str(dataset_dir / "taxonomy.json"))


def shape(dataset_dir, taxonomy, name):
    return se.Shape.load(str(dataset_dir / "shapes" / name), taxonomy)


def test_dataset_layout(dataset_dir):
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    assert manifest["format_version"] == 1
    assert len(manifest["groups"]) == 3
    assert all(len(g["shapes"]) == 96 for g in manifest["groups"])


def test_shape_round_trip(dataset_dir, taxonomy, tmp_path):
    s = shape(dataset_dir, taxonomy, "g000_v00.json")
    s.validate()
    assert s.part_count > 1
    copy = se.Shape.from_json(s.to_json(), taxonomy)
    assert copy.to_json() == s.to_json()
    assert copy.hash() == s.hash()
    out = tmp_path / "copy.json"
    copy.save(str(out))
    assert se.Shape.load(str(out), taxonomy).to_json() == s.to_json()


def test_delta_round_trip(dataset_dir, taxonomy):
    a = shape(dataset_dir, taxonomy, "g000_v00.json")
    b = shape(dataset_dir, taxonomy, "g000_v50.json")
    delta = se.compute_delta(a, b)
    rebuilt = se.apply_delta(a, delta)
    assert se.structural_distance(rebuilt, b) == 0.0
    # box parameters agree to 1e-9; the residual is point sampling noise
    assert se.geometric_distance(rebuilt, b) <= 0.01
    assert se.identity_delta(a).addition_count == 0


def test_matching_and_distances(dataset_dir, taxonomy):
    a = shape(dataset_dir, taxonomy, "g000_v00.json")
    b = shape(dataset_dir, taxonomy, "g000_v50.json")
    matching = se.match_shapes(a, b)
    assert matching["pairs"]
    assert matching["total_cost"] >= 0.0
    assert se.geometric_distance(a, a) == 0.0
    assert se.shape_distance("structural", a, b) >= 0.0
    table = json.loads(se.build_neighborhoods([a, b], k=1, metric="structural"))
    assert table["k"] == 1
    assert len(table["neighbors"]) == 2


def test_model_round_trip(dataset_dir, taxonomy, tmp_path):
    a = shape(dataset_dir, taxonomy, "g000_v00.json")
    b = shape(dataset_dir, taxonomy, "g000_v50.json")
    delta = se.compute_delta(a, b)

    model = se.Model('{"feature_width": 16, "latent_width": 8, "seed": 3}')
    mean, logvar = model.encode(a, delta)
    assert len(mean) == 8 and len(logvar) == 8

    decoded = model.decode(a, mean)
    se.apply_delta(a, decoded).validate()

    loss = model.loss(a, delta)
    assert loss["total"] > 0.0

    path = tmp_path / "model.bin"
    model.save(str(path))
    reloaded = se.Model.load(str(path))
    assert reloaded.decode(a, mean).to_json() == decoded.to_json()
    assert reloaded.generate(a, count=2, seed=5)[0].action_count == a.part_count
    transferred = reloaded.transfer(a, delta, b)
    assert transferred.action_count == b.part_count


def test_experiment_report(dataset_dir):
    spec = {
        "experiment": "reconstruction",
        "split": "test",
        "per_source_targets": 1,
        "max_sources": 4,
        "seed": 3,
    }
    report = json.loads(se.run_experiment(str(dataset_dir), json.dumps(spec)))
    rows = {(r["system"], r["metric"]): r["value"] for r in report["rows"]}
    assert rows[("identity", "geometric")] == pytest.approx(1.0, abs=1e-9)
