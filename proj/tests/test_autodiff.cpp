#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "structedit/nn.hpp"
#include "structedit/sampling.hpp"
#include "structedit/tape.hpp"

using namespace structedit;
using ad::Tape;
using ad::Var;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("basic node values") {
  Tape t;
  Var a = t.leaf({1, 2, 3});
  Var b = t.constant({4, 5, 6});
  CHECK(t.value(t.add(a, b)) == std::vector<double>{5, 7, 9});
  CHECK(t.value(t.sub(b, a)) == std::vector<double>{3, 3, 3});
  CHECK(t.value(t.scale(a, 2)) == std::vector<double>{2, 4, 6});
  CHECK(t.value(t.mul(a, b)) == std::vector<double>{4, 10, 18});
  CHECK(t.value(t.concat({a, b})).size() == 6);
  CHECK(t.value(t.slice(b, 1, 2)) == std::vector<double>{5, 6});
  CHECK(t.value(t.sum(a))[0] == 6.0);
  CHECK(t.value(t.squared_norm(a))[0] == 14.0);
  CHECK_THROWS(t.add(a, t.constant({1})));
  CHECK_THROWS(t.slice(a, 2, 5));
}

TEST_CASE("squared norm gradient is 2x") {
  Tape t;
  Var x = t.leaf({1.5, -2.0, 0.25});
  t.backward(t.squared_norm(x));
  CHECK(t.grad(x) == std::vector<double>{3.0, -4.0, 0.5});
}

TEST_CASE("finite differences for elementwise and linear ops") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x = random_vec(rng, 8);
    std::vector<double> y = random_vec(rng, 8);

    auto composite = [](Tape& t, const std::vector<Var>& in) {
      Var s = t.add(t.mul(in[0], in[1]), t.scale(in[0], 0.5));
      s = t.leaky_relu(s);
      s = t.sigmoid(s);
      Var c = t.concat({s, t.slice(in[1], 2, 4)});
      return t.squared_norm(c);
    };
    CHECK(nn::finite_difference_check(composite, {x, y}, 100 + trial, 16) <= 1e-4);

    std::vector<double> w = random_vec(rng, 5 * 8, 0.5);
    std::vector<double> b = random_vec(rng, 5, 0.5);
    auto aff = [](Tape& t, const std::vector<Var>& in) {
      return t.squared_norm(t.leaky_relu(t.affine(in[0], in[1], in[2])));
    };
    CHECK(nn::finite_difference_check(aff, {x, w, b}, 200 + trial, 16) <= 1e-4);
  }
}

TEST_CASE("max pool routes gradient to the lowest tied index") {
  Tape t;
  Var a = t.leaf({1.0, 5.0});
  Var b = t.leaf({1.0, 7.0});
  Var m = t.max_pool({a, b});
  CHECK(t.value(m) == std::vector<double>{1.0, 7.0});
  t.backward(t.sum(m));
  CHECK(t.grad(a) == std::vector<double>{1.0, 0.0});
  CHECK(t.grad(b) == std::vector<double>{0.0, 1.0});

  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = [](Tape& t, const std::vector<Var>& in) {
      return t.squared_norm(t.max_pool({in[0], in[1], in[2]}));
    };
    std::vector<std::vector<double>> ins = {random_vec(rng, 6), random_vec(rng, 6),
                                            random_vec(rng, 6)};
    CHECK(nn::finite_difference_check(f, ins, 300 + trial, 12) <= 1e-4);
  }
}

TEST_CASE("group norm") {
  Rng rng(41);
  std::vector<double> x = random_vec(rng, 16, 3.0);
  std::vector<double> gamma = random_vec(rng, 16, 0.3);
  std::vector<double> beta = random_vec(rng, 16, 0.3);

  Tape t;
  Var xv = t.leaf(x);
  Var gv = t.constant(std::vector<double>(16, 1.0));
  Var bv = t.constant(std::vector<double>(16, 0.0));
  Var y = t.group_norm(xv, 4, gv, bv);
  // per group: zero mean, unit variance up to eps
  for (int g = 0; g < 4; ++g) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 4; ++i) mean += t.value(y)[g * 4 + i];
    mean /= 4;
    for (int i = 0; i < 4; ++i)
      var += std::pow(t.value(y)[g * 4 + i] - mean, 2);
    var /= 4;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  auto f = [](Tape& t, const std::vector<Var>& in) {
    return t.squared_norm(t.group_norm(in[0], 4, in[1], in[2]));
  };
  CHECK(nn::finite_difference_check(f, {x, gamma, beta}, 77, 24) <= 1e-4);
}

TEST_CASE("quaternion ops") {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> qa = random_vec(rng, 4);
    std::vector<double> qb = random_vec(rng, 4);

    // forward agrees with the quaternion class
    Tape t;
    Var prod = t.quat_multiply(t.leaf(qa), t.leaf(qb));
    Quat expect = Quat{qa[0], qa[1], qa[2], qa[3]} * Quat{qb[0], qb[1], qb[2], qb[3]};
    CHECK(t.value(prod)[0] == doctest::Approx(expect.w));
    CHECK(t.value(prod)[3] == doctest::Approx(expect.z));

    auto fmul = [](Tape& t, const std::vector<Var>& in) {
      return t.squared_norm(t.quat_multiply(in[0], in[1]));
    };
    CHECK(nn::finite_difference_check(fmul, {qa, qb}, 400 + trial, 8) <= 1e-4);

    auto fnorm = [](Tape& t, const std::vector<Var>& in) {
      return t.squared_norm(t.sub(t.normalize(in[0]), in[1]));
    };
    CHECK(nn::finite_difference_check(fnorm, {qa, qb}, 500 + trial, 8) <= 1e-4);
  }

  Tape t;
  Var unit = t.normalize(t.leaf({3.0, 0.0, 4.0, 0.0}));
  CHECK(t.value(unit)[0] == doctest::Approx(0.6));
  CHECK(t.value(unit)[2] == doctest::Approx(0.8));
  CHECK_THROWS(t.normalize(t.leaf({0.0, 0.0, 0.0, 0.0})));
}

TEST_CASE("box points node") {
  Rng rng(61);
  Part p;
  p.center = {0.3, -0.2, 0.7};
  p.extents = {0.5, 0.25, 0.125};
  p.orientation = Quat::from_axis_angle({1, 2, 3}, 0.8);
  p.semantic = "seat";

  Tape t;
  Var pts = t.box_points(t.leaf({p.center.x, p.center.y, p.center.z}),
                         t.leaf({p.orientation.w, p.orientation.x, p.orientation.y,
                                 p.orientation.z}),
                         t.leaf({p.extents.x, p.extents.y, p.extents.z}), 4);
  PointSet expect = sample_box_points(p, 4);
  REQUIRE(pts.size == int(expect.size()) * 3);
  for (size_t i = 0; i < expect.size(); ++i) {
    CHECK(t.value(pts)[i * 3 + 0] == doctest::Approx(expect[i].x).epsilon(1e-12));
    CHECK(t.value(pts)[i * 3 + 1] == doctest::Approx(expect[i].y).epsilon(1e-12));
    CHECK(t.value(pts)[i * 3 + 2] == doctest::Approx(expect[i].z).epsilon(1e-12));
  }

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> c = random_vec(rng, 3);
    std::vector<double> q = random_vec(rng, 4);
    std::vector<double> r = {rng.uniform(0.1, 1), rng.uniform(0.1, 1),
                             rng.uniform(0.1, 1)};
    std::vector<double> target = random_vec(rng, 3, 0.5);
    auto f = [](Tape& t, const std::vector<Var>& in) {
      // normalized quat feeds the box, like the real decoder path
      Var pts = t.box_points(in[0], t.normalize(in[1]), in[2], 2);
      Var shifted = t.leaf(std::vector<double>(pts.size, 0.1));
      return t.squared_norm(t.sub(pts, shifted));
    };
    CHECK(nn::finite_difference_check(f, {c, q, r}, 600 + trial, 20) <= 1e-4);

    // raw (unnormalized) quaternion input also has exact gradients
    auto fraw = [](Tape& t, const std::vector<Var>& in) {
      Var pts = t.box_points(in[0], in[1], in[2], 2);
      return t.squared_norm(pts);
    };
    CHECK(nn::finite_difference_check(fraw, {c, q, r}, 700 + trial, 20) <= 1e-4);
  }
}

TEST_CASE("chamfer node") {
  Rng rng(71);
  // value agrees with the geometry-level implementation
  PointSet a, b;
  std::vector<double> af, bf;
  for (int i = 0; i < 20; ++i) {
    Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    a.push_back(p);
    af.insert(af.end(), {p.x, p.y, p.z});
  }
  for (int i = 0; i < 15; ++i) {
    Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    b.push_back(p);
    bf.insert(bf.end(), {p.x, p.y, p.z});
  }
  Tape t;
  Var d = t.chamfer(t.leaf(af), t.leaf(bf));
  CHECK(t.value(d)[0] == doctest::Approx(chamfer_distance(a, b)).epsilon(1e-12));

  for (int trial = 0; trial < 6; ++trial) {
    std::vector<double> x = random_vec(rng, 18);
    std::vector<double> y = random_vec(rng, 12);
    auto f = [](Tape& t, const std::vector<Var>& in) {
      return t.chamfer(in[0], in[1]);
    };
    CHECK(nn::finite_difference_check(f, {x, y}, 800 + trial, 16) <= 1e-4);
  }
}

TEST_CASE("loss nodes") {
  Rng rng(81);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> logits = random_vec(rng, 7, 2.0);
    int target = int(rng.next_below(7));
    auto fce = [target](Tape& t, const std::vector<Var>& in) {
      return t.softmax_cross_entropy(in[0], target);
    };
    CHECK(nn::finite_difference_check(fce, {logits}, 900 + trial, 7) <= 1e-4);

    std::vector<double> z = random_vec(rng, 5, 3.0);
    std::vector<double> targets(5);
    for (double& x : targets) x = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto fbce = [targets](Tape& t, const std::vector<Var>& in) {
      return t.bce_with_logits(in[0], targets);
    };
    CHECK(nn::finite_difference_check(fbce, {z}, 1000 + trial, 5) <= 1e-4);

    std::vector<double> mu = random_vec(rng, 6);
    std::vector<double> lv = random_vec(rng, 6);
    auto fkl = [](Tape& t, const std::vector<Var>& in) {
      return t.gaussian_kl(in[0], in[1]);
    };
    CHECK(nn::finite_difference_check(fkl, {mu, lv}, 1100 + trial, 12) <= 1e-4);
  }

  // KL of the standard normal against itself is zero
  Tape t;
  Var kl = t.gaussian_kl(t.leaf(std::vector<double>(4, 0.0)),
                         t.leaf(std::vector<double>(4, 0.0)));
  CHECK(t.value(kl)[0] == 0.0);

  // cross entropy of a certain prediction approaches zero
  Var sure = t.softmax_cross_entropy(t.leaf({30.0, 0.0, 0.0}), 0);
  CHECK(t.value(sure)[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mlp block and set pool") {
  nn::ParameterStore params(7);
  std::vector<double> x = {0.3, -0.5, 0.8, 0.1};

  // deterministic initialization and evaluation
  auto run = [&](nn::ParameterStore& ps) {
    Tape t;
    Var out = nn::mlp_block(t, ps, "blk", t.leaf(x), 16, 4);
    return t.value(out);
  };
  nn::ParameterStore params2(7);
  CHECK(run(params) == run(params2));
  nn::ParameterStore other(8);
  CHECK(run(params) != run(other));

  // skip connection: zeroing both affine layers leaves the identity
  nn::ParameterStore zeroed(7);
  {
    Tape t;
    nn::mlp_block(t, zeroed, "blk", t.leaf(x), 16, 4);
  }
  for (auto& name : {"blk.w1", "blk.b1", "blk.w2", "blk.b2"}) {
    auto& tensor = zeroed.tensor(name);
    std::fill(tensor.value.begin(), tensor.value.end(), 0.0);
  }
  {
    Tape t;
    Var out = nn::mlp_block(t, zeroed, "blk", t.leaf(x), 16, 4);
    CHECK(t.value(out) == x);
  }

  // set pool is invariant to element order, bitwise
  nn::ParameterStore pool_params(9);
  std::vector<std::vector<double>> elems = {
      {1, 2, 3}, {4, -1, 0}, {0.5, 0.5, 0.5}, {-2, 1, 7}};
  auto pool = [&](const std::vector<int>& order) {
    Tape t;
    std::vector<Var> vs;
    for (int i : order) vs.push_back(t.leaf(elems[i]));
    Var out = nn::set_pool(t, pool_params, "sp", vs, 3, 16, 8);
    return t.value(out);
  };
  auto base = pool({0, 1, 2, 3});
  CHECK(pool({3, 1, 0, 2}) == base);
  CHECK(pool({2, 3, 1, 0}) == base);

  // empty set encodes to zeros
  {
    Tape t;
    Var out = nn::set_pool(t, pool_params, "sp", {}, 3, 16, 8);
    CHECK(t.value(out) == std::vector<double>(8, 0.0));
  }

  // gradients through the whole stack
  {
    Tape t;
    std::vector<Var> vs;
    for (const auto& e : elems) vs.push_back(t.leaf(e));
    Var out = nn::set_pool(t, pool_params, "sp", vs, 3, 16, 8);
    Var loss = t.squared_norm(out);
    t.backward(loss);
    pool_params.accumulate(t);
    CHECK(pool_params.grad_norm() > 0.0);
    pool_params.zero_grad();
  }
}

TEST_CASE("adam optimizer") {
  // no gradient, no movement
  nn::ParameterStore params(3);
  {
    Tape t;
    params.bias(t, "p", 4);
  }
  auto before = params.tensor("p").value;
  params.adam_step(1e-3);
  CHECK(params.tensor("p").value == before);

  // per-coordinate steps are bounded by roughly lr
  nn::ParameterStore p2(3);
  {
    Tape t;
    Var x = p2.weight(t, "w", 2, 2);
    Var loss = t.squared_norm(x);
    t.backward(loss);
    p2.accumulate(t);
  }
  auto prev = p2.tensor("w").value;
  p2.adam_step(0.01);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(p2.tensor("w").value[i] - prev[i]) <= 0.0101);

  // drives a quadratic bowl to the minimum
  nn::ParameterStore p3(5);
  std::vector<double> target = {1.0, -2.0, 0.5};
  double final_loss = 1e300;
  for (int step = 0; step < 2000; ++step) {
    Tape t;
    Var x = p3.bias(t, "x", 3);
    Var loss = t.squared_norm(t.sub(x, t.constant(target)));
    final_loss = t.value(loss)[0];
    if (final_loss < 1e-7) break;
    t.backward(loss);
    p3.accumulate(t);
    p3.adam_step(0.05);
  }
  CHECK(final_loss <= 1e-6);
}

TEST_CASE("checkpoint round trip") {
  nn::ParameterStore params(17);
  {
    Tape t;
    Var x = nn::mlp_block(t, params, "m", t.leaf({1.0, 2.0}), 8, 2);
    t.backward(t.squared_norm(x));
    params.accumulate(t);
    params.adam_step(1e-3);
  }

  auto dir = std::filesystem::temp_directory_path() / "structedit_test_nn";
  std::filesystem::create_directories(dir);
  auto path = (dir / "ckpt.bin").string();
  params.save(path);
  nn::ParameterStore loaded = nn::ParameterStore::load(path);
  CHECK(loaded.step() == params.step());
  CHECK(loaded.parameter_count() == params.parameter_count());
  for (const auto& [name, t] : params.tensors()) {
    CHECK(loaded.tensor(name).value == t.value);
    CHECK(loaded.tensor(name).adam_m == t.adam_m);
    CHECK(loaded.tensor(name).adam_v == t.adam_v);
  }

  CHECK_THROWS(nn::ParameterStore::load((dir / "missing.bin").string()));
}
