#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "structedit/delta.hpp"
#include "structedit/shape.hpp"

namespace structedit {
namespace synth {

enum class Subtype { Chair, Sofa, Stool };

std::string subtype_name(Subtype s);
Subtype subtype_from_name(const std::string& name);

// The 8 global parameters, pre-normalization units.
struct GlobalParams {
  double w_leg, h_leg;
  double w_seat, d_seat, h_seat;
  double h_back, w_back, d_back;
};

GlobalParams sample_global_params(std::uint64_t seed);

// Variant axes, flat index = back*24 + legs*12 + arms*4 + stretcher.
// back:      0 solid panel, 1 three vertical bars, 2 three horizontal bars,
//            3 panel with two vertical side bars
// legs:      0 short, 1 long
// arms:      0 none, 1 rest + front support, 2 rest + front and back supports
// stretcher: 0 squared, 1 H-like, 2 X-like, 3 none
struct VariantIndex {
  int back = 0, legs = 0, arms = 0, stretcher = 0;

  int flat() const { return back * 24 + legs * 12 + arms * 4 + stretcher; }
  static VariantIndex from_flat(int flat);
};

inline constexpr int kVariantCount = 96;
inline constexpr int kVariantAxisCount = 4;  // back, legs, arms, stretcher

// Per-subtype applicability of the variant axes [back, legs, arms, stretcher].
std::array<bool, kVariantAxisCount> axis_mask(Subtype subtype);

std::shared_ptr<const Taxonomy> synthetic_taxonomy();
inline constexpr const char* kSyntheticCategory = "synthetic_furniture";

ShapeTree build_variant(const GlobalParams& params, const VariantIndex& v, Subtype subtype);

struct SyntheticGroup {
  Subtype subtype;
  int group_id = 0;  // global, unique across subtypes
  GlobalParams params;
  std::vector<ShapeTree> shapes;  // indexed by flat variant index, size 96
  std::array<bool, kVariantAxisCount> transferable;
};

struct DatasetConfig {
  int groups_per_subtype = 10;
  std::uint64_t seed = 0;
};

std::vector<SyntheticGroup> generate_dataset(const DatasetConfig& config);

// Ground-truth transfer of edit (i -> j) defined on group_a onto group_b:
// compute_delta(B_i, B_j) when some changed variant axis applies to
// group_b's subtype, identity otherwise.
ShapeDelta ground_truth_transfer(const SyntheticGroup& group_a, int i, int j,
                                 const SyntheticGroup& group_b);

// Group-level 80/20 split: group ids are ranked by a deterministic hash and
// the top 20% (at least one) become the test split. Returns per-group-id
// test flags.
std::vector<bool> test_split(int group_count, std::uint64_t seed);

}  // namespace synth
}  // namespace structedit
