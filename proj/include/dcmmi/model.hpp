#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcmmi/numerics.hpp"

namespace dcmmi {

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using BinaryVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

inline constexpr int kMaxAttributes = 16;
// Item and structural coefficients are clamped to this magnitude; the logits
// they produce stay well inside the stable range of log_logistic.
inline constexpr double kCoefBound = 15.0;
inline constexpr double kMonotonicityTol = 1e-10;

// Item-by-attribute incidence matrix.  Rows and columns carry external ids
// used in file formats and reports.
struct QMatrix {
  BinaryMatrix entries;  // items x attributes, each cell 0 or 1
  std::vector<std::string> item_ids;
  std::vector<std::string> attribute_ids;

  int items() const { return static_cast<int>(entries.rows()); }
  int attributes() const { return static_cast<int>(entries.cols()); }

  // Bitmask of the attributes item measures; attribute a (0-based) maps to
  // bit a.  That bit convention is fixed across the whole library.
  std::uint32_t row_mask(int item) const;

  // Throws FormatError on: empty matrix, non-binary cells, an all-zero row
  // (item measuring nothing) or all-zero column (attribute never measured),
  // duplicate ids, attribute count above kMaxAttributes.
  void validate() const;
};

// One latent class: a mastery indicator per attribute.  class_index encodes
// the bits with attribute 0 as the least significant bit.
struct AttributeProfile {
  BinaryVector bits;
  int class_index = 0;
};

// Wraps raw entries with 1-based numeric ids and validates.
QMatrix qmatrix_from_entries(BinaryMatrix entries);

// All 2^attribute_count profiles in class-index order.
// Requires 1 <= attribute_count <= kMaxAttributes.
std::vector<AttributeProfile> profile_space(int attribute_count);

AttributeProfile profile_from_class(int class_index, int attribute_count);

// Canonical enumeration of the nonempty attribute subsets for a test with a
// fixed attribute count: main effects first, then two-way sets, and so on;
// within a level, sets are ordered lexicographically by their ascending
// attribute tuples.  All effect bookkeeping (parameter vectors, labels,
// candidate enumeration) uses the ranks defined here.
class EffectCatalog {
 public:
  explicit EffectCatalog(int attribute_count);

  int attributes() const { return attrs_; }
  int count() const { return static_cast<int>(masks_.size()); }  // 2^A - 1

  std::uint32_t mask_of(int rank) const { return masks_[rank]; }
  // -1 when mask is empty or out of range.
  int rank_of(std::uint32_t mask) const;
  int level_of(int rank) const;
  // Number of subsets of size <= level (the structural design width).
  int count_up_to_level(int level) const;

  // Ascending 1-based attribute positions of the set at `rank`.
  std::vector<int> attributes_of(int rank) const;
  // "2" for a main effect on attribute 2, "1x3" for the {1,3} interaction.
  std::string label_of(int rank) const;
  // Inverse of label_of; throws FormatError on malformed or out-of-range text.
  int rank_from_label(const std::string& label) const;

 private:
  int attrs_;
  std::vector<std::uint32_t> masks_;
  std::vector<int> rank_lookup_;  // indexed by mask
};

// Identifies a single item coefficient; attribute_set == 0 is the intercept.
struct EffectIndex {
  int item = 0;
  std::uint32_t attribute_set = 0;
  int level() const;
};

// Coefficients of one item's response function.  `effects` always has the
// full canonical length 2^A - 1; entries outside `active` are exactly zero.
// `active` is sorted and every active set is a subset of the item's measured
// attributes.
struct ItemParameterSet {
  double intercept = 0.0;
  Vector effects;
  std::vector<int> active;

  // Compact coefficient vector [intercept, effects(active)...].
  Vector packed() const;
  void set_packed(const Eigen::Ref<const Vector>& theta);
};

// Zero-initialized coefficients with the given active ranks.
ItemParameterSet make_item_params(const EffectCatalog& catalog, std::vector<int> active);

enum class ModelKind { lcdm_full, dina, main_effects_only, custom };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);  // throws ConfigError

// A complete measurement + structural specification: which effects are free
// for each item, and the interaction order of the latent-class log-linear
// model (order == attributes() means saturated).
struct ModelSpec {
  QMatrix q;
  ModelKind kind = ModelKind::lcdm_full;
  std::vector<std::vector<int>> masks;  // per item, sorted effect ranks
  int structural_order = 0;
  EffectCatalog catalog{1};

  static ModelSpec make(QMatrix q, ModelKind kind, int structural_order = -1);
  // Custom per-item masks (ranks into the catalog).  Throws ConfigError when a
  // mask references an attribute the item does not measure.
  static ModelSpec make_custom(QMatrix q, std::vector<std::vector<int>> masks,
                               int structural_order = -1);

  int items() const { return q.items(); }
  int attributes() const { return q.attributes(); }
  int classes() const { return 1 << q.attributes(); }

  bool is_active(int item, int rank) const;
};

// Value of the product term for attribute set `mask` at a profile.
double effect_indicator(const AttributeProfile& profile, std::uint32_t mask);

// Design vector h for one item at one profile, restricted to the item's
// active ranks (in mask order).  Entries for sets whose product is zero at
// the profile are zero.  q_row only gates which sets can be active; the
// caller guarantees that invariant via ModelSpec.
Vector design_vector(const AttributeProfile& profile, const std::vector<int>& mask,
                     const EffectCatalog& catalog);

double item_response_prob(const ItemParameterSet& params, const AttributeProfile& profile,
                          const EffectCatalog& catalog);

// An ordered profile pair violating monotonicity: low <= high elementwise but
// the success probability decreases by more than kMonotonicityTol.
struct MonotonicityViolation {
  int low_class = 0;
  int high_class = 0;
  double prob_low = 0.0;
  double prob_high = 0.0;
};

std::vector<MonotonicityViolation> check_monotonicity(const ItemParameterSet& params,
                                                      const EffectCatalog& catalog);

}  // namespace dcmmi
