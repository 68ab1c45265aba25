#include "dcmmi/model.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <set>
#include <sstream>

#include "dcmmi/errors.hpp"

namespace dcmmi {

std::uint32_t QMatrix::row_mask(int item) const {
  std::uint32_t mask = 0;
  for (int a = 0; a < attributes(); ++a)
    if (entries(item, a)) mask |= (1u << a);
  return mask;
}

void QMatrix::validate() const {
  if (items() == 0 || attributes() == 0) throw FormatError("Q-matrix: empty matrix");
  if (attributes() > kMaxAttributes)
    throw FormatError("Q-matrix: more than " + std::to_string(kMaxAttributes) + " attributes");
  if (static_cast<int>(item_ids.size()) != items() ||
      static_cast<int>(attribute_ids.size()) != attributes())
    throw FormatError("Q-matrix: id lists do not match matrix shape");
  for (int i = 0; i < items(); ++i)
    for (int a = 0; a < attributes(); ++a)
      if (entries(i, a) > 1)
        throw FormatError("Q-matrix: non-binary cell at item " + item_ids[i] +
                          ", attribute " + attribute_ids[a]);
  for (int i = 0; i < items(); ++i)
    if (row_mask(i) == 0)
      throw FormatError("Q-matrix: item " + item_ids[i] + " measures no attribute");
  for (int a = 0; a < attributes(); ++a) {
    bool any = false;
    for (int i = 0; i < items(); ++i) any = any || entries(i, a);
    if (!any)
      throw FormatError("Q-matrix: attribute " + attribute_ids[a] + " is never measured");
  }
  if (std::set<std::string>(item_ids.begin(), item_ids.end()).size() != item_ids.size())
    throw FormatError("Q-matrix: duplicate item ids");
  if (std::set<std::string>(attribute_ids.begin(), attribute_ids.end()).size() !=
      attribute_ids.size())
    throw FormatError("Q-matrix: duplicate attribute ids");
}

QMatrix qmatrix_from_entries(BinaryMatrix entries) {
  QMatrix q;
  q.entries = std::move(entries);
  for (int i = 0; i < q.items(); ++i) q.item_ids.push_back(std::to_string(i + 1));
  for (int a = 0; a < q.attributes(); ++a) q.attribute_ids.push_back(std::to_string(a + 1));
  q.validate();
  return q;
}

std::vector<AttributeProfile> profile_space(int attribute_count) {
  if (attribute_count < 1 || attribute_count > kMaxAttributes)
    throw ConfigError("profile_space: attribute count must lie in [1, " +
                      std::to_string(kMaxAttributes) + "]");
  std::vector<AttributeProfile> out;
  const int classes = 1 << attribute_count;
  out.reserve(classes);
  for (int c = 0; c < classes; ++c) out.push_back(profile_from_class(c, attribute_count));
  return out;
}

AttributeProfile profile_from_class(int class_index, int attribute_count) {
  AttributeProfile p;
  p.class_index = class_index;
  p.bits.resize(attribute_count);
  for (int a = 0; a < attribute_count; ++a)
    p.bits[a] = static_cast<std::uint8_t>((class_index >> a) & 1);
  return p;
}

EffectCatalog::EffectCatalog(int attribute_count) : attrs_(attribute_count) {
  if (attribute_count < 1 || attribute_count > kMaxAttributes)
    throw ConfigError("EffectCatalog: attribute count must lie in [1, " +
                      std::to_string(kMaxAttributes) + "]");
  rank_lookup_.assign(std::size_t{1} << attribute_count, -1);
  // Level-major order; inside a level, combinations advance in lexicographic
  // order of their ascending attribute tuples.  This differs from numeric
  // bitmask order once four or more attributes are in play.
  for (int level = 1; level <= attribute_count; ++level) {
    std::vector<int> pick(level);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      std::uint32_t mask = 0;
      for (int a : pick) mask |= (1u << a);
      rank_lookup_[mask] = static_cast<int>(masks_.size());
      masks_.push_back(mask);
      int i = level - 1;
      while (i >= 0 && pick[i] == attribute_count - level + i) --i;
      if (i < 0) break;
      ++pick[i];
      for (int j = i + 1; j < level; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
}

int EffectCatalog::rank_of(std::uint32_t mask) const {
  if (mask == 0 || mask >= rank_lookup_.size()) return -1;
  return rank_lookup_[mask];
}

int EffectCatalog::level_of(int rank) const { return std::popcount(masks_[rank]); }

int EffectCatalog::count_up_to_level(int level) const {
  int n = 0;
  for (std::uint32_t m : masks_)
    if (std::popcount(m) <= level) ++n;
  return n;
}

std::vector<int> EffectCatalog::attributes_of(int rank) const {
  std::vector<int> attrs;
  const std::uint32_t mask = masks_[rank];
  for (int a = 0; a < attrs_; ++a)
    if (mask & (1u << a)) attrs.push_back(a + 1);
  return attrs;
}

std::string EffectCatalog::label_of(int rank) const {
  std::string out;
  for (int a : attributes_of(rank)) {
    if (!out.empty()) out += 'x';
    out += std::to_string(a);
  }
  return out;
}

int EffectCatalog::rank_from_label(const std::string& label) const {
  std::uint32_t mask = 0;
  std::stringstream ss(label);
  std::string tok;
  while (std::getline(ss, tok, 'x')) {
    int a = 0;
    try {
      std::size_t pos = 0;
      a = std::stoi(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError("effect label '" + label + "': bad attribute token '" + tok + "'");
    }
    if (a < 1 || a > attrs_)
      throw FormatError("effect label '" + label + "': attribute " + std::to_string(a) +
                        " out of range");
    const std::uint32_t bit = 1u << (a - 1);
    if (mask & bit) throw FormatError("effect label '" + label + "': repeated attribute");
    mask |= bit;
  }
  const int rank = rank_of(mask);
  if (rank < 0) throw FormatError("effect label '" + label + "': empty attribute set");
  return rank;
}

int EffectIndex::level() const { return std::popcount(attribute_set); }

Vector ItemParameterSet::packed() const {
  Vector theta(1 + active.size());
  theta[0] = intercept;
  for (std::size_t j = 0; j < active.size(); ++j) theta[1 + j] = effects[active[j]];
  return theta;
}

void ItemParameterSet::set_packed(const Eigen::Ref<const Vector>& theta) {
  intercept = theta[0];
  for (std::size_t j = 0; j < active.size(); ++j) effects[active[j]] = theta[1 + j];
}

ItemParameterSet make_item_params(const EffectCatalog& catalog, std::vector<int> active) {
  ItemParameterSet p;
  p.effects = Vector::Zero(catalog.count());
  std::sort(active.begin(), active.end());
  p.active = std::move(active);
  return p;
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::lcdm_full: return "lcdm";
    case ModelKind::dina: return "dina";
    case ModelKind::main_effects_only: return "mains";
    case ModelKind::custom: return "custom";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "lcdm") return ModelKind::lcdm_full;
  if (name == "dina") return ModelKind::dina;
  if (name == "mains") return ModelKind::main_effects_only;
  if (name == "custom") return ModelKind::custom;
  throw ConfigError("unknown model kind '" + name + "' (expected lcdm|dina|mains|custom)");
}

namespace {

void finish_spec(ModelSpec* spec, int structural_order) {
  const int attrs = spec->attributes();
  if (structural_order < 0) structural_order = attrs;  // saturated by default
  if (structural_order < 1 || structural_order > attrs)
    throw ConfigError("structural order must lie in [1, attribute count]");
  spec->structural_order = structural_order;
}

}  // namespace

ModelSpec ModelSpec::make(QMatrix q, ModelKind kind, int structural_order) {
  q.validate();
  if (kind == ModelKind::custom)
    throw ConfigError("custom models require explicit masks; use make_custom");
  ModelSpec spec;
  spec.q = std::move(q);
  spec.kind = kind;
  spec.catalog = EffectCatalog(spec.attributes());
  finish_spec(&spec, structural_order);
  spec.masks.resize(spec.items());
  for (int i = 0; i < spec.items(); ++i) {
    const std::uint32_t measured = spec.q.row_mask(i);
    std::vector<int>& mask = spec.masks[i];
    switch (kind) {
      case ModelKind::lcdm_full:
        for (int r = 0; r < spec.catalog.count(); ++r)
          if ((spec.catalog.mask_of(r) & ~measured) == 0) mask.push_back(r);
        break;
      case ModelKind::dina:
        mask.push_back(spec.catalog.rank_of(measured));
        break;
      case ModelKind::main_effects_only:
        for (int a = 0; a < spec.attributes(); ++a)
          if (measured & (1u << a)) mask.push_back(spec.catalog.rank_of(1u << a));
        break;
      case ModelKind::custom:
        break;
    }
    std::sort(mask.begin(), mask.end());
  }
  return spec;
}

ModelSpec ModelSpec::make_custom(QMatrix q, std::vector<std::vector<int>> masks,
                                 int structural_order) {
  q.validate();
  if (static_cast<int>(masks.size()) != q.items())
    throw ConfigError("custom masks: need one mask per item");
  ModelSpec spec;
  spec.q = std::move(q);
  spec.kind = ModelKind::custom;
  spec.catalog = EffectCatalog(spec.attributes());
  finish_spec(&spec, structural_order);
  for (int i = 0; i < spec.items(); ++i) {
    const std::uint32_t measured = spec.q.row_mask(i);
    std::vector<int>& mask = masks[i];
    std::sort(mask.begin(), mask.end());
    mask.erase(std::unique(mask.begin(), mask.end()), mask.end());
    for (int r : mask) {
      if (r < 0 || r >= spec.catalog.count())
        throw ConfigError("custom masks: rank out of range for item " + spec.q.item_ids[i]);
      if (spec.catalog.mask_of(r) & ~measured)
        throw ConfigError("custom masks: effect " + spec.catalog.label_of(r) +
                          " on item " + spec.q.item_ids[i] +
                          " involves an attribute the item does not measure");
    }
  }
  spec.masks = std::move(masks);
  return spec;
}

bool ModelSpec::is_active(int item, int rank) const {
  const std::vector<int>& mask = masks[item];
  return std::binary_search(mask.begin(), mask.end(), rank);
}

double effect_indicator(const AttributeProfile& profile, std::uint32_t mask) {
  for (int a = 0; a < profile.bits.size(); ++a)
    if ((mask & (1u << a)) && !profile.bits[a]) return 0.0;
  return 1.0;
}

Vector design_vector(const AttributeProfile& profile, const std::vector<int>& mask,
                     const EffectCatalog& catalog) {
  Vector h(mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j)
    h[j] = effect_indicator(profile, catalog.mask_of(mask[j]));
  return h;
}

double item_response_prob(const ItemParameterSet& params, const AttributeProfile& profile,
                          const EffectCatalog& catalog) {
  double eta = params.intercept;
  for (int r : params.active) eta += params.effects[r] * effect_indicator(profile, catalog.mask_of(r));
  return logistic(eta);
}

std::vector<MonotonicityViolation> check_monotonicity(const ItemParameterSet& params,
                                                      const EffectCatalog& catalog) {
  const int attrs = catalog.attributes();
  const auto profiles = profile_space(attrs);
  const int classes = static_cast<int>(profiles.size());
  Vector prob(classes);
  for (int c = 0; c < classes; ++c) prob[c] = item_response_prob(params, profiles[c], catalog);

  std::vector<MonotonicityViolation> out;
  for (int lo = 0; lo < classes; ++lo)
    for (int hi = 0; hi < classes; ++hi) {
      // "lo's masteries are a subset of hi's" in bitmask terms.
      if ((lo & hi) != lo || lo == hi) continue;
      if (prob[lo] > prob[hi] + kMonotonicityTol)
        out.push_back({lo, hi, prob[lo], prob[hi]});
    }
  return out;
}

}  // namespace dcmmi
