// Shared fixtures: random small model instances for oracle comparisons.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcmmi/estimation.hpp"
#include "dcmmi/model.hpp"
#include "dcmmi/rng.hpp"

namespace dcmmi_test {

struct TestInstance {
  dcmmi::ModelSpec spec;
  dcmmi::ParameterSet params;
  dcmmi::ResponseMatrix data;
};

// A valid random spec (every attribute measured, every item nonempty) with
// arbitrary coefficients and Bernoulli(1/2) responses.  Coefficients are not
// a stationary point of anything, which is exactly what derivative oracles
// want.
inline TestInstance make_random_instance(dcmmi::Rng& rng, int max_attrs = 3, int max_items = 10,
                                         int max_examinees = 50) {
  using namespace dcmmi;
  const int attrs = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_attrs));
  const int extra =
      static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_items - attrs + 1));
  const int items = attrs + extra;

  BinaryMatrix entries = BinaryMatrix::Zero(items, attrs);
  for (int i = 0; i < items; ++i) {
    std::uint32_t mask;
    if (i < attrs) {
      mask = 1u << i;  // guarantees every attribute is measured
    } else {
      mask = 1u + static_cast<std::uint32_t>(rng.next_u64() % ((1u << attrs) - 1u));
    }
    for (int a = 0; a < attrs; ++a) entries(i, a) = (mask >> a) & 1u;
  }
  QMatrix q = qmatrix_from_entries(std::move(entries));

  const int kind_pick = static_cast<int>(rng.next_u64() % 3u);
  const ModelKind kind = kind_pick == 0   ? ModelKind::lcdm_full
                         : kind_pick == 1 ? ModelKind::dina
                                          : ModelKind::main_effects_only;
  const int structural_order = (rng.next_u64() % 2u) ? -1 : 1;

  TestInstance inst;
  inst.spec = ModelSpec::make(std::move(q), kind, structural_order);

  for (int i = 0; i < items; ++i) {
    ItemParameterSet p = make_item_params(inst.spec.catalog, inst.spec.masks[i]);
    p.intercept = rng.next_uniform(-1.5, -0.5);
    for (int r : p.active) {
      p.effects[r] = inst.spec.catalog.level_of(r) == 1 ? rng.next_uniform(0.5, 2.0)
                                                        : rng.next_uniform(-0.3, 0.8);
    }
    inst.params.items.push_back(std::move(p));
  }
  ModelTables tables = ModelTables::build(inst.spec);
  inst.params.structural.coefficients =
      Vector::NullaryExpr(tables.structural_design.cols(),
                          [&](Eigen::Index) { return rng.next_uniform(-0.4, 0.4); });
  refresh_class_probs(tables, &inst.params.structural);

  const int examinees =
      20 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_examinees - 19));
  inst.data.entries.resize(examinees, items);
  for (int e = 0; e < examinees; ++e) {
    for (int i = 0; i < items; ++i) {
      inst.data.entries(e, i) = rng.next_bernoulli(0.5) ? 1 : 0;
    }
    inst.data.examinee_ids.push_back(std::to_string(e + 1));
  }
  return inst;
}

// Direct mixture likelihood by full class enumeration in linear space.
inline double brute_force_loglik(const dcmmi::ModelSpec& spec, const dcmmi::ParameterSet& params,
                                 const dcmmi::ResponseMatrix& data) {
  using namespace dcmmi;
  const auto profiles = profile_space(spec.attributes());
  const int classes = spec.classes();
  double total = 0.0;
  for (int e = 0; e < data.examinees(); ++e) {
    double marginal = 0.0;
    for (int c = 0; c < classes; ++c) {
      double lik = params.structural.class_probs[c];
      for (int i = 0; i < spec.items(); ++i) {
        const double pi = item_response_prob(params.items[static_cast<std::size_t>(i)],
                                             profiles[static_cast<std::size_t>(c)], spec.catalog);
        lik *= data.entries(e, i) ? pi : 1.0 - pi;
      }
      marginal += lik;
    }
    total += std::log(marginal);
  }
  return total;
}

}  // namespace dcmmi_test
