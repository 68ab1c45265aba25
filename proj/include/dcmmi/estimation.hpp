#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcmmi/model.hpp"

namespace dcmmi {

// Dichotomous response data, examinees x items.
struct ResponseMatrix {
  BinaryMatrix entries;
  std::vector<std::string> examinee_ids;  // 1-based row numbers when absent in the source

  int examinees() const { return static_cast<int>(entries.rows()); }
  int items() const { return static_cast<int>(entries.cols()); }

  // Throws FormatError on shape mismatch or non-binary cells.
  void validate(int expected_items) const;
};

// Log-linear coefficients for class membership plus the probabilities they
// induce.  class_probs is always the normalized exp of the structural design
// times coefficients, so it sums to one by construction.
struct StructuralParameterSet {
  Vector coefficients;  // canonical subsets of size <= structural_order
  Vector class_probs;
};

struct ParameterSet {
  std::vector<ItemParameterSet> items;
  StructuralParameterSet structural;
};

// Class-level design tables used by both estimation and scoring.
struct ModelTables {
  Matrix profile_bits;               // classes x attributes
  std::vector<Matrix> item_design;   // per item: classes x (1 + #active)
  Matrix structural_design;          // classes x #structural coefficients
  std::vector<int> structural_ranks; // catalog ranks of the structural columns

  static ModelTables build(const ModelSpec& spec);
};

// Canonical free-parameter vectorization: per item (ascending) the intercept
// then active effects in rank order, then the structural coefficients.
int free_parameter_count(const ModelSpec& spec);
Vector pack_parameters(const ModelSpec& spec, const ParameterSet& params);
ParameterSet unpack_parameters(const ModelSpec& spec, const Eigen::Ref<const Vector>& packed);
std::vector<std::string> parameter_labels(const ModelSpec& spec);

// Recompute class_probs from coefficients.
void refresh_class_probs(const ModelTables& tables, StructuralParameterSet* structural);

// Everything the E-step produces; item_probs are the class-conditional
// success probabilities with their stable log forms.
struct LikelihoodParts {
  double loglik = 0.0;
  Matrix posteriors;      // examinees x classes
  Matrix item_probs;      // items x classes
  Matrix log_probs;       // log pi
  Matrix log_comp_probs;  // log (1 - pi)
  Vector class_probs;
};

double log_likelihood(const ModelSpec& spec, const ParameterSet& params,
                      const ResponseMatrix& data);

// Posterior class memberships and the marginal log-likelihood.
// Throws NumericError (with examinee index) if any row has zero likelihood.
LikelihoodParts e_step(const ModelSpec& spec, const ParameterSet& params,
                       const ResponseMatrix& data);

// Weighted logistic Newton update for one item.  correct/incorrect are the
// expected per-class counts of 1s and 0s.  Damped by step-halving; stops at
// gradient max-norm 1e-8 or 50 iterations; coefficients clamped to
// kCoefBound with a warning.
ItemParameterSet m_step_item(const ModelSpec& spec, int item, const Vector& correct,
                             const Vector& incorrect, const ItemParameterSet& current,
                             std::vector<std::string>* warnings = nullptr);

// Structural update from expected class counts.  Saturated order solves in
// closed form (probabilities proportional to counts, coefficients recovered
// by log contrasts against the all-zero class); lower orders run the same
// damped Newton as the item step.
StructuralParameterSet m_step_structural(const ModelSpec& spec, const Vector& expected_counts,
                                         const StructuralParameterSet& current,
                                         std::vector<std::string>* warnings = nullptr);

struct FitConfig {
  int max_iterations = 2000;
  double tol_absolute = 1e-7;
  double tol_relative = 1e-9;
  // Random restarts jitter the default start by uniform(-0.5, 0.5); the best
  // final loglik wins.  0 keeps the deterministic default start.
  int random_restarts = 0;
  std::uint64_t seed = 0;
  // After EM stalls on loglik changes, a gradient-based polish pass drives
  // the total score to polish_tol max-norm so score tests see a true
  // stationary point.
  bool polish = true;
  double polish_tol = 1e-5;
  int polish_max_iterations = 300;
  std::optional<ParameterSet> initial;  // overrides the default start
};

struct FitResult {
  ParameterSet params;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double score_max_norm = 0.0;  // total-score max-norm at the returned estimates
  std::vector<double> loglik_trace;
  Matrix posteriors;
  std::vector<std::string> warnings;
};

// EM (e_step + per-item and structural M-steps) to loglik stationarity, then
// the polish pass.  Non-convergence is reported through converged=false, not
// an exception.
FitResult fit(const ModelSpec& spec, const ResponseMatrix& data, const FitConfig& config = {});

// Posterior-mode class per examinee; ties broken by lowest class index.
std::vector<AttributeProfile> classify(const FitResult& fit);

struct LrTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<std::string> warnings;
};

// 2 * (loglik_full - loglik_reduced) against the chi-square(df) upper tail.
// Negative statistics are floored at zero; below -1e-6 draws an
// optimization-quality warning.  Nesting is the caller's responsibility.
LrTestResult lr_test(const FitResult& fit_full, const FitResult& fit_reduced, int df);

double aic(double loglik, int parameter_count);
double bic(double loglik, int parameter_count, int examinees);

}  // namespace dcmmi
