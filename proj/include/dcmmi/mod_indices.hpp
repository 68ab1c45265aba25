#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcmmi/estimation.hpp"
#include "dcmmi/score.hpp"

namespace dcmmi {

enum class CandidateKind { qmatrix, model };

// One parameter proposed for addition.  qmatrix candidates involve an
// attribute the item does not currently measure; model candidates free a
// masked-out effect over attributes it already measures.
struct Candidate {
  CandidateKind kind = CandidateKind::qmatrix;
  int item = 0;
  std::uint32_t attribute_set = 0;
  ScoreConstraint constraint = ScoreConstraint::positive;
  // Singleton sets whose fitted main effects define k for the
  // greater_than_minus_k constraint; absentees contribute 0.
  std::vector<std::uint32_t> k_source;
};

// For each item and each attribute with q = 0: the new main effect plus every
// interaction of that attribute with subsets of the item's measured
// attributes, up to total level max_order.  Item-major order; within an item,
// new attributes ascend and candidate sets follow the catalog order.
std::vector<Candidate> enumerate_qmatrix_candidates(const ModelSpec& spec, int max_order);

// Masked-out effects over measured attributes, up to level max_order.
// Empty for a full-LCDM spec (nothing is masked out).
std::vector<Candidate> enumerate_model_candidates(const ModelSpec& spec, int max_order);

struct ModificationIndex {
  Candidate candidate;
  double t_s = 0.0;
  double p_value = 1.0;
  double s2 = 0.0;
  double k = 0.0;  // boundary offset used by the constraint
  bool boundary_case = false;
  bool significant_raw = false;       // set by apply_multiplicity
  bool significant_adjusted = false;  // set by apply_multiplicity
  bool unavailable = false;
  std::string unavailable_reason;
};

// One-at-a-time score tests for every candidate at the reduced-model fit:
// the candidate's gradient column is appended to the reduced gradient set,
// the outer-product information is partitioned, and the one-sided statistic
// evaluated under the candidate's constraint.  Numerical trouble marks the
// affected candidate unavailable instead of aborting the batch.
std::vector<ModificationIndex> compute_mis(const ModelSpec& spec, const FitResult& fit,
                                           const ResponseMatrix& data,
                                           const std::vector<Candidate>& candidates,
                                           std::vector<std::string>* warnings = nullptr);

struct SuggestedChange {
  Candidate candidate;
  std::string action;
  std::string note;  // hierarchy-principle annotation when applicable
};

struct MIReport {
  std::vector<ModificationIndex> indices;
  double alpha = 0.05;
  int m = 0;                    // Bonferroni divisor actually used
  double adjusted_alpha = 0.0;  // alpha / m
  double critical_value = 0.0;  // statistic threshold at adjusted_alpha
  std::vector<SuggestedChange> suggested_changes;
};

// Bonferroni control: m defaults to the number of available indices and can
// be overridden (e.g. to the count of all potential tests).  Suggested
// changes are ordered by statistic size and never bundle multiple additions;
// a significant interaction whose lower-order mains are not themselves
// significant gets a hierarchy note instead of an unconditional addition.
MIReport apply_multiplicity(std::vector<ModificationIndex> indices, double alpha,
                            std::optional<int> m_override, const ModelSpec& spec);

// "lambda_{<item_id>,<level>,(<attrs>)}" display label for a candidate.
std::string candidate_label(const Candidate& candidate, const ModelSpec& spec);

// Fixed-width text table of the report (label, statistic to two decimals,
// significance stars, availability notes).
std::string render_mi_table(const MIReport& report, const ModelSpec& spec);

}  // namespace dcmmi
