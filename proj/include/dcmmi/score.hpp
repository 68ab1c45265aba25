#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcmmi/estimation.hpp"
#include "dcmmi/model.hpp"

namespace dcmmi {

// Per-examinee gradient contributions for a set of parameters, plus their
// fixed-order column sums.  Rows follow the data; columns follow the
// canonical free-parameter order with any candidate columns appended last.
struct GradientSet {
  Matrix per_examinee;  // examinees x p
  Vector totals;
};

namespace detail {

// Gradient columns for every free parameter of the reduced model, in
// canonical pack order.  y_double is the response matrix cast to double.
Matrix reduced_gradient_matrix(const ModelSpec& spec, const ModelTables& tables,
                               const LikelihoodParts& parts, const Matrix& y_double);

// Gradient column for one item coefficient (attribute_set == 0 means the
// intercept), evaluated with the coefficient fixed at its current value (0
// for candidates).  Each entry is the posterior-weighted residual
// sum_c P(c|y_e) * h_c * (y_ei - pi_ic).
Vector item_gradient_column(const ModelTables& tables, const LikelihoodParts& parts,
                            const Matrix& y_double, int item, std::uint32_t attribute_set);

// Gradient column for one structural coefficient: posterior-minus-prior
// expectation of the log-linear design entry for attribute_set.
Vector structural_gradient_column(const ModelTables& tables, const LikelihoodParts& parts,
                                  std::uint32_t attribute_set);

}  // namespace detail

// Public forms evaluated at a fit's parameter estimates.
GradientSet score_gradients(const ModelSpec& spec, const FitResult& fit,
                            const ResponseMatrix& data);
GradientSet item_gradient(const ModelSpec& spec, const FitResult& fit,
                          const ResponseMatrix& data, const EffectIndex& target);
GradientSet structural_gradient(const ModelSpec& spec, const FitResult& fit,
                                const ResponseMatrix& data, std::uint32_t attribute_set);

// Sum over examinees of g_e g_e^T (outer-product empirical information).
Matrix empirical_info(const Eigen::Ref<const Matrix>& per_examinee);

// Effective inverse block for the trailing `candidates` rows of an
// information matrix: (I22 - I12^T I11^{-1} I12)^{-1}.
struct InfoBlockResult {
  Matrix inverse_block;
  bool available = false;
  bool ridged = false;  // I11 needed ridge regularization
};

// Caches the I11 factorization so a batch of single-candidate blocks can be
// extracted cheaply.  reduced_info is I11; the condition/ridge policy is
// applied once at construction.
class PartitionedInfo {
 public:
  explicit PartitionedInfo(Matrix reduced_info);
  bool ridged() const { return ridged_; }
  // i12: cross block (p1 x q); i22: candidate block (q x q).
  InfoBlockResult tail_inverse(const Eigen::Ref<const Matrix>& i12,
                               const Eigen::Ref<const Matrix>& i22) const;

 private:
  Matrix i11_;
  Eigen::LDLT<Matrix> solver_;
  bool ridged_ = false;
  bool usable_ = false;
};

InfoBlockResult info_block_22(const Eigen::Ref<const Matrix>& info, int candidates);

// Two-sided score statistic s2^T I22_inverse s2.
double score_statistic(const Eigen::Ref<const Vector>& s2,
                       const Eigen::Ref<const Matrix>& i22_inverse);

enum class ScoreConstraint { positive, greater_than_minus_k };

struct OneSidedScoreResult {
  double t_s = 0.0;
  double s2 = 0.0;
  double i22 = 0.0;  // effective inverse-information scalar
  double p_value = 1.0;
  bool boundary_case = false;
};

// Scalar one-sided score statistic.  With the positive constraint the
// statistic is truncated to 0 unless s2 > 0.  With greater_than_minus_k the
// one-step estimate i22_effective*s2 is compared against -k; below the
// boundary the statistic loses the squared standardized distance to the
// boundary and is floored at 0.  k must be >= 0.
OneSidedScoreResult one_sided_score(double s2, double i22_effective,
                                    ScoreConstraint constraint, double k = 0.0);

// Reference distribution: equal mixture of a point mass at zero and
// chi-square(1).  p = 1 at t = 0, else half the chi-square(1) upper tail.
double mixture_pvalue(double t);

// Threshold c with half the chi-square(1) mass above c equal to alpha;
// alpha >= 0.5 yields 0 (the whole continuous branch is below alpha).
double mixture_critical_value(double alpha);

}  // namespace dcmmi
