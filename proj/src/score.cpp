#include "dcmmi/score.hpp"

#include <cmath>
#include <limits>

#include "dcmmi/errors.hpp"
#include "dcmmi/numerics.hpp"

namespace dcmmi {

namespace detail {

namespace {

// Indicator column over classes for an attribute set (all attributes in the
// set mastered).  attribute_set == 0 gives the all-ones intercept column.
Vector class_indicator(const ModelTables& tables, std::uint32_t attribute_set) {
  const int classes = static_cast<int>(tables.profile_bits.rows());
  Vector h = Vector::Ones(classes);
  for (int a = 0; a < tables.profile_bits.cols(); ++a)
    if (attribute_set & (1u << a))
      h = h.cwiseProduct(tables.profile_bits.col(a));
  return h;
}

}  // namespace

Vector item_gradient_column(const ModelTables& tables, const LikelihoodParts& parts,
                            const Matrix& y_double, int item, std::uint32_t attribute_set) {
  const Vector h = class_indicator(tables, attribute_set);
  const Vector pi_row = parts.item_probs.row(item).transpose();
  // sum_c P(c|y_e) h_c (y_ei - pi_ic) = y_ei (P h)_e - (P (h .* pi_i))_e
  Vector ph = parts.posteriors * h;
  Vector phpi = parts.posteriors * h.cwiseProduct(pi_row);
  return y_double.col(item).cwiseProduct(ph) - phpi;
}

Vector structural_gradient_column(const ModelTables& tables, const LikelihoodParts& parts,
                                  std::uint32_t attribute_set) {
  const Vector x = class_indicator(tables, attribute_set);
  Vector post = parts.posteriors * x;
  post.array() -= parts.class_probs.dot(x);
  return post;
}

Matrix reduced_gradient_matrix(const ModelSpec& spec, const ModelTables& tables,
                               const LikelihoodParts& parts, const Matrix& y_double) {
  const int examinees = static_cast<int>(y_double.rows());
  const int classes = spec.classes();
  Matrix g(examinees, free_parameter_count(spec));

  int at = 0;
  Matrix resid(examinees, classes);
  for (int i = 0; i < spec.items(); ++i) {
    // Per-examinee, per-class posterior-weighted residuals for item i, then
    // one product with the item design gives all of the item's columns.
    resid = y_double.col(i).replicate(1, classes);
    resid.rowwise() -= parts.item_probs.row(i);
    resid = resid.cwiseProduct(parts.posteriors);
    const int cols = static_cast<int>(tables.item_design[i].cols());
    g.middleCols(at, cols) = resid * tables.item_design[i];
    at += cols;
  }

  const int s_cols = static_cast<int>(tables.structural_design.cols());
  g.middleCols(at, s_cols) = parts.posteriors * tables.structural_design;
  g.middleCols(at, s_cols).rowwise() -=
      parts.class_probs.transpose() * tables.structural_design;
  return g;
}

}  // namespace detail

namespace {

void check_finite(const Matrix& g, const ResponseMatrix& data) {
  for (int e = 0; e < g.rows(); ++e)
    if (!g.row(e).allFinite())
      throw NumericError("non-finite gradient contribution for examinee " +
                         (e < static_cast<int>(data.examinee_ids.size())
                              ? data.examinee_ids[e]
                              : std::to_string(e + 1)));
}

GradientSet wrap(Matrix per_examinee, const ResponseMatrix& data) {
  check_finite(per_examinee, data);
  GradientSet s;
  s.totals = per_examinee.colwise().sum().transpose();
  s.per_examinee = std::move(per_examinee);
  return s;
}

}  // namespace

GradientSet score_gradients(const ModelSpec& spec, const FitResult& fit,
                            const ResponseMatrix& data) {
  ModelTables tables = ModelTables::build(spec);
  LikelihoodParts parts = e_step(spec, fit.params, data);
  Matrix y = data.entries.cast<double>();
  return wrap(detail::reduced_gradient_matrix(spec, tables, parts, y), data);
}

GradientSet item_gradient(const ModelSpec& spec, const FitResult& fit,
                          const ResponseMatrix& data, const EffectIndex& target) {
  ModelTables tables = ModelTables::build(spec);
  LikelihoodParts parts = e_step(spec, fit.params, data);
  Matrix y = data.entries.cast<double>();
  return wrap(detail::item_gradient_column(tables, parts, y, target.item, target.attribute_set),
              data);
}

GradientSet structural_gradient(const ModelSpec& spec, const FitResult& fit,
                                const ResponseMatrix& data, std::uint32_t attribute_set) {
  ModelTables tables = ModelTables::build(spec);
  LikelihoodParts parts = e_step(spec, fit.params, data);
  return wrap(detail::structural_gradient_column(tables, parts, attribute_set), data);
}

Matrix empirical_info(const Eigen::Ref<const Matrix>& per_examinee) {
  return per_examinee.transpose() * per_examinee;
}

PartitionedInfo::PartitionedInfo(Matrix reduced_info) : i11_(std::move(reduced_info)) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(i11_, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  const double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) {
    i11_.diagonal().array() += 1e-8 * i11_.trace() / i11_.rows();
    ridged_ = true;
  }
  solver_.compute(i11_);
  usable_ = solver_.info() == Eigen::Success;
}

InfoBlockResult PartitionedInfo::tail_inverse(const Eigen::Ref<const Matrix>& i12,
                                              const Eigen::Ref<const Matrix>& i22) const {
  InfoBlockResult r;
  r.ridged = ridged_;
  if (!usable_) return r;
  Matrix schur = i22 - i12.transpose() * solver_.solve(i12);
  // Guard with eigenvalues rather than a determinant so the q > 1 case is
  // covered uniformly.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(schur, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12) return r;
  r.inverse_block = schur.inverse();
  r.available = true;
  return r;
}

InfoBlockResult info_block_22(const Eigen::Ref<const Matrix>& info, int candidates) {
  const int p = static_cast<int>(info.rows());
  if (candidates < 1 || candidates >= p)
    throw ConfigError("info_block_22: candidate count must lie in [1, p-1]");
  const int p1 = p - candidates;
  PartitionedInfo part(info.topLeftCorner(p1, p1));
  return part.tail_inverse(info.topRightCorner(p1, candidates),
                           info.bottomRightCorner(candidates, candidates));
}

double score_statistic(const Eigen::Ref<const Vector>& s2,
                       const Eigen::Ref<const Matrix>& i22_inverse) {
  const double t = s2.dot(i22_inverse * s2);
  return t > 0.0 ? t : 0.0;
}

OneSidedScoreResult one_sided_score(double s2, double i22_effective, ScoreConstraint constraint,
                                    double k) {
  if (k < 0.0) throw ConfigError("one_sided_score: k must be >= 0");
  if (i22_effective <= 0.0)
    throw NumericError("one_sided_score: non-positive effective inverse information");

  OneSidedScoreResult r;
  r.s2 = s2;
  r.i22 = i22_effective;
  const double two_sided = s2 * s2 * i22_effective;

  if (constraint == ScoreConstraint::positive) {
    r.t_s = s2 > 0.0 ? two_sided : 0.0;
  } else {
    // One Newton step from 0 estimates the candidate as i22_effective * s2;
    // inside the region (> -k) the constraint does not bind.  Outside, the
    // constrained maximum sits on the boundary and the statistic drops by
    // the squared standardized distance to it.  The excess is written so
    // that k = 0 cancels the two-sided term exactly, reproducing the
    // positive constraint bit for bit.
    const double one_step = i22_effective * s2;
    if (one_step > -k) {
      r.t_s = two_sided;
    } else {
      const double shifted = s2 + k / i22_effective;
      const double excess = shifted * shifted * i22_effective;
      r.t_s = std::max(0.0, two_sided - excess);
    }
  }
  r.boundary_case = r.t_s == 0.0;
  r.p_value = mixture_pvalue(r.t_s);
  return r;
}

double mixture_pvalue(double t) {
  if (t < 0.0) throw ConfigError("mixture_pvalue: statistic must be >= 0");
  if (t == 0.0) return 1.0;
  return 0.5 * chi2_upper_tail(t, 1.0);
}

double mixture_critical_value(double alpha) {
  if (alpha <= 0.0) throw ConfigError("mixture_critical_value: alpha must be positive");
  if (alpha >= 0.5) return 0.0;  // the whole continuous branch lies above alpha
  return chi2_quantile_1df(2.0 * alpha);
}

}  // namespace dcmmi
