#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcmmi/estimation.hpp"
#include "dcmmi/mod_indices.hpp"
#include "dcmmi/rng.hpp"

namespace dcmmi {

// Study configuration: 30 items over 3 attributes with the cyclic balanced
// Q-matrix, equicorrelated latent normals thresholded at zero for mastery,
// and endpoint response probabilities p_nonmaster / p_master.
struct SimDesign {
  int items = 30;
  int attributes = 3;
  double tetrachoric_rho = 0.455;
  double p_nonmaster = 0.18;
  double p_master = 0.62;  // 0.92 for the large effect size
  int examinees = 2500;
  int replications = 500;
  std::uint64_t seed = 1;
  std::string split_rule = "equal-thirds";
  int threads = 1;  // 0 = all hardware threads

  void validate() const;
};

// The balanced design: patterns 100, 010, 001, 110, 101, 011 cycling down
// the items (so item 1 measures attribute 1 alone, item 4 attributes 1+2).
QMatrix simulation_qmatrix(int items = 30);

// Mastery profiles from thresholded equicorrelated normals.  With thresholds
// at zero the latent correlation is exactly the tetrachoric correlation.
// rho must lie in (-1/(attributes-1), 1).  One profile per examinee; the
// normals are drawn examinee-major, attribute-minor.
std::vector<AttributeProfile> gen_attribute_profiles(int examinees, int attributes, double rho,
                                                     Rng& rng);
std::vector<AttributeProfile> gen_attribute_profiles(int examinees, int attributes, double rho,
                                                     std::uint64_t seed);

// Generating coefficients for one item: intercept at logit(p_nonmaster) and
// total effect T = logit(p_master) - logit(p_nonmaster) distributed over the
// active sets.  split_rule "equal-thirds" spreads T evenly over all effects
// of the saturated item model (T/3 per effect on a two-attribute item);
// "mains-equal" puts T/m on each main effect and zero on interactions.  The
// DINA counterpart is intercept plus the top interaction at T.
struct GeneratingItemParams {
  ItemParameterSet lcdm;
  ItemParameterSet dina;
};
GeneratingItemParams build_item_params(std::uint32_t measured_mask, const EffectCatalog& catalog,
                                       double p_nonmaster, double p_master,
                                       const std::string& split_rule);

// Bernoulli responses, examinee-major then item-minor draw order.
ResponseMatrix gen_responses(const std::vector<AttributeProfile>& profiles,
                             const std::vector<ItemParameterSet>& item_params, const QMatrix& q,
                             Rng& rng);
ResponseMatrix gen_responses(const std::vector<AttributeProfile>& profiles,
                             const std::vector<ItemParameterSet>& item_params, const QMatrix& q,
                             std::uint64_t seed);

struct StudyCell {
  std::string parameter;  // candidate label, or "familywise"
  int examinees = 0;
  double alpha = 0.0;
  int rejections = 0;
  int used = 0;  // converged replications (the rate denominator)

  double rate() const { return used > 0 ? static_cast<double>(rejections) / used : 0.0; }
  double mc_se() const;
};

struct StudyResult {
  std::string study;
  std::string effect_size;  // "large" or "smaller"
  std::vector<StudyCell> cells;
  int replications = 0;  // requested per design point
  int excluded = 0;      // non-converged replications across all points
  bool flagged = false;  // exclusion rate above 2%
  std::uint64_t seed = 0;
  // Boundary bookkeeping: how many computed statistics were exactly zero.
  long zero_statistics = 0;
  long total_statistics = 0;
};

// Correctly specified model on its own data; indices for adding attribute 2
// to item 1 (the main effect and the two-way interaction).
StudyResult run_type1_q_study(const SimDesign& design, const std::vector<double>& alphas);

// Item 4 generated with attributes 1+2 but estimated measuring attribute 1
// only; detection rates for the omitted main and interaction per sample size.
StudyResult run_power_q_study(const SimDesign& design, const std::vector<double>& alphas,
                              const std::vector<int>& sample_sizes);

// DINA generates and DINA is estimated; indices for the two mains of item 4.
StudyResult run_type1_dina_study(const SimDesign& design, const std::vector<double>& alphas);

// Full-model data with item 4 estimated as DINA; indices for its two mains.
StudyResult run_power_dina_study(const SimDesign& design, const std::vector<double>& alphas,
                                 const std::vector<int>& sample_sizes);

// CSV rows: study,effect_size,parameter,examinees,alpha,rejections,
// replications,rate,mc_se,excluded.  Byte-stable for a fixed seed.
std::string study_csv(const StudyResult& result);

// Verification oracle: P(X <= h, Y <= k) for standard bivariate normals with
// correlation rho, by quadrature; and the tetrachoric correlation implied by
// a 2x2 table of counts, solved by bisection with thresholds at the observed
// margins.
double bivariate_normal_cdf(double h, double k, double rho);
double tetrachoric_correlation(double n00, double n01, double n10, double n11);

}  // namespace dcmmi
