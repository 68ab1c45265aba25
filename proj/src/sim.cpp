#include "dcmmi/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "dcmmi/errors.hpp"

namespace dcmmi {

void SimDesign::validate() const {
  if (items < 1 || attributes < 1 || attributes > kMaxAttributes)
    throw ConfigError("sim design: bad item or attribute count");
  if (!(p_nonmaster > 0.0 && p_nonmaster < 1.0 && p_master > 0.0 && p_master < 1.0))
    throw ConfigError("sim design: endpoint probabilities must lie in (0,1)");
  if (!(p_master > p_nonmaster))
    throw ConfigError("sim design: p_master must exceed p_nonmaster");
  if (examinees < 1 || replications < 1)
    throw ConfigError("sim design: examinees and replications must be positive");
  if (attributes > 1 &&
      !(tetrachoric_rho > -1.0 / (attributes - 1) && tetrachoric_rho < 1.0))
    throw ConfigError("sim design: correlation outside the valid equicorrelation range");
  if (split_rule != "equal-thirds" && split_rule != "mains-equal")
    throw ConfigError("sim design: unknown split rule '" + split_rule + "'");
}

QMatrix simulation_qmatrix(int items) {
  static const std::uint8_t patterns[6][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1},
                                              {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  BinaryMatrix entries(items, 3);
  for (int i = 0; i < items; ++i)
    for (int a = 0; a < 3; ++a) entries(i, a) = patterns[i % 6][a];
  return qmatrix_from_entries(std::move(entries));
}

std::vector<AttributeProfile> gen_attribute_profiles(int examinees, int attributes, double rho,
                                                     Rng& rng) {
  if (attributes < 1) throw ConfigError("gen_attribute_profiles: need at least one attribute");
  if (attributes > 1 && !(rho > -1.0 / (attributes - 1) && rho < 1.0))
    throw ConfigError("gen_attribute_profiles: correlation outside the equicorrelation range");

  Matrix sigma = Matrix::Constant(attributes, attributes, rho);
  sigma.diagonal().setOnes();
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ConfigError("gen_attribute_profiles: correlation matrix not positive definite");
  const Matrix chol = llt.matrixL();

  std::vector<AttributeProfile> out;
  out.reserve(examinees);
  Vector w(attributes);
  for (int e = 0; e < examinees; ++e) {
    for (int a = 0; a < attributes; ++a) w[a] = rng.next_normal();
    const Vector z = chol * w;
    int cls = 0;
    for (int a = 0; a < attributes; ++a)
      if (z[a] > 0.0) cls |= (1 << a);
    out.push_back(profile_from_class(cls, attributes));
  }
  return out;
}

std::vector<AttributeProfile> gen_attribute_profiles(int examinees, int attributes, double rho,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  return gen_attribute_profiles(examinees, attributes, rho, rng);
}

GeneratingItemParams build_item_params(std::uint32_t measured_mask, const EffectCatalog& catalog,
                                       double p_nonmaster, double p_master,
                                       const std::string& split_rule) {
  if (!(p_nonmaster > 0.0 && p_nonmaster < 1.0 && p_master > p_nonmaster && p_master < 1.0))
    throw ConfigError("build_item_params: invalid endpoint probabilities");
  const double intercept = logit(p_nonmaster);
  const double total = logit(p_master) - logit(p_nonmaster);

  std::vector<int> active;
  for (int r = 0; r < catalog.count(); ++r)
    if ((catalog.mask_of(r) & ~measured_mask) == 0) active.push_back(r);

  GeneratingItemParams out;
  out.lcdm = make_item_params(catalog, active);
  out.lcdm.intercept = intercept;
  if (split_rule == "equal-thirds") {
    // Every active set gets an equal share, so full masters land exactly on
    // p_master (T/3 per effect on a two-attribute item).
    const double share = total / static_cast<double>(active.size());
    for (int r : active) out.lcdm.effects[r] = share;
  } else if (split_rule == "mains-equal") {
    int mains = 0;
    for (int r : active)
      if (catalog.level_of(r) == 1) ++mains;
    for (int r : active)
      if (catalog.level_of(r) == 1) out.lcdm.effects[r] = total / mains;
  } else {
    throw ConfigError("build_item_params: unknown split rule '" + split_rule + "'");
  }

  const int top = catalog.rank_of(measured_mask);
  out.dina = make_item_params(catalog, {top});
  out.dina.intercept = intercept;
  out.dina.effects[top] = total;
  return out;
}

ResponseMatrix gen_responses(const std::vector<AttributeProfile>& profiles,
                             const std::vector<ItemParameterSet>& item_params, const QMatrix& q,
                             Rng& rng) {
  const int examinees = static_cast<int>(profiles.size());
  const int items = static_cast<int>(item_params.size());
  if (items != q.items()) throw ConfigError("gen_responses: item count mismatch");
  if (examinees == 0) throw ConfigError("gen_responses: no profiles");

  EffectCatalog catalog(q.attributes());
  const int classes = 1 << q.attributes();
  Matrix pi(items, classes);
  const auto space = profile_space(q.attributes());
  for (int i = 0; i < items; ++i)
    for (int c = 0; c < classes; ++c)
      pi(i, c) = item_response_prob(item_params[i], space[c], catalog);

  ResponseMatrix data;
  data.entries.resize(examinees, items);
  for (int e = 0; e < examinees; ++e) {
    const int cls = profiles[e].class_index;
    for (int i = 0; i < items; ++i)
      data.entries(e, i) = rng.next_bernoulli(pi(i, cls)) ? 1 : 0;
    data.examinee_ids.push_back(std::to_string(e + 1));
  }
  return data;
}

ResponseMatrix gen_responses(const std::vector<AttributeProfile>& profiles,
                             const std::vector<ItemParameterSet>& item_params, const QMatrix& q,
                             std::uint64_t seed) {
  Rng rng(seed);
  return gen_responses(profiles, item_params, q, rng);
}

double StudyCell::mc_se() const {
  if (used <= 0) return 0.0;
  const double p = rate();
  return std::sqrt(p * (1.0 - p) / used);
}

namespace {

struct RepOutcome {
  bool valid = false;
  std::vector<double> statistics;  // per target
};

struct StudyPlan {
  std::string name;
  QMatrix gen_q;
  std::vector<ItemParameterSet> gen_items;
  ModelSpec est_spec;
  std::vector<Candidate> targets;
};

RepOutcome one_replication(const StudyPlan& plan, int examinees, int attributes, double rho,
                           std::uint64_t rep_seed) {
  RepOutcome out;
  try {
    Rng rng(rep_seed);
    const auto profiles = gen_attribute_profiles(examinees, attributes, rho, rng);
    const ResponseMatrix data = gen_responses(profiles, plan.gen_items, plan.gen_q, rng);
    const FitResult fr = fit(plan.est_spec, data);
    if (!fr.converged) return out;
    const auto mis = compute_mis(plan.est_spec, fr, data, plan.targets);
    for (const auto& mi : mis) {
      if (mi.unavailable) return out;
      out.statistics.push_back(mi.t_s);
    }
    out.valid = true;
  } catch (const NumericError&) {
    out.valid = false;
    out.statistics.clear();
  }
  return out;
}

template <typename Fn>
void parallel_reps(int reps, int threads, Fn&& body) {
  if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, reps);
  if (threads <= 1) {
    for (int r = 0; r < reps; ++r) body(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= reps) break;
          body(r);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

// Runs `design.replications` replications at each sample size and fills the
// result cells parameter-major, then the familywise rows, per size.
// Replication r of design point p draws from stream mix(mix(seed, p), r).
StudyResult run_study(const SimDesign& design, const StudyPlan& plan,
                      const std::vector<double>& alphas, const std::vector<int>& sizes) {
  design.validate();
  StudyResult result;
  result.study = plan.name;
  result.effect_size = design.p_master > 0.75 ? "large" : "smaller";
  result.replications = design.replications;
  result.seed = design.seed;

  std::vector<double> criticals;
  criticals.reserve(alphas.size());
  for (double a : alphas) criticals.push_back(mixture_critical_value(a));

  std::vector<std::string> target_labels;
  for (const auto& cand : plan.targets)
    target_labels.push_back(candidate_label(cand, plan.est_spec));

  for (std::size_t point = 0; point < sizes.size(); ++point) {
    const int examinees = sizes[point];
    std::vector<RepOutcome> outcomes(design.replications);
    const std::uint64_t point_seed = Rng::mix(design.seed, static_cast<std::uint64_t>(point));
    parallel_reps(design.replications, design.threads, [&](int r) {
      outcomes[r] = one_replication(plan, examinees, design.attributes,
                                    design.tetrachoric_rho,
                                    Rng::mix(point_seed, static_cast<std::uint64_t>(r)));
    });

    int used = 0;
    Eigen::MatrixXi rejections =
        Eigen::MatrixXi::Zero(static_cast<int>(plan.targets.size()), static_cast<int>(alphas.size()));
    Eigen::VectorXi familywise = Eigen::VectorXi::Zero(static_cast<int>(alphas.size()));
    for (const RepOutcome& rep : outcomes) {
      if (!rep.valid) continue;
      ++used;
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        bool any = false;
        for (std::size_t t = 0; t < plan.targets.size(); ++t) {
          const bool reject = rep.statistics[t] > criticals[a];
          if (reject) ++rejections(static_cast<int>(t), static_cast<int>(a));
          any = any || reject;
        }
        if (any) ++familywise[static_cast<int>(a)];
      }
      for (double t : rep.statistics) {
        ++result.total_statistics;
        if (t == 0.0) ++result.zero_statistics;
      }
    }
    result.excluded += design.replications - used;

    for (std::size_t t = 0; t < plan.targets.size(); ++t)
      for (std::size_t a = 0; a < alphas.size(); ++a)
        result.cells.push_back({target_labels[t], examinees, alphas[a],
                                rejections(static_cast<int>(t), static_cast<int>(a)), used});
    for (std::size_t a = 0; a < alphas.size(); ++a)
      result.cells.push_back(
          {"familywise", examinees, alphas[a], familywise[static_cast<int>(a)], used});
  }

  result.flagged =
      result.excluded >
      0.02 * static_cast<double>(design.replications) * static_cast<double>(sizes.size());
  return result;
}

std::vector<ItemParameterSet> generating_items(const QMatrix& q, const EffectCatalog& catalog,
                                               const SimDesign& design, bool dina) {
  std::vector<ItemParameterSet> out;
  out.reserve(q.items());
  for (int i = 0; i < q.items(); ++i) {
    GeneratingItemParams gp = build_item_params(q.row_mask(i), catalog, design.p_nonmaster,
                                                design.p_master, design.split_rule);
    out.push_back(dina ? std::move(gp.dina) : std::move(gp.lcdm));
  }
  return out;
}

std::vector<Candidate> pick_candidates(const std::vector<Candidate>& all, int item,
                                       const std::vector<std::uint32_t>& sets) {
  std::vector<Candidate> out;
  for (std::uint32_t set : sets)
    for (const Candidate& c : all)
      if (c.item == item && c.attribute_set == set) out.push_back(c);
  return out;
}

}  // namespace

StudyResult run_type1_q_study(const SimDesign& design, const std::vector<double>& alphas) {
  StudyPlan plan;
  plan.name = "type1-q";
  plan.gen_q = simulation_qmatrix(design.items);
  plan.est_spec = ModelSpec::make(plan.gen_q, ModelKind::lcdm_full);
  plan.gen_items = generating_items(plan.gen_q, plan.est_spec.catalog, design, false);
  // Adding attribute 2 to item 1: the main effect and the 1x2 interaction.
  plan.targets = pick_candidates(enumerate_qmatrix_candidates(plan.est_spec, 2), 0,
                                 {0b010u, 0b011u});
  return run_study(design, plan, alphas, {design.examinees});
}

StudyResult run_power_q_study(const SimDesign& design, const std::vector<double>& alphas,
                              const std::vector<int>& sample_sizes) {
  StudyPlan plan;
  plan.name = "power-q";
  plan.gen_q = simulation_qmatrix(design.items);

  QMatrix est_q = plan.gen_q;
  est_q.entries(3, 1) = 0;  // item 4 loses attribute 2 in the estimated model
  est_q.validate();
  plan.est_spec = ModelSpec::make(est_q, ModelKind::lcdm_full);
  plan.gen_items = generating_items(plan.gen_q, plan.est_spec.catalog, design, false);
  plan.targets = pick_candidates(enumerate_qmatrix_candidates(plan.est_spec, 2), 3,
                                 {0b010u, 0b011u});
  return run_study(design, plan, alphas,
                   sample_sizes.empty() ? std::vector<int>{design.examinees} : sample_sizes);
}

StudyResult run_type1_dina_study(const SimDesign& design, const std::vector<double>& alphas) {
  StudyPlan plan;
  plan.name = "type1-dina";
  plan.gen_q = simulation_qmatrix(design.items);
  plan.est_spec = ModelSpec::make(plan.gen_q, ModelKind::dina);
  plan.gen_items = generating_items(plan.gen_q, plan.est_spec.catalog, design, true);
  // The two omitted mains of item 4.
  plan.targets = pick_candidates(enumerate_model_candidates(plan.est_spec, 2), 3,
                                 {0b001u, 0b010u});
  return run_study(design, plan, alphas, {design.examinees});
}

StudyResult run_power_dina_study(const SimDesign& design, const std::vector<double>& alphas,
                                 const std::vector<int>& sample_sizes) {
  StudyPlan plan;
  plan.name = "power-dina";
  plan.gen_q = simulation_qmatrix(design.items);

  // Estimated model: full LCDM everywhere except item 4, which is collapsed
  // to its DINA form (intercept + top interaction only).
  EffectCatalog catalog(plan.gen_q.attributes());
  std::vector<std::vector<int>> masks;
  for (int i = 0; i < plan.gen_q.items(); ++i) {
    std::vector<int> mask;
    const std::uint32_t measured = plan.gen_q.row_mask(i);
    if (i == 3) {
      mask.push_back(catalog.rank_of(measured));
    } else {
      for (int r = 0; r < catalog.count(); ++r)
        if ((catalog.mask_of(r) & ~measured) == 0) mask.push_back(r);
    }
    masks.push_back(std::move(mask));
  }
  plan.est_spec = ModelSpec::make_custom(plan.gen_q, std::move(masks));
  plan.gen_items = generating_items(plan.gen_q, plan.est_spec.catalog, design, false);
  plan.targets = pick_candidates(enumerate_model_candidates(plan.est_spec, 2), 3,
                                 {0b001u, 0b010u});
  return run_study(design, plan, alphas,
                   sample_sizes.empty() ? std::vector<int>{design.examinees} : sample_sizes);
}

std::string study_csv(const StudyResult& result) {
  std::string out =
      "study,effect_size,parameter,examinees,alpha,rejections,replications,rate,mc_se,excluded\n";
  char buf[256];
  for (const StudyCell& cell : result.cells) {
    const int excluded_here = result.replications - cell.used;
    std::snprintf(buf, sizeof(buf), "%s,%s,\"%s\",%d,%.6g,%d,%d,%.6f,%.6f,%d\n",
                  result.study.c_str(), result.effect_size.c_str(), cell.parameter.c_str(),
                  cell.examinees, cell.alpha, cell.rejections, cell.used, cell.rate(),
                  cell.mc_se(), excluded_here);
    out += buf;
  }
  return out;
}

namespace {

// Nodes and weights for n-point Gauss-Legendre on [-1, 1].
void gauss_legendre(int n, std::vector<double>* nodes, std::vector<double>* weights) {
  nodes->assign(n, 0.0);
  weights->assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    (*nodes)[i] = -x;
    (*nodes)[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    (*weights)[i] = w;
    (*weights)[n - 1 - i] = w;
  }
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw ConfigError("bivariate_normal_cdf: correlation outside [-1, 1]");
  if (1.0 - rho * rho < 1e-12)
    return rho > 0.0 ? normal_cdf(std::min(h, k))
                     : std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);

  const double lo = -8.5;
  const double hi = std::min(h, 8.5);
  if (hi <= lo) return 0.0;

  static const auto tables = [] {
    std::vector<double> n, w;
    gauss_legendre(64, &n, &w);
    return std::make_pair(std::move(n), std::move(w));
  }();
  const std::vector<double>& nodes = tables.first;
  const std::vector<double>& weights = tables.second;

  // P(X <= h, Y <= k) = integral over x <= h of phi(x) Phi((k - rho x)/s).
  // As |rho| -> 1 the Phi factor switches between 0 and 1 inside a window of
  // width O(s) around x = k/rho, too sharp for one fixed-order panel; cutting
  // the range at that window keeps every panel smooth at any correlation.
  const double s = std::sqrt(1.0 - rho * rho);
  std::vector<double> cuts{lo, hi};
  if (rho != 0.0) {
    const double center = k / rho;
    const double window = 20.0 * s;  // Phi saturates beyond 20 standard units
    for (double c : {center - window, center + window})
      if (c > lo && c < hi) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
  }

  double total = 0.0;
  for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
    const double mid = 0.5 * (cuts[seg] + cuts[seg + 1]);
    const double halfwidth = 0.5 * (cuts[seg + 1] - cuts[seg]);
    double part = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double x = mid + halfwidth * nodes[j];
      part += weights[j] * normal_pdf(x) * normal_cdf((k - rho * x) / s);
    }
    total += part * halfwidth;
  }
  return std::clamp(total, 0.0, 1.0);
}

double tetrachoric_correlation(double n00, double n01, double n10, double n11) {
  const double total = n00 + n01 + n10 + n11;
  if (n00 < 0 || n01 < 0 || n10 < 0 || n11 < 0 || total <= 0)
    throw ConfigError("tetrachoric_correlation: invalid table");
  const double p_x0 = (n00 + n01) / total;
  const double p_y0 = (n00 + n10) / total;
  if (p_x0 <= 0.0 || p_x0 >= 1.0 || p_y0 <= 0.0 || p_y0 >= 1.0)
    throw ConfigError("tetrachoric_correlation: degenerate margin");

  const double tau_x = normal_quantile(p_x0);
  const double tau_y = normal_quantile(p_y0);
  const double target = n00 / total;  // P(X <= tau_x, Y <= tau_y)

  double lo = -0.9999, hi = 0.9999;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (bivariate_normal_cdf(tau_x, tau_y, mid) < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace dcmmi
