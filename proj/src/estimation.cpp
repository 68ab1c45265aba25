#include "dcmmi/estimation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

#include "dcmmi/errors.hpp"
#include "dcmmi/rng.hpp"
#include "dcmmi/score.hpp"

namespace dcmmi {

void ResponseMatrix::validate(int expected_items) const {
  if (examinees() == 0) throw FormatError("response matrix: no examinees");
  if (items() != expected_items)
    throw FormatError("response matrix: " + std::to_string(items()) +
                      " item columns, model expects " + std::to_string(expected_items));
  for (int e = 0; e < examinees(); ++e)
    for (int i = 0; i < items(); ++i)
      if (entries(e, i) > 1)
        throw FormatError("response matrix: non-binary cell in row " + std::to_string(e + 1));
}

ModelTables ModelTables::build(const ModelSpec& spec) {
  ModelTables t;
  const auto profiles = profile_space(spec.attributes());
  const int classes = spec.classes();

  t.profile_bits.resize(classes, spec.attributes());
  for (int c = 0; c < classes; ++c)
    for (int a = 0; a < spec.attributes(); ++a) t.profile_bits(c, a) = profiles[c].bits[a];

  t.item_design.reserve(spec.items());
  for (int i = 0; i < spec.items(); ++i) {
    const std::vector<int>& mask = spec.masks[i];
    Matrix h(classes, 1 + mask.size());
    for (int c = 0; c < classes; ++c) {
      h(c, 0) = 1.0;
      for (std::size_t j = 0; j < mask.size(); ++j)
        h(c, 1 + j) = effect_indicator(profiles[c], spec.catalog.mask_of(mask[j]));
    }
    t.item_design.push_back(std::move(h));
  }

  for (int r = 0; r < spec.catalog.count(); ++r)
    if (spec.catalog.level_of(r) <= spec.structural_order) t.structural_ranks.push_back(r);
  t.structural_design.resize(classes, t.structural_ranks.size());
  for (int c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < t.structural_ranks.size(); ++j)
      t.structural_design(c, j) =
          effect_indicator(profiles[c], spec.catalog.mask_of(t.structural_ranks[j]));
  return t;
}

int free_parameter_count(const ModelSpec& spec) {
  int n = 0;
  for (const auto& mask : spec.masks) n += 1 + static_cast<int>(mask.size());
  return n + spec.catalog.count_up_to_level(spec.structural_order);
}

Vector pack_parameters(const ModelSpec& spec, const ParameterSet& params) {
  Vector out(free_parameter_count(spec));
  int at = 0;
  for (int i = 0; i < spec.items(); ++i) {
    const ItemParameterSet& ip = params.items[i];
    out[at++] = ip.intercept;
    for (int r : ip.active) out[at++] = ip.effects[r];
  }
  out.segment(at, params.structural.coefficients.size()) = params.structural.coefficients;
  return out;
}

ParameterSet unpack_parameters(const ModelSpec& spec, const Eigen::Ref<const Vector>& packed) {
  if (packed.size() != free_parameter_count(spec))
    throw ConfigError("unpack_parameters: wrong vector length");
  ParameterSet p;
  int at = 0;
  for (int i = 0; i < spec.items(); ++i) {
    ItemParameterSet ip = make_item_params(spec.catalog, spec.masks[i]);
    ip.intercept = packed[at++];
    for (int r : ip.active) ip.effects[r] = packed[at++];
    p.items.push_back(std::move(ip));
  }
  const int s_count = spec.catalog.count_up_to_level(spec.structural_order);
  p.structural.coefficients = packed.segment(at, s_count);
  ModelTables tables = ModelTables::build(spec);
  refresh_class_probs(tables, &p.structural);
  return p;
}

std::vector<std::string> parameter_labels(const ModelSpec& spec) {
  std::vector<std::string> labels;
  auto subset_text = [&](int rank) {
    std::string s;
    for (int a : spec.catalog.attributes_of(rank)) {
      if (!s.empty()) s += ',';
      s += std::to_string(a);
    }
    return s;
  };
  for (int i = 0; i < spec.items(); ++i) {
    const std::string& id = spec.q.item_ids[i];
    labels.push_back("lambda_{" + id + ",0}");
    for (int r : spec.masks[i])
      labels.push_back("lambda_{" + id + "," + std::to_string(spec.catalog.level_of(r)) +
                       ",(" + subset_text(r) + ")}");
  }
  for (int r = 0; r < spec.catalog.count(); ++r)
    if (spec.catalog.level_of(r) <= spec.structural_order)
      labels.push_back("gamma_{" + std::to_string(spec.catalog.level_of(r)) + ",(" +
                       subset_text(r) + ")}");
  return labels;
}

void refresh_class_probs(const ModelTables& tables, StructuralParameterSet* structural) {
  Vector eta = tables.structural_design * structural->coefficients;
  const double mx = eta.maxCoeff();
  Vector w = (eta.array() - mx).exp();
  structural->class_probs = w / w.sum();
}

namespace {

struct ItemTables {
  Matrix pi, log_pi, log_1m_pi;  // items x classes
};

Vector item_theta(const ItemParameterSet& ip) { return ip.packed(); }

ItemTables build_item_tables(const ModelSpec& spec, const ModelTables& tables,
                             const ParameterSet& params) {
  const int items = spec.items();
  const int classes = spec.classes();
  ItemTables t;
  t.pi.resize(items, classes);
  t.log_pi.resize(items, classes);
  t.log_1m_pi.resize(items, classes);
  for (int i = 0; i < items; ++i) {
    Vector eta = tables.item_design[i] * item_theta(params.items[i]);
    for (int c = 0; c < classes; ++c) {
      t.pi(i, c) = logistic(eta[c]);
      t.log_pi(i, c) = log_logistic(eta[c]);
      t.log_1m_pi(i, c) = log_logistic(-eta[c]);
    }
  }
  return t;
}

LikelihoodParts evaluate_likelihood(const ModelSpec& spec, const ModelTables& tables,
                                    const ParameterSet& params, const Matrix& y,
                                    const ResponseMatrix& data) {
  ItemTables it = build_item_tables(spec, tables, params);
  const Vector& nu = params.structural.class_probs;

  // log P(y_e | class c) = sum_i log(1-pi_ic) + sum_i y_ei (log pi - log(1-pi))
  Matrix w = y * (it.log_pi - it.log_1m_pi);
  Eigen::RowVectorXd base = it.log_1m_pi.colwise().sum();
  for (int c = 0; c < w.cols(); ++c) {
    const double lp = nu[c] > 0.0 ? std::log(nu[c]) : -std::numeric_limits<double>::infinity();
    w.col(c).array() += base[c] + lp;
  }

  Vector f = logsumexp_rows(w);
  for (int e = 0; e < f.size(); ++e)
    if (!std::isfinite(f[e]))
      throw NumericError("zero marginal likelihood for examinee " +
                         (e < static_cast<int>(data.examinee_ids.size())
                              ? data.examinee_ids[e]
                              : std::to_string(e + 1)));

  LikelihoodParts parts;
  parts.loglik = f.sum();
  parts.posteriors = (w.colwise() - f).array().exp();
  parts.item_probs = std::move(it.pi);
  parts.log_probs = std::move(it.log_pi);
  parts.log_comp_probs = std::move(it.log_1m_pi);
  parts.class_probs = nu;
  return parts;
}

double clamp_coef(double x) { return std::clamp(x, -kCoefBound, kCoefBound); }

// Damped Newton ascent of the weighted Bernoulli log-likelihood
//   f(theta) = sum_c c1_c log s(h_c theta) + c0_c log s(-h_c theta).
// Iterates are clamped to the coefficient bound; `clamped` reports whether
// any bound was hit at the returned point.
Vector weighted_logistic_newton(const Matrix& h, const Vector& c1, const Vector& c0,
                                Vector theta, bool* clamped, bool* stalled) {
  const auto objective = [&](const Vector& th) {
    Vector eta = h * th;
    double f = 0.0;
    for (int c = 0; c < eta.size(); ++c)
      f += c1[c] * log_logistic(eta[c]) + c0[c] * log_logistic(-eta[c]);
    return f;
  };

  const Vector total = c1 + c0;
  double f_cur = objective(theta);
  for (int iter = 0; iter < 50; ++iter) {
    Vector eta = h * theta;
    Vector pi(eta.size());
    for (int c = 0; c < eta.size(); ++c) pi[c] = logistic(eta[c]);
    Vector grad = h.transpose() * (c1 - total.cwiseProduct(pi));
    if (grad.cwiseAbs().maxCoeff() < 1e-8) break;

    Vector wdiag = total.array() * pi.array() * (1.0 - pi.array());
    Matrix hess = h.transpose() * wdiag.asDiagonal() * h;
    // Tiny ridge keeps the factorization meaningful when a class carries no
    // mass and the curvature is only semidefinite.
    hess.diagonal().array() += 1e-12 * (1.0 + hess.trace() / hess.rows());
    Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) step = grad;

    bool accepted = false;
    double scale = 1.0;
    for (int half = 0; half < 30; ++half, scale *= 0.5) {
      Vector trial = theta + scale * step;
      for (int j = 0; j < trial.size(); ++j) trial[j] = clamp_coef(trial[j]);
      const double f_try = objective(trial);
      if (f_try > f_cur) {
        theta = std::move(trial);
        f_cur = f_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (stalled) *stalled = true;
      break;
    }
  }
  if (clamped)
    for (int j = 0; j < theta.size(); ++j)
      if (std::fabs(theta[j]) >= kCoefBound) *clamped = true;
  return theta;
}

}  // namespace

double log_likelihood(const ModelSpec& spec, const ParameterSet& params,
                      const ResponseMatrix& data) {
  return e_step(spec, params, data).loglik;
}

LikelihoodParts e_step(const ModelSpec& spec, const ParameterSet& params,
                       const ResponseMatrix& data) {
  data.validate(spec.items());
  ModelTables tables = ModelTables::build(spec);
  Matrix y = data.entries.cast<double>();
  return evaluate_likelihood(spec, tables, params, y, data);
}

ItemParameterSet m_step_item(const ModelSpec& spec, int item, const Vector& correct,
                             const Vector& incorrect, const ItemParameterSet& current,
                             std::vector<std::string>* warnings) {
  if (correct.minCoeff() < 0.0 || incorrect.minCoeff() < 0.0)
    throw ConfigError("m_step_item: negative expected counts");
  if (correct.sum() + incorrect.sum() <= 0.0)
    throw ConfigError("m_step_item: no weight on any class");

  ModelTables tables = ModelTables::build(spec);
  bool clamped = false;
  Vector theta = weighted_logistic_newton(tables.item_design[item], correct, incorrect,
                                          current.packed(), &clamped, nullptr);
  ItemParameterSet out = make_item_params(spec.catalog, spec.masks[item]);
  out.set_packed(theta);
  if (clamped && warnings)
    warnings->push_back("item " + spec.q.item_ids[item] + ": coefficient clamped at ±" +
                        std::to_string(static_cast<int>(kCoefBound)));
  return out;
}

namespace {

StructuralParameterSet structural_update(const ModelSpec& spec, const ModelTables& tables,
                                         const Vector& counts,
                                         const StructuralParameterSet& current,
                                         std::vector<std::string>* warnings) {
  const int classes = spec.classes();
  const double total = counts.sum();
  if (counts.minCoeff() < 0.0 || total <= 0.0)
    throw ConfigError("structural update: invalid expected counts");

  StructuralParameterSet out;
  if (spec.structural_order == spec.attributes()) {
    // Saturated: probabilities proportional to counts; coefficients recovered
    // by Moebius log-contrasts against the all-zero class.
    Vector nu = counts / total;
    bool floored = false;
    for (int c = 0; c < classes; ++c)
      if (nu[c] < 1e-10) {
        nu[c] = 1e-10;
        floored = true;
      }
    nu /= nu.sum();
    if (floored && warnings)
      warnings->push_back("structural update: zero expected class count floored at 1e-10");

    Vector logmu(classes);
    for (int c = 0; c < classes; ++c) logmu[c] = std::log(nu[c] / nu[0]);

    out.coefficients.resize(tables.structural_ranks.size());
    bool clamped = false;
    for (std::size_t j = 0; j < tables.structural_ranks.size(); ++j) {
      const std::uint32_t set = spec.catalog.mask_of(tables.structural_ranks[j]);
      // gamma_S = sum over subsets T of S of (-1)^{|S|-|T|} log mu_T; the
      // class index of a subset is its bitmask.
      double g = 0.0;
      for (std::uint32_t sub = set;; sub = (sub - 1) & set) {
        const int sign_bits = std::popcount(set) - std::popcount(sub);
        g += ((sign_bits & 1) ? -1.0 : 1.0) * logmu[sub];
        if (sub == 0) break;
      }
      if (std::fabs(g) > kCoefBound) {
        g = clamp_coef(g);
        clamped = true;
      }
      out.coefficients[j] = g;
    }
    if (clamped && warnings)
      warnings->push_back("structural update: coefficient clamped at ±" +
                          std::to_string(static_cast<int>(kCoefBound)));
    // Exact closed form for the probabilities; matches the coefficients up
    // to roundoff whenever no clamp or floor fired.
    out.class_probs = nu;
    return out;
  }

  // Reduced order: damped Newton on the multinomial log-likelihood
  //   f(gamma) = sum_c counts_c log nu_c(gamma).
  const Matrix& x = tables.structural_design;
  Vector gamma = current.coefficients;
  const auto class_probs_of = [&](const Vector& g) {
    Vector eta = x * g;
    const double mx = eta.maxCoeff();
    Vector w = (eta.array() - mx).exp();
    return Vector(w / w.sum());
  };
  const auto objective = [&](const Vector& g) {
    Vector nu = class_probs_of(g);
    double f = 0.0;
    for (int c = 0; c < classes; ++c)
      if (counts[c] > 0.0) f += counts[c] * std::log(nu[c]);
    return f;
  };

  double f_cur = objective(gamma);
  bool clamped = false;
  for (int iter = 0; iter < 50; ++iter) {
    Vector nu = class_probs_of(gamma);
    Vector grad = x.transpose() * (counts - total * nu);
    if (grad.cwiseAbs().maxCoeff() < 1e-8) break;
    Vector xnu = x.transpose() * nu;
    Matrix hess = total * (x.transpose() * nu.asDiagonal() * x - xnu * xnu.transpose());
    hess.diagonal().array() += 1e-12 * (1.0 + hess.trace() / hess.rows());
    Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) step = grad / total;

    bool accepted = false;
    double scale = 1.0;
    for (int half = 0; half < 30; ++half, scale *= 0.5) {
      Vector trial = gamma + scale * step;
      for (int j = 0; j < trial.size(); ++j) {
        if (std::fabs(trial[j]) > kCoefBound) clamped = true;
        trial[j] = clamp_coef(trial[j]);
      }
      const double f_try = objective(trial);
      if (f_try > f_cur) {
        gamma = std::move(trial);
        f_cur = f_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (clamped && warnings)
    warnings->push_back("structural update: coefficient clamped at ±" +
                        std::to_string(static_cast<int>(kCoefBound)));
  out.coefficients = gamma;
  out.class_probs = class_probs_of(gamma);
  return out;
}

}  // namespace

StructuralParameterSet m_step_structural(const ModelSpec& spec, const Vector& expected_counts,
                                         const StructuralParameterSet& current,
                                         std::vector<std::string>* warnings) {
  ModelTables tables = ModelTables::build(spec);
  return structural_update(spec, tables, expected_counts, current, warnings);
}

namespace {

ParameterSet default_start(const ModelSpec& spec, const Matrix& y) {
  ParameterSet p;
  const int examinees = static_cast<int>(y.rows());
  for (int i = 0; i < spec.items(); ++i) {
    ItemParameterSet ip = make_item_params(spec.catalog, spec.masks[i]);
    const double pbar = std::clamp(y.col(i).sum() / examinees, 0.05, 0.95);
    ip.intercept = logit(pbar);
    bool has_main = false;
    for (int r : ip.active) has_main = has_main || spec.catalog.level_of(r) == 1;
    for (int r : ip.active) {
      if (spec.catalog.level_of(r) == 1)
        ip.effects[r] = 1.0;
      else if (!has_main)
        // Without this, a model whose items carry only interaction terms
        // starts at an exact EM fixed point (flat likelihood in every class)
        // and never moves.
        ip.effects[r] = 1.0;
    }
    p.items.push_back(std::move(ip));
  }
  const int s_count = spec.catalog.count_up_to_level(spec.structural_order);
  p.structural.coefficients = Vector::Zero(s_count);
  p.structural.class_probs = Vector::Constant(spec.classes(), 1.0 / spec.classes());
  return p;
}

struct SingleFit {
  ParameterSet params;
  LikelihoodParts parts;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double score_max_norm = 0.0;
  std::vector<double> trace;
};

SingleFit run_em(const ModelSpec& spec, const ModelTables& tables, const Matrix& y,
                 const ResponseMatrix& data, ParameterSet params, const FitConfig& config,
                 std::set<std::string>* warnings) {
  SingleFit out;
  auto note = [&](const std::string& w) { warnings->insert(w); };

  LikelihoodParts parts = evaluate_likelihood(spec, tables, params, y, data);
  out.trace.push_back(parts.loglik);

  std::vector<std::string> step_warnings;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    // M-step over items: expected per-class counts of correct and incorrect.
    Matrix n1 = y.transpose() * parts.posteriors;              // items x classes
    Eigen::RowVectorXd n_class = parts.posteriors.colwise().sum();
    for (int i = 0; i < spec.items(); ++i) {
      Vector c1 = n1.row(i).transpose();
      Vector c0 = (n_class.transpose() - c1).cwiseMax(0.0);
      bool clamped = false;
      Vector theta = weighted_logistic_newton(tables.item_design[i], c1, c0,
                                              params.items[i].packed(), &clamped, nullptr);
      params.items[i].set_packed(theta);
      if (clamped)
        note("item " + spec.q.item_ids[i] + ": coefficient clamped at ±" +
             std::to_string(static_cast<int>(kCoefBound)));
    }

    step_warnings.clear();
    params.structural = structural_update(spec, tables, n_class.transpose(), params.structural,
                                          &step_warnings);
    for (const auto& w : step_warnings) note(w);

    parts = evaluate_likelihood(spec, tables, params, y, data);
    out.trace.push_back(parts.loglik);
    const double delta = out.trace[out.trace.size() - 1] - out.trace[out.trace.size() - 2];
    if (delta < -1e-6) note("EM iteration decreased the log-likelihood");
    out.iterations = iter;
    if (std::fabs(delta) <
        std::max(config.tol_absolute, config.tol_relative * std::fabs(parts.loglik))) {
      out.converged = true;
      break;
    }
  }

  // Gradient polish: EM stops on loglik stalls long before the total score
  // is numerically zero, but downstream score tests need a true stationary
  // point.  Outer-product (BHHH) steps with halving, gated on reducing the
  // score max-norm, converge quadratically near the optimum.
  double smax = std::numeric_limits<double>::quiet_NaN();
  if (config.polish) {
    Matrix g = detail::reduced_gradient_matrix(spec, tables, parts, y);
    Vector score = g.colwise().sum().transpose();
    smax = score.cwiseAbs().maxCoeff();
    for (int iter = 0; iter < config.polish_max_iterations && smax > config.polish_tol; ++iter) {
      Matrix info = g.transpose() * g;
      info.diagonal().array() += 1e-10 * (1.0 + info.trace() / info.rows());
      Vector direction = info.ldlt().solve(score);
      if (!direction.allFinite()) break;

      Vector packed = pack_parameters(spec, params);
      bool accepted = false;
      double scale = 1.0;
      for (int half = 0; half < 40; ++half, scale *= 0.5) {
        Vector trial = packed + scale * direction;
        bool clamped = false;
        for (int j = 0; j < trial.size(); ++j) {
          if (std::fabs(trial[j]) > kCoefBound) clamped = true;
          trial[j] = clamp_coef(trial[j]);
        }
        ParameterSet trial_params = params;
        int at = 0;
        for (int i = 0; i < spec.items(); ++i) {
          trial_params.items[i].intercept = trial[at++];
          for (int r : trial_params.items[i].active) trial_params.items[i].effects[r] = trial[at++];
        }
        trial_params.structural.coefficients =
            trial.segment(at, trial_params.structural.coefficients.size());
        refresh_class_probs(tables, &trial_params.structural);

        LikelihoodParts trial_parts;
        try {
          trial_parts = evaluate_likelihood(spec, tables, trial_params, y, data);
        } catch (const NumericError&) {
          continue;
        }
        Matrix trial_g = detail::reduced_gradient_matrix(spec, tables, trial_parts, y);
        Vector trial_score = trial_g.colwise().sum().transpose();
        const double trial_smax = trial_score.cwiseAbs().maxCoeff();
        if (trial_smax < smax) {
          params = std::move(trial_params);
          parts = std::move(trial_parts);
          g = std::move(trial_g);
          score = std::move(trial_score);
          smax = trial_smax;
          accepted = true;
          if (clamped)
            note("polish: coefficient clamped at ±" +
                 std::to_string(static_cast<int>(kCoefBound)));
          break;
        }
      }
      if (!accepted) break;
    }
  } else {
    Matrix g = detail::reduced_gradient_matrix(spec, tables, parts, y);
    smax = Vector(g.colwise().sum().transpose()).cwiseAbs().maxCoeff();
  }

  out.params = std::move(params);
  out.loglik = parts.loglik;
  out.score_max_norm = smax;
  out.parts = std::move(parts);
  return out;
}

}  // namespace

FitResult fit(const ModelSpec& spec, const ResponseMatrix& data, const FitConfig& config) {
  data.validate(spec.items());
  ModelTables tables = ModelTables::build(spec);
  Matrix y = data.entries.cast<double>();

  std::set<std::string> warnings;
  for (int i = 0; i < spec.items(); ++i) {
    const double s = y.col(i).sum();
    if (s == 0.0 || s == static_cast<double>(data.examinees()))
      warnings.insert("item " + spec.q.item_ids[i] +
                      ": all responses identical; intercept will sit at a bound");
  }

  ParameterSet base = config.initial ? *config.initial : default_start(spec, y);
  if (config.initial) {
    if (static_cast<int>(base.items.size()) != spec.items() ||
        base.structural.coefficients.size() !=
            spec.catalog.count_up_to_level(spec.structural_order))
      throw ConfigError("fit: initial parameter set does not match the model");
    refresh_class_probs(tables, &base.structural);
  }

  SingleFit best;
  bool have_best = false;
  const int tries = 1 + std::max(0, config.random_restarts);
  for (int t = 0; t < tries; ++t) {
    ParameterSet start = base;
    if (t > 0) {
      Rng rng(Rng::mix(config.seed, static_cast<std::uint64_t>(t)));
      Vector packed = pack_parameters(spec, start);
      for (int j = 0; j < packed.size(); ++j) packed[j] += rng.next_uniform(-0.5, 0.5);
      start = unpack_parameters(spec, packed);
    }
    SingleFit candidate = run_em(spec, tables, y, data, std::move(start), config, &warnings);
    if (!have_best || candidate.loglik > best.loglik) {
      best = std::move(candidate);
      have_best = true;
    }
  }

  FitResult result;
  result.params = std::move(best.params);
  result.loglik = best.loglik;
  result.converged = best.converged;
  result.iterations = best.iterations;
  result.score_max_norm = best.score_max_norm;
  result.loglik_trace = std::move(best.trace);
  result.posteriors = std::move(best.parts.posteriors);
  result.warnings.assign(warnings.begin(), warnings.end());
  if (!result.converged)
    result.warnings.push_back("EM did not meet the loglik tolerance within " +
                              std::to_string(config.max_iterations) + " iterations");
  return result;
}

std::vector<AttributeProfile> classify(const FitResult& fit) {
  const int examinees = static_cast<int>(fit.posteriors.rows());
  const int classes = static_cast<int>(fit.posteriors.cols());
  int attrs = 0;
  while ((1 << attrs) < classes) ++attrs;

  std::vector<AttributeProfile> out;
  out.reserve(examinees);
  for (int e = 0; e < examinees; ++e) {
    int arg = 0;
    double best = fit.posteriors(e, 0);
    for (int c = 1; c < classes; ++c)
      if (fit.posteriors(e, c) > best) {  // strict: ties keep the lowest index
        best = fit.posteriors(e, c);
        arg = c;
      }
    out.push_back(profile_from_class(arg, attrs));
  }
  return out;
}

LrTestResult lr_test(const FitResult& fit_full, const FitResult& fit_reduced, int df) {
  if (df < 1) throw ConfigError("lr_test: df must be >= 1");
  LrTestResult r;
  r.df = df;
  r.statistic = 2.0 * (fit_full.loglik - fit_reduced.loglik);
  if (r.statistic < -1e-6)
    r.warnings.push_back("full-model loglik below reduced-model loglik; optimization suspect");
  if (r.statistic < 0.0) {
    if (r.warnings.empty())
      r.warnings.push_back("negative likelihood-ratio statistic floored at 0");
    r.statistic = 0.0;
  }
  r.p_value = chi2_upper_tail(r.statistic, df);
  return r;
}

double aic(double loglik, int parameter_count) { return -2.0 * loglik + 2.0 * parameter_count; }

double bic(double loglik, int parameter_count, int examinees) {
  return -2.0 * loglik + parameter_count * std::log(static_cast<double>(examinees));
}

}  // namespace dcmmi
