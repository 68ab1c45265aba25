#include "dcmmi/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcmmi/errors.hpp"
#include "dcmmi/estimation.hpp"
#include "dcmmi/io.hpp"
#include "dcmmi/mod_indices.hpp"
#include "dcmmi/sim.hpp"

namespace dcmmi {
namespace cli {

namespace {

std::string format_double_token(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void build_hash_tokens(RunConfig* cfg) {
  std::vector<std::string>& t = cfg->hash_tokens;
  t.clear();
  t.push_back(cfg->subcommand);
  if (cfg->subcommand == "fit") {
    t.push_back("model=" + cfg->model);
    t.push_back("structural_order=" + std::to_string(cfg->structural_order));
    t.push_back("max_iterations=" + std::to_string(cfg->max_iterations));
    t.push_back("restarts=" + std::to_string(cfg->restarts));
  } else if (cfg->subcommand == "mi") {
    t.push_back("candidates=" + cfg->candidates);
    t.push_back("max_order=" + std::to_string(cfg->max_order));
    t.push_back("alpha=" + format_double_token(cfg->alpha));
    t.push_back("m_override=" +
                (cfg->m_override ? std::to_string(*cfg->m_override) : std::string("none")));
  } else if (cfg->subcommand == "simulate") {
    t.push_back("study=" + cfg->study);
    t.push_back("effect=" + cfg->effect);
    t.push_back("examinees=" + std::to_string(cfg->examinees));
    t.push_back("replications=" + std::to_string(cfg->replications));
    t.push_back("seed=" + std::to_string(cfg->seed));
    t.push_back("split_rule=" + cfg->split_rule);
  }
}

// Mask file for custom models: {"<item id>": ["1", "1x2", ...], ...}.
// Items absent from the file keep the saturated set of their measured
// attributes.
std::vector<std::vector<int>> load_mask_file(const std::string& path, const QMatrix& q) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mask file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("mask file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw FormatError("mask file " + path + ": expected a JSON object");

  EffectCatalog catalog(q.attributes());
  std::vector<std::vector<int>> masks(static_cast<std::size_t>(q.items()));
  for (int i = 0; i < q.items(); ++i) {
    const std::uint32_t measured = q.row_mask(i);
    std::vector<int>& ranks = masks[static_cast<std::size_t>(i)];
    auto it = doc.find(q.item_ids[static_cast<std::size_t>(i)]);
    if (it == doc.end()) {
      for (int r = 0; r < catalog.count(); ++r) {
        if ((catalog.mask_of(r) & ~measured) == 0u) ranks.push_back(r);
      }
      continue;
    }
    if (!it->is_array()) {
      throw FormatError("mask file " + path + ": item " +
                        q.item_ids[static_cast<std::size_t>(i)] + " must map to an array");
    }
    for (const auto& entry : *it) {
      if (!entry.is_string()) {
        throw FormatError("mask file " + path + ": item " +
                          q.item_ids[static_cast<std::size_t>(i)] +
                          " has a non-string effect label");
      }
      try {
        ranks.push_back(catalog.rank_from_label(entry.get<std::string>()));
      } catch (const FormatError& e) {
        throw FormatError("mask file " + path + ": " + e.what());
      }
    }
  }
  // Unknown item ids are silent typo traps; reject them.
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const auto& id : q.item_ids) {
      if (id == it.key()) {
        known = true;
        break;
      }
    }
    if (!known) throw FormatError("mask file " + path + ": unknown item id '" + it.key() + "'");
  }
  return masks;
}

ModelSpec build_spec(const RunConfig& cfg, const QMatrix& q) {
  if (cfg.model == "custom") {
    std::vector<std::vector<int>> masks = load_mask_file(cfg.mask_path, q);
    try {
      return ModelSpec::make_custom(q, std::move(masks), cfg.structural_order);
    } catch (const ConfigError& e) {
      // A mask inconsistent with the Q-matrix is a content problem of the
      // mask file, not a command-line problem.
      throw FormatError(std::string("mask file ") + cfg.mask_path + ": " + e.what());
    }
  }
  return ModelSpec::make(q, model_kind_from_name(cfg.model), cfg.structural_order);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int run_fit(const RunConfig& cfg) {
  QMatrix q = load_qmatrix_csv(cfg.qmatrix_path);
  ResponseMatrix data = load_responses_csv(cfg.responses_path, q);
  ModelSpec spec = build_spec(cfg, q);

  FitConfig fc;
  fc.max_iterations = cfg.max_iterations;
  fc.random_restarts = cfg.restarts;
  fc.seed = cfg.seed;
  FitResult result = fit(spec, data, fc);
  print_warnings(result.warnings);

  save_fit_json(cfg.out_path, spec, result, data.examinees(), config_hash(cfg.hash_tokens));

  char line[256];
  std::snprintf(line, sizeof(line),
                "fit %s: loglik %.6f, %d free parameters, %d examinees, %s in %d iterations\n",
                model_kind_name(spec.kind), result.loglik, free_parameter_count(spec),
                data.examinees(), result.converged ? "converged" : "NOT converged",
                result.iterations);
  std::cout << line << "wrote " << cfg.out_path << "\n";
  return 0;
}

int run_mi(const RunConfig& cfg) {
  FitArtifact art = load_fit_json(cfg.fit_path);
  ResponseMatrix data = load_responses_csv(cfg.responses_path, art.spec.q);

  FitResult fr;
  fr.params = art.params;
  fr.loglik = art.loglik;
  fr.converged = art.converged;
  fr.iterations = art.iterations;
  fr.score_max_norm = art.score_max_norm;

  std::vector<Candidate> cands;
  if (cfg.candidates == "qmatrix" || cfg.candidates == "both") {
    std::vector<Candidate> qc = enumerate_qmatrix_candidates(art.spec, cfg.max_order);
    cands.insert(cands.end(), qc.begin(), qc.end());
  }
  if (cfg.candidates == "model" || cfg.candidates == "both") {
    std::vector<Candidate> mc = enumerate_model_candidates(art.spec, cfg.max_order);
    cands.insert(cands.end(), mc.begin(), mc.end());
  }

  std::vector<std::string> warnings;
  std::vector<ModificationIndex> mis = compute_mis(art.spec, fr, data, cands, &warnings);
  print_warnings(warnings);
  MIReport report = apply_multiplicity(std::move(mis), cfg.alpha, cfg.m_override, art.spec);

  save_mi_json(cfg.out_path, report, art.spec, config_hash(cfg.hash_tokens));
  std::string table = render_mi_table(report, art.spec);
  if (!cfg.table_path.empty()) save_text_file(cfg.table_path, table);

  std::cout << table;
  std::cout << "wrote " << cfg.out_path;
  if (!cfg.table_path.empty()) std::cout << " and " << cfg.table_path;
  std::cout << "\n";
  return 0;
}

int run_classify(const RunConfig& cfg) {
  FitArtifact art = load_fit_json(cfg.fit_path);
  ResponseMatrix data = load_responses_csv(cfg.responses_path, art.spec.q);
  LikelihoodParts parts = e_step(art.spec, art.params, data);
  save_classify_csv(cfg.out_path, art.spec, parts.posteriors, data);
  std::cout << "classified " << data.examinees() << " examinees, wrote " << cfg.out_path << "\n";
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  SimDesign design;
  design.examinees = cfg.examinees;
  design.replications = cfg.replications;
  design.seed = cfg.seed;
  design.split_rule = cfg.split_rule;
  design.threads = cfg.threads;
  design.p_master = (cfg.effect == "large") ? 0.92 : 0.62;

  std::vector<double> alphas;
  std::vector<int> sizes{cfg.examinees};
  StudyResult result;
  if (cfg.study == "type1-q") {
    alphas = {0.10, 0.05, 0.025, 0.01, 0.005};
    result = run_type1_q_study(design, alphas);
  } else if (cfg.study == "power-q") {
    alphas = {0.05, 0.025, 0.0005};
    result = run_power_q_study(design, alphas, sizes);
  } else if (cfg.study == "type1-dina") {
    alphas = {0.10, 0.05, 0.025, 0.01, 0.005};
    result = run_type1_dina_study(design, alphas);
  } else {
    alphas = {0.05, 0.025, 0.0017};
    result = run_power_dina_study(design, alphas, sizes);
  }

  const std::string hash = config_hash(cfg.hash_tokens);
  save_study_csv(cfg.out_path, result, hash);
  const std::string manifest =
      cfg.manifest_path.empty() ? cfg.out_path + ".manifest.json" : cfg.manifest_path;
  save_study_manifest(manifest, result, design, alphas, sizes, hash);

  std::cout << "study " << result.study << " (" << result.effect_size << " effect): "
            << result.cells.size() << " cells from " << result.replications
            << " replications, " << result.excluded << " excluded";
  if (result.flagged) std::cout << " [exclusion rate above 2%]";
  std::cout << "\nwrote " << cfg.out_path << " and " << manifest << "\n";
  return 0;
}

}  // namespace

RunConfig parse_and_validate(const std::vector<std::string>& args) {
  RunConfig cfg;

  CLI::App app{"Diagnostic classification models: estimation, score-test "
               "modification indices, and simulation studies"};
  app.require_subcommand(1);

  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate a model by EM marginal ML");
  fit_cmd->add_option("--responses", cfg.responses_path, "Response CSV (examinees x items)")
      ->required();
  fit_cmd->add_option("--qmatrix", cfg.qmatrix_path, "Q-matrix CSV (items x attributes)")
      ->required();
  fit_cmd->add_option("--model", cfg.model, "Model template")
      ->check(CLI::IsMember({"lcdm", "dina", "mains", "custom"}));
  fit_cmd->add_option("--mask", cfg.mask_path, "Per-item effect masks (custom model only)");
  fit_cmd->add_option("--structural-order", cfg.structural_order,
                      "Max structural interaction order (-1 = saturated)");
  fit_cmd->add_option("--out", cfg.out_path, "Output fit JSON")->required();

  CLI::App* mi_cmd = app.add_subcommand("mi", "Score-test modification indices for a fit");
  mi_cmd->add_option("--fit", cfg.fit_path, "Fit JSON from the fit subcommand")->required();
  mi_cmd->add_option("--responses", cfg.responses_path, "Response CSV used for the fit")
      ->required();
  mi_cmd->add_option("--candidates", cfg.candidates, "Candidate family")
      ->check(CLI::IsMember({"qmatrix", "model", "both"}));
  mi_cmd->add_option("--max-order", cfg.max_order, "Highest effect level to consider");
  mi_cmd->add_option("--alpha", cfg.alpha, "Familywise significance level");
  int m_override_value = 0;
  CLI::Option* m_override_opt =
      mi_cmd->add_option("--m-override", m_override_value, "Bonferroni divisor override");
  mi_cmd->add_option("--table", cfg.table_path, "Also write the fixed-width table here");
  mi_cmd->add_option("--out", cfg.out_path, "Output MI JSON")->required();

  CLI::App* classify_cmd =
      app.add_subcommand("classify", "Posterior attribute classification per examinee");
  classify_cmd->add_option("--fit", cfg.fit_path, "Fit JSON")->required();
  classify_cmd->add_option("--responses", cfg.responses_path, "Response CSV")->required();
  classify_cmd->add_option("--out", cfg.out_path, "Output classification CSV")->required();

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a rejection-rate study");
  sim_cmd->add_option("--study", cfg.study, "Study name")
      ->required()
      ->check(CLI::IsMember({"type1-q", "power-q", "type1-dina", "power-dina"}));
  sim_cmd->add_option("--effect", cfg.effect, "Effect size")
      ->check(CLI::IsMember({"large", "smaller"}));
  sim_cmd->add_option("--examinees", cfg.examinees, "Sample size per replication");
  sim_cmd->add_option("--reps", cfg.replications, "Number of replications");
  sim_cmd->add_option("--seed", cfg.seed, "Base seed");
  sim_cmd->add_option("--out", cfg.out_path, "Output study CSV")->required();

  for (CLI::App* sub : {fit_cmd, mi_cmd, classify_cmd, sim_cmd}) {
    sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")
        ->envname("DCMMI_THREADS");
  }

  // CLI11 consumes the argument vector back to front.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    cfg.subcommand = "help";
    return cfg;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    cfg.subcommand = "help";
    return cfg;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(std::string(e.what()) + " (run with --help for usage)");
  }

  cfg.subcommand = app.get_subcommands().front()->get_name();

  if (cfg.subcommand == "fit") {
    if (cfg.model == "custom" && cfg.mask_path.empty()) {
      throw ConfigError("--model custom requires --mask");
    }
    if (cfg.model != "custom" && !cfg.mask_path.empty()) {
      throw ConfigError("--mask is only valid with --model custom");
    }
    if (cfg.structural_order != -1 && cfg.structural_order < 1) {
      throw ConfigError("--structural-order must be -1 (saturated) or at least 1");
    }
  } else if (cfg.subcommand == "mi") {
    if (cfg.max_order < 1) throw ConfigError("--max-order must be at least 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) {
      throw ConfigError("--alpha must lie strictly between 0 and 0.5");
    }
    if (m_override_opt->count() > 0) {
      if (m_override_value < 1) throw ConfigError("--m-override must be at least 1");
      cfg.m_override = m_override_value;
    }
  } else if (cfg.subcommand == "simulate") {
    if (cfg.examinees < 1) throw ConfigError("--examinees must be at least 1");
    if (cfg.replications < 1) throw ConfigError("--reps must be at least 1");
  }
  if (cfg.threads < 0) throw ConfigError("--threads must be nonnegative");

  build_hash_tokens(&cfg);
  return cfg;
}

int run(const RunConfig& config) {
  if (config.subcommand == "help") return 0;
  if (config.subcommand == "fit") return run_fit(config);
  if (config.subcommand == "mi") return run_mi(config);
  if (config.subcommand == "classify") return run_classify(config);
  if (config.subcommand == "simulate") return run_simulate(config);
  throw ConfigError("unknown subcommand: " + config.subcommand);
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  RunConfig cfg;
  try {
    cfg = parse_and_validate(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace cli
}  // namespace dcmmi
