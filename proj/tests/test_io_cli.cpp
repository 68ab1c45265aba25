#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "json.hpp"

#include "dcmmi/cli.hpp"
#include "dcmmi/errors.hpp"
#include "dcmmi/estimation.hpp"
#include "dcmmi/io.hpp"
#include "dcmmi/mod_indices.hpp"
#include "dcmmi/model.hpp"
#include "dcmmi/rng.hpp"

namespace fs = std::filesystem;
using namespace dcmmi;

namespace {

// Scratch directory shared by the whole binary; wiped once at first use.
const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "dcmmi_io_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_in(const std::string& name) { return (work_dir() / name).string(); }

std::string cli_binary() {
  const char* bin = std::getenv("DCMMI_BIN");
  return bin ? bin : "";
}

// Runs the installed binary through the shell, captures stdout, and returns
// the exit code (-1 when the process did not exit normally).
int run_cli(const std::string& args, std::string* captured_stdout = nullptr,
            const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string out_log = path_in("cli_stdout_" + std::to_string(++counter) + ".log");
  const std::string cmd =
      env_prefix + cli_binary() + " " + args + " > " + out_log + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (captured_stdout) *captured_stdout = load_text_file(out_log);
  if (!WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

// Six items over two attributes: four single-attribute items and two that
// need both.  The "missing" variant drops attribute a2 from item i5, the
// deliberate under-specification the MI run should point at.
constexpr const char* kQFullCsv =
    "item,a1,a2\n"
    "i1,1,0\n"
    "i2,0,1\n"
    "i3,1,0\n"
    "i4,0,1\n"
    "i5,1,1\n"
    "i6,1,1\n";
constexpr const char* kQMissingCsv =
    "item,a1,a2\n"
    "i1,1,0\n"
    "i2,0,1\n"
    "i3,1,0\n"
    "i4,0,1\n"
    "i5,1,0\n"
    "i6,1,1\n";

// Generating values: intercepts -1.5; single-attribute items carry one main
// of 2.5; two-attribute items carry mains of 1.5 and an interaction of 1.0.
ParameterSet pipeline_truth(const ModelSpec& spec) {
  ParameterSet truth;
  for (int i = 0; i < spec.items(); ++i) {
    ItemParameterSet ip = make_item_params(spec.catalog, spec.masks[i]);
    ip.intercept = -1.5;
    for (int r : spec.masks[i]) {
      if (spec.catalog.level_of(r) == 1)
        ip.effects[r] = spec.masks[i].size() == 1 ? 2.5 : 1.5;
      else
        ip.effects[r] = 1.0;
    }
    truth.items.push_back(std::move(ip));
  }
  return truth;
}

// Writes q_full.csv, q_missing.csv and responses.csv; returns the response
// path.  Class shares 0.30/0.20/0.20/0.30 over the four profiles.
std::string write_pipeline_dataset(int examinees, std::uint64_t seed) {
  save_text_file(path_in("q_full.csv"), kQFullCsv);
  save_text_file(path_in("q_missing.csv"), kQMissingCsv);

  QMatrix q = load_qmatrix_csv(path_in("q_full.csv"));
  ModelSpec spec = ModelSpec::make(q, ModelKind::lcdm_full, -1);
  ParameterSet truth = pipeline_truth(spec);

  const double class_probs[4] = {0.30, 0.20, 0.20, 0.30};
  const auto profiles = profile_space(2);
  Rng rng(seed);
  std::string csv = "i1,i2,i3,i4,i5,i6\n";
  for (int e = 0; e < examinees; ++e) {
    const double u = rng.next_unit();
    int cls = 3;
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) {
      acc += class_probs[c];
      if (u < acc) {
        cls = c;
        break;
      }
    }
    for (int i = 0; i < 6; ++i) {
      const double p = item_response_prob(truth.items[i], profiles[cls], spec.catalog);
      csv += rng.next_bernoulli(p) ? '1' : '0';
      csv += (i + 1 < 6) ? ',' : '\n';
    }
  }
  save_text_file(path_in("responses.csv"), csv);
  return path_in("responses.csv");
}

}  // namespace

TEST_CASE("config hash is deterministic and token-sensitive") {
  const std::string h = config_hash({"fit", "model=lcdm"});
  CHECK(h == config_hash({"fit", "model=lcdm"}));
  CHECK(h.size() == 16);
  for (char c : h) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
  CHECK(h != config_hash({"fit", "model=dina"}));
  CHECK(h != config_hash({"fitmodel=lcdm"}));  // token boundaries matter
  CHECK(h != config_hash({"fit", "model=lcdm", ""}));
}

TEST_CASE("q-matrix loader parses well-formed files") {
  save_text_file(path_in("q_ok.csv"),
                 "item, alg , geom\r\n"
                 "add-1, 1 ,0\r\n"
                 "shape-2,0,1\r\n"
                 "mix-3,1,1\r\n");
  QMatrix q = load_qmatrix_csv(path_in("q_ok.csv"));
  CHECK(q.items() == 3);
  CHECK(q.attributes() == 2);
  CHECK(q.attribute_ids == std::vector<std::string>{"alg", "geom"});
  CHECK(q.item_ids == std::vector<std::string>{"add-1", "shape-2", "mix-3"});
  CHECK(q.entries(0, 0) == 1);
  CHECK(q.entries(0, 1) == 0);
  CHECK(q.row_mask(2) == 0b11u);
}

TEST_CASE("q-matrix loader reports the offending location") {
  CHECK_THROWS_AS(load_qmatrix_csv(path_in("does_not_exist.csv")), FormatError);

  save_text_file(path_in("q_bad_cell.csv"), "item,a\nfirst,1\nsecond,2\n");
  CHECK_THROWS_WITH_AS(load_qmatrix_csv(path_in("q_bad_cell.csv")),
                       doctest::Contains("second"), FormatError);

  save_text_file(path_in("q_bad_width.csv"), "item,a,b\nfirst,1,0\nsecond,1\n");
  CHECK_THROWS_WITH_AS(load_qmatrix_csv(path_in("q_bad_width.csv")),
                       doctest::Contains("row 3"), FormatError);

  save_text_file(path_in("q_zero_row.csv"), "item,a,b\nfirst,1,0\nempty,0,0\n");
  CHECK_THROWS_WITH_AS(load_qmatrix_csv(path_in("q_zero_row.csv")),
                       doctest::Contains("empty"), FormatError);

  save_text_file(path_in("q_header_only.csv"), "item,a,b\n");
  CHECK_THROWS_AS(load_qmatrix_csv(path_in("q_header_only.csv")), FormatError);
}

TEST_CASE("response loader matches the q-matrix with and without an id column") {
  save_text_file(path_in("rq.csv"), "item,a,b\nu,1,0\nv,0,1\n");
  QMatrix q = load_qmatrix_csv(path_in("rq.csv"));

  save_text_file(path_in("r_plain.csv"), "u,v\n1,0\n0,1\n1,1\n");
  ResponseMatrix plain = load_responses_csv(path_in("r_plain.csv"), q);
  CHECK(plain.examinees() == 3);
  CHECK(plain.examinee_ids == std::vector<std::string>{"1", "2", "3"});
  CHECK(plain.entries(0, 0) == 1);
  CHECK(plain.entries(2, 1) == 1);

  save_text_file(path_in("r_ids.csv"), "examinee,u,v\nalice,1,0\nbob,0,0\n");
  ResponseMatrix with_ids = load_responses_csv(path_in("r_ids.csv"), q);
  CHECK(with_ids.examinee_ids == std::vector<std::string>{"alice", "bob"});
  CHECK(with_ids.entries(1, 1) == 0);
}

TEST_CASE("response loader rejects mismatched or malformed files") {
  save_text_file(path_in("rq2.csv"), "item,a,b\nu,1,0\nv,0,1\n");
  QMatrix q = load_qmatrix_csv(path_in("rq2.csv"));

  save_text_file(path_in("r_wrong_name.csv"), "u,w\n1,0\n");
  CHECK_THROWS_WITH_AS(load_responses_csv(path_in("r_wrong_name.csv"), q),
                       doctest::Contains("'w'"), FormatError);

  save_text_file(path_in("r_wrong_count.csv"), "u\n1\n");
  CHECK_THROWS_WITH_AS(load_responses_csv(path_in("r_wrong_count.csv"), q),
                       doctest::Contains("item columns"), FormatError);

  save_text_file(path_in("r_bad_cell.csv"), "u,v\n1,0\n1,x\n");
  CHECK_THROWS_WITH_AS(load_responses_csv(path_in("r_bad_cell.csv"), q),
                       doctest::Contains("row 3"), FormatError);

  save_text_file(path_in("r_ragged.csv"), "u,v\n1,0,1\n");
  CHECK_THROWS_AS(load_responses_csv(path_in("r_ragged.csv"), q), FormatError);
}

TEST_CASE("fit artifact json round trips the model and parameters exactly") {
  save_text_file(path_in("q_rt.csv"), kQFullCsv);
  QMatrix q = load_qmatrix_csv(path_in("q_rt.csv"));
  ModelSpec spec = ModelSpec::make(q, ModelKind::dina, 1);

  FitResult fr;
  Rng rng(404);
  for (int i = 0; i < spec.items(); ++i) {
    ItemParameterSet ip = make_item_params(spec.catalog, spec.masks[i]);
    ip.intercept = rng.next_uniform(-1.7, -0.9);
    for (int r : spec.masks[i]) ip.effects[r] = rng.next_uniform(0.8, 2.3);
    fr.params.items.push_back(std::move(ip));
  }
  fr.params.structural.coefficients.resize(spec.catalog.count_up_to_level(1));
  for (int s = 0; s < fr.params.structural.coefficients.size(); ++s)
    fr.params.structural.coefficients[s] = rng.next_uniform(-0.4, 0.4);
  {
    ModelTables tables = ModelTables::build(spec);
    refresh_class_probs(tables, &fr.params.structural);
  }

  // A dataset sampled from the draft parameters pins the log-likelihood.
  std::vector<AttributeProfile> profiles;
  ResponseMatrix data;
  const int examinees = 40;
  data.entries.resize(examinees, spec.items());
  for (int e = 0; e < examinees; ++e) {
    const int cls = static_cast<int>(rng.next_u64() % 4u);
    const AttributeProfile prof = profile_from_class(cls, 2);
    for (int i = 0; i < spec.items(); ++i) {
      const double p = item_response_prob(fr.params.items[i], prof, spec.catalog);
      data.entries(e, i) = rng.next_bernoulli(p) ? 1 : 0;
    }
    data.examinee_ids.push_back(std::to_string(e + 1));
  }
  fr.loglik = log_likelihood(spec, fr.params, data);
  fr.converged = true;
  fr.iterations = 57;
  fr.score_max_norm = 3.25e-6;
  fr.warnings = {"synthetic warning"};

  save_fit_json(path_in("fit_rt.json"), spec, fr, examinees, "00ddccbbaa998877");
  FitArtifact art = load_fit_json(path_in("fit_rt.json"));

  CHECK(art.spec.kind == ModelKind::dina);
  CHECK(art.spec.structural_order == 1);
  CHECK(art.spec.q.item_ids == q.item_ids);
  CHECK(art.spec.q.attribute_ids == q.attribute_ids);
  REQUIRE(art.spec.items() == spec.items());
  for (int i = 0; i < spec.items(); ++i) {
    CHECK(art.spec.masks[i] == spec.masks[i]);
    CHECK(art.params.items[i].intercept == fr.params.items[i].intercept);
    for (int r : spec.masks[i]) CHECK(art.params.items[i].effects[r] == fr.params.items[i].effects[r]);
  }
  REQUIRE(art.params.structural.coefficients.size() == fr.params.structural.coefficients.size());
  for (int s = 0; s < fr.params.structural.coefficients.size(); ++s)
    CHECK(art.params.structural.coefficients[s] == fr.params.structural.coefficients[s]);

  CHECK(art.loglik == fr.loglik);
  CHECK(art.converged);
  CHECK(art.iterations == 57);
  CHECK(art.score_max_norm == 3.25e-6);
  CHECK(art.examinees == examinees);
  CHECK(art.warnings == fr.warnings);
  CHECK(art.hash == "00ddccbbaa998877");

  // The loaded parameters reproduce the stored log-likelihood on the data.
  const double recomputed = log_likelihood(art.spec, art.params, data);
  CHECK(recomputed == doctest::Approx(art.loglik).epsilon(1e-12));
}

TEST_CASE("fit artifact loader rejects malformed files") {
  save_text_file(path_in("fit_bad1.json"), "{ not json");
  CHECK_THROWS_AS(load_fit_json(path_in("fit_bad1.json")), FormatError);

  save_text_file(path_in("fit_bad2.json"), "{\"format\": \"something-else\"}\n");
  CHECK_THROWS_AS(load_fit_json(path_in("fit_bad2.json")), FormatError);

  save_text_file(path_in("fit_bad3.json"), "{\"format\": \"dcmmi-fit\"}\n");
  CHECK_THROWS_AS(load_fit_json(path_in("fit_bad3.json")), FormatError);
}

TEST_CASE("mi json artifact carries indices, availability and suggestions") {
  save_text_file(path_in("q_mi.csv"), kQMissingCsv);
  QMatrix q = load_qmatrix_csv(path_in("q_mi.csv"));
  ModelSpec spec = ModelSpec::make(q, ModelKind::lcdm_full, -1);

  MIReport report;
  report.alpha = 0.05;
  report.m = 148;
  report.adjusted_alpha = 0.05 / 148;
  report.critical_value = 11.554992861939493;

  ModificationIndex hit;
  hit.candidate = {CandidateKind::qmatrix, 4, 0b10u, ScoreConstraint::positive, {}};
  hit.t_s = 37.5;
  hit.p_value = 4.6e-10;
  hit.s2 = 3.2;
  hit.significant_raw = true;
  hit.significant_adjusted = true;
  report.indices.push_back(hit);

  ModificationIndex dead;
  dead.candidate = {CandidateKind::model, 5, 0b11u, ScoreConstraint::positive, {}};
  dead.unavailable = true;
  dead.unavailable_reason = "information block not invertible";
  report.indices.push_back(dead);

  SuggestedChange change;
  change.candidate = hit.candidate;
  change.action = "set q[i5,a2] -> 1 and free lambda_{5,1,(2)}";
  report.suggested_changes.push_back(change);

  save_mi_json(path_in("mi_rt.json"), report, spec, "1122334455667788");

  nlohmann::json j = nlohmann::json::parse(load_text_file(path_in("mi_rt.json")));
  CHECK(j.at("format") == "dcmmi-mi");
  CHECK(j.at("config_hash") == "1122334455667788");
  CHECK(j.at("alpha").get<double>() == 0.05);
  CHECK(j.at("m").get<int>() == 148);
  CHECK(j.at("critical_value").get<double>() ==
        doctest::Approx(11.554992861939493).epsilon(1e-14));
  REQUIRE(j.at("indices").size() == 2);

  const auto& rec = j.at("indices")[0];
  CHECK(rec.at("item") == "i5");
  CHECK(rec.at("kind") == "qmatrix");
  CHECK(rec.at("effect") == "2");
  CHECK(rec.at("constraint") == "positive");
  CHECK(rec.at("display") == "lambda_{i5,1,(2)}");
  CHECK(rec.at("t_s").get<double>() == 37.5);
  CHECK(rec.at("significant_adjusted").get<bool>());
  CHECK_FALSE(rec.at("unavailable").get<bool>());

  const auto& na = j.at("indices")[1];
  CHECK(na.at("unavailable").get<bool>());
  CHECK(na.at("reason") == "information block not invertible");
  CHECK(na.at("effect") == "1x2");

  REQUIRE(j.at("suggested_changes").size() == 1);
  CHECK(j.at("suggested_changes")[0].at("action").get<std::string>().find("q[i5,a2]") !=
        std::string::npos);
}

TEST_CASE("classification csv lists modal class, bits and mastery marginals") {
  QMatrix q;
  q.entries.resize(2, 2);
  q.entries << 1, 0, 0, 1;
  q.item_ids = {"i1", "i2"};
  q.attribute_ids = {"a1", "a2"};
  ModelSpec spec = ModelSpec::make(q, ModelKind::lcdm_full, -1);

  Matrix post(3, 4);
  post << 0.1, 0.2, 0.3, 0.4,   // modal class 3 (both attributes)
      0.25, 0.25, 0.25, 0.25,   // exact tie: lowest class index wins
      0.7, 0.1, 0.1, 0.1;
  ResponseMatrix data;
  data.examinee_ids = {"p1", "p2", "p3"};

  save_classify_csv(path_in("classify.csv"), spec, post, data);
  const std::string text = load_text_file(path_in("classify.csv"));
  CHECK(text ==
        "examinee,class,mastered_a1,mastered_a2,p_class,p_mastery_a1,p_mastery_a2\n"
        "p1,3,1,1,0.400000,0.600000,0.700000\n"
        "p2,0,0,0,0.250000,0.500000,0.500000\n"
        "p3,0,0,0,0.700000,0.200000,0.200000\n");
}

TEST_CASE("argument parsing validates flags and keeps hashes path-independent") {
  using cli::RunConfig;
  using cli::parse_and_validate;

  RunConfig a = parse_and_validate(
      {"fit", "--responses", "r.csv", "--qmatrix", "q.csv", "--out", "f.json"});
  CHECK(a.subcommand == "fit");
  CHECK(a.model == "lcdm");
  CHECK(a.structural_order == -1);

  RunConfig b = parse_and_validate({"fit", "--responses", "elsewhere.csv", "--qmatrix",
                                    "other.csv", "--out", "g.json", "--threads", "7"});
  CHECK(b.threads == 7);
  // Paths and parallelism are not result-determining.
  CHECK(a.hash_tokens == b.hash_tokens);

  RunConfig c = parse_and_validate({"fit", "--responses", "r.csv", "--qmatrix", "q.csv",
                                    "--out", "f.json", "--model", "dina"});
  CHECK(c.hash_tokens != a.hash_tokens);

  RunConfig m = parse_and_validate({"mi", "--fit", "f.json", "--responses", "r.csv", "--out",
                                    "m.json", "--alpha", "0.01", "--m-override", "148"});
  CHECK(m.alpha == 0.01);
  REQUIRE(m.m_override.has_value());
  CHECK(*m.m_override == 148);
  RunConfig m2 = parse_and_validate(
      {"mi", "--fit", "f.json", "--responses", "r.csv", "--out", "m.json"});
  CHECK_FALSE(m2.m_override.has_value());
  CHECK(m2.alpha == 0.05);
  CHECK(m2.candidates == "qmatrix");

  RunConfig s = parse_and_validate({"simulate", "--study", "power-q", "--effect", "smaller",
                                    "--examinees", "500", "--reps", "3", "--seed", "9",
                                    "--out", "s.csv"});
  CHECK(s.study == "power-q");
  CHECK(s.effect == "smaller");
  CHECK(s.seed == 9);

  // The environment variable feeds --threads.
  setenv("DCMMI_THREADS", "5", 1);
  RunConfig env_cfg = parse_and_validate(
      {"classify", "--fit", "f.json", "--responses", "r.csv", "--out", "c.csv"});
  unsetenv("DCMMI_THREADS");
  CHECK(env_cfg.threads == 5);

  CHECK_THROWS_AS(parse_and_validate({}), ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"frobnicate"}), ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"fit", "--responses", "r.csv"}), ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"fit", "--responses", "r.csv", "--qmatrix", "q.csv",
                                      "--out", "f.json", "--model", "bogus"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"fit", "--responses", "r.csv", "--qmatrix", "q.csv",
                                      "--out", "f.json", "--model", "custom"}),
                  ConfigError);  // custom needs --mask
  CHECK_THROWS_AS(parse_and_validate({"fit", "--responses", "r.csv", "--qmatrix", "q.csv",
                                      "--out", "f.json", "--mask", "m.json"}),
                  ConfigError);  // --mask needs custom
  CHECK_THROWS_AS(parse_and_validate({"fit", "--responses", "r.csv", "--qmatrix", "q.csv",
                                      "--out", "f.json", "--structural-order", "0"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"mi", "--fit", "f", "--responses", "r", "--out", "m",
                                      "--alpha", "0.7"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"mi", "--fit", "f", "--responses", "r", "--out", "m",
                                      "--m-override", "0"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"mi", "--fit", "f", "--responses", "r", "--out", "m",
                                      "--max-order", "0"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"simulate", "--study", "type1-q", "--out", "s.csv",
                                      "--reps", "0"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_and_validate({"classify", "--fit", "f", "--responses", "r", "--out",
                                      "c", "--threads", "-2"}),
                  ConfigError);
}

TEST_CASE("cli exit codes follow the usage/format contract") {
  REQUIRE_FALSE(cli_binary().empty());

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("fit --help") == 0);
  CHECK(run_cli("") == 2);                       // a subcommand is required
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
  CHECK(run_cli("fit --responses only.csv") == 2);  // missing required flags
  CHECK(run_cli("fit --responses r.csv --qmatrix q.csv --out f.json --bogus-flag 1") == 2);
  CHECK(run_cli("mi --fit f.json --responses r.csv --out m.json --alpha 0.9") == 2);

  // Well-formed usage against a missing input file is a format error.
  CHECK(run_cli("fit --responses " + path_in("missing_r.csv") + " --qmatrix " +
                path_in("missing_q.csv") + " --out " + path_in("never.json")) == 3);

  // A fit artifact that is not JSON is a format error too.
  save_text_file(path_in("not_a_fit.json"), "plainly not json\n");
  save_text_file(path_in("tiny_r.csv"), "u\n1\n0\n");
  CHECK(run_cli("mi --fit " + path_in("not_a_fit.json") + " --responses " +
                path_in("tiny_r.csv") + " --out " + path_in("never_mi.json")) == 3);
}

TEST_CASE("cli pipeline points at the omitted effect and stays reproducible") {
  REQUIRE_FALSE(cli_binary().empty());
  const std::string responses = write_pipeline_dataset(1600, 20240817);

  // Fit the deliberately under-specified measurement model.
  std::string fit_stdout;
  const std::string fit_cmd = "fit --responses " + responses + " --qmatrix " +
                              path_in("q_missing.csv") + " --model lcdm --out " +
                              path_in("pipeline_fit.json");
  REQUIRE(run_cli(fit_cmd, &fit_stdout) == 0);
  CHECK(fit_stdout.find("loglik") != std::string::npos);
  CHECK(fit_stdout.find("converged") != std::string::npos);

  // The artifact reproduces its own log-likelihood from the stored
  // parameters, and carries a well-formed configuration hash.
  FitArtifact art = load_fit_json(path_in("pipeline_fit.json"));
  CHECK(art.hash.size() == 16);
  CHECK(art.converged);
  ResponseMatrix data = load_responses_csv(responses, art.spec.q);
  const double recomputed = log_likelihood(art.spec, art.params, data);
  CHECK(recomputed == doctest::Approx(art.loglik).epsilon(1e-9));

  // Refitting the same inputs produces the identical artifact byte for byte.
  REQUIRE(run_cli("fit --responses " + responses + " --qmatrix " + path_in("q_missing.csv") +
                  " --model lcdm --out " + path_in("pipeline_fit2.json")) == 0);
  CHECK(load_text_file(path_in("pipeline_fit.json")) ==
        load_text_file(path_in("pipeline_fit2.json")));

  // Modification indices with the documented Bonferroni family of 148.
  const std::string mi_cmd = "mi --fit " + path_in("pipeline_fit.json") + " --responses " +
                             responses + " --candidates both --max-order 2 --alpha 0.05" +
                             " --m-override 148 --out " + path_in("pipeline_mi.json") +
                             " --table " + path_in("pipeline_mi.txt");
  std::string mi_stdout;
  REQUIRE(run_cli(mi_cmd, &mi_stdout) == 0);

  const std::string table = load_text_file(path_in("pipeline_mi.txt"));
  CHECK(table.find("11.55") != std::string::npos);
  CHECK(table.find("lambda_{i5,1,(2)}") != std::string::npos);
  CHECK(mi_stdout.find("11.55") != std::string::npos);  // table echoed to stdout

  nlohmann::json mi = nlohmann::json::parse(load_text_file(path_in("pipeline_mi.json")));
  CHECK(mi.at("m").get<int>() == 148);
  double best_t = -1.0;
  std::string best_item, best_effect;
  bool omitted_main_adjusted_significant = false;
  for (const auto& rec : mi.at("indices")) {
    if (rec.at("unavailable").get<bool>()) continue;
    const double t = rec.at("t_s").get<double>();
    if (t > best_t) {
      best_t = t;
      best_item = rec.at("item").get<std::string>();
      best_effect = rec.at("effect").get<std::string>();
    }
    if (rec.at("item") == "i5" && rec.at("effect") == "2")
      omitted_main_adjusted_significant = rec.at("significant_adjusted").get<bool>();
  }
  // The single mis-specified entry owns the largest index by a wide margin.
  CHECK(best_item == "i5");
  CHECK(best_t > 11.554992861939493);
  CHECK(omitted_main_adjusted_significant);
  REQUIRE_FALSE(mi.at("suggested_changes").empty());
  CHECK(mi.at("suggested_changes")[0].at("action").get<std::string>().find("q[i5") !=
        std::string::npos);

  // Classification covers every examinee with the attribute marginals.
  REQUIRE(run_cli("classify --fit " + path_in("pipeline_fit.json") + " --responses " +
                  responses + " --out " + path_in("pipeline_classes.csv")) == 0);
  const std::string classes = load_text_file(path_in("pipeline_classes.csv"));
  CHECK(classes.rfind("examinee,class,mastered_a1,mastered_a2,p_class,p_mastery_a1,p_mastery_a2\n",
                      0) == 0);
  std::size_t rows = 0;
  for (char ch : classes)
    if (ch == '\n') ++rows;
  CHECK(rows == 1600 + 1);
  CHECK(classes.find("\n1,") != std::string::npos);  // 1-based ids filled in
}

TEST_CASE("cli simulate artifacts are byte-identical across thread counts") {
  REQUIRE_FALSE(cli_binary().empty());

  const std::string base = "simulate --study type1-q --effect large --examinees 150 --reps 2"
                           " --seed 11";
  REQUIRE(run_cli(base + " --out " + path_in("study_a.csv") + " --threads 1") == 0);
  REQUIRE(run_cli(base + " --out " + path_in("study_b.csv") + " --threads 3") == 0);
  // Same run again with the thread count supplied by the environment.
  REQUIRE(run_cli(base + " --out " + path_in("study_c.csv"),
                  nullptr, "DCMMI_THREADS=2 ") == 0);

  const std::string a = load_text_file(path_in("study_a.csv"));
  CHECK(a == load_text_file(path_in("study_b.csv")));
  CHECK(a == load_text_file(path_in("study_c.csv")));
  CHECK(load_text_file(path_in("study_a.csv.manifest.json")) ==
        load_text_file(path_in("study_b.csv.manifest.json")));

  // The seed is result-determining, so a different one changes the output.
  REQUIRE(run_cli("simulate --study type1-q --effect large --examinees 150 --reps 2 --seed 12"
                  " --out " + path_in("study_d.csv") + " --threads 3") == 0);
  CHECK(a != load_text_file(path_in("study_d.csv")));

  // The manifest records the design and the seed derivation scheme.
  nlohmann::json manifest =
      nlohmann::json::parse(load_text_file(path_in("study_a.csv.manifest.json")));
  CHECK(manifest.at("format") == "dcmmi-study-manifest");
  CHECK(manifest.at("study") == "type1-q");
  CHECK(manifest.at("effect_size") == "large");
  CHECK(manifest.at("design").at("examinees").get<int>() == 150);
  CHECK(manifest.at("design").at("seed").get<std::uint64_t>() == 11);
  CHECK(manifest.at("alphas").size() == 5);
  CHECK(manifest.at("seed_scheme").get<std::string>().find("mix") != std::string::npos);
}
