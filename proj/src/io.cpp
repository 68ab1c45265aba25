#include "dcmmi/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dcmmi/errors.hpp"

namespace dcmmi {

using json = nlohmann::ordered_json;

const char* version_string() { return "0.1.0"; }

std::string config_hash(const std::vector<std::string>& tokens) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& t : tokens) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;  // token separator
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::uint8_t parse_binary_cell(const std::string& raw, const std::string& context) {
  const std::string v = trim(raw);
  if (v == "0") return 0;
  if (v == "1") return 1;
  throw FormatError(context + ": expected 0 or 1, found '" + raw + "'");
}

}  // namespace

QMatrix load_qmatrix_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 2) throw FormatError("Q-matrix file " + path + ": need header and rows");

  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2)
    throw FormatError("Q-matrix file " + path + ": header needs an item column and attributes");

  QMatrix q;
  for (std::size_t a = 1; a < header.size(); ++a) {
    const std::string id = trim(header[a]);
    if (id.empty()) throw FormatError("Q-matrix file " + path + ": empty attribute id in header");
    q.attribute_ids.push_back(id);
  }

  const int attrs = static_cast<int>(q.attribute_ids.size());
  q.entries.resize(static_cast<int>(lines.size()) - 1, attrs);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (static_cast<int>(fields.size()) != attrs + 1)
      throw FormatError("Q-matrix file " + path + ": row " + std::to_string(r + 1) +
                        " has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(attrs + 1));
    const std::string id = trim(fields[0]);
    if (id.empty())
      throw FormatError("Q-matrix file " + path + ": empty item id in row " +
                        std::to_string(r + 1));
    q.item_ids.push_back(id);
    for (int a = 0; a < attrs; ++a)
      q.entries(static_cast<int>(r) - 1, a) = parse_binary_cell(
          fields[a + 1], "Q-matrix file " + path + ", item " + id);
  }
  q.validate();
  return q;
}

ResponseMatrix load_responses_csv(const std::string& path, const QMatrix& q) {
  const auto lines = read_lines(path);
  if (lines.size() < 2) throw FormatError("response file " + path + ": need header and rows");

  auto header = split_csv_line(lines[0]);
  for (auto& h : header) h = trim(h);
  bool has_id_column = !header.empty() && header[0] == "examinee";
  const std::size_t first_item = has_id_column ? 1 : 0;

  if (header.size() - first_item != static_cast<std::size_t>(q.items()))
    throw FormatError("response file " + path + ": header has " +
                      std::to_string(header.size() - first_item) + " item columns, Q-matrix has " +
                      std::to_string(q.items()));
  for (int i = 0; i < q.items(); ++i)
    if (header[first_item + i] != q.item_ids[i])
      throw FormatError("response file " + path + ": header column '" +
                        header[first_item + i] + "' does not match Q-matrix item '" +
                        q.item_ids[i] + "'");

  ResponseMatrix data;
  data.entries.resize(static_cast<int>(lines.size()) - 1, q.items());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != header.size())
      throw FormatError("response file " + path + ": row " + std::to_string(r + 1) +
                        " has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    data.examinee_ids.push_back(has_id_column ? trim(fields[0]) : std::to_string(r));
    for (int i = 0; i < q.items(); ++i)
      data.entries(static_cast<int>(r) - 1, i) =
          parse_binary_cell(fields[first_item + i],
                            "response file " + path + ", row " + std::to_string(r + 1));
  }
  data.validate(q.items());
  return data;
}

void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path);
  out << text;
}

std::string load_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string subset_label(const EffectCatalog& catalog, int rank) {
  return catalog.label_of(rank);
}

json qmatrix_to_json(const QMatrix& q) {
  json j;
  j["attributes"] = q.attribute_ids;
  json items = json::array();
  for (int i = 0; i < q.items(); ++i) {
    json row;
    row["id"] = q.item_ids[i];
    std::vector<int> cells;
    for (int a = 0; a < q.attributes(); ++a) cells.push_back(q.entries(i, a));
    row["q"] = cells;
    items.push_back(std::move(row));
  }
  j["items"] = std::move(items);
  return j;
}

QMatrix qmatrix_from_json(const json& j) {
  QMatrix q;
  q.attribute_ids = j.at("attributes").get<std::vector<std::string>>();
  const auto& items = j.at("items");
  if (!items.is_array() || items.empty()) throw FormatError("fit file: empty Q-matrix");
  q.entries.resize(static_cast<int>(items.size()), static_cast<int>(q.attribute_ids.size()));
  int r = 0;
  for (const auto& row : items) {
    q.item_ids.push_back(row.at("id").get<std::string>());
    const auto cells = row.at("q").get<std::vector<int>>();
    if (cells.size() != q.attribute_ids.size())
      throw FormatError("fit file: Q-matrix row length mismatch for item " + q.item_ids.back());
    for (std::size_t a = 0; a < cells.size(); ++a) {
      if (cells[a] != 0 && cells[a] != 1)
        throw FormatError("fit file: non-binary Q-matrix cell for item " + q.item_ids.back());
      q.entries(r, static_cast<int>(a)) = static_cast<std::uint8_t>(cells[a]);
    }
    ++r;
  }
  q.validate();
  return q;
}

}  // namespace

void save_fit_json(const std::string& path, const ModelSpec& spec, const FitResult& fit,
                   int examinees, const std::string& hash) {
  json j;
  j["format"] = "dcmmi-fit";
  j["version"] = version_string();
  j["config_hash"] = hash;
  j["model"] = {{"kind", model_kind_name(spec.kind)},
                {"structural_order", spec.structural_order}};
  j["qmatrix"] = qmatrix_to_json(spec.q);

  json masks;
  for (int i = 0; i < spec.items(); ++i) {
    std::vector<std::string> labels;
    for (int r : spec.masks[i]) labels.push_back(subset_label(spec.catalog, r));
    masks[spec.q.item_ids[i]] = labels;
  }
  j["masks"] = std::move(masks);

  json item_params;
  for (int i = 0; i < spec.items(); ++i) {
    json p;
    p["intercept"] = fit.params.items[i].intercept;
    json effects;
    for (int r : spec.masks[i])
      effects[subset_label(spec.catalog, r)] = fit.params.items[i].effects[r];
    p["effects"] = std::move(effects);
    item_params[spec.q.item_ids[i]] = std::move(p);
  }
  json structural;
  {
    int at = 0;
    for (int r = 0; r < spec.catalog.count(); ++r)
      if (spec.catalog.level_of(r) <= spec.structural_order)
        structural[subset_label(spec.catalog, r)] = fit.params.structural.coefficients[at++];
  }
  j["parameters"] = {{"items", std::move(item_params)}, {"structural", std::move(structural)}};

  const int p_count = free_parameter_count(spec);
  j["loglik"] = fit.loglik;
  j["examinees"] = examinees;
  j["parameter_count"] = p_count;
  j["aic"] = aic(fit.loglik, p_count);
  j["bic"] = bic(fit.loglik, p_count, examinees);
  j["convergence"] = {{"converged", fit.converged},
                      {"iterations", fit.iterations},
                      {"score_max_norm", fit.score_max_norm}};
  j["warnings"] = fit.warnings;
  save_text_file(path, j.dump(2) + "\n");
}

FitArtifact load_fit_json(const std::string& path) {
  json j;
  try {
    j = json::parse(load_text_file(path));
  } catch (const json::parse_error& err) {
    throw FormatError("fit file " + path + ": " + err.what());
  }
  try {
    if (j.at("format").get<std::string>() != "dcmmi-fit")
      throw FormatError("fit file " + path + ": unexpected format tag");

    FitArtifact art;
    QMatrix q = qmatrix_from_json(j.at("qmatrix"));
    const int structural_order = j.at("model").at("structural_order").get<int>();
    const ModelKind kind = model_kind_from_name(j.at("model").at("kind").get<std::string>());

    EffectCatalog catalog(q.attributes());
    std::vector<std::vector<int>> masks;
    const json& jmasks = j.at("masks");
    for (int i = 0; i < q.items(); ++i) {
      std::vector<int> mask;
      for (const auto& label : jmasks.at(q.item_ids[i]))
        mask.push_back(catalog.rank_from_label(label.get<std::string>()));
      masks.push_back(std::move(mask));
    }
    art.spec = ModelSpec::make_custom(std::move(q), std::move(masks), structural_order);
    art.spec.kind = kind;  // preserve the template tag for candidate enumeration

    const json& jitems = j.at("parameters").at("items");
    for (int i = 0; i < art.spec.items(); ++i) {
      const json& p = jitems.at(art.spec.q.item_ids[i]);
      ItemParameterSet ip = make_item_params(art.spec.catalog, art.spec.masks[i]);
      ip.intercept = p.at("intercept").get<double>();
      for (int r : art.spec.masks[i])
        ip.effects[r] = p.at("effects").at(subset_label(art.spec.catalog, r)).get<double>();
      art.params.items.push_back(std::move(ip));
    }
    const json& jstruct = j.at("parameters").at("structural");
    const int s_count = art.spec.catalog.count_up_to_level(art.spec.structural_order);
    art.params.structural.coefficients.resize(s_count);
    {
      int at = 0;
      for (int r = 0; r < art.spec.catalog.count(); ++r)
        if (art.spec.catalog.level_of(r) <= art.spec.structural_order)
          art.params.structural.coefficients[at++] =
              jstruct.at(subset_label(art.spec.catalog, r)).get<double>();
    }
    ModelTables tables = ModelTables::build(art.spec);
    refresh_class_probs(tables, &art.params.structural);

    art.loglik = j.at("loglik").get<double>();
    if (!std::isfinite(art.loglik)) throw FormatError("fit file " + path + ": non-finite loglik");
    art.examinees = j.at("examinees").get<int>();
    art.converged = j.at("convergence").at("converged").get<bool>();
    art.iterations = j.at("convergence").at("iterations").get<int>();
    art.score_max_norm = j.at("convergence").at("score_max_norm").get<double>();
    if (j.contains("warnings")) art.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("config_hash")) art.hash = j.at("config_hash").get<std::string>();
    return art;
  } catch (const json::exception& err) {
    throw FormatError("fit file " + path + ": " + err.what());
  }
}

void save_mi_json(const std::string& path, const MIReport& report, const ModelSpec& spec,
                  const std::string& hash) {
  json j;
  j["format"] = "dcmmi-mi";
  j["version"] = version_string();
  j["config_hash"] = hash;
  j["alpha"] = report.alpha;
  j["m"] = report.m;
  j["adjusted_alpha"] = report.adjusted_alpha;
  if (std::isfinite(report.critical_value)) j["critical_value"] = report.critical_value;

  json indices = json::array();
  for (const auto& mi : report.indices) {
    json rec;
    rec["item"] = spec.q.item_ids[mi.candidate.item];
    rec["kind"] = mi.candidate.kind == CandidateKind::qmatrix ? "qmatrix" : "model";
    std::string label;
    for (int a = 0; a < spec.attributes(); ++a)
      if (mi.candidate.attribute_set & (1u << a)) {
        if (!label.empty()) label += 'x';
        label += std::to_string(a + 1);
      }
    rec["effect"] = label;
    rec["constraint"] = mi.candidate.constraint == ScoreConstraint::positive
                            ? "positive"
                            : "greater_than_minus_k";
    rec["display"] = candidate_label(mi.candidate, spec);
    if (mi.unavailable) {
      rec["unavailable"] = true;
      rec["reason"] = mi.unavailable_reason;
    } else {
      rec["unavailable"] = false;
      rec["k"] = mi.k;
      rec["s2"] = mi.s2;
      rec["t_s"] = mi.t_s;
      rec["p_value"] = mi.p_value;
      rec["boundary_case"] = mi.boundary_case;
      rec["significant"] = mi.significant_raw;
      rec["significant_adjusted"] = mi.significant_adjusted;
    }
    indices.push_back(std::move(rec));
  }
  j["indices"] = std::move(indices);

  json changes = json::array();
  for (const auto& change : report.suggested_changes) {
    json rec;
    rec["display"] = candidate_label(change.candidate, spec);
    rec["action"] = change.action;
    if (!change.note.empty()) rec["note"] = change.note;
    changes.push_back(std::move(rec));
  }
  j["suggested_changes"] = std::move(changes);
  save_text_file(path, j.dump(2) + "\n");
}

void save_classify_csv(const std::string& path, const ModelSpec& spec,
                       const Matrix& posteriors, const ResponseMatrix& data) {
  const int examinees = static_cast<int>(posteriors.rows());
  const int attrs = spec.attributes();

  FitResult shim;
  shim.posteriors = posteriors;
  const auto profiles = classify(shim);

  // Marginal mastery probability per attribute: posterior mass over classes
  // with that attribute mastered.
  ModelTables tables = ModelTables::build(spec);
  Matrix mastery = posteriors * tables.profile_bits;

  std::string out = "examinee,class";
  for (int a = 0; a < attrs; ++a) out += ",mastered_" + spec.q.attribute_ids[a];
  out += ",p_class";
  for (int a = 0; a < attrs; ++a) out += ",p_mastery_" + spec.q.attribute_ids[a];
  out += "\n";

  char buf[64];
  for (int e = 0; e < examinees; ++e) {
    out += (e < static_cast<int>(data.examinee_ids.size()) ? data.examinee_ids[e]
                                                           : std::to_string(e + 1));
    out += "," + std::to_string(profiles[e].class_index);
    for (int a = 0; a < attrs; ++a) out += "," + std::to_string(profiles[e].bits[a]);
    std::snprintf(buf, sizeof(buf), ",%.6f", posteriors(e, profiles[e].class_index));
    out += buf;
    for (int a = 0; a < attrs; ++a) {
      std::snprintf(buf, sizeof(buf), ",%.6f", mastery(e, a));
      out += buf;
    }
    out += "\n";
  }
  save_text_file(path, out);
}

void save_study_csv(const std::string& path, const StudyResult& result,
                    const std::string& hash) {
  std::string out = "# dcmmi ";
  out += version_string();
  out += " config ";
  out += hash;
  out += "\n";
  out += study_csv(result);
  save_text_file(path, out);
}

void save_study_manifest(const std::string& path, const StudyResult& result,
                         const SimDesign& design, const std::vector<double>& alphas,
                         const std::vector<int>& sample_sizes, const std::string& hash) {
  json j;
  j["format"] = "dcmmi-study-manifest";
  j["version"] = version_string();
  j["config_hash"] = hash;
  j["study"] = result.study;
  j["effect_size"] = result.effect_size;
  j["design"] = {{"items", design.items},
                 {"attributes", design.attributes},
                 {"tetrachoric_rho", design.tetrachoric_rho},
                 {"p_nonmaster", design.p_nonmaster},
                 {"p_master", design.p_master},
                 {"examinees", design.examinees},
                 {"replications", design.replications},
                 {"seed", design.seed},
                 {"split_rule", design.split_rule}};
  j["alphas"] = alphas;
  j["sample_sizes"] = sample_sizes;
  j["seed_scheme"] = "replication r at design point p uses stream mix(mix(seed, p), r)";
  j["excluded"] = result.excluded;
  j["flagged_for_exclusions"] = result.flagged;
  j["zero_statistics"] = result.zero_statistics;
  j["total_statistics"] = result.total_statistics;
  save_text_file(path, j.dump(2) + "\n");
}

}  // namespace dcmmi
