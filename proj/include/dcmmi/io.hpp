#pragma once

#include <string>
#include <vector>

#include "dcmmi/estimation.hpp"
#include "dcmmi/mod_indices.hpp"
#include "dcmmi/sim.hpp"

namespace dcmmi {

const char* version_string();

// FNV-1a over the canonical token sequence; stable identity tag embedded
// in every artifact.
std::string config_hash(const std::vector<std::string>& tokens);

// Q-matrix CSV: header "item,<attr id>,..."; one row per item with its id in
// the first column and 0/1 cells after.  Throws FormatError with row/column
// context on malformed input.
QMatrix load_qmatrix_csv(const std::string& path);

// Response CSV: header of item ids matching the Q-matrix order, one examinee
// per row, cells 0/1.  An optional leading "examinee" column supplies ids;
// otherwise rows are numbered from 1.
ResponseMatrix load_responses_csv(const std::string& path, const QMatrix& q);

void save_text_file(const std::string& path, const std::string& text);
std::string load_text_file(const std::string& path);

void save_fit_json(const std::string& path, const ModelSpec& spec, const FitResult& fit,
                   int examinees, const std::string& hash);

struct FitArtifact {
  ModelSpec spec;
  ParameterSet params;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double score_max_norm = 0.0;
  int examinees = 0;
  std::vector<std::string> warnings;
  std::string hash;
};

FitArtifact load_fit_json(const std::string& path);

void save_mi_json(const std::string& path, const MIReport& report, const ModelSpec& spec,
                  const std::string& hash);

// Per-examinee classification: modal class, its profile bits, the modal
// posterior probability, and marginal mastery probabilities per attribute.
void save_classify_csv(const std::string& path, const ModelSpec& spec,
                       const Matrix& posteriors, const ResponseMatrix& data);

void save_study_csv(const std::string& path, const StudyResult& result,
                    const std::string& hash);

void save_study_manifest(const std::string& path, const StudyResult& result,
                         const SimDesign& design, const std::vector<double>& alphas,
                         const std::vector<int>& sample_sizes, const std::string& hash);

}  // namespace dcmmi
