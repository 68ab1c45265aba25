#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcmmi {
namespace cli {

// Fully validated invocation; one struct for all subcommands, with only the
// relevant fields populated.
struct RunConfig {
  std::string subcommand;  // fit | mi | classify | simulate

  // fit
  std::string responses_path;
  std::string qmatrix_path;
  std::string model = "lcdm";
  std::string mask_path;  // custom model only
  int structural_order = -1;  // -1 = saturated
  int max_iterations = 2000;
  int restarts = 0;

  // mi
  std::string fit_path;
  std::string candidates = "qmatrix";  // qmatrix | model | both
  int max_order = 2;
  double alpha = 0.05;
  std::optional<int> m_override;
  std::string table_path;

  // simulate
  std::string study;
  std::string effect = "large";
  int examinees = 2500;
  int replications = 200;
  std::uint64_t seed = 1;
  std::string split_rule = "equal-thirds";
  std::string manifest_path;

  // shared
  std::string out_path;
  int threads = 0;  // 0 = all cores
  // Result-determining tokens, hashed into artifacts (threads and paths
  // excluded so reruns with different parallelism match byte for byte).
  std::vector<std::string> hash_tokens;
};

// Throws ConfigError on usage problems.  A help request returns a config
// with subcommand "help" after printing to stdout.
RunConfig parse_and_validate(const std::vector<std::string>& args);

// Executes a validated config; returns the process exit code.
int run(const RunConfig& config);

// Full entry point: parse, run, and map errors to the exit-code contract
// (0 success, 2 usage, 3 file format, 4 numerical).
int main(int argc, char** argv);

}  // namespace cli
}  // namespace dcmmi
