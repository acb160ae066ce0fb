#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sms/affinity.hpp"
#include "sms/openworld.hpp"
#include "sms/policy.hpp"
#include "sms/providers.hpp"
#include "sms/taxonomy.hpp"

namespace sms {

// Directory holding taxonomies/ and fixtures/; $SMS_DATA_DIR overrides the
// build-time default.
std::string data_dir();
std::string taxonomy_path_for(const std::string& domain);

struct CorpusScene {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  Scene scene;
};

struct Corpus {
  std::size_t n_objects = 0;
  std::vector<CorpusScene> scenes;
  std::size_t attempts = 0;
  std::size_t rejected = 0;
  std::vector<std::string> rejection_log;  // "attempt <k> seed <s>: <reason>"

  std::uint64_t checksum() const;
};

// Draws scene seeds from a stream keyed by (seed, n) until `count` scenes
// are accepted. Gives up after `max_attempts` draws.
Corpus generate_corpus(const Taxonomy& tax, std::size_t n_objects, std::size_t count,
                       std::uint64_t seed, const SceneGenConfig& base = {},
                       const ShelfSpec& shelf = {}, std::size_t max_attempts = 0);

enum class FailureConvention { CountAsMax, Exclude };

struct MethodSpec {
  std::string name;  // spatial-only | sms-oracle | sms-file:<path> | sms-embedding
  bool semantic() const { return name != "spatial-only"; }
};

struct ExperimentConfig {
  std::string domain = "pharmacy";
  std::string taxonomy_path;  // empty: the bundled taxonomy for the domain
  std::vector<std::size_t> n_objects{12, 15, 18, 21};
  std::size_t scenes_per_n = 200;
  std::vector<MethodSpec> methods{{"spatial-only"}, {"sms-oracle"}};
  PolicyKind policy = PolicyKind::DAR;
  std::vector<double> noise_p{0.0};
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency
  int grid_k = kDefaultGridK;
  double sigma_bins = kDefaultSigmaBins;
  double visibility_x = 0.01;
  FailureConvention failures = FailureConvention::CountAsMax;
  std::optional<AffinityProviderSpec> embedding;  // for sms-embedding

  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Sample standard deviation over sqrt(count); stderr 0 for fewer than two values.
MeanStderr mean_stderr(const std::vector<double>& values);

double delta_pct(double baseline_mean, double method_mean);

struct MetricsRow {
  std::string method;
  std::string domain;
  std::string n;  // object count, or "avg"
  std::size_t successes = 0;
  std::size_t total = 0;
  double mean_actions = 0.0;
  double stderr_actions = 0.0;
  double delta_pct = 0.0;
  // Same statistics over successful rollouts only.
  double mean_success_only = 0.0;
  double stderr_success_only = 0.0;
};

struct BenchResult {
  std::vector<MetricsRow> rows;
  std::vector<std::string> log;
};

BenchResult run_bench(const ExperimentConfig& cfg);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string metrics_table(const std::vector<MetricsRow>& rows, bool verbose);

// Builds a method's matrix over the taxonomy labels.
AffinityMatrix method_affinity(const MethodSpec& method, const Taxonomy& tax,
                               const ExperimentConfig& cfg);

struct AffinityEval {
  JsdScore score;
  std::size_t labels = 0;
};

// Candidate rows are matched to the truth by label; label sets must agree.
AffinityEval eval_affinity(const AffinityMatrix& candidate, const AffinityMatrix& truth);

struct OpenWorldEval {
  std::vector<OpenWorldRow> rows;
  std::vector<OpenWorldSummary> summary;
};

// Every *.json fixture in `dir`, sorted by file name.
OpenWorldEval eval_openworld(const std::string& dir, const AffinityMatrix* affinity,
                             const ThresholdRule& rule = {});

}  // namespace sms
