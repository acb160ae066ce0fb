#pragma once

// Affinity providers: remote scorer/embedder clients speaking a small JSON
// protocol, an on-disk memo, seeded scripted scorers for tests, and fixture
// loaders.
//
// Wire protocol (POST, application/json):
//   scorer:   {"prompt": "...", "completion": "<target>"} -> {"logprob": <real>}
//   embedder: {"text": "..."}                              -> {"vector": [...]}

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sms/affinity.hpp"
#include "sms/taxonomy.hpp"

namespace sms {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";

  // Accepts http://host[:port][/path].
  static Endpoint parse(const std::string& url);
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  std::chrono::milliseconds timeout{10000};
};

class RemoteScorer : public CompletionScorer {
 public:
  explicit RemoteScorer(Endpoint endpoint, RetryPolicy retry = {});
  double logprob(const std::string& prompt, const std::string& completion) override;

 private:
  Endpoint endpoint_;
  RetryPolicy retry_;
};

class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(Endpoint endpoint, RetryPolicy retry = {});
  std::vector<double> embed(const std::string& text) override;

 private:
  Endpoint endpoint_;
  RetryPolicy retry_;
};

// POSTs `body` with retries and exponential backoff; Provider error after the
// last attempt.
nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body, const RetryPolicy& retry);

// Caches another scorer's answers in a JSON-lines file keyed by
// (prompt, completion). Existing entries are loaded at construction.
class MemoScorer : public CompletionScorer {
 public:
  MemoScorer(CompletionScorer& inner, std::string path);
  double logprob(const std::string& prompt, const std::string& completion) override;
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  CompletionScorer& inner_;
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, double> memo_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Deterministic log-probability in [-10, -1] derived from a seeded hash.
class ScriptedScorer : public CompletionScorer {
 public:
  explicit ScriptedScorer(std::uint64_t seed) : seed_(seed) {}
  double logprob(const std::string& prompt, const std::string& completion) override;

 private:
  std::uint64_t seed_;
};

class FunctionScorer : public CompletionScorer {
 public:
  using Fn = std::function<double(const std::string&, const std::string&)>;
  explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
  double logprob(const std::string& prompt, const std::string& completion) override {
    return fn_(prompt, completion);
  }

 private:
  Fn fn_;
};

// Vectors from a fixture file {"label": [..], ...}.
class FixtureEmbedder : public Embedder {
 public:
  explicit FixtureEmbedder(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}
  static FixtureEmbedder load(const std::string& path);
  std::vector<double> embed(const std::string& text) override;

 private:
  std::map<std::string, std::vector<double>> table_;
};

enum class ProviderKind { PromptScorer, Embedding, TaxonomyOracle, File, Scripted };

const char* to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(const std::string& s);

struct AffinityProviderSpec {
  ProviderKind kind = ProviderKind::TaxonomyOracle;
  std::string endpoint;  // prompt-scorer / embedding (remote)
  std::string path;      // file: affinity file; embedding: vector fixture
  std::string memo_path; // prompt-scorer: optional on-disk memo
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t parallelism = kDefaultParallelism;

  void validate() const;
  static AffinityProviderSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Builds a matrix over `labels`. The taxonomy is required for the oracle.
AffinityMatrix build_affinity(const AffinityProviderSpec& spec, const std::vector<std::string>& labels,
                              const Taxonomy* taxonomy = nullptr);

}  // namespace sms
