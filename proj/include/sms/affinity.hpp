#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace sms {

// Square matrix of object-to-object affinities. Row i is indexed by the
// observed label, column j by the target label: lookup(observed, target).
class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  AffinityMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t observed, std::size_t target) const {
    return values_[observed * labels_.size() + target];
  }
  double& at(std::size_t observed, std::size_t target) {
    return values_[observed * labels_.size() + target];
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * labels_.size(), labels_.size()};
  }

  bool contains(const std::string& label) const { return index_.count(label) != 0; }
  std::size_t index_of(const std::string& label) const;
  double lookup(const std::string& observed, const std::string& target) const;

  // Rows summing to zero are left as they are.
  void normalize_rows();
  bool is_row_stochastic(double tol = 1e-9) const;

  // Rows that had to fall back to a uniform off-diagonal distribution.
  const std::vector<std::size_t>& fallback_rows() const { return fallback_rows_; }
  void mark_fallback(std::size_t row) { fallback_rows_.push_back(row); }

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> fallback_rows_;
};

std::string build_prompt(const std::string& observed_label, const std::string& target);

// Returns log P(completion | prompt). Implementations must be thread-safe.
class CompletionScorer {
 public:
  virtual ~CompletionScorer() = default;
  virtual double logprob(const std::string& prompt, const std::string& completion) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

inline constexpr std::size_t kDefaultParallelism = 8;

// entry(i, j) = P(target j | prompt about observed i); zero diagonal; rows
// normalized. Provider failures are rethrown with the failing pair attached.
AffinityMatrix build_matrix_llm(const std::vector<std::string>& labels, CompletionScorer& scorer,
                                std::size_t parallelism = kDefaultParallelism);

// Dot products, zero diagonal, then per row: subtract the off-diagonal
// minimum, raise to 1/temperature, normalize.
AffinityMatrix build_matrix_embedding(const std::vector<std::string>& labels, Embedder& embedder,
                                      double temperature = 1.0,
                                      std::size_t parallelism = kDefaultParallelism);

// Block-diagonal truth: each label spreads mass uniformly over its own group,
// itself included.
AffinityMatrix ground_truth_matrix(const std::vector<std::vector<std::string>>& groups);

AffinityMatrix uniform_matrix(const std::vector<std::string>& labels);

// Same entries under a permuted label order; every label must exist in m.
AffinityMatrix reordered(const AffinityMatrix& m, const std::vector<std::string>& labels);

// Jensen-Shannon divergence with base-2 logs; inputs are normalized first.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct JsdScore {
  double mean_jsd = 0.0;
  double uniform_jsd = 0.0;
  double improvement = 0.0;  // (uniform - candidate) / uniform
};

JsdScore jsd_score(const AffinityMatrix& candidate, const AffinityMatrix& truth);

// {"labels": [...], "rows": [[...], ...]} with 9 significant digits.
std::string affinity_to_text(const AffinityMatrix& m);
AffinityMatrix affinity_from_json(const nlohmann::json& doc);
AffinityMatrix affinity_from_text(const std::string& text);
void save_affinity(const AffinityMatrix& m, const std::string& path);
AffinityMatrix load_affinity(const std::string& path);

}  // namespace sms
