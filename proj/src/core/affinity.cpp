#include "sms/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "sms/error.hpp"
#include "sms/parallel.hpp"
#include "sms/scene_io.hpp"

namespace sms {

AffinityMatrix::AffinityMatrix(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  require(values_.size() == labels_.size() * labels_.size(), "affinity matrix must be square");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    require(index_.emplace(labels_[i], i).second, "duplicate affinity label: " + labels_[i]);
  }
  for (double v : values_) {
    require(std::isfinite(v) && v >= 0.0, "affinity entries must be finite and non-negative");
  }
}

std::size_t AffinityMatrix::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) fail(ErrorCode::InvalidArgument, "label not in affinity matrix: " + label);
  return it->second;
}

double AffinityMatrix::lookup(const std::string& observed, const std::string& target) const {
  return at(index_of(observed), index_of(target));
}

void AffinityMatrix::normalize_rows() {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += at(i, j);
    if (sum > 0.0) {
      for (std::size_t j = 0; j < n; ++j) at(i, j) /= sum;
    }
  }
}

bool AffinityMatrix::is_row_stochastic(double tol) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = at(i, j);
      if (!(v >= 0.0 && v <= 1.0 + tol)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

std::string build_prompt(const std::string& observed_label, const std::string& target) {
  return "I see the following in a room: " + observed_label +
         ". This is likely to be the closest object to " + target;
}

namespace {

void check_labels(const std::vector<std::string>& labels) {
  require(!labels.empty(), "label list is empty");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    require(!l.empty(), "empty label");
    require(seen.insert(l).second, "duplicate label: " + l);
  }
}

void fill_uniform_off_diagonal(AffinityMatrix& m, std::size_t i) {
  const std::size_t n = m.size();
  for (std::size_t j = 0; j < n; ++j) {
    m.at(i, j) = (j == i || n == 1) ? (n == 1 ? 1.0 : 0.0) : 1.0 / static_cast<double>(n - 1);
  }
  m.mark_fallback(i);
}

}  // namespace

AffinityMatrix build_matrix_llm(const std::vector<std::string>& labels, CompletionScorer& scorer,
                                std::size_t parallelism) {
  check_labels(labels);
  const std::size_t n = labels.size();
  std::vector<double> logp(n * n, -std::numeric_limits<double>::infinity());
  parallel_for(n * n, std::max<std::size_t>(parallelism, 1), [&](std::size_t cell) {
    const std::size_t i = cell / n;
    const std::size_t j = cell % n;
    if (i == j) return;
    double lp;
    try {
      lp = scorer.logprob(build_prompt(labels[i], labels[j]), labels[j]);
    } catch (const Error& e) {
      fail(e.code(), "scorer failed for (" + labels[i] + " -> " + labels[j] + "): " + e.what());
    }
    if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) {
      fail(ErrorCode::Numeric, "scorer returned non-finite log-probability for (" + labels[i] +
                                   " -> " + labels[j] + ")");
    }
    logp[cell] = lp;
  });

  AffinityMatrix m(labels, std::vector<double>(n * n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    // Shift by the row maximum before exponentiating; the row normalization
    // cancels the shift.
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) hi = std::max(hi, logp[i * n + j]);
    }
    if (!std::isfinite(hi)) {
      fill_uniform_off_diagonal(m, i);
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = j == i ? 0.0 : std::exp(logp[i * n + j] - hi);
      m.at(i, j) = v;
      sum += v;
    }
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) /= sum;
  }
  return m;
}

AffinityMatrix build_matrix_embedding(const std::vector<std::string>& labels, Embedder& embedder,
                                      double temperature, std::size_t parallelism) {
  check_labels(labels);
  require(temperature > 0.0 && std::isfinite(temperature), "temperature must be positive");
  const std::size_t n = labels.size();
  std::vector<std::vector<double>> vecs(n);
  parallel_for(n, std::max<std::size_t>(parallelism, 1), [&](std::size_t i) {
    try {
      vecs[i] = embedder.embed(labels[i]);
    } catch (const Error& e) {
      fail(e.code(), "embedder failed for '" + labels[i] + "': " + e.what());
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    require(!vecs[i].empty() && vecs[i].size() == vecs[0].size(),
            "embedder returned vectors of unequal length");
    for (double v : vecs[i]) {
      if (!std::isfinite(v)) fail(ErrorCode::Numeric, "non-finite embedding for " + labels[i]);
    }
  }

  AffinityMatrix m(labels, std::vector<double>(n * n, 0.0));
  std::vector<double> raw(n);
  const double power = 1.0 / temperature;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      raw[j] = 0.0;
      if (j == i) continue;
      for (std::size_t k = 0; k < vecs[i].size(); ++k) raw[j] += vecs[i][k] * vecs[j][k];
      lo = std::min(lo, raw[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double shifted = raw[j] - lo;
      raw[j] = shifted > 0.0 ? std::pow(shifted, power) : 0.0;
      sum += raw[j];
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      fill_uniform_off_diagonal(m, i);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) = j == i ? 0.0 : raw[j] / sum;
  }
  return m;
}

AffinityMatrix ground_truth_matrix(const std::vector<std::vector<std::string>>& groups) {
  std::vector<std::string> labels;
  std::vector<std::size_t> group_of;
  std::set<std::string> seen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    require(!groups[g].empty(), "empty category group");
    for (const auto& l : groups[g]) {
      require(seen.insert(l).second, "label appears in more than one group: " + l);
      labels.push_back(l);
      group_of.push_back(g);
    }
  }
  require(!labels.empty(), "no labels");
  const std::size_t n = labels.size();
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = 1.0 / static_cast<double>(groups[group_of[i]].size());
    for (std::size_t j = 0; j < n; ++j) {
      if (group_of[j] == group_of[i]) values[i * n + j] = share;
    }
  }
  return AffinityMatrix(std::move(labels), std::move(values));
}

AffinityMatrix uniform_matrix(const std::vector<std::string>& labels) {
  check_labels(labels);
  const std::size_t n = labels.size();
  return AffinityMatrix(labels, std::vector<double>(n * n, 1.0 / static_cast<double>(n)));
}

AffinityMatrix reordered(const AffinityMatrix& m, const std::vector<std::string>& labels) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = m.index_of(labels[i]);
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) values[i * n + j] = m.at(idx[i], idx[j]);
  }
  return AffinityMatrix(labels, std::move(values));
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "distributions must have equal non-zero length");
  double sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    require(p[k] >= 0.0 && q[k] >= 0.0, "negative probability");
    sp += p[k];
    sq += q[k];
  }
  require(sp > 0.0 && sq > 0.0, "distribution with zero mass");
  double js = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = p[k] / sp;
    const double b = q[k] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) js += 0.5 * a * std::log2(a / m);
    if (b > 0.0) js += 0.5 * b * std::log2(b / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

JsdScore jsd_score(const AffinityMatrix& candidate, const AffinityMatrix& truth) {
  require(candidate.labels() == truth.labels(),
          "candidate and truth matrices must share the same label ordering");
  const std::size_t n = truth.size();
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  JsdScore s;
  for (std::size_t i = 0; i < n; ++i) {
    s.mean_jsd += js_divergence(candidate.row(i), truth.row(i));
    s.uniform_jsd += js_divergence(uniform, truth.row(i));
  }
  s.mean_jsd /= static_cast<double>(n);
  s.uniform_jsd /= static_cast<double>(n);
  s.improvement = s.uniform_jsd > 0.0 ? (s.uniform_jsd - s.mean_jsd) / s.uniform_jsd : 0.0;
  return s;
}

std::string affinity_to_text(const AffinityMatrix& m) {
  std::ostringstream out;
  out << "{\n  \"labels\": [";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << (i ? ", " : "") << nlohmann::json(m.labels()[i]).dump();
  }
  out << "],\n  \"rows\": [";
  char buf[32];
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << (i ? ",\n    [" : "\n    [");
    for (std::size_t j = 0; j < m.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", m.at(i, j));
      out << (j ? ", " : "") << buf;
    }
    out << "]";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

AffinityMatrix affinity_from_json(const nlohmann::json& doc) {
  try {
    auto labels = doc.at("labels").get<std::vector<std::string>>();
    const auto& rows = doc.at("rows");
    if (!rows.is_array() || rows.size() != labels.size()) {
      fail(ErrorCode::Parse, "affinity rows must match label count");
    }
    std::vector<double> values;
    values.reserve(labels.size() * labels.size());
    for (const auto& r : rows) {
      if (!r.is_array() || r.size() != labels.size()) {
        fail(ErrorCode::Parse, "affinity row has wrong length");
      }
      for (const auto& v : r) values.push_back(v.get<double>());
    }
    return AffinityMatrix(std::move(labels), std::move(values));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("affinity file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    fail(ErrorCode::Parse, std::string("affinity file: ") + e.what());
  }
}

AffinityMatrix affinity_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("affinity file: ") + e.what());
  }
  return affinity_from_json(doc);
}

void save_affinity(const AffinityMatrix& m, const std::string& path) {
  write_text_file(path, affinity_to_text(m));
}

AffinityMatrix load_affinity(const std::string& path) {
  return affinity_from_text(read_text_file(path));
}

}  // namespace sms
