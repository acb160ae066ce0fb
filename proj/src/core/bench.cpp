#include "sms/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "sms/error.hpp"
#include "sms/parallel.hpp"
#include "sms/rng.hpp"
#include "sms/scene_io.hpp"

#ifndef SMS_DEFAULT_DATA_DIR
#define SMS_DEFAULT_DATA_DIR "data"
#endif

namespace sms {

std::string data_dir() {
  if (const char* env = std::getenv("SMS_DATA_DIR"); env && *env) return env;
  return SMS_DEFAULT_DATA_DIR;
}

std::string taxonomy_path_for(const std::string& domain) {
  return data_dir() + "/taxonomies/" + domain + ".json";
}

std::uint64_t Corpus::checksum() const {
  std::uint64_t h = fnv1a("corpus");
  for (const auto& s : scenes) h = fnv1a(scene_to_text(s.scene), h);
  return h;
}

Corpus generate_corpus(const Taxonomy& tax, std::size_t n_objects, std::size_t count,
                       std::uint64_t seed, const SceneGenConfig& base, const ShelfSpec& shelf,
                       std::size_t max_attempts) {
  require(count >= 1, "corpus needs at least one scene");
  if (max_attempts == 0) max_attempts = 50 * count + 100;
  Corpus c;
  c.n_objects = n_objects;
  const std::uint64_t stream = mix_seed(seed, n_objects);
  while (c.scenes.size() < count) {
    if (c.attempts >= max_attempts) {
      fail(ErrorCode::SceneRejected, "only " + std::to_string(c.scenes.size()) + " of " +
                                         std::to_string(count) + " scenes accepted after " +
                                         std::to_string(c.attempts) + " attempts");
    }
    SceneGenConfig cfg = base;
    cfg.n_objects = n_objects;
    cfg.seed = mix_seed(stream, c.attempts);
    ++c.attempts;
    try {
      c.scenes.push_back({c.scenes.size(), cfg.seed, generate_scene(tax, cfg, shelf)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SceneRejected) throw;
      ++c.rejected;
      c.rejection_log.push_back("attempt " + std::to_string(c.attempts - 1) + " seed " +
                                std::to_string(cfg.seed) + ": " + e.what());
    }
  }
  return c;
}

void ExperimentConfig::validate() const {
  require(!domain.empty(), "domain must be set");
  require(!n_objects.empty(), "n_objects must not be empty");
  require(scenes_per_n >= 1, "scenes_per_n must be at least 1");
  require(!methods.empty(), "methods must not be empty");
  require(!noise_p.empty(), "noise_p must not be empty");
  for (double p : noise_p) require(p >= 0.0 && p <= 1.0, "noise_p values must be in [0,1]");
  for (const auto& m : methods) {
    const bool known = m.name == "spatial-only" || m.name == "sms-oracle" ||
                       m.name == "sms-embedding" || m.name.rfind("sms-file:", 0) == 0;
    require(known, "unknown method: " + m.name);
    if (m.name == "sms-embedding") require(embedding.has_value(), "sms-embedding needs an embedding provider");
  }
  require(grid_k >= 2, "grid_k must be at least 2");
  require(sigma_bins >= 0.0, "sigma_bins must be non-negative");
  require(visibility_x > 0.0 && visibility_x <= 1.0, "visibility_x must be in (0,1]");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.domain = j.value("domain", c.domain);
    c.taxonomy_path = j.value("taxonomy", c.taxonomy_path);
    c.n_objects = j.value("n_objects", c.n_objects);
    c.scenes_per_n = j.value("scenes_per_n", c.scenes_per_n);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back({m.get<std::string>()});
    }
    if (j.contains("policy")) c.policy = policy_kind_from_string(j["policy"].get<std::string>());
    c.noise_p = j.value("noise_p", c.noise_p);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.grid_k = j.value("grid_k", c.grid_k);
    c.sigma_bins = j.value("sigma_bins", c.sigma_bins);
    c.visibility_x = j.value("visibility_x", c.visibility_x);
    if (j.contains("failure_convention")) {
      const auto f = j["failure_convention"].get<std::string>();
      require(f == "max" || f == "exclude", "failure_convention must be 'max' or 'exclude'");
      c.failures = f == "max" ? FailureConvention::CountAsMax : FailureConvention::Exclude;
    }
    if (j.contains("embedding")) c.embedding = AffinityProviderSpec::from_json(j["embedding"]);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("experiment config: ") + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"domain", domain},
                   {"n_objects", n_objects},
                   {"scenes_per_n", scenes_per_n},
                   {"policy", to_string(policy)},
                   {"noise_p", noise_p},
                   {"seed", seed},
                   {"workers", workers},
                   {"grid_k", grid_k},
                   {"sigma_bins", sigma_bins},
                   {"visibility_x", visibility_x},
                   {"failure_convention", failures == FailureConvention::CountAsMax ? "max" : "exclude"}};
  if (!taxonomy_path.empty()) j["taxonomy"] = taxonomy_path;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : methods) j["methods"].push_back(m.name);
  if (embedding) j["embedding"] = embedding->to_json();
  return j;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  const double k = static_cast<double>(values.size());
  r.stderr_ = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  return r;
}

double delta_pct(double baseline_mean, double method_mean) {
  if (baseline_mean == 0.0) return 0.0;
  return (baseline_mean - method_mean) / baseline_mean * 100.0;
}

AffinityMatrix method_affinity(const MethodSpec& method, const Taxonomy& tax,
                               const ExperimentConfig& cfg) {
  const auto labels = tax.labels();
  if (method.name == "spatial-only" || method.name == "sms-oracle") {
    return reordered(ground_truth_matrix(tax.categories()), labels);
  }
  if (method.name.rfind("sms-file:", 0) == 0) {
    return reordered(load_affinity(method.name.substr(9)), labels);
  }
  if (method.name == "sms-embedding") {
    require(cfg.embedding.has_value(), "sms-embedding needs an embedding provider");
    return build_affinity(*cfg.embedding, labels, &tax);
  }
  fail(ErrorCode::InvalidArgument, "unknown method: " + method.name);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

MetricsRow summarize_cell(const std::string& method, const std::string& domain, std::size_t n,
                          const std::vector<RolloutRecord>& records, FailureConvention conv) {
  MetricsRow row;
  row.method = method;
  row.domain = domain;
  row.n = std::to_string(n);
  row.total = records.size();
  std::vector<double> all, ok;
  for (const auto& r : records) {
    if (r.success) {
      ++row.successes;
      ok.push_back(static_cast<double>(r.steps));
    }
    all.push_back(static_cast<double>(r.success ? r.steps : r.max_actions));
  }
  const MeanStderr a = mean_stderr(all), s = mean_stderr(ok);
  row.mean_success_only = s.mean;
  row.stderr_success_only = s.stderr_;
  const MeanStderr& primary = conv == FailureConvention::CountAsMax ? a : s;
  row.mean_actions = primary.mean;
  row.stderr_actions = primary.stderr_;
  return row;
}

}  // namespace

BenchResult run_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  const Taxonomy tax =
      load_taxonomy(cfg.taxonomy_path.empty() ? taxonomy_path_for(cfg.domain) : cfg.taxonomy_path);
  const std::size_t workers = cfg.workers ? cfg.workers : default_workers();

  std::vector<AffinityMatrix> matrices;
  for (const auto& m : cfg.methods) matrices.push_back(method_affinity(m, tax, cfg));

  BenchResult result;
  std::vector<std::string> labels_order;
  std::map<std::string, std::vector<MetricsRow>> by_method;
  for (std::size_t n : cfg.n_objects) {
    SceneGenConfig base;
    base.scale_factor = tax.scale_factor;
    const Corpus corpus = generate_corpus(tax, n, cfg.scenes_per_n, cfg.seed, base);
    result.log.push_back("n=" + std::to_string(n) + ": accepted " + std::to_string(corpus.scenes.size()) +
                         " of " + std::to_string(corpus.attempts) + " generated scenes");
    for (const auto& line : corpus.rejection_log) result.log.push_back("  rejected " + line);

    std::vector<MetricsRow> cell_rows;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const MethodSpec& method = cfg.methods[mi];
      const std::vector<double> noise = method.semantic() ? cfg.noise_p : std::vector<double>{0.0};
      for (double p : noise) {
        std::string label = method.name;
        if (method.semantic() && (cfg.noise_p.size() > 1 || p != 0.0)) label += fmt("@noise=%g", p);
        RolloutConfig rc;
        rc.policy = cfg.policy;
        rc.use_semantic = method.semantic();
        rc.sigma_bins = cfg.sigma_bins;
        rc.noise_p = p;
        rc.grid_k = cfg.grid_k;
        rc.visibility_x = cfg.visibility_x;
        std::vector<RolloutRecord> records(corpus.scenes.size());
        parallel_for(corpus.scenes.size(), workers, [&](std::size_t i) {
          RolloutConfig local = rc;
          local.seed = mix_seed(cfg.seed, corpus.scenes[i].seed);
          try {
            records[i] = rollout(corpus.scenes[i].scene, matrices[mi], local);
          } catch (const Error& e) {
            fail(e.code(), "rollout failed on scene " + std::to_string(corpus.scenes[i].id) + " (n=" +
                               std::to_string(n) + ", seed " + std::to_string(corpus.scenes[i].seed) +
                               ", " + label + "): " + e.what());
          }
        });
        cell_rows.push_back(summarize_cell(label, cfg.domain, n, records, cfg.failures));
        if (std::find(labels_order.begin(), labels_order.end(), label) == labels_order.end()) {
          labels_order.push_back(label);
        }
      }
    }
    const MetricsRow* baseline = &cell_rows.front();
    for (const auto& r : cell_rows) {
      if (r.method == "spatial-only") baseline = &r;
    }
    const double base_mean = baseline->mean_actions;
    for (auto& r : cell_rows) {
      r.delta_pct = delta_pct(base_mean, r.mean_actions);
      by_method[r.method].push_back(r);
      result.rows.push_back(r);
    }
  }

  // Domain average: mean of per-n means; stderr of that mean from the per-n
  // stderrs.
  std::vector<MetricsRow> avg_rows;
  for (const auto& label : labels_order) {
    const auto& rows = by_method[label];
    MetricsRow a;
    a.method = label;
    a.domain = cfg.domain;
    a.n = "avg";
    double var = 0.0, var_ok = 0.0;
    for (const auto& r : rows) {
      a.successes += r.successes;
      a.total += r.total;
      a.mean_actions += r.mean_actions;
      a.mean_success_only += r.mean_success_only;
      var += r.stderr_actions * r.stderr_actions;
      var_ok += r.stderr_success_only * r.stderr_success_only;
    }
    const double k = static_cast<double>(rows.size());
    a.mean_actions /= k;
    a.mean_success_only /= k;
    a.stderr_actions = std::sqrt(var) / k;
    a.stderr_success_only = std::sqrt(var_ok) / k;
    avg_rows.push_back(a);
  }
  const MetricsRow* baseline = &avg_rows.front();
  for (const auto& r : avg_rows) {
    if (r.method == "spatial-only") baseline = &r;
  }
  const double base_mean = baseline->mean_actions;
  for (auto& r : avg_rows) {
    r.delta_pct = delta_pct(base_mean, r.mean_actions);
    result.rows.push_back(r);
  }
  return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "method,domain,n,successes,total,mean_actions,stderr,delta_pct\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.domain << ',' << r.n << ',' << r.successes << ',' << r.total << ','
        << fmt("%.4f", r.mean_actions) << ',' << fmt("%.4f", r.stderr_actions) << ','
        << fmt("%.2f", r.delta_pct) << '\n';
  }
  return out.str();
}

std::string metrics_table(const std::vector<MetricsRow>& rows, bool verbose) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-9s %4s %11s %16s %8s", "method", "domain", "n", "successes",
                "actions", "delta%");
  out << buf;
  if (verbose) out << "   actions (successes only)";
  out << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %-9s %4s %5zu/%-5zu %8.2f +- %5.2f %8.1f", r.method.c_str(),
                  r.domain.c_str(), r.n.c_str(), r.successes, r.total, r.mean_actions,
                  r.stderr_actions, r.delta_pct);
    out << buf;
    if (verbose) {
      std::snprintf(buf, sizeof buf, "   %8.2f +- %5.2f", r.mean_success_only, r.stderr_success_only);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

AffinityEval eval_affinity(const AffinityMatrix& candidate, const AffinityMatrix& truth) {
  require(candidate.size() == truth.size(), "candidate and truth label sets differ");
  for (const auto& l : truth.labels()) {
    require(candidate.contains(l), "candidate matrix lacks label: " + l);
  }
  AffinityEval e;
  e.labels = truth.size();
  e.score = jsd_score(reordered(candidate, truth.labels()), truth);
  return e;
}

OpenWorldEval eval_openworld(const std::string& dir, const AffinityMatrix* affinity,
                             const ThresholdRule& rule) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::Io, "not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  OpenWorldEval out;
  for (const auto& f : files) {
    OpenWorldFixture fx = load_fixture(f.string());
    fx.name = f.filename().string();
    if (fx.truth.empty()) fail(ErrorCode::InvalidArgument, "fixture " + fx.name + " has no ground-truth mask");
    const bool missing = std::find(fx.affinity_given.begin(), fx.affinity_given.end(), false) !=
                         fx.affinity_given.end();
    if (missing) {
      require(affinity != nullptr, "fixture " + fx.name + " needs an affinity matrix");
      resolve_affinities(fx, *affinity);
    }
    const Heatmap h = aggregate(fx.crops, fx.width, fx.height);
    out.rows.push_back({fx.name, fx.method, iou_at_threshold(h, fx.truth, rule)});
  }
  out.summary = summarize(out.rows);
  return out;
}

}  // namespace sms
