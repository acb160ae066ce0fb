#include <cmath>

#include "doctest.h"
#include "sms/bench.hpp"
#include "sms/error.hpp"

using namespace sms;

namespace {

std::string fixture(const std::string& name) { return data_dir() + "/fixtures/" + name; }

}  // namespace

TEST_CASE("mean and standard error") {
  const auto r = mean_stderr({3, 5, 4, 6, 2});
  CHECK(r.mean == 4.0);
  // sample variance 2.5 over 5 values
  CHECK(r.stderr_ == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(mean_stderr({7}).stderr_ == 0.0);
  CHECK(mean_stderr({}).mean == 0.0);
}

TEST_CASE("delta percent") {
  CHECK(std::round(delta_pct(5.56, 3.76) * 10) / 10 == 32.4);
  CHECK(delta_pct(0.0, 3.0) == 0.0);
}

TEST_CASE("experiment config json") {
  const auto c = ExperimentConfig::from_json(nlohmann::json::parse(
      R"({"domain": "pharmacy", "n_objects": [5], "scenes_per_n": 3, "methods": ["spatial-only"],
          "policy": "der", "failure_convention": "exclude"})"));
  CHECK(c.policy == PolicyKind::DER);
  CHECK(c.failures == FailureConvention::Exclude);
  CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"methods": ["magic"]})")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"scenes_per_n": 0})")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"n_objects": "x"})")), Error);
}

TEST_CASE("corpus generation is deterministic") {
  const Taxonomy tax = load_taxonomy(taxonomy_path_for("pharmacy"));
  SceneGenConfig base;
  base.scale_factor = tax.scale_factor;
  const Corpus a = generate_corpus(tax, 12, 6, 3, base);
  const Corpus b = generate_corpus(tax, 12, 6, 3, base);
  CHECK(a.scenes.size() == 6);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.rejection_log == b.rejection_log);
  CHECK(a.attempts == a.scenes.size() + a.rejected);
  CHECK(generate_corpus(tax, 12, 6, 4, base).checksum() != a.checksum());
}

TEST_CASE("bench csv is identical across worker counts") {
  ExperimentConfig cfg;
  cfg.n_objects = {8};
  cfg.scenes_per_n = 6;
  cfg.seed = 11;
  cfg.workers = 1;
  const auto one = run_bench(cfg);
  cfg.workers = 3;
  const auto three = run_bench(cfg);
  const std::string csv = metrics_csv(one.rows);
  CHECK(csv == metrics_csv(three.rows));
  CHECK(csv.rfind("method,domain,n,successes,total,mean_actions,stderr,delta_pct\n", 0) == 0);
  // two methods at one n plus their average rows
  CHECK(one.rows.size() == 4);
  CHECK(one.rows[0].delta_pct == 0.0);
  CHECK(one.rows[2].n == "avg");
  CHECK(metrics_table(one.rows, true).find("successes only") != std::string::npos);
}

TEST_CASE("bench labels noise variants") {
  ExperimentConfig cfg;
  cfg.n_objects = {6};
  cfg.scenes_per_n = 2;
  cfg.noise_p = {0.0, 0.5};
  cfg.workers = 1;
  const auto r = run_bench(cfg);
  CHECK(r.rows[0].method == "spatial-only");
  CHECK(r.rows[1].method == "sms-oracle@noise=0");
  CHECK(r.rows[2].method == "sms-oracle@noise=0.5");
}

TEST_CASE("affinity evaluation orders fixtures") {
  const Taxonomy tax = load_taxonomy(taxonomy_path_for("pharmacy"));
  const auto truth = ground_truth_matrix(tax.categories());
  const auto self = eval_affinity(truth, truth);
  CHECK(self.score.mean_jsd == doctest::Approx(0.0));
  CHECK(self.score.improvement == doctest::Approx(1.0));
  const auto uni = eval_affinity(uniform_matrix(tax.labels()), truth);
  CHECK(uni.score.mean_jsd == doctest::Approx(0.653).epsilon(1e-3));
  CHECK(uni.score.improvement == doctest::Approx(0.0));
  const auto good = eval_affinity(load_affinity(fixture("pharmacy_affinity_good.json")), truth);
  const auto noisy = eval_affinity(load_affinity(fixture("pharmacy_affinity_noisy.json")), truth);
  CHECK(good.score.improvement > noisy.score.improvement);
  CHECK(noisy.score.improvement > 0.0);
  CHECK_THROWS_AS(eval_affinity(uniform_matrix({"a", "b"}), truth), Error);
}

TEST_CASE("method affinity dispatch") {
  const Taxonomy tax = load_taxonomy(taxonomy_path_for("pharmacy"));
  ExperimentConfig cfg;
  const auto m = method_affinity({"sms-file:" + fixture("pharmacy_affinity_good.json")}, tax, cfg);
  CHECK(m.labels() == tax.labels());
  CHECK_THROWS_AS(method_affinity({"sms-embedding"}, tax, cfg), Error);
}

TEST_CASE("open-world evaluation over bundled fixtures") {
  const Taxonomy tax = load_taxonomy(taxonomy_path_for("pharmacy"));
  const auto truth = ground_truth_matrix(tax.categories());
  const auto ev = eval_openworld(fixture("openworld"), &truth);
  CHECK(ev.rows.size() == 12);
  REQUIRE(ev.summary.size() == 2);
  CHECK(ev.summary[0].method == "aligned");
  CHECK(ev.summary[1].method == "shuffled");
  CHECK(ev.summary[0].mean_iou > ev.summary[1].mean_iou);
  // the related crop carries the top score, so a permissive threshold recovers it
  for (const auto& row : eval_openworld(fixture("openworld"), &truth, ThresholdRule::absolute(1e-9)).rows) {
    if (row.method == "aligned") CHECK(row.iou == 1.0);
  }
  CHECK_THROWS_AS(eval_openworld(fixture("openworld"), nullptr), Error);
  CHECK_THROWS_AS(eval_openworld(fixture("missing_dir"), &truth), Error);
}
