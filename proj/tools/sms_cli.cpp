#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sms/sms.h"

namespace {

using json = nlohmann::json;

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(sms_status s) {
  switch (s) {
    case SMS_OK: return 0;
    case SMS_ERR_INVALID_ARGUMENT:
    case SMS_ERR_PARSE: return 2;
    case SMS_ERR_PROVIDER: return 3;
    default: return 1;
  }
}

void check(sms_status s, const std::string& context) {
  if (s != SMS_OK) throw Failure{exit_code_for(s), context + ": " + sms_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  sms_string_free(s);
  return out;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Failure{2, "cannot read config " + path};
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw Failure{2, "config " + path + " must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw Failure{2, "config " + path + ": " + e.what()};
  }
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out || !(out << text)) throw Failure{1, "cannot write " + path};
}

// Remote endpoints may be redirected without editing config files.
void apply_endpoint_env(json& provider) {
  if (const char* ep = std::getenv("SMS_PROVIDER_ENDPOINT"); ep && *ep) {
    const std::string kind = provider.value("kind", std::string());
    if (kind == "prompt-scorer" || kind == "embedding") provider["endpoint"] = ep;
  }
}

struct Taxonomy {
  sms_taxonomy* h = nullptr;
  ~Taxonomy() { sms_taxonomy_free(h); }
};
struct Affinity {
  sms_affinity* h = nullptr;
  ~Affinity() { sms_affinity_free(h); }
};
struct Scene {
  sms_scene* h = nullptr;
  ~Scene() { sms_scene_free(h); }
};
struct Rollout {
  sms_rollout* h = nullptr;
  ~Rollout() { sms_rollout_free(h); }
};

void load_taxonomy(Taxonomy& t, const std::string& path, const std::string& domain) {
  if (!path.empty()) {
    check(sms_taxonomy_load(path.c_str(), &t.h), "taxonomy " + path);
  } else {
    check(sms_taxonomy_load_domain(domain.c_str(), &t.h), "taxonomy for domain " + domain);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic mechanical search on shelves"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its keys");

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "Generate a deterministic scene corpus");
  std::string gen_out = "scenes", gen_domain, gen_tax;
  std::vector<std::size_t> gen_n;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--domain", gen_domain, "pharmacy | kitchen | office");
  gen->add_option("--taxonomy", gen_tax, "Taxonomy JSON file");
  gen->add_option("--n", gen_n, "Object counts");
  gen->add_option("--count", gen_count, "Scenes per object count");
  gen->add_option("--seed", gen_seed)->each([&](const std::string&) { gen_seed_set = true; });

  // build-affinity
  auto* build = app.add_subcommand("build-affinity", "Build an affinity matrix from a provider");
  std::string b_kind, b_endpoint, b_path, b_memo, b_domain = "pharmacy", b_tax, b_labels, b_out = "-";
  double b_temp = 1.0;
  std::uint64_t b_seed = 0;
  std::size_t b_par = 0;
  build->add_option("--kind", b_kind, "prompt-scorer | embedding | taxonomy-oracle | file | scripted");
  build->add_option("--endpoint", b_endpoint);
  build->add_option("--path", b_path);
  build->add_option("--memo", b_memo, "On-disk memo for remote scores");
  build->add_option("--temperature", b_temp);
  build->add_option("--seed", b_seed);
  build->add_option("--parallelism", b_par);
  build->add_option("--domain", b_domain);
  build->add_option("--taxonomy", b_tax);
  build->add_option("--labels", b_labels, "JSON array of labels (default: taxonomy labels)");
  build->add_option("--out", b_out);

  // eval-affinity
  auto* eval = app.add_subcommand("eval-affinity", "Score a matrix against the taxonomy ground truth");
  std::string e_candidate, e_domain = "pharmacy", e_tax, e_row;
  eval->add_option("--candidate", e_candidate)->required();
  eval->add_option("--domain", e_domain);
  eval->add_option("--taxonomy", e_tax);
  eval->add_option("--row", e_row, "Append a CSV row to this file");

  // bench
  auto* bench = app.add_subcommand("bench", "Run the rollout benchmark");
  std::string bn_domain, bn_policy, bn_out = "-", bn_failures;
  std::vector<std::size_t> bn_n;
  std::vector<std::string> bn_methods;
  std::vector<double> bn_noise;
  std::size_t bn_scenes = 0, bn_workers = 0;
  std::uint64_t bn_seed = 0;
  bool bn_seed_set = false, bn_verbose = false;
  bench->add_option("--domain", bn_domain);
  bench->add_option("--n", bn_n);
  bench->add_option("--scenes", bn_scenes);
  bench->add_option("--methods", bn_methods);
  bench->add_option("--policy", bn_policy);
  bench->add_option("--noise", bn_noise);
  bench->add_option("--seed", bn_seed)->each([&](const std::string&) { bn_seed_set = true; });
  bench->add_option("--workers", bn_workers);
  bench->add_option("--failures", bn_failures, "max | exclude");
  bench->add_option("--out", bn_out, "CSV output file");
  bench->add_flag("--verbose", bn_verbose, "Also report means over successful rollouts");

  // openworld-eval
  auto* ow = app.add_subcommand("openworld-eval", "IoU of aggregated heatmaps against annotations");
  std::string ow_dir, ow_aff, ow_pgm;
  double ow_abs = -1.0, ow_k = 1.0;
  ow->add_option("--fixtures", ow_dir)->required();
  ow->add_option("--affinity", ow_aff, "Matrix for crops without an affinity");
  ow->add_option("--threshold", ow_abs, "Absolute threshold (default: mean + k*std)");
  ow->add_option("--k", ow_k, "Std multiplier for the default rule");
  ow->add_option("--pgm", ow_pgm, "Write the heatmap of one fixture as PGM to stdout");

  // rollout
  auto* ro = app.add_subcommand("rollout", "Run one search episode");
  std::string ro_scene, ro_aff, ro_domain = "pharmacy", ro_tax, ro_trace, ro_policy;
  bool ro_semantic = false, ro_trace_flag = false;
  double ro_noise = 0.0;
  std::uint64_t ro_seed = 0;
  ro->add_option("--scene", ro_scene)->required();
  ro->add_option("--affinity", ro_aff, "Matrix file (default: taxonomy ground truth)");
  ro->add_option("--domain", ro_domain);
  ro->add_option("--taxonomy", ro_tax);
  ro->add_flag("--semantic", ro_semantic);
  ro->add_option("--policy", ro_policy, "dar | der");
  ro->add_option("--noise", ro_noise);
  ro->add_option("--seed", ro_seed);
  ro->add_option("--trace-file", ro_trace, "Write the per-step trace here");
  ro->add_flag("--trace", ro_trace_flag, "Print the per-step trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    json cfg = read_config(config_path);

    if (*gen) {
      if (!gen_domain.empty()) cfg["domain"] = gen_domain;
      if (!gen_tax.empty()) cfg["taxonomy"] = gen_tax;
      if (!gen_n.empty()) cfg["n_objects"] = gen_n;
      if (gen_count) cfg["scenes_per_n"] = gen_count;
      if (gen_seed_set) cfg["seed"] = gen_seed;
      char* summary = nullptr;
      check(sms_corpus_generate(cfg.dump().c_str(), gen_out.c_str(), &summary), "gen-scenes");
      const json s = json::parse(take(summary));
      for (const auto& c : s["corpora"]) {
        std::cout << "n=" << c["n"] << ": accepted " << c["accepted"] << " of " << c["attempts"]
                  << " (rejected " << c["rejected"] << "), checksum " << c["checksum"].get<std::string>()
                  << '\n';
        for (const auto& line : c["log"]) std::cerr << "  rejected " << line.get<std::string>() << '\n';
      }
      return 0;
    }

    if (*build) {
      json provider = cfg.contains("provider") ? cfg["provider"] : json::object();
      if (!b_kind.empty()) provider["kind"] = b_kind;
      if (!b_endpoint.empty()) provider["endpoint"] = b_endpoint;
      if (!b_path.empty()) provider["path"] = b_path;
      if (!b_memo.empty()) provider["memo"] = b_memo;
      if (build->count("--temperature")) provider["temperature"] = b_temp;
      if (build->count("--seed")) provider["seed"] = b_seed;
      if (b_par) provider["parallelism"] = b_par;
      if (!provider.contains("kind")) provider["kind"] = "taxonomy-oracle";
      apply_endpoint_env(provider);
      Taxonomy tax;
      load_taxonomy(tax, b_tax.empty() ? cfg.value("taxonomy", std::string()) : b_tax,
                    cfg.value("domain", b_domain));
      Affinity m;
      check(sms_affinity_build(provider.dump().c_str(), tax.h, b_labels.empty() ? nullptr : b_labels.c_str(), &m.h),
            "build-affinity");
      if (b_out == "-") {
        char* text = nullptr;
        check(sms_affinity_to_json(m.h, &text), "build-affinity");
        std::cout << take(text);
      } else {
        check(sms_affinity_save(m.h, b_out.c_str()), "build-affinity");
      }
      return 0;
    }

    if (*eval) {
      Taxonomy tax;
      load_taxonomy(tax, e_tax, e_domain);
      Affinity truth, cand;
      check(sms_affinity_ground_truth(tax.h, &truth.h), "ground truth");
      check(sms_affinity_load(e_candidate.c_str(), &cand.h), "candidate " + e_candidate);
      double mean = 0, uni = 0, imp = 0;
      check(sms_affinity_eval(cand.h, truth.h, &mean, &uni, &imp), "eval-affinity");
      std::printf("mean JSD %.4f  uniform JSD %.4f  improvement %.1f%%\n", mean, uni, imp * 100.0);
      if (!e_row.empty()) {
        std::ofstream out(e_row, std::ios::app);
        if (!out) throw Failure{1, "cannot write " + e_row};
        out << e_candidate << ',' << mean << ',' << uni << ',' << imp * 100.0 << '\n';
      }
      return 0;
    }

    if (*bench) {
      if (!bn_domain.empty()) cfg["domain"] = bn_domain;
      if (!bn_n.empty()) cfg["n_objects"] = bn_n;
      if (bn_scenes) cfg["scenes_per_n"] = bn_scenes;
      if (!bn_methods.empty()) cfg["methods"] = bn_methods;
      if (!bn_policy.empty()) cfg["policy"] = bn_policy;
      if (!bn_noise.empty()) cfg["noise_p"] = bn_noise;
      if (bn_seed_set) cfg["seed"] = bn_seed;
      if (bn_workers) cfg["workers"] = bn_workers;
      if (!bn_failures.empty()) cfg["failure_convention"] = bn_failures;
      if (cfg.contains("embedding")) apply_endpoint_env(cfg["embedding"]);
      char* out = nullptr;
      check(sms_bench_run(cfg.dump().c_str(), &out), "bench");
      const json r = json::parse(take(out));
      for (const auto& line : r["log"]) std::cerr << line.get<std::string>() << '\n';
      std::cerr << r[bn_verbose ? "table_verbose" : "table"].get<std::string>();
      write_or_print(bn_out, r["csv"].get<std::string>());
      return 0;
    }

    if (*ow) {
      Affinity m;
      if (!ow_aff.empty()) check(sms_affinity_load(ow_aff.c_str(), &m.h), "affinity " + ow_aff);
      if (!ow_pgm.empty()) {
        char* pgm = nullptr;
        check(sms_openworld_heatmap_pgm(ow_pgm.c_str(), m.h, &pgm), "heatmap");
        std::cout << take(pgm);
        return 0;
      }
      json rule = ow_abs >= 0.0 ? json{{"rule", "absolute"}, {"value", ow_abs}} : json{{"rule", "mean_std"}, {"k", ow_k}};
      char* out = nullptr;
      check(sms_openworld_eval(ow_dir.c_str(), m.h, rule.dump().c_str(), &out), "openworld-eval");
      const json r = json::parse(take(out));
      std::cout << "fixture,method,iou\n";
      for (const auto& row : r["rows"]) {
        std::printf("%s,%s,%.6f\n", row["fixture"].get<std::string>().c_str(),
                    row["method"].get<std::string>().c_str(), row["iou"].get<double>());
      }
      for (const auto& s : r["summary"]) {
        std::fprintf(stderr, "%-16s n=%-4zu IoU %.4f +- %.4f\n", s["method"].get<std::string>().c_str(),
                     s["count"].get<std::size_t>(), s["mean_iou"].get<double>(), s["stderr"].get<double>());
      }
      return 0;
    }

    if (*ro) {
      Scene scene;
      check(sms_scene_load(ro_scene.c_str(), &scene.h), "scene " + ro_scene);
      Affinity m;
      if (!ro_aff.empty()) {
        check(sms_affinity_load(ro_aff.c_str(), &m.h), "affinity " + ro_aff);
      } else {
        Taxonomy tax;
        load_taxonomy(tax, ro_tax, ro_domain);
        check(sms_affinity_ground_truth(tax.h, &m.h), "ground truth");
      }
      json rc = cfg;
      if (ro_semantic) rc["use_semantic"] = true;
      if (!ro_policy.empty()) rc["policy"] = ro_policy;
      if (ro->count("--noise")) rc["noise_p"] = ro_noise;
      if (ro->count("--seed")) rc["seed"] = ro_seed;
      Rollout r;
      check(sms_rollout_run(scene.h, m.h, rc.dump().c_str(), &r.h), "rollout");
      char* summary = nullptr;
      check(sms_rollout_summary_json(r.h, &summary), "rollout");
      std::cout << take(summary) << '\n';
      if (ro_trace_flag || !ro_trace.empty()) {
        char* trace = nullptr;
        check(sms_rollout_trace_csv(r.h, &trace), "rollout");
        write_or_print(ro_trace, take(trace));
      }
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.exit_code;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
