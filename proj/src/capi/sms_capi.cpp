#include "sms/sms.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "json.hpp"
#include "sms/bench.hpp"
#include "sms/error.hpp"
#include "sms/scene_io.hpp"

struct sms_taxonomy {
  sms::Taxonomy tax;
};
struct sms_scene {
  sms::Scene scene;
};
struct sms_affinity {
  sms::AffinityMatrix m;
};
struct sms_rollout {
  sms::RolloutRecord rec;
};

namespace {

thread_local std::string g_last_error;

sms_status to_status(sms::ErrorCode c) {
  switch (c) {
    case sms::ErrorCode::InvalidArgument: return SMS_ERR_INVALID_ARGUMENT;
    case sms::ErrorCode::Parse: return SMS_ERR_PARSE;
    case sms::ErrorCode::Io: return SMS_ERR_IO;
    case sms::ErrorCode::Provider: return SMS_ERR_PROVIDER;
    case sms::ErrorCode::SceneRejected: return SMS_ERR_SCENE_REJECTED;
    case sms::ErrorCode::Infeasible: return SMS_ERR_INFEASIBLE;
    case sms::ErrorCode::DeadEnd: return SMS_ERR_DEAD_END;
    case sms::ErrorCode::Numeric: return SMS_ERR_NUMERIC;
  }
  return SMS_ERR_INTERNAL;
}

template <typename Fn>
sms_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return SMS_OK;
  } catch (const sms::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return SMS_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SMS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SMS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SMS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) sms::fail(sms::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) sms::fail(sms::ErrorCode::InvalidArgument, "config must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    sms::fail(sms::ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const nlohmann::json::exception& e) {
    sms::fail(sms::ErrorCode::InvalidArgument, std::string("config key '") + key + "': " + e.what());
  }
}

sms::SceneGenConfig scene_config(const nlohmann::json& j, const sms::Taxonomy& tax) {
  sms::SceneGenConfig c;
  c.scale_factor = tax.scale_factor;
  c.n_objects = get_or(j, "n_objects", c.n_objects);
  c.seed = get_or(j, "seed", c.seed);
  c.noise_range = get_or(j, "noise_range", c.noise_range);
  c.horizontal_force_threshold = get_or(j, "horizontal_force_threshold", c.horizontal_force_threshold);
  c.scale_factor = get_or(j, "scale_factor", c.scale_factor);
  c.collision_budget = get_or(j, "collision_budget", c.collision_budget);
  return c;
}

sms::RolloutConfig rollout_config(const nlohmann::json& j) {
  sms::RolloutConfig c;
  c.visibility_x = get_or(j, "visibility_x", c.visibility_x);
  c.max_actions = get_or(j, "max_actions", c.max_actions);
  if (j.contains("policy")) c.policy = sms::policy_kind_from_string(get_or(j, "policy", std::string()));
  c.use_semantic = get_or(j, "use_semantic", c.use_semantic);
  c.sigma_bins = get_or(j, "sigma_bins", c.sigma_bins);
  c.noise_p = get_or(j, "noise_p", c.noise_p);
  c.seed = get_or(j, "seed", c.seed);
  c.grid_k = get_or(j, "grid_k", c.grid_k);
  c.bins = get_or(j, "bins", c.bins);
  c.v_detect = get_or(j, "v_detect", c.v_detect);
  c.samples = get_or(j, "samples", c.samples);
  c.two_stage = get_or(j, "two_stage", c.two_stage);
  c.validate();
  return c;
}

sms::ThresholdRule threshold_rule(const nlohmann::json& j) {
  sms::ThresholdRule r;
  const std::string kind = get_or(j, "rule", std::string("mean_std"));
  if (kind == "absolute") {
    r.kind = sms::ThresholdRule::Kind::Absolute;
  } else if (kind != "mean_std") {
    sms::fail(sms::ErrorCode::InvalidArgument, "unknown threshold rule: " + kind);
  }
  r.k = get_or(j, "k", r.k);
  r.value = get_or(j, "value", r.value);
  return r;
}

}  // namespace

extern "C" {

const char* sms_version(void) { return "0.1.0"; }

const char* sms_last_error(void) { return g_last_error.c_str(); }

const char* sms_status_name(sms_status status) {
  switch (status) {
    case SMS_OK: return "ok";
    case SMS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SMS_ERR_PARSE: return "parse error";
    case SMS_ERR_IO: return "i/o error";
    case SMS_ERR_PROVIDER: return "provider error";
    case SMS_ERR_SCENE_REJECTED: return "scene rejected";
    case SMS_ERR_INFEASIBLE: return "infeasible action";
    case SMS_ERR_DEAD_END: return "dead end";
    case SMS_ERR_NUMERIC: return "numeric error";
    case SMS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void sms_string_free(char* s) { std::free(s); }

sms_status sms_taxonomy_load(const char* path, sms_taxonomy** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sms_taxonomy{sms::load_taxonomy(path)};
  });
}

sms_status sms_taxonomy_load_domain(const char* domain, sms_taxonomy** out) {
  return guard([&] {
    need(domain, "domain");
    need(out, "out");
    *out = new sms_taxonomy{sms::load_taxonomy(sms::taxonomy_path_for(domain))};
  });
}

void sms_taxonomy_free(sms_taxonomy* tax) { delete tax; }

sms_status sms_taxonomy_info_json(const sms_taxonomy* tax, char** out) {
  return guard([&] {
    need(tax, "taxonomy");
    need(out, "out");
    nlohmann::json j{{"domain", tax->tax.domain},
                     {"scale_factor", tax->tax.scale_factor},
                     {"labels", tax->tax.labels()},
                     {"categories", tax->tax.categories()}};
    *out = dup(j.dump());
  });
}

sms_status sms_scene_generate(const sms_taxonomy* tax, const char* config_json, sms_scene** out) {
  return guard([&] {
    need(tax, "taxonomy");
    need(out, "out");
    const auto cfg = scene_config(parse_config(config_json), tax->tax);
    *out = new sms_scene{sms::generate_scene(tax->tax, cfg, sms::ShelfSpec{})};
  });
}

sms_status sms_scene_from_json(const char* text, sms_scene** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = new sms_scene{sms::scene_from_text(text)};
  });
}

sms_status sms_scene_load(const char* path, sms_scene** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sms_scene{sms::load_scene(path)};
  });
}

sms_status sms_scene_save(const sms_scene* scene, const char* path) {
  return guard([&] {
    need(scene, "scene");
    need(path, "path");
    sms::save_scene(scene->scene, path);
  });
}

sms_status sms_scene_to_json(const sms_scene* scene, char** out) {
  return guard([&] {
    need(scene, "scene");
    need(out, "out");
    *out = dup(sms::scene_to_text(scene->scene));
  });
}

sms_status sms_scene_visibility(const sms_scene* scene, size_t object_index, double* out) {
  return guard([&] {
    need(scene, "scene");
    need(out, "out");
    *out = sms::visibility_fraction(scene->scene, object_index);
  });
}

sms_status sms_scene_object_count(const sms_scene* scene, size_t* out) {
  return guard([&] {
    need(scene, "scene");
    need(out, "out");
    *out = scene->scene.objects.size();
  });
}

void sms_scene_free(sms_scene* scene) { delete scene; }

sms_status sms_corpus_generate(const char* config_json, const char* out_dir, char** summary_json) {
  return guard([&] {
    need(out_dir, "out_dir");
    const auto j = parse_config(config_json);
    const auto domain = get_or(j, "domain", std::string("pharmacy"));
    const auto tax_path = get_or(j, "taxonomy", sms::taxonomy_path_for(domain));
    const auto ns = get_or(j, "n_objects", std::vector<std::size_t>{12});
    const auto count = get_or(j, "scenes_per_n", std::size_t{200});
    const auto seed = get_or(j, "seed", std::uint64_t{0});
    const sms::Taxonomy tax = sms::load_taxonomy(tax_path);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) sms::fail(sms::ErrorCode::Io, std::string("cannot create ") + out_dir + ": " + ec.message());
    nlohmann::json summary{{"corpora", nlohmann::json::array()}};
    for (std::size_t n : ns) {
      nlohmann::json per_scene = j;
      per_scene.erase("n_objects");
      per_scene.erase("seed");
      const sms::SceneGenConfig base = scene_config(per_scene, tax);
      const sms::Corpus c = sms::generate_corpus(tax, n, count, seed, base);
      for (const auto& s : c.scenes) {
        sms::save_scene(s.scene, std::string(out_dir) + "/scene_" + std::to_string(n) + "_" +
                                     std::to_string(s.id) + ".json");
      }
      char hex[24];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(c.checksum()));
      summary["corpora"].push_back({{"n", n},
                                    {"accepted", c.scenes.size()},
                                    {"attempts", c.attempts},
                                    {"rejected", c.rejected},
                                    {"checksum", hex},
                                    {"log", c.rejection_log}});
    }
    if (summary_json) *summary_json = dup(summary.dump());
  });
}

sms_status sms_affinity_build(const char* provider_json, const sms_taxonomy* tax, const char* labels_json,
                              sms_affinity** out) {
  return guard([&] {
    need(out, "out");
    const auto spec = sms::AffinityProviderSpec::from_json(parse_config(provider_json));
    std::vector<std::string> labels;
    if (labels_json && *labels_json) {
      try {
        labels = nlohmann::json::parse(labels_json).get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& e) {
        sms::fail(sms::ErrorCode::InvalidArgument, std::string("labels must be a JSON string array: ") + e.what());
      }
    } else if (tax) {
      labels = tax->tax.labels();
    }
    *out = new sms_affinity{sms::build_affinity(spec, labels, tax ? &tax->tax : nullptr)};
  });
}

sms_status sms_affinity_ground_truth(const sms_taxonomy* tax, sms_affinity** out) {
  return guard([&] {
    need(tax, "taxonomy");
    need(out, "out");
    *out = new sms_affinity{sms::reordered(sms::ground_truth_matrix(tax->tax.categories()), tax->tax.labels())};
  });
}

sms_status sms_affinity_load(const char* path, sms_affinity** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new sms_affinity{sms::load_affinity(path)};
  });
}

sms_status sms_affinity_save(const sms_affinity* m, const char* path) {
  return guard([&] {
    need(m, "matrix");
    need(path, "path");
    sms::save_affinity(m->m, path);
  });
}

sms_status sms_affinity_to_json(const sms_affinity* m, char** out) {
  return guard([&] {
    need(m, "matrix");
    need(out, "out");
    *out = dup(sms::affinity_to_text(m->m));
  });
}

sms_status sms_affinity_size(const sms_affinity* m, size_t* out) {
  return guard([&] {
    need(m, "matrix");
    need(out, "out");
    *out = m->m.size();
  });
}

sms_status sms_affinity_lookup(const sms_affinity* m, const char* observed, const char* target, double* out) {
  return guard([&] {
    need(m, "matrix");
    need(observed, "observed");
    need(target, "target");
    need(out, "out");
    *out = m->m.lookup(observed, target);
  });
}

sms_status sms_affinity_eval(const sms_affinity* candidate, const sms_affinity* truth, double* mean_jsd,
                             double* uniform_jsd, double* improvement) {
  return guard([&] {
    need(candidate, "candidate");
    need(truth, "truth");
    const auto e = sms::eval_affinity(candidate->m, truth->m);
    if (mean_jsd) *mean_jsd = e.score.mean_jsd;
    if (uniform_jsd) *uniform_jsd = e.score.uniform_jsd;
    if (improvement) *improvement = e.score.improvement;
  });
}

void sms_affinity_free(sms_affinity* m) { delete m; }

sms_status sms_rollout_run(const sms_scene* scene, const sms_affinity* m, const char* config_json,
                           sms_rollout** out) {
  return guard([&] {
    need(scene, "scene");
    need(m, "matrix");
    need(out, "out");
    *out = new sms_rollout{sms::rollout(scene->scene, m->m, rollout_config(parse_config(config_json)))};
  });
}

sms_status sms_rollout_success(const sms_rollout* r, int* out) {
  return guard([&] {
    need(r, "rollout");
    need(out, "out");
    *out = r->rec.success ? 1 : 0;
  });
}

sms_status sms_rollout_steps(const sms_rollout* r, size_t* out) {
  return guard([&] {
    need(r, "rollout");
    need(out, "out");
    *out = r->rec.steps;
  });
}

sms_status sms_rollout_trace_csv(const sms_rollout* r, char** out) {
  return guard([&] {
    need(r, "rollout");
    need(out, "out");
    *out = dup(sms::trace_csv(r->rec));
  });
}

sms_status sms_rollout_summary_json(const sms_rollout* r, char** out) {
  return guard([&] {
    need(r, "rollout");
    need(out, "out");
    const auto& rec = r->rec;
    nlohmann::json j{{"success", rec.success},
                     {"steps", rec.steps},
                     {"max_actions", rec.max_actions},
                     {"dead_end", rec.dead_end},
                     {"failure_reason", rec.failure_reason},
                     {"final_visibility", rec.final_visibility},
                     {"soundness_violations", rec.soundness_violations}};
    *out = dup(j.dump());
  });
}

void sms_rollout_free(sms_rollout* r) { delete r; }

sms_status sms_bench_run(const char* config_json, char** out_json) {
  return guard([&] {
    need(out_json, "out");
    const auto cfg = sms::ExperimentConfig::from_json(parse_config(config_json));
    const auto res = sms::run_bench(cfg);
    nlohmann::json j{{"csv", sms::metrics_csv(res.rows)},
                     {"table", sms::metrics_table(res.rows, false)},
                     {"table_verbose", sms::metrics_table(res.rows, true)},
                     {"log", res.log}};
    *out_json = dup(j.dump());
  });
}

sms_status sms_openworld_eval(const char* dir, const sms_affinity* m, const char* rule_json, char** out_json) {
  return guard([&] {
    need(dir, "dir");
    need(out_json, "out");
    const auto rule = threshold_rule(parse_config(rule_json));
    const auto ev = sms::eval_openworld(dir, m ? &m->m : nullptr, rule);
    nlohmann::json j{{"rows", nlohmann::json::array()}, {"summary", nlohmann::json::array()}};
    for (const auto& r : ev.rows) j["rows"].push_back({{"fixture", r.fixture}, {"method", r.method}, {"iou", r.iou}});
    for (const auto& s : ev.summary) {
      j["summary"].push_back(
          {{"method", s.method}, {"count", s.count}, {"mean_iou", s.mean_iou}, {"stderr", s.stderr_iou}});
    }
    *out_json = dup(j.dump());
  });
}

sms_status sms_openworld_heatmap_pgm(const char* fixture_path, const sms_affinity* m, char** out) {
  return guard([&] {
    need(fixture_path, "fixture_path");
    need(out, "out");
    auto fx = sms::load_fixture(fixture_path);
    if (m) sms::resolve_affinities(fx, m->m);
    *out = dup(sms::heatmap_to_pgm(sms::aggregate(fx.crops, fx.width, fx.height)));
  });
}

}  // extern "C"
