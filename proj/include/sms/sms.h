#ifndef SMS_SMS_H
#define SMS_SMS_H

/* C interface to the shelf search library.
 *
 * Every call returns an sms_status. On failure the message is available from
 * sms_last_error() on the same thread until the next call. Strings returned
 * through char** are owned by the caller and released with sms_string_free.
 * Configuration objects are passed as JSON text; NULL means defaults. */

#include <stddef.h>

#if defined(SMS_BUILDING_LIBRARY)
#define SMS_API __attribute__((visibility("default")))
#else
#define SMS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sms_status {
  SMS_OK = 0,
  SMS_ERR_INVALID_ARGUMENT = 1,
  SMS_ERR_PARSE = 2,
  SMS_ERR_IO = 3,
  SMS_ERR_PROVIDER = 4,
  SMS_ERR_SCENE_REJECTED = 5,
  SMS_ERR_INFEASIBLE = 6,
  SMS_ERR_DEAD_END = 7,
  SMS_ERR_NUMERIC = 8,
  SMS_ERR_INTERNAL = 9
} sms_status;

typedef struct sms_taxonomy sms_taxonomy;
typedef struct sms_scene sms_scene;
typedef struct sms_affinity sms_affinity;
typedef struct sms_rollout sms_rollout;

SMS_API const char* sms_version(void);
SMS_API const char* sms_last_error(void);
SMS_API const char* sms_status_name(sms_status status);
SMS_API void sms_string_free(char* s);

/* Taxonomies */
SMS_API sms_status sms_taxonomy_load(const char* path, sms_taxonomy** out);
/* Bundled taxonomy by domain name: pharmacy, kitchen, office. */
SMS_API sms_status sms_taxonomy_load_domain(const char* domain, sms_taxonomy** out);
SMS_API void sms_taxonomy_free(sms_taxonomy* tax);
/* {"domain", "scale_factor", "labels": [...], "categories": [[...], ...]} */
SMS_API sms_status sms_taxonomy_info_json(const sms_taxonomy* tax, char** out);

/* Scenes. Generation config keys: n_objects, seed, noise_range,
 * horizontal_force_threshold, scale_factor (defaults to the taxonomy's),
 * collision_budget. */
SMS_API sms_status sms_scene_generate(const sms_taxonomy* tax, const char* config_json, sms_scene** out);
SMS_API sms_status sms_scene_from_json(const char* text, sms_scene** out);
SMS_API sms_status sms_scene_load(const char* path, sms_scene** out);
SMS_API sms_status sms_scene_save(const sms_scene* scene, const char* path);
SMS_API sms_status sms_scene_to_json(const sms_scene* scene, char** out);
SMS_API sms_status sms_scene_visibility(const sms_scene* scene, size_t object_index, double* out);
SMS_API sms_status sms_scene_object_count(const sms_scene* scene, size_t* out);
SMS_API void sms_scene_free(sms_scene* scene);

/* Writes scene_<n>_<k>.json files into out_dir. Config keys: n_objects
 * (list), scenes_per_n, seed, domain or taxonomy. Summary JSON:
 * {"corpora": [{"n", "accepted", "attempts", "rejected", "checksum", "log"}]} */
SMS_API sms_status sms_corpus_generate(const char* config_json, const char* out_dir, char** summary_json);

/* Affinity matrices. Provider JSON: {"kind": "prompt-scorer" | "embedding" |
 * "taxonomy-oracle" | "file" | "scripted", "endpoint", "path", "memo",
 * "temperature", "seed", "parallelism"}. labels_json is a JSON array or NULL
 * for the taxonomy's labels. */
SMS_API sms_status sms_affinity_build(const char* provider_json, const sms_taxonomy* tax,
                                      const char* labels_json, sms_affinity** out);
SMS_API sms_status sms_affinity_ground_truth(const sms_taxonomy* tax, sms_affinity** out);
SMS_API sms_status sms_affinity_load(const char* path, sms_affinity** out);
SMS_API sms_status sms_affinity_save(const sms_affinity* m, const char* path);
SMS_API sms_status sms_affinity_to_json(const sms_affinity* m, char** out);
SMS_API sms_status sms_affinity_size(const sms_affinity* m, size_t* out);
SMS_API sms_status sms_affinity_lookup(const sms_affinity* m, const char* observed, const char* target,
                                       double* out);
SMS_API sms_status sms_affinity_eval(const sms_affinity* candidate, const sms_affinity* truth,
                                     double* mean_jsd, double* uniform_jsd, double* improvement);
SMS_API void sms_affinity_free(sms_affinity* m);

/* Rollouts. Config keys: visibility_x, max_actions, policy ("dar"|"der"),
 * use_semantic, sigma_bins, noise_p, seed, grid_k, bins, v_detect, samples,
 * two_stage. */
SMS_API sms_status sms_rollout_run(const sms_scene* scene, const sms_affinity* m, const char* config_json,
                                   sms_rollout** out);
SMS_API sms_status sms_rollout_success(const sms_rollout* r, int* out);
SMS_API sms_status sms_rollout_steps(const sms_rollout* r, size_t* out);
SMS_API sms_status sms_rollout_trace_csv(const sms_rollout* r, char** out);
/* {"success", "steps", "max_actions", "dead_end", "failure_reason",
 *  "final_visibility", "soundness_violations"} */
SMS_API sms_status sms_rollout_summary_json(const sms_rollout* r, char** out);
SMS_API void sms_rollout_free(sms_rollout* r);

/* Benchmark. Output JSON: {"csv", "table", "table_verbose", "log": [...]} */
SMS_API sms_status sms_bench_run(const char* config_json, char** out_json);

/* Open-world evaluation over a fixture directory. m may be NULL when every
 * crop carries its affinity. rule_json: {"rule": "mean_std" | "absolute",
 * "k", "value"}. Output: {"rows": [...], "summary": [...]} */
SMS_API sms_status sms_openworld_eval(const char* dir, const sms_affinity* m, const char* rule_json,
                                      char** out_json);
SMS_API sms_status sms_openworld_heatmap_pgm(const char* fixture_path, const sms_affinity* m, char** out);

#ifdef __cplusplus
}
#endif

#endif
