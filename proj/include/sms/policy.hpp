#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sms/affinity.hpp"
#include "sms/geometry.hpp"
#include "sms/occupancy.hpp"

namespace sms {

inline constexpr int kDefaultGridK = 16;
inline constexpr double kMinDisplacement = 0.005;

enum class ActionKind { Push, Suction };
const char* to_string(ActionKind kind);

struct Action {
  ActionKind kind = ActionKind::Push;
  std::size_t object = 0;  // scene index
  Vec2 from;
  Vec2 to;

  double dx() const { return to.x - from.x; }
  double dy() const { return to.y - from.y; }
  double displacement() const;
};

// Tie order after score: displacement, object index, target x, target y, kind.
bool tie_break_less(const Action& a, const Action& b);

// Push and suction candidates for every object flagged in `movable`,
// checked against the true geometry of `scene`.
std::vector<Action> candidate_actions(const Scene& scene, const std::vector<bool>& movable,
                                      int grid_k = kDefaultGridK);

// Throws Infeasible if the motion collides or leaves the shelf.
Scene apply_action(const Scene& scene, const Action& action);

// Geometry the policy believes in: known objects at their current poses.
struct TrackedObject {
  std::size_t index = 0;
  Vec2 position;
  Dims dims;
};

std::vector<TrackedObject> tracked_geometry(const KnownWorld& world, const Scene& scene);

struct Selection {
  Action action;
  double score = 0.0;
  std::vector<double> scores;  // aligned with the candidate list
};

// Mass of `dist` lying under the union of the objects' ray silhouettes.
double silhouette_overlap(const Distribution1D& dist, const std::vector<TrackedObject>& objects,
                          const ShelfSpec& shelf);

// Joint argmin of post-action overlap. With two_stage, the object whose
// silhouette covers the most mass is fixed first, then its best destination.
Selection dar_select(const std::vector<Action>& candidates, const Distribution1D& dist,
                     const std::vector<TrackedObject>& tracked, const ShelfSpec& shelf,
                     bool two_stage = false);

struct DerContext {
  ShelfSpec shelf;
  PlanGrid grid;
  Dims target_dims;
  double visibility_threshold = 0.01;
  int samples = kDefaultVisibilitySamples;
  int bins = kDefaultBins;
  const std::vector<std::uint8_t>* explored = nullptr;
  const Distribution1D* semantic = nullptr;  // smoothed; null for spatial-only
};

// Distribution the policy would hold after moving tracked geometry.
Distribution1D post_action_distribution(const DerContext& ctx,
                                        const std::vector<TrackedObject>& tracked);

Selection der_select(const std::vector<Action>& candidates, const DerContext& ctx,
                     const std::vector<TrackedObject>& tracked);

enum class PolicyKind { DAR, DER };
const char* to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

struct RolloutConfig {
  double visibility_x = 0.01;
  std::size_t max_actions = 0;  // 0 means 2N
  PolicyKind policy = PolicyKind::DAR;
  bool use_semantic = false;
  double sigma_bins = kDefaultSigmaBins;
  double noise_p = 0.0;
  std::uint64_t seed = 0;
  int grid_k = kDefaultGridK;
  int bins = kDefaultBins;
  double v_detect = kDefaultDetectThreshold;
  int samples = kDefaultVisibilitySamples;
  bool two_stage = false;
  bool keep_distributions = false;

  void validate() const;
};

struct StepRecord {
  Action action;
  std::string object_name;
  double score = 0.0;
  double target_visibility = 0.0;
  double target_bin_mass = 0.0;  // combined mass at the true target's bin
  double norm_error = 0.0;       // |sum - 1| of the acting distribution
  bool fallback = false;         // some distribution came from a fallback rule
  std::optional<Distribution1D> semantic, spatial, combined;
};

struct RolloutRecord {
  bool success = false;
  std::size_t steps = 0;
  std::size_t max_actions = 0;
  bool dead_end = false;
  std::string failure_reason;
  double final_visibility = 0.0;
  std::size_t soundness_violations = 0;
  std::vector<StepRecord> per_step;
};

RolloutRecord rollout(const Scene& scene, const AffinityMatrix& affinity, const RolloutConfig& cfg);

// step,action_kind,object,dx,dy,score,target_visibility
std::string trace_csv(const RolloutRecord& record);

}  // namespace sms
