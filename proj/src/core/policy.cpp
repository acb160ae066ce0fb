#include "sms/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sms/error.hpp"
#include "sms/perception.hpp"

namespace sms {

const char* to_string(ActionKind kind) {
  return kind == ActionKind::Push ? "push" : "suction";
}

double Action::displacement() const { return std::hypot(dx(), dy()); }

bool tie_break_less(const Action& a, const Action& b) {
  const double da = a.displacement(), db = b.displacement();
  if (da != db) return da < db;
  if (a.object != b.object) return a.object < b.object;
  if (a.to.x != b.to.x) return a.to.x < b.to.x;
  if (a.to.y != b.to.y) return a.to.y < b.to.y;
  return a.kind == ActionKind::Push && b.kind == ActionKind::Suction;
}

namespace {

// Evenly spaced centers in [half, extent - half], snapped to grid centers
// that keep the object inside.
std::vector<double> lattice(int count, double extent, double half, int cells,
                            double (PlanGrid::*center)(int) const, const PlanGrid& grid) {
  std::vector<double> out;
  const double lo = half, hi = extent - half;
  for (int t = 0; t < count; ++t) {
    const double v = count == 1 ? lo : lo + (hi - lo) * t / (count - 1);
    int i = std::clamp(static_cast<int>(std::floor(v / extent * cells)), 0, cells - 1);
    while (i + 1 < cells && (grid.*center)(i) - half < 0.0) ++i;
    while (i > 0 && (grid.*center)(i) + half > extent) --i;
    const double c = (grid.*center)(i);
    if (c - half < 0.0 || c + half > extent) continue;
    if (out.empty() || out.back() != c) out.push_back(c);
  }
  return out;
}

bool x_overlap(const Rect& a, const Rect& b) { return a.x0 < b.x1 && b.x0 < a.x1; }

bool push_clear(const Scene& scene, std::size_t idx, double to_x) {
  const PlacedObject& o = scene.objects[idx];
  const Dims& d = o.spec.dims;
  const Rect sweep{std::min(o.position.x, to_x) - d.w / 2.0, o.position.y - d.d / 2.0,
                   std::max(o.position.x, to_x) + d.w / 2.0, o.position.y + d.d / 2.0};
  if (!inside_shelf(footprint_at({to_x, o.position.y}, d), scene.shelf)) return false;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j != idx && rects_overlap(sweep, scene.objects[j].footprint())) return false;
  }
  return true;
}

bool suction_clear(const Scene& scene, std::size_t idx, Vec2 to) {
  const Rect fp = footprint_at(to, scene.objects[idx].spec.dims);
  if (!inside_shelf(fp, scene.shelf)) return false;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j == idx) continue;
    const Rect other = scene.objects[j].footprint();
    if (rects_overlap(fp, other)) return false;
    if (x_overlap(fp, other) && other.y0 < fp.y0) return false;  // something in front
  }
  return true;
}

}  // namespace

std::vector<Action> candidate_actions(const Scene& scene, const std::vector<bool>& movable,
                                      int grid_k) {
  require(grid_k >= 2, "grid_k must be at least 2");
  require(movable.size() == scene.objects.size(), "movable mask has wrong size");
  const PlanGrid grid = PlanGrid::for_shelf(scene.shelf);
  std::vector<Action> out;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (!movable[i]) continue;
    const PlacedObject& o = scene.objects[i];
    const Dims& d = o.spec.dims;
    const auto xs = lattice(grid_k, scene.shelf.width, d.w / 2.0, grid.nx, &PlanGrid::center_x, grid);
    const auto ys = lattice(std::max(1, grid_k / 2), scene.shelf.depth, d.d / 2.0, grid.ny,
                            &PlanGrid::center_y, grid);
    for (double x : xs) {
      const Action a{ActionKind::Push, i, o.position, {x, o.position.y}};
      if (a.displacement() < kMinDisplacement) continue;
      if (push_clear(scene, i, x)) out.push_back(a);
    }
    for (double y : ys) {
      for (double x : xs) {
        const Action a{ActionKind::Suction, i, o.position, {x, y}};
        if (a.displacement() < kMinDisplacement) continue;
        if (suction_clear(scene, i, a.to)) out.push_back(a);
      }
    }
  }
  return out;
}

Scene apply_action(const Scene& scene, const Action& action) {
  require(action.object < scene.objects.size(), "action references an unknown object");
  const PlacedObject& o = scene.objects[action.object];
  if (o.position.x != action.from.x || o.position.y != action.from.y) {
    fail(ErrorCode::Infeasible, "action start pose does not match " + o.name());
  }
  Scene next = scene;
  if (action.displacement() == 0.0) return next;
  bool ok = false;
  if (action.kind == ActionKind::Push) {
    ok = action.to.y == o.position.y && push_clear(scene, action.object, action.to.x);
  } else {
    ok = suction_clear(scene, action.object, action.to);
  }
  if (!ok) fail(ErrorCode::Infeasible, std::string(to_string(action.kind)) + " of " + o.name() + " is blocked");
  next.objects[action.object].position = action.to;
  return next;
}

std::vector<TrackedObject> tracked_geometry(const KnownWorld& world, const Scene& scene) {
  std::vector<TrackedObject> out;
  out.reserve(world.known_objects.size());
  for (const auto& k : world.known_objects) {
    const std::size_t i = scene.index_of(k.object_id);
    out.push_back({i, scene.objects[i].position, scene.objects[i].spec.dims});
  }
  return out;
}

namespace {

// Per-bin count of silhouettes covering it, skipping `skip`.
std::vector<int> coverage(const std::vector<TrackedObject>& objects, const ShelfSpec& shelf,
                          int bins, std::size_t skip) {
  std::vector<int> cover(static_cast<std::size_t>(bins), 0);
  for (std::size_t k = 0; k < objects.size(); ++k) {
    if (k == skip) continue;
    const auto [first, last] =
        silhouette_bins(footprint_at(objects[k].position, objects[k].dims), shelf, bins);
    for (int b = first; b <= last; ++b) ++cover[static_cast<std::size_t>(b)];
  }
  return cover;
}

std::size_t tracked_slot(const std::vector<TrackedObject>& tracked, std::size_t scene_index) {
  for (std::size_t k = 0; k < tracked.size(); ++k) {
    if (tracked[k].index == scene_index) return k;
  }
  fail(ErrorCode::InvalidArgument, "candidate moves an object the policy does not track");
}

Selection pick(const std::vector<Action>& candidates, std::vector<double> scores,
               const std::vector<double>& secondary, const std::vector<std::size_t>& allowed) {
  std::size_t best = allowed.front();
  for (std::size_t c : allowed) {
    if (scores[c] != scores[best]) {
      if (scores[c] < scores[best]) best = c;
      continue;
    }
    if (!secondary.empty() && secondary[c] != secondary[best]) {
      if (secondary[c] < secondary[best]) best = c;
      continue;
    }
    if (tie_break_less(candidates[c], candidates[best])) best = c;
  }
  Selection s;
  s.action = candidates[best];
  s.score = scores[best];
  s.scores = std::move(scores);
  return s;
}

}  // namespace

double silhouette_overlap(const Distribution1D& dist, const std::vector<TrackedObject>& objects,
                          const ShelfSpec& shelf) {
  const auto cover = coverage(objects, shelf, static_cast<int>(dist.bins()), objects.size());
  double s = 0.0;
  for (std::size_t b = 0; b < dist.bins(); ++b) {
    if (cover[b] > 0) s += dist.mass[b];
  }
  return s;
}

Selection dar_select(const std::vector<Action>& candidates, const Distribution1D& dist,
                     const std::vector<TrackedObject>& tracked, const ShelfSpec& shelf,
                     bool two_stage) {
  require(!candidates.empty(), "no candidate actions");
  const int bins = static_cast<int>(dist.bins());
  std::map<std::size_t, std::vector<int>> without;  // slot -> coverage of the others
  std::vector<double> scores(candidates.size()), layered_scores(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::size_t slot = tracked_slot(tracked, candidates[c].object);
    auto it = without.find(slot);
    if (it == without.end()) it = without.emplace(slot, coverage(tracked, shelf, bins, slot)).first;
    const auto [first, last] =
        silhouette_bins(footprint_at(candidates[c].to, tracked[slot].dims), shelf, bins);
    double s = 0.0, layered = 0.0;
    for (int b = 0; b < bins; ++b) {
      const int others = it->second[static_cast<std::size_t>(b)];
      const int layers = others + (b >= first && b <= last ? 1 : 0);
      if (layers > 0) {
        s += dist.mass[static_cast<std::size_t>(b)];
        layered += layers * dist.mass[static_cast<std::size_t>(b)];
      }
    }
    layered_scores[c] = layered;
    scores[c] = s;
  }

  std::vector<std::size_t> allowed(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) allowed[c] = c;
  if (two_stage) {
    // Object whose own silhouette hides the most mass; lowest index on ties.
    std::size_t chosen = candidates.front().object;
    double chosen_mass = -1.0;
    std::map<std::size_t, double> own;
    for (const Action& a : candidates) {
      if (own.count(a.object)) continue;
      const std::size_t slot = tracked_slot(tracked, a.object);
      own[a.object] = silhouette_overlap(dist, {tracked[slot]}, shelf);
    }
    for (const auto& [obj, mass] : own) {
      if (mass > chosen_mass) {
        chosen = obj;
        chosen_mass = mass;
      }
    }
    allowed.clear();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (candidates[c].object == chosen) allowed.push_back(c);
    }
  }
  return pick(candidates, std::move(scores), layered_scores, allowed);
}

Distribution1D post_action_distribution(const DerContext& ctx,
                                        const std::vector<TrackedObject>& tracked) {
  std::vector<Box> boxes;
  std::vector<Rect> rects;
  for (const auto& t : tracked) {
    boxes.push_back(box_at(t.position, t.dims));
    rects.push_back(footprint_at(t.position, t.dims));
  }
  SpatialQuery q;
  q.shelf = ctx.shelf;
  q.grid = ctx.grid;
  q.target_dims = ctx.target_dims;
  q.visibility_threshold = ctx.visibility_threshold;
  q.occluders = boxes;
  q.obstacles = rects;
  q.explored = ctx.explored;
  q.samples = ctx.samples;
  const SpatialResult sp = spatial_grid(q);
  Distribution1D spatial = project_to_1d(sp.grid, ctx.shelf, ctx.bins);
  if (ctx.semantic == nullptr) return spatial;
  return combine(*ctx.semantic, spatial);
}

Selection der_select(const std::vector<Action>& candidates, const DerContext& ctx,
                     const std::vector<TrackedObject>& tracked) {
  require(!candidates.empty(), "no candidate actions");
  std::vector<double> scores(candidates.size());
  std::vector<TrackedObject> moved = tracked;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::size_t slot = tracked_slot(tracked, candidates[c].object);
    moved[slot].position = candidates[c].to;
    scores[c] = entropy_bits(post_action_distribution(ctx, moved).mass);
    moved[slot].position = tracked[slot].position;
  }
  std::vector<std::size_t> allowed(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) allowed[c] = c;
  return pick(candidates, std::move(scores), {}, allowed);
}

const char* to_string(PolicyKind kind) { return kind == PolicyKind::DAR ? "dar" : "der"; }

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "dar" || s == "DAR") return PolicyKind::DAR;
  if (s == "der" || s == "DER") return PolicyKind::DER;
  fail(ErrorCode::InvalidArgument, "unknown policy: " + s);
}

void RolloutConfig::validate() const {
  require(visibility_x > 0.0 && visibility_x <= 1.0, "visibility_x must be in (0,1]");
  require(noise_p >= 0.0 && noise_p <= 1.0, "noise_p must be in [0,1]");
  require(sigma_bins >= 0.0, "sigma_bins must be non-negative");
  require(grid_k >= 2, "grid_k must be at least 2");
  require(bins >= 1, "bins must be positive");
  require(v_detect > 0.0 && v_detect <= 1.0, "v_detect must be in (0,1]");
  require(samples >= 2, "samples must be at least 2");
}

RolloutRecord rollout(const Scene& scene, const AffinityMatrix& affinity, const RolloutConfig& cfg) {
  cfg.validate();
  scene.validate();
  const std::size_t ti = scene.target_index;
  const std::string& target = scene.target().name();
  const Dims target_dims = scene.target().spec.dims;

  RolloutRecord rec;
  rec.max_actions = cfg.max_actions ? cfg.max_actions : 2 * scene.objects.size();
  rec.final_visibility = visibility_fraction(scene, ti, cfg.samples);
  require(rec.final_visibility < cfg.visibility_x, "target is already visible at the start");

  Scene s = scene;
  KnownWorld world = KnownWorld::empty(s.shelf);
  const std::vector<std::string>& labels = affinity.labels();
  if (cfg.use_semantic) affinity.index_of(target);

  while (true) {
    const VisibilityReport report = observe(s, cfg.v_detect, cfg.samples);
    std::map<std::string, DetectionBelief> beliefs;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const std::string& name = s.objects[i].name();
      if (!report.is_detected[i] || world.knows(name)) continue;
      beliefs.emplace(name, cfg.use_semantic
                                ? simulate_detection(name, labels, cfg.noise_p, detection_seed(cfg.seed, name))
                                : DetectionBelief::one_hot({name}, 0));
    }
    record_first_seen(world, report, s, beliefs);

    // Occlusion comes from everything the camera sees in depth; collision
    // only from objects the policy has identified.
    std::vector<Box> occluders;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      if (i != ti) occluders.push_back(s.objects[i].box());
    }
    const auto tracked = tracked_geometry(world, s);
    std::vector<Rect> obstacles;
    for (const auto& t : tracked) obstacles.push_back(footprint_at(t.position, t.dims));

    SpatialQuery q;
    q.shelf = s.shelf;
    q.grid = world.grid;
    q.target_dims = target_dims;
    q.visibility_threshold = cfg.visibility_x;
    q.occluders = occluders;
    q.obstacles = obstacles;
    q.explored = &world.explored;
    q.samples = cfg.samples;
    const SpatialResult sp = spatial_grid(q);
    for (std::size_t c = 0; c < sp.ruled_out.size(); ++c) world.explored[c] |= sp.ruled_out[c];

    StepRecord step;
    Distribution1D spatial = project_to_1d(sp.grid, s.shelf, cfg.bins);
    spatial.flagged = sp.grid.flagged;
    std::optional<Distribution1D> semantic;
    Distribution1D dist = spatial;
    if (cfg.use_semantic) {
      const OccupancyGrid sg = semantic_grid(world, target, affinity);
      semantic = gaussian_smooth(project_to_1d(sg, s.shelf, cfg.bins), cfg.sigma_bins);
      semantic->flagged = sg.flagged;
      dist = combine(*semantic, spatial);
      step.fallback = sg.flagged || dist.flagged;
    }
    step.fallback = step.fallback || spatial.flagged;
    step.norm_error = std::abs(dist.total() - 1.0);
    step.target_bin_mass =
        dist.mass[static_cast<std::size_t>(ray_bin(s.objects[ti].position, s.shelf, cfg.bins))];
    if (cfg.noise_p == 0.0 && !(step.target_bin_mass > 0.0)) ++rec.soundness_violations;
    if (cfg.keep_distributions) {
      step.semantic = semantic;
      step.spatial = spatial;
      step.combined = dist;
    }

    if (rec.steps >= rec.max_actions) {
      rec.failure_reason = "action limit reached";
      break;
    }
    if (sp.feasible == 0) {
      rec.failure_reason = "no feasible target pose left";
      break;
    }

    std::vector<bool> movable(s.objects.size(), false);
    for (const auto& t : tracked) movable[t.index] = report.is_detected[t.index] && t.index != ti;
    const auto candidates = candidate_actions(s, movable, cfg.grid_k);
    if (candidates.empty()) {
      rec.dead_end = true;
      rec.failure_reason = "no feasible candidate action";
      break;
    }

    Selection sel;
    if (cfg.policy == PolicyKind::DAR) {
      sel = dar_select(candidates, dist, tracked, s.shelf, cfg.two_stage);
    } else {
      DerContext ctx;
      ctx.shelf = s.shelf;
      ctx.grid = world.grid;
      ctx.target_dims = target_dims;
      ctx.visibility_threshold = cfg.visibility_x;
      ctx.samples = cfg.samples;
      ctx.bins = cfg.bins;
      ctx.explored = &world.explored;
      ctx.semantic = semantic ? &*semantic : nullptr;
      sel = der_select(candidates, ctx, tracked);
    }

    s = apply_action(s, sel.action);
    ++rec.steps;
    step.action = sel.action;
    step.object_name = s.objects[sel.action.object].name();
    step.score = sel.score;
    step.target_visibility = visibility_fraction(s, ti, cfg.samples);
    rec.final_visibility = step.target_visibility;
    rec.per_step.push_back(std::move(step));
    if (rec.final_visibility >= cfg.visibility_x) {
      rec.success = true;
      break;
    }
  }
  return rec;
}

std::string trace_csv(const RolloutRecord& record) {
  std::ostringstream out;
  out << "step,action_kind,object,dx,dy,score,target_visibility\n";
  char buf[160];
  for (std::size_t i = 0; i < record.per_step.size(); ++i) {
    const StepRecord& st = record.per_step[i];
    std::snprintf(buf, sizeof buf, "%zu,%s,", i, to_string(st.action.kind));
    out << buf << st.object_name;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.9g,%.6f\n", st.action.dx(), st.action.dy(), st.score,
                  st.target_visibility);
    out << buf;
  }
  return out.str();
}

}  // namespace sms
