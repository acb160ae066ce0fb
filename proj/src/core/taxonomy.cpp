#include "sms/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sms/error.hpp"
#include "sms/rng.hpp"
#include "sms/scene_io.hpp"

namespace sms {

namespace {

TaxonomyNode parse_node(const nlohmann::json& j, std::set<std::string>& names) {
  TaxonomyNode node;
  node.name = j.at("name").get<std::string>();
  if (node.name.empty()) fail(ErrorCode::Parse, "taxonomy node with empty name");
  const bool has_object = j.contains("object");
  const bool has_children = j.contains("children");
  if (has_object == has_children) {
    fail(ErrorCode::Parse, "taxonomy node '" + node.name + "' needs exactly one of object/children");
  }
  if (has_object) {
    const auto& d = j.at("object").at("dims");
    if (!d.is_array() || d.size() != 3) fail(ErrorCode::Parse, "dims must be [w,d,h]");
    Dims dims{d[0].get<double>(), d[1].get<double>(), d[2].get<double>()};
    if (!(dims.w > 0 && dims.d > 0 && dims.h > 0)) {
      fail(ErrorCode::Parse, "object '" + node.name + "' has non-positive dims");
    }
    if (!names.insert(node.name).second) {
      fail(ErrorCode::Parse, "duplicate object name '" + node.name + "'");
    }
    node.object = dims;
  } else {
    for (const auto& c : j.at("children")) node.children.push_back(parse_node(c, names));
    if (node.children.empty()) fail(ErrorCode::Parse, "category '" + node.name + "' is empty");
  }
  return node;
}

void collect_leaves(const TaxonomyNode& node, std::vector<std::string>& path,
                    std::vector<ObjectSpec>& out) {
  if (node.is_leaf()) {
    out.push_back({node.name, *node.object, path});
    return;
  }
  path.push_back(node.name);
  for (const auto& c : node.children) collect_leaves(c, path, out);
  path.pop_back();
}

void collect_categories(const TaxonomyNode& node, std::vector<std::vector<std::string>>& out) {
  if (node.is_leaf()) return;
  const bool all_leaves = std::all_of(node.children.begin(), node.children.end(),
                                      [](const TaxonomyNode& c) { return c.is_leaf(); });
  if (all_leaves) {
    std::vector<std::string> group;
    for (const auto& c : node.children) group.push_back(c.name);
    out.push_back(std::move(group));
    return;
  }
  for (const auto& c : node.children) {
    if (c.is_leaf()) {
      out.push_back({c.name});
    } else {
      collect_categories(c, out);
    }
  }
}

// ---- recursive layout ------------------------------------------------------

// A subtree restricted to the sampled leaves. Leaves carry their entry index.
struct Pruned {
  std::vector<Pruned> children;
  int entry = -1;
  std::size_t leaf_count = 0;
  bool is_leaf() const { return entry >= 0; }
};

std::optional<Pruned> prune(const TaxonomyNode& node, const std::vector<int>& entry_of_leaf,
                            std::size_t& leaf_cursor) {
  if (node.is_leaf()) {
    const int e = entry_of_leaf[leaf_cursor++];
    if (e < 0) return std::nullopt;
    Pruned p;
    p.entry = e;
    p.leaf_count = 1;
    return p;
  }
  Pruned p;
  for (const auto& c : node.children) {
    if (auto pc = prune(c, entry_of_leaf, leaf_cursor)) {
      p.leaf_count += pc->leaf_count;
      p.children.push_back(std::move(*pc));
    }
  }
  if (p.leaf_count == 0) return std::nullopt;
  return p;
}

struct LayoutBuilder {
  const SceneGenConfig& cfg;
  Rng& rng;
  Layout& layout;

  // Draw order per visit: branch noise (dx, dy); then either one placement
  // (x, y) per leaf, or the split coin (skipped when forced) followed by the
  // two halves in order.
  void visit(const std::vector<const Pruned*>& group, Rect rect, Vec2 noise, int depth) {
    noise.x += rng.uniform(-cfg.noise_range, cfg.noise_range);
    noise.y += rng.uniform(-cfg.noise_range, cfg.noise_range);
    ++depth;

    // Descend through single-child chains: each real level adds noise.
    if (group.size() == 1 && !group.front()->is_leaf()) {
      std::vector<const Pruned*> kids;
      for (const auto& c : group.front()->children) kids.push_back(&c);
      visit(kids, rect, noise, depth);
      return;
    }

    const bool all_leaves = std::all_of(group.begin(), group.end(),
                                        [](const Pruned* p) { return p->is_leaf(); });
    if (all_leaves) {
      for (const Pruned* leaf : group) place(*leaf, rect, noise, depth);
      return;
    }

    std::size_t descendants = 0;
    for (const Pruned* p : group) descendants += p->leaf_count;
    SplitRecord split;
    split.descendants = descendants;
    split.forced = descendants > cfg.horizontal_force_threshold;
    split.horizontal = split.forced ? true : rng.coin();
    layout.splits.push_back(split);

    // Balanced contiguous partition by sampled leaf count.
    std::size_t best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t left = 0;
    for (std::size_t k = 1; k < group.size(); ++k) {
      left += group[k - 1]->leaf_count;
      const double gap = std::abs(static_cast<double>(left) - static_cast<double>(descendants - left));
      if (gap < best_gap) {
        best_gap = gap;
        best = k;
      }
    }
    std::vector<const Pruned*> a(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(best));
    std::vector<const Pruned*> b(group.begin() + static_cast<std::ptrdiff_t>(best), group.end());

    Rect ra = rect, rb = rect;
    if (split.horizontal) {
      const double mid = 0.5 * (rect.x0 + rect.x1);
      ra.x1 = mid;
      rb.x0 = mid;
    } else {
      const double mid = 0.5 * (rect.y0 + rect.y1);
      ra.y1 = mid;
      rb.y0 = mid;
    }
    visit(a, ra, noise, depth);
    visit(b, rb, noise, depth);
  }

  void place(const Pruned& leaf, const Rect& rect, Vec2 noise, int depth) {
    LayoutEntry& e = layout.entries[static_cast<std::size_t>(leaf.entry)];
    const Dims& d = e.spec.dims;
    auto draw = [&](double lo, double hi, double size) {
      const double a = lo + size / 2.0;
      const double b = hi - size / 2.0;
      const double u = rng.uniform();
      return a <= b ? a + (b - a) * u : 0.5 * (lo + hi);
    };
    e.assigned.x = draw(rect.x0, rect.x1, d.w);
    e.assigned.y = draw(rect.y0, rect.y1, d.d);
    e.noise = noise;
    e.depth = depth;
  }
};

Vec2 clamp_center(Vec2 c, const Dims& d, const ShelfSpec& shelf, double margin) {
  auto clamp_axis = [](double v, double lo, double hi) {
    return lo <= hi ? std::clamp(v, lo, hi) : 0.5 * (lo + hi);
  };
  return {clamp_axis(c.x, d.w / 2.0 + margin, shelf.width - d.w / 2.0 - margin),
          clamp_axis(c.y, d.d / 2.0 + margin, shelf.depth - d.d / 2.0 - margin)};
}

Rect inflate(const Rect& r, double m) { return {r.x0 - m, r.y0 - m, r.x1 + m, r.y1 + m}; }

// Pushes colliding pairs apart along the line joining their centers. Returns
// false when the iteration budget runs out.
bool separate(std::vector<PlacedObject>& objs, const ShelfSpec& shelf, const SceneGenConfig& cfg) {
  const double half_gap = cfg.cell / 2.0;
  constexpr double kMinStep = 5e-4;
  for (std::size_t iter = 0; iter < cfg.collision_budget; ++iter) {
    bool moved = false;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        const Rect a = inflate(objs[i].footprint(), half_gap);
        const Rect b = inflate(objs[j].footprint(), half_gap);
        if (!rects_overlap(a, b)) continue;
        moved = true;
        double vx = objs[j].position.x - objs[i].position.x;
        double vy = objs[j].position.y - objs[i].position.y;
        double len = std::hypot(vx, vy);
        if (len < 1e-12) {
          vx = 1.0;
          vy = 0.0;
          len = 1.0;
        }
        vx /= len;
        vy /= len;
        const double ox = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
        const double oy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
        const double inf = std::numeric_limits<double>::infinity();
        const double t = std::min(std::abs(vx) > 1e-12 ? ox / std::abs(vx) : inf,
                                  std::abs(vy) > 1e-12 ? oy / std::abs(vy) : inf);
        const double step = std::max(0.1 * t, kMinStep) / 2.0;
        objs[i].position = clamp_center({objs[i].position.x - vx * step, objs[i].position.y - vy * step},
                                        objs[i].spec.dims, shelf, cfg.cell);
        objs[j].position = clamp_center({objs[j].position.x + vx * step, objs[j].position.y + vy * step},
                                        objs[j].spec.dims, shelf, cfg.cell);
      }
    }
    if (!moved) return true;
  }
  return false;
}

Vec2 snap_to_grid(Vec2 c, const Dims& d, const PlanGrid& grid, const ShelfSpec& shelf) {
  auto snap_axis = [](double v, double size, double extent, int n, auto center_of) {
    int k = static_cast<int>(std::lround(v / extent * n - 0.5));
    k = std::clamp(k, 0, n - 1);
    while (k < n - 1 && center_of(k) - size / 2.0 < 0.0) ++k;
    while (k > 0 && center_of(k) + size / 2.0 > extent) --k;
    return center_of(k);
  };
  return {snap_axis(c.x, d.w, shelf.width, grid.nx, [&](int k) { return grid.center_x(k); }),
          snap_axis(c.y, d.d, shelf.depth, grid.ny, [&](int k) { return grid.center_y(k); })};
}

}  // namespace

std::vector<ObjectSpec> Taxonomy::leaves() const {
  std::vector<ObjectSpec> out;
  std::vector<std::string> path;
  collect_leaves(root, path, out);
  return out;
}

std::vector<std::string> Taxonomy::labels() const {
  std::vector<std::string> out;
  for (const auto& s : leaves()) out.push_back(s.name);
  return out;
}

std::vector<std::vector<std::string>> Taxonomy::categories() const {
  std::vector<std::vector<std::string>> out;
  if (root.is_leaf()) {
    out.push_back({root.name});
  } else {
    collect_categories(root, out);
  }
  return out;
}

Taxonomy taxonomy_from_json(const nlohmann::json& doc) {
  try {
    Taxonomy tax;
    std::set<std::string> names;
    tax.root = parse_node(doc, names);
    tax.domain = doc.value("domain", tax.root.name);
    tax.scale_factor = doc.value("scale_factor", 1.0);
    if (!(tax.scale_factor > 0.0)) fail(ErrorCode::Parse, "scale_factor must be positive");
    return tax;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("taxonomy: ") + e.what());
  }
}

Taxonomy load_taxonomy(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, "taxonomy " + path + ": " + e.what());
  }
  return taxonomy_from_json(doc);
}

void SceneGenConfig::validate(std::size_t leaf_count) const {
  require(n_objects >= 1, "n_objects must be at least 1");
  require(n_objects <= leaf_count, "n_objects exceeds the taxonomy's object count");
  require(noise_range >= 0.0, "noise_range must be non-negative");
  require(scale_factor > 0.0, "scale_factor must be positive");
  require(collision_budget >= 1, "collision_budget must be at least 1");
  require(cell > 0.0, "cell must be positive");
}

ObjectSpec scaled_spec(const ObjectSpec& raw, double scale) {
  ObjectSpec s = raw;
  auto fit = [scale](double v) {
    return quantize(std::clamp(v * scale, kMinObjectSize, kMaxObjectSize));
  };
  s.dims = {fit(raw.dims.w), fit(raw.dims.d), fit(raw.dims.h)};
  return s;
}

Layout plan_layout(const Taxonomy& tax, const SceneGenConfig& cfg, const ShelfSpec& shelf) {
  shelf.validate();
  const std::vector<ObjectSpec> leaves = tax.leaves();
  cfg.validate(leaves.size());
  Rng rng(cfg.seed);

  // Partial Fisher-Yates: the first n positions are the sample.
  std::vector<std::size_t> order(leaves.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    const std::size_t j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.n_objects));
  std::sort(chosen.begin(), chosen.end());  // entries follow taxonomy order

  Layout layout;
  std::vector<int> entry_of_leaf(leaves.size(), -1);
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    entry_of_leaf[chosen[k]] = static_cast<int>(k);
    layout.entries.push_back({scaled_spec(leaves[chosen[k]], cfg.scale_factor), {}, {}, 0});
  }

  std::size_t cursor = 0;
  std::optional<Pruned> root = prune(tax.root, entry_of_leaf, cursor);
  LayoutBuilder builder{cfg, rng, layout};
  builder.visit({&*root}, Rect{0.0, 0.0, shelf.width, shelf.depth}, Vec2{}, 0);
  return layout;
}

Scene generate_scene(const Taxonomy& tax, const SceneGenConfig& cfg, const ShelfSpec& shelf) {
  const Layout layout = plan_layout(tax, cfg, shelf);
  const PlanGrid grid = PlanGrid::for_shelf(shelf, cfg.cell);

  Scene scene;
  scene.shelf = shelf;
  for (const auto& e : layout.entries) {
    const Vec2 p{e.assigned.x + e.noise.x, e.assigned.y + e.noise.y};
    scene.objects.push_back({e.spec, clamp_center(p, e.spec.dims, shelf, cfg.cell)});
  }
  if (!separate(scene.objects, shelf, cfg)) {
    fail(ErrorCode::SceneRejected, "collision resolution exceeded budget");
  }
  for (auto& o : scene.objects) o.position = snap_to_grid(o.position, o.spec.dims, grid, shelf);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (!inside_shelf(scene.objects[i].footprint(), shelf)) {
      fail(ErrorCode::SceneRejected, "object left the shelf after snapping");
    }
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
      if (footprints_collide(scene.objects[i], scene.objects[j])) {
        fail(ErrorCode::SceneRejected, "collision after snapping");
      }
    }
  }
  scene.target_index = pick_target(scene, mix_seed(cfg.seed, 0x7a26e7ULL));
  return scene;
}

std::size_t pick_target(const Scene& scene, std::uint64_t rng_seed) {
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (visibility_fraction(scene, i) < kHiddenThreshold) hidden.push_back(i);
  }
  if (hidden.empty()) fail(ErrorCode::SceneRejected, "no hidden object to serve as target");
  Rng rng(rng_seed);
  return hidden[rng.index(hidden.size())];
}

}  // namespace sms
