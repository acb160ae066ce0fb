#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sms/geometry.hpp"

namespace sms {

// A category node, or a leaf object when `object` is set.
struct TaxonomyNode {
  std::string name;
  std::vector<TaxonomyNode> children;
  std::optional<Dims> object;  // raw (unscaled) dimensions

  bool is_leaf() const { return object.has_value(); }
};

struct Taxonomy {
  std::string domain;
  double scale_factor = 1.0;
  TaxonomyNode root;

  // Leaves in depth-first order; category_path holds ancestor names.
  std::vector<ObjectSpec> leaves() const;
  std::vector<std::string> labels() const;

  // Ground-truth grouping: leaves whose parent holds only leaves form one
  // category; a leaf sitting beside sub-categories is its own category.
  std::vector<std::vector<std::string>> categories() const;
};

// {"name", "scale_factor"?, "children": [...]} with leaves as
// {"name", "object": {"dims": [w, d, h]}}.
Taxonomy taxonomy_from_json(const nlohmann::json& doc);
Taxonomy load_taxonomy(const std::string& path);

struct SceneGenConfig {
  std::size_t n_objects = 12;
  std::uint64_t seed = 0;
  double noise_range = 0.02;
  std::size_t horizontal_force_threshold = 8;
  double scale_factor = 0.7;
  std::size_t collision_budget = 1000;
  double cell = 0.005;  // placement lattice; also the minimum gap kept while separating

  void validate(std::size_t leaf_count) const;
};

// Intermediate products of the recursive layout, exposed for inspection.
struct LayoutEntry {
  ObjectSpec spec;     // scaled dims
  Vec2 assigned;       // random position inside its sub-shelf, before noise
  Vec2 noise;          // accumulated branch noise
  int depth = 0;       // recursion levels that contributed noise
};

struct SplitRecord {
  bool forced = false;
  bool horizontal = false;  // true: cut across the width (left/right halves)
  std::size_t descendants = 0;
};

struct Layout {
  std::vector<LayoutEntry> entries;
  std::vector<SplitRecord> splits;
};

ObjectSpec scaled_spec(const ObjectSpec& raw, double scale);

// Object sampling plus recursive splitting; no collision handling.
Layout plan_layout(const Taxonomy& tax, const SceneGenConfig& cfg, const ShelfSpec& shelf);

// Full generator. Throws SceneRejected if separation exceeds the budget or no
// object starts hidden.
Scene generate_scene(const Taxonomy& tax, const SceneGenConfig& cfg, const ShelfSpec& shelf);

// Uniform choice among objects with visibility below 1%.
std::size_t pick_target(const Scene& scene, std::uint64_t rng_seed);

inline constexpr double kHiddenThreshold = 0.01;

}  // namespace sms
