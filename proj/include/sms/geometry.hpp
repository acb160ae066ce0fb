#pragma once

// Shelf world model: cuboid objects resting on a single shelf floor, seen by
// a pinhole camera placed in front of the shelf opening.
//
// Frame: x runs across the shelf width, y runs from the front opening (y=0)
// toward the back wall, z is up from the shelf floor.

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace sms {

inline constexpr double kMinObjectSize = 0.05;  // S_min, meters
inline constexpr double kMaxObjectSize = 0.25;  // S_max, meters
inline constexpr int kDefaultVisibilitySamples = 16;
inline constexpr double kDefaultDetectThreshold = 0.05;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct Dims {
  double w = 0.0;  // along x
  double d = 0.0;  // along y
  double h = 0.0;  // along z
};

// Axis-aligned plan rectangle.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double depth() const { return y1 - y0; }
};

struct Box {
  double x0 = 0.0, y0 = 0.0, z0 = 0.0;
  double x1 = 0.0, y1 = 0.0, z1 = 0.0;
};

// Snap a length to whole micrometers. Every coordinate stored in a scene is
// quantized so that a text round trip at 6 decimals is bit exact.
double quantize(double meters);

struct ShelfSpec {
  double width = 0.8;
  double depth = 0.35;
  double height = 0.57;
  double camera_offset = 0.5;

  void validate() const;
  Vec3 camera() const { return {width / 2.0, -camera_offset, height / 2.0}; }
  Vec2 camera_plan() const { return {width / 2.0, -camera_offset}; }
};

struct ObjectSpec {
  std::string name;
  Dims dims;
  std::vector<std::string> category_path;
};

struct PlacedObject {
  ObjectSpec spec;
  Vec2 position;  // footprint center on the shelf floor

  const std::string& name() const { return spec.name; }
  Rect footprint() const;
  Box box() const;
};

Rect footprint_at(Vec2 center, Dims dims);
Box box_at(Vec2 center, Dims dims);

struct Scene {
  ShelfSpec shelf;
  std::vector<PlacedObject> objects;
  std::size_t target_index = 0;

  // Throws InvalidArgument on any broken invariant.
  void validate() const;
  const PlacedObject& target() const { return objects.at(target_index); }
  std::size_t index_of(const std::string& name) const;
};

struct VisibilityReport {
  std::map<std::string, double> per_object_fraction;
  std::set<std::string> detected;
  // Index-aligned with Scene::objects.
  std::vector<double> fraction;
  std::vector<bool> is_detected;
};

// Regular plan grid over the shelf floor. Cell centers are quantized so that
// objects snapped to them compare bit-exactly with grid queries.
struct PlanGrid {
  int nx = 160;
  int ny = 70;
  double width = 0.8;
  double depth = 0.35;

  static PlanGrid for_shelf(const ShelfSpec& shelf, double cell = 0.005);

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * nx + ix;
  }
  double center_x(int ix) const;
  double center_y(int iy) const;
  Vec2 center(std::size_t cell) const {
    return {center_x(static_cast<int>(cell % nx)), center_y(static_cast<int>(cell / nx))};
  }
  int cell_x(double x) const;
  int cell_y(double y) const;
  bool operator==(const PlanGrid&) const = default;
};

bool inside_shelf(const Rect& r, const ShelfSpec& shelf);

// Open-rectangle overlap: shared edges do not collide.
bool rects_overlap(const Rect& a, const Rect& b);
bool footprints_collide(const PlacedObject& a, const PlacedObject& b);

// True iff the open segment (from, to) passes through the open interior of box.
bool segment_hits_box(const Vec3& from, const Vec3& to, const Box& box);

// Counts camera-facing face samples of `target` whose segment to `camera` is
// clear of every occluder. Stops counting once `stop_at` visible samples are
// found (pass samples*samples or more to disable).
int visible_sample_count(const Box& target, const Vec3& camera,
                         std::span<const Box> occluders, int samples, int stop_at);

double visibility_fraction(const Scene& scene, std::size_t object_index,
                           int samples = kDefaultVisibilitySamples);

VisibilityReport observe(const Scene& scene, double v_detect = kDefaultDetectThreshold,
                         int samples = kDefaultVisibilitySamples);

}  // namespace sms
