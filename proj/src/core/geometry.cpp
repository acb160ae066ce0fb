#include "sms/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "sms/error.hpp"

namespace sms {

namespace {

constexpr double kBoundsTol = 1e-9;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

double quantize(double meters) { return std::round(meters * 1e6) / 1e6; }

void ShelfSpec::validate() const {
  require(finite_positive(width) && finite_positive(depth) && finite_positive(height) &&
              finite_positive(camera_offset),
          "shelf dimensions and camera offset must be positive");
}

Rect footprint_at(Vec2 c, Dims d) {
  return {c.x - d.w / 2.0, c.y - d.d / 2.0, c.x + d.w / 2.0, c.y + d.d / 2.0};
}

Box box_at(Vec2 c, Dims d) {
  return {c.x - d.w / 2.0, c.y - d.d / 2.0, 0.0, c.x + d.w / 2.0, c.y + d.d / 2.0, d.h};
}

Rect PlacedObject::footprint() const { return footprint_at(position, spec.dims); }
Box PlacedObject::box() const { return box_at(position, spec.dims); }

bool inside_shelf(const Rect& r, const ShelfSpec& shelf) {
  return r.x0 >= -kBoundsTol && r.y0 >= -kBoundsTol && r.x1 <= shelf.width + kBoundsTol &&
         r.y1 <= shelf.depth + kBoundsTol;
}

bool rects_overlap(const Rect& a, const Rect& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

bool footprints_collide(const PlacedObject& a, const PlacedObject& b) {
  return rects_overlap(a.footprint(), b.footprint());
}

void Scene::validate() const {
  shelf.validate();
  require(!objects.empty(), "scene has no objects");
  require(target_index < objects.size(), "target index out of range");
  std::set<std::string> names;
  for (const auto& o : objects) {
    require(!o.spec.name.empty(), "object with empty name");
    require(names.insert(o.spec.name).second, "duplicate object name: " + o.spec.name);
    const Dims& d = o.spec.dims;
    require(finite_positive(d.w) && finite_positive(d.d) && finite_positive(d.h),
            "object " + o.spec.name + " has non-positive dimensions");
    require(d.h <= shelf.height + kBoundsTol, "object " + o.spec.name + " taller than shelf");
    require(inside_shelf(o.footprint(), shelf), "object " + o.spec.name + " outside shelf");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      require(!footprints_collide(objects[i], objects[j]),
              "objects collide: " + objects[i].spec.name + " / " + objects[j].spec.name);
    }
  }
}

std::size_t Scene::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].spec.name == name) return i;
  }
  fail(ErrorCode::InvalidArgument, "no object named " + name);
}

PlanGrid PlanGrid::for_shelf(const ShelfSpec& shelf, double cell) {
  PlanGrid g;
  g.nx = std::max(1, static_cast<int>(std::lround(shelf.width / cell)));
  g.ny = std::max(1, static_cast<int>(std::lround(shelf.depth / cell)));
  g.width = shelf.width;
  g.depth = shelf.depth;
  return g;
}

double PlanGrid::center_x(int ix) const { return quantize((ix + 0.5) * width / nx); }
double PlanGrid::center_y(int iy) const { return quantize((iy + 0.5) * depth / ny); }

int PlanGrid::cell_x(double x) const {
  return std::clamp(static_cast<int>(std::floor(x / width * nx)), 0, nx - 1);
}
int PlanGrid::cell_y(double y) const {
  return std::clamp(static_cast<int>(std::floor(y / depth * ny)), 0, ny - 1);
}

bool segment_hits_box(const Vec3& from, const Vec3& to, const Box& box) {
  double tmin = 0.0;
  double tmax = 1.0;
  const double o[3] = {from.x, from.y, from.z};
  const double d[3] = {to.x - from.x, to.y - from.y, to.z - from.z};
  const double lo[3] = {box.x0, box.y0, box.z0};
  const double hi[3] = {box.x1, box.y1, box.z1};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (!(o[a] > lo[a] && o[a] < hi[a])) return false;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (!(tmin < tmax)) return false;
  }
  return true;
}

int visible_sample_count(const Box& target, const Vec3& camera,
                         std::span<const Box> occluders, int samples, int stop_at) {
  require(samples >= 2, "visibility needs at least 2x2 samples");
  const double w = target.x1 - target.x0;
  const double h = target.z1 - target.z0;
  int visible = 0;
  std::size_t last_hit = 0;  // occluders tend to block neighbouring samples too
  // Rows top-down: upper samples are the likeliest to be visible, which makes
  // the early exit fire sooner.
  for (int k = samples - 1; k >= 0; --k) {
    const double z = target.z0 + (k + 0.5) * h / samples;
    for (int i = 0; i < samples; ++i) {
      const Vec3 p{target.x0 + (i + 0.5) * w / samples, target.y0, z};
      bool blocked = false;
      if (!occluders.empty()) {
        if (segment_hits_box(p, camera, occluders[last_hit])) {
          blocked = true;
        } else {
          for (std::size_t j = 0; j < occluders.size(); ++j) {
            if (j != last_hit && segment_hits_box(p, camera, occluders[j])) {
              blocked = true;
              last_hit = j;
              break;
            }
          }
        }
      }
      if (!blocked && ++visible >= stop_at) return visible;
    }
  }
  return visible;
}

double visibility_fraction(const Scene& scene, std::size_t object_index, int samples) {
  require(object_index < scene.objects.size(), "object index out of range");
  require(samples >= 2, "visibility needs at least 2x2 samples");
  std::vector<Box> occluders;
  occluders.reserve(scene.objects.size());
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j != object_index) occluders.push_back(scene.objects[j].box());
  }
  const int total = samples * samples;
  const int count = visible_sample_count(scene.objects[object_index].box(), scene.shelf.camera(),
                                         occluders, samples, total + 1);
  return static_cast<double>(count) / total;
}

VisibilityReport observe(const Scene& scene, double v_detect, int samples) {
  require(v_detect > 0.0 && v_detect <= 1.0, "detection threshold must be in (0,1]");
  VisibilityReport report;
  report.fraction.resize(scene.objects.size());
  report.is_detected.resize(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const double f = visibility_fraction(scene, i, samples);
    const auto& name = scene.objects[i].spec.name;
    report.fraction[i] = f;
    report.per_object_fraction[name] = f;
    report.is_detected[i] = f >= v_detect;
    if (f >= v_detect) report.detected.insert(name);
  }
  return report;
}

}  // namespace sms
