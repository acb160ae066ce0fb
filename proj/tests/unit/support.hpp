#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sms/geometry.hpp"

namespace testutil {

inline sms::PlacedObject obj(const std::string& name, double w, double d, double h, double x, double y) {
  sms::PlacedObject o;
  o.spec.name = name;
  o.spec.dims = {w, d, h};
  o.position = {x, y};
  return o;
}

inline sms::Scene scene_of(std::vector<sms::PlacedObject> objects, std::size_t target = 0) {
  sms::Scene s;
  s.objects = std::move(objects);
  s.target_index = target;
  return s;
}

// Walks each ray in small steps and tests points against the open box
// interiors. Deliberately unrelated to the slab test used by the library.
inline bool ray_blocked_marching(const sms::Vec3& p, const sms::Vec3& cam,
                                 const std::vector<sms::Box>& boxes, int steps = 4000) {
  for (int s = 1; s < steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const double x = p.x + (cam.x - p.x) * t;
    const double y = p.y + (cam.y - p.y) * t;
    const double z = p.z + (cam.z - p.z) * t;
    for (const auto& b : boxes) {
      if (x > b.x0 && x < b.x1 && y > b.y0 && y < b.y1 && z > b.z0 && z < b.z1) return true;
    }
  }
  return false;
}

// Fraction of an n x n sample lattice on the front face that sees the camera.
inline double dense_visibility(const sms::Scene& scene, std::size_t idx, int n) {
  std::vector<sms::Box> others;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j != idx) others.push_back(scene.objects[j].box());
  }
  const sms::Box t = scene.objects[idx].box();
  const sms::Vec3 cam = scene.shelf.camera();
  int vis = 0;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      const sms::Vec3 p{t.x0 + (i + 0.5) * (t.x1 - t.x0) / n, t.y0, t.z0 + (k + 0.5) * (t.z1 - t.z0) / n};
      if (!ray_blocked_marching(p, cam, others, 1500)) ++vis;
    }
  }
  return static_cast<double>(vis) / (n * n);
}

}  // namespace testutil
