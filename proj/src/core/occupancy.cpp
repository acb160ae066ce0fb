#include "sms/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sms/error.hpp"

namespace sms {

OccupancyGrid OccupancyGrid::zeros(const PlanGrid& shape) {
  OccupancyGrid g;
  g.shape = shape;
  g.mass.assign(shape.size(), 0.0);
  return g;
}

double OccupancyGrid::total() const {
  double s = 0.0;
  for (double v : mass) s += v;
  return s;
}

void OccupancyGrid::normalize() {
  const double s = total();
  if (s > 0.0) {
    for (double& v : mass) v /= s;
  }
}

double Distribution1D::total() const {
  double s = 0.0;
  for (double v : mass) s += v;
  return s;
}

void Distribution1D::normalize() {
  const double s = total();
  if (s > 0.0) {
    for (double& v : mass) v /= s;
  }
}

KnownWorld KnownWorld::empty(const ShelfSpec& shelf) {
  KnownWorld w;
  w.grid = PlanGrid::for_shelf(shelf);
  w.explored.assign(w.grid.size(), 0);
  return w;
}

bool KnownWorld::knows(const std::string& object_id) const {
  return std::any_of(known_objects.begin(), known_objects.end(),
                     [&](const KnownObject& k) { return k.object_id == object_id; });
}

std::size_t KnownWorld::explored_count() const {
  return static_cast<std::size_t>(std::count(explored.begin(), explored.end(), std::uint8_t{1}));
}

OccupancyGrid semantic_grid(const KnownWorld& world, const std::string& target,
                            const AffinityMatrix& affinity) {
  OccupancyGrid g = OccupancyGrid::zeros(world.grid);
  auto uniform = [&](const char* why) {
    std::fill(g.mass.begin(), g.mass.end(), 1.0 / static_cast<double>(g.mass.size()));
    g.flagged = true;
    g.note = why;
    return g;
  };
  if (world.known_objects.empty()) return uniform("no known objects");

  const std::size_t t = affinity.index_of(target);
  std::vector<double> score;
  score.reserve(world.known_objects.size());
  for (const auto& k : world.known_objects) score.push_back(affinity.at(affinity.index_of(k.label), t));

  const PlanGrid& pg = world.grid;
  for (int iy = 0; iy < pg.ny; ++iy) {
    const double cy = pg.center_y(iy);
    for (int ix = 0; ix < pg.nx; ++ix) {
      const double cx = pg.center_x(ix);
      std::size_t best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < world.known_objects.size(); ++k) {
        const double dx = cx - world.known_objects[k].first_seen.x;
        const double dy = cy - world.known_objects[k].first_seen.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = k;
        }
      }
      g.mass[pg.index(ix, iy)] = score[best];
    }
  }
  if (!(g.total() > 0.0)) return uniform("all affinities zero");
  g.normalize();
  return g;
}

double opening_crossing(Vec2 p, const ShelfSpec& shelf) {
  const Vec2 cam = shelf.camera_plan();
  return cam.x + (p.x - cam.x) * (shelf.camera_offset / (p.y + shelf.camera_offset));
}

int ray_bin(Vec2 p, const ShelfSpec& shelf, int bins) {
  const double u = opening_crossing(p, shelf) / shelf.width * bins;
  return std::clamp(static_cast<int>(std::floor(u)), 0, bins - 1);
}

std::pair<int, int> silhouette_bins(const Rect& r, const ShelfSpec& shelf, int bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Vec2 c : {Vec2{r.x0, r.y0}, Vec2{r.x1, r.y0}, Vec2{r.x0, r.y1}, Vec2{r.x1, r.y1}}) {
    const double x = opening_crossing(c, shelf);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  // bin b's ray crosses the opening at width * (b + 0.5) / bins
  const int first = std::max(0, static_cast<int>(std::ceil(lo / shelf.width * bins - 0.5)));
  const int last = std::min(bins - 1, static_cast<int>(std::floor(hi / shelf.width * bins - 0.5)));
  return {first, last};
}

Distribution1D project_to_1d(const OccupancyGrid& grid, const ShelfSpec& shelf, int bins) {
  require(bins >= 1, "bin count must be positive");
  Distribution1D d;
  d.mass.assign(static_cast<std::size_t>(bins), 0.0);
  const PlanGrid& pg = grid.shape;
  for (int iy = 0; iy < pg.ny; ++iy) {
    const double cy = pg.center_y(iy);
    for (int ix = 0; ix < pg.nx; ++ix) {
      const double m = grid.mass[pg.index(ix, iy)];
      if (m == 0.0) continue;
      d.mass[static_cast<std::size_t>(ray_bin({pg.center_x(ix), cy}, shelf, bins))] += m;
    }
  }
  d.normalize();
  return d;
}

namespace {

std::size_t reflect_index(long long m, long long n) {
  const long long period = 2 * n;
  long long r = m % period;
  if (r < 0) r += period;
  return static_cast<std::size_t>(r < n ? r : period - 1 - r);
}

}  // namespace

Distribution1D gaussian_smooth(const Distribution1D& dist, double sigma_bins) {
  require(sigma_bins >= 0.0 && std::isfinite(sigma_bins), "sigma must be non-negative");
  if (sigma_bins == 0.0 || dist.mass.empty()) {
    Distribution1D out = dist;
    out.normalize();
    return out;
  }
  // 12 sigma keeps every bin strictly positive when any input bin is.
  const long long radius = std::max<long long>(1, static_cast<long long>(std::ceil(12.0 * sigma_bins)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double z = 0.0;
  for (long long k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma_bins * sigma_bins));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    z += v;
  }
  for (double& v : kernel) v /= z;

  const long long n = static_cast<long long>(dist.mass.size());
  Distribution1D out;
  out.mass.assign(dist.mass.size(), 0.0);
  for (long long j = 0; j < n; ++j) {
    const double x = dist.mass[static_cast<std::size_t>(j)];
    if (x == 0.0) continue;
    for (long long k = -radius; k <= radius; ++k) {
      out.mass[reflect_index(j + k, n)] += x * kernel[static_cast<std::size_t>(k + radius)];
    }
  }
  out.normalize();
  return out;
}

SpatialResult spatial_grid(const SpatialQuery& q) {
  q.shelf.validate();
  require(q.visibility_threshold > 0.0 && q.visibility_threshold <= 1.0,
          "visibility threshold must be in (0,1]");
  require(q.samples >= 2, "visibility needs at least 2x2 samples");
  const PlanGrid& pg = q.grid;
  require(q.explored == nullptr || q.explored->size() == pg.size(), "explored mask has wrong shape");

  SpatialResult res;
  res.grid = OccupancyGrid::zeros(pg);
  res.ruled_out.assign(pg.size(), 0);

  const int total = q.samples * q.samples;
  // Smallest visible-sample count that meets the threshold.
  int stop_at = static_cast<int>(std::ceil(q.visibility_threshold * total));
  while (stop_at > 0 && static_cast<double>(stop_at - 1) / total >= q.visibility_threshold) --stop_at;
  while (static_cast<double>(stop_at) / total < q.visibility_threshold) ++stop_at;

  struct Occ {
    Box box;
    double lo, hi;  // opening-crossing interval
  };
  std::vector<Occ> occ;
  occ.reserve(q.occluders.size());
  for (const Box& b : q.occluders) {
    const auto fp = Rect{b.x0, b.y0, b.x1, b.y1};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Vec2 c : {Vec2{fp.x0, fp.y0}, Vec2{fp.x1, fp.y0}, Vec2{fp.x0, fp.y1}, Vec2{fp.x1, fp.y1}}) {
      const double x = opening_crossing(c, q.shelf);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    occ.push_back({b, lo, hi});
  }

  if (occ.empty()) {
    // Nothing can hide the target: every unexplored cell is ruled out by sight.
    for (std::size_t c = 0; c < pg.size(); ++c) res.ruled_out[c] = 1;
    res.grid.flagged = true;
    res.grid.note = "empty feasible set";
    return res;
  }

  const Vec3 camera = q.shelf.camera();
  const Dims& td = q.target_dims;
  std::vector<Box> relevant;
  relevant.reserve(occ.size());
  for (int iy = 0; iy < pg.ny; ++iy) {
    const double cy = pg.center_y(iy);
    for (int ix = 0; ix < pg.nx; ++ix) {
      const std::size_t cell = pg.index(ix, iy);
      if (q.explored && (*q.explored)[cell]) continue;
      const Vec2 c{pg.center_x(ix), cy};
      const Rect fp = footprint_at(c, td);
      if (!inside_shelf(fp, q.shelf)) {
        res.ruled_out[cell] = 1;
        continue;
      }
      bool blocked = false;
      for (const Rect& o : q.obstacles) {
        if (rects_overlap(fp, o)) {
          blocked = true;
          break;
        }
      }
      if (blocked) {
        res.ruled_out[cell] = 1;
        continue;
      }
      // Only occluders in front of the face whose plan wedge overlaps the
      // face's can block a sample ray.
      const double flo = opening_crossing({fp.x0, fp.y0}, q.shelf);
      const double fhi = opening_crossing({fp.x1, fp.y0}, q.shelf);
      relevant.clear();
      for (const Occ& o : occ) {
        if (o.box.y0 < fp.y0 && o.lo <= fhi + 1e-9 && o.hi >= flo - 1e-9) relevant.push_back(o.box);
      }
      if (relevant.empty()) {
        res.ruled_out[cell] = 1;
        continue;
      }
      const int visible = visible_sample_count(box_at(c, td), camera, relevant, q.samples, stop_at);
      if (static_cast<double>(visible) / total >= q.visibility_threshold) {
        res.ruled_out[cell] = 1;
        continue;
      }
      res.grid.mass[cell] = 1.0;
      ++res.feasible;
    }
  }
  if (res.feasible == 0) {
    res.grid.flagged = true;
    res.grid.note = "empty feasible set";
  } else {
    res.grid.normalize();
  }
  return res;
}

Distribution1D combine(const Distribution1D& semantic, const Distribution1D& spatial) {
  require(semantic.bins() == spatial.bins(), "distributions must have the same bin count");
  Distribution1D out;
  out.mass.resize(spatial.bins());
  double sum = 0.0;
  for (std::size_t b = 0; b < spatial.bins(); ++b) {
    out.mass[b] = semantic.mass[b] * spatial.mass[b];
    sum += out.mass[b];
  }
  if (sum < 1e-12) {
    Distribution1D fallback = spatial;
    fallback.flagged = true;
    fallback.note = "product below 1e-12; using spatial";
    return fallback;
  }
  for (double& v : out.mass) v /= sum;
  return out;
}

double entropy_bits(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) s += v;
  if (!(s > 0.0)) return 0.0;
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) {
      const double q = v / s;
      h -= q * std::log2(q);
    }
  }
  return h;
}

std::string dump_distribution(const Distribution1D& dist, std::string_view kind, int step) {
  std::ostringstream out;
  out << "# B=" << dist.bins() << " kind=" << kind << " step=" << step << '\n';
  char buf[40];
  for (double v : dist.mass) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
  return out.str();
}

}  // namespace sms
