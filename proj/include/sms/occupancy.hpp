#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sms/affinity.hpp"
#include "sms/geometry.hpp"

namespace sms {

inline constexpr int kDefaultBins = 512;
inline constexpr double kDefaultSigmaBins = 50.0;

// Mass over the cells of a plan grid (row-major, y outer).
struct OccupancyGrid {
  PlanGrid shape;
  std::vector<double> mass;
  bool flagged = false;  // produced by a fallback rule
  std::string note;

  static OccupancyGrid zeros(const PlanGrid& shape);
  double total() const;
  void normalize();
};

// Mass over camera-ray bins across the shelf opening.
struct Distribution1D {
  std::vector<double> mass;
  bool flagged = false;
  std::string note;

  std::size_t bins() const { return mass.size(); }
  double total() const;
  void normalize();
};

// Ledger entry: where an object was first seen and what it was taken to be.
struct KnownObject {
  std::string object_id;  // true identity in the simulator
  std::string label;      // inferred label at first detection
  Vec2 first_seen;
  Dims dims;
};

struct KnownWorld {
  PlanGrid grid;
  std::vector<KnownObject> known_objects;
  std::vector<std::uint8_t> explored;  // cells ruled out for the target center

  static KnownWorld empty(const ShelfSpec& shelf);
  bool knows(const std::string& object_id) const;
  std::size_t explored_count() const;
};

// Cell value = affinity(nearest known object by first-seen center, target).
// Falls back to a flagged uniform grid when nothing is known or every
// affinity is zero.
OccupancyGrid semantic_grid(const KnownWorld& world, const std::string& target,
                            const AffinityMatrix& affinity);

// x coordinate where the camera ray through p crosses the shelf opening (y=0).
double opening_crossing(Vec2 p, const ShelfSpec& shelf);
int ray_bin(Vec2 p, const ShelfSpec& shelf, int bins);

// Bins whose center ray passes through the footprint, as an inclusive range.
// first > last means no bin is covered.
std::pair<int, int> silhouette_bins(const Rect& footprint, const ShelfSpec& shelf, int bins);

Distribution1D project_to_1d(const OccupancyGrid& grid, const ShelfSpec& shelf,
                             int bins = kDefaultBins);

// Discrete Gaussian convolution with half-sample reflection at both ends;
// sigma 0 is the identity.
Distribution1D gaussian_smooth(const Distribution1D& dist, double sigma_bins);

struct SpatialQuery {
  ShelfSpec shelf;
  PlanGrid grid;
  Dims target_dims;
  double visibility_threshold = 0.01;
  std::span<const Box> occluders;    // observed occluding geometry
  std::span<const Rect> obstacles;   // footprints the target cannot overlap
  const std::vector<std::uint8_t>* explored = nullptr;
  int samples = kDefaultVisibilitySamples;
};

struct SpatialResult {
  OccupancyGrid grid;                  // uniform over feasible cells, or all zero
  std::vector<std::uint8_t> ruled_out; // cells failing bounds/collision/visibility
  std::size_t feasible = 0;
};

// A cell is feasible when a target centered there fits on the shelf, misses
// every obstacle, would stay below the visibility threshold, and is not
// already explored.
SpatialResult spatial_grid(const SpatialQuery& query);

// Elementwise product, renormalized. Falls back to `spatial` (flagged) when
// the product carries no mass.
Distribution1D combine(const Distribution1D& semantic, const Distribution1D& spatial);

double entropy_bits(std::span<const double> p);

// "# B=<n> kind=<kind> step=<t>" followed by one value per line.
std::string dump_distribution(const Distribution1D& dist, std::string_view kind, int step);

}  // namespace sms
