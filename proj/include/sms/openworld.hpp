#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sms/affinity.hpp"

namespace sms {

// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct CropRecord {
  std::optional<PixelRect> rect;
  std::vector<std::uint32_t> pixels;  // row-major indices, used when rect is empty
  std::string label;
  double relevance = 0.0;
  double affinity = 0.0;

  double weighted() const { return affinity * relevance; }
};

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> covered;
  bool coverage_gap = false;

  std::size_t size() const { return values.size(); }
};

// Sorted, de-duplicated pixel indices of a crop; throws on empty or
// out-of-bounds masks.
std::vector<std::uint32_t> crop_pixels(const CropRecord& crop, int width, int height);

// Each pixel gets the mean weighted score of the crops covering it. Scores
// are summed in ascending order so the result does not depend on crop order.
Heatmap aggregate(const std::vector<CropRecord>& crops, int width, int height);

struct ThresholdRule {
  enum class Kind { MeanPlusStd, Absolute } kind = Kind::MeanPlusStd;
  double k = 1.0;      // std multiplier
  double value = 0.0;  // absolute threshold

  static ThresholdRule absolute(double v) { return {Kind::Absolute, 1.0, v}; }
};

// Threshold over covered pixels (population std for the mean+std rule).
double threshold_value(const Heatmap& heat, const ThresholdRule& rule);

// Covered pixels with value >= threshold.
std::vector<std::uint8_t> binarize(const Heatmap& heat, const ThresholdRule& rule);

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);
double iou_at_threshold(const Heatmap& heat, const std::vector<std::uint8_t>& truth,
                        const ThresholdRule& rule = {});

// Nearest-rank percentile over covered pixels; -inf when nothing is covered.
double covered_percentile(const Heatmap& heat, double pct);

// Argmax of the 90th percentile; lowest index on ties.
std::size_t select_view(const std::vector<Heatmap>& views);

// Run-length encoding of a pixel set: "start length start length ...".
std::string rle_encode(const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> rle_decode(const std::string& rle, std::size_t size);

struct OpenWorldFixture {
  std::string name;
  std::string method = "default";
  std::string target;
  int width = 0;
  int height = 0;
  std::vector<CropRecord> crops;
  std::vector<std::uint8_t> truth;  // empty when the file has no ground truth
  std::vector<bool> affinity_given;
};

// {width, height, method?, target?, truth_rle?, crops: [{rect | mask_rle,
// label, relevance, affinity?}]}
OpenWorldFixture fixture_from_json(const nlohmann::json& doc, const std::string& name = "");
OpenWorldFixture load_fixture(const std::string& path);

// Fills missing crop affinities from affinity(label -> target).
void resolve_affinities(OpenWorldFixture& fx, const AffinityMatrix& m);

// Portable graymap (P2), scaled to 0..255 by the maximum value.
std::string heatmap_to_pgm(const Heatmap& heat);

struct OpenWorldRow {
  std::string fixture;
  std::string method;
  double iou = 0.0;
};

struct OpenWorldSummary {
  std::string method;
  std::size_t count = 0;
  double mean_iou = 0.0;
  double stderr_iou = 0.0;
};

std::vector<OpenWorldSummary> summarize(const std::vector<OpenWorldRow>& rows);

}  // namespace sms
