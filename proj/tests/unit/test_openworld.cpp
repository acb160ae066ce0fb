#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sms/affinity.hpp"
#include "sms/error.hpp"
#include "sms/openworld.hpp"
#include "sms/rng.hpp"

using namespace sms;

namespace {

CropRecord rect_crop(int x0, int y0, int x1, int y1, double affinity, double relevance, std::string label = "") {
  CropRecord c;
  c.rect = PixelRect{x0, y0, x1, y1};
  c.affinity = affinity;
  c.relevance = relevance;
  c.label = std::move(label);
  return c;
}

Heatmap constant_map(int w, int h, double v) {
  Heatmap m;
  m.width = w;
  m.height = h;
  m.values.assign(static_cast<std::size_t>(w) * h, v);
  m.covered.assign(m.values.size(), 1);
  return m;
}

}  // namespace

TEST_CASE("full-image crop gives a constant heatmap") {
  const auto h = aggregate({rect_crop(0, 0, 8, 6, 0.5, 0.3)}, 8, 6);
  for (double v : h.values) CHECK(v == 0.5 * 0.3);
  CHECK_FALSE(h.coverage_gap);
}

TEST_CASE("overlapping crops average") {
  const auto h = aggregate({rect_crop(0, 0, 6, 4, 0.8, 1.0), rect_crop(3, 0, 10, 4, 0.2, 1.0)}, 10, 4);
  CHECK(h.values[0] == 0.8);
  CHECK(h.values[4] == 0.5);
  CHECK(h.values[9] == 0.2);
}

TEST_CASE("crop order does not matter") {
  Rng rng(5);
  std::vector<CropRecord> crops;
  for (int i = 0; i < 12; ++i) {
    const int x0 = static_cast<int>(rng.index(15)), y0 = static_cast<int>(rng.index(10));
    crops.push_back(rect_crop(x0, y0, x0 + 1 + static_cast<int>(rng.index(5)), y0 + 1 + static_cast<int>(rng.index(5)),
                              rng.uniform(), rng.uniform()));
  }
  const auto a = aggregate(crops, 20, 15);
  std::reverse(crops.begin(), crops.end());
  std::rotate(crops.begin(), crops.begin() + 5, crops.end());
  const auto b = aggregate(crops, 20, 15);
  CHECK(a.values == b.values);
  CHECK(a.covered == b.covered);
  CHECK(a.coverage_gap);
}

TEST_CASE("pixel-mask crops") {
  CropRecord m;
  m.pixels = {5, 1, 5, 7};
  m.affinity = 1.0;
  m.relevance = 2.0;
  const auto px = crop_pixels(m, 4, 2);
  CHECK(px == std::vector<std::uint32_t>{1, 5, 7});
  m.pixels = {8};
  CHECK_THROWS_AS(crop_pixels(m, 4, 2), Error);
  CHECK_THROWS_AS(crop_pixels(rect_crop(0, 0, 5, 1, 1, 1), 4, 2), Error);
}

TEST_CASE("iou") {
  const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 1, 1, 0}, none{0, 0, 0, 0}, far{0, 0, 0, 1};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, far) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3));
  CHECK(iou(b, a) == iou(a, b));
  CHECK(iou(none, none) == 0.0);
}

TEST_CASE("threshold rules") {
  Heatmap h = constant_map(4, 1, 0.0);
  h.values = {0.0, 0.0, 1.0, 1.0};
  CHECK(threshold_value(h, {}) == doctest::Approx(1.0));
  CHECK(binarize(h, {}) == std::vector<std::uint8_t>{0, 0, 1, 1});
  CHECK(binarize(h, ThresholdRule::absolute(-1)) == std::vector<std::uint8_t>{1, 1, 1, 1});
  h.covered[3] = 0;
  CHECK(binarize(h, ThresholdRule::absolute(0.5)) == std::vector<std::uint8_t>{0, 0, 1, 0});
}

TEST_CASE("percentile and view selection") {
  CHECK(select_view({constant_map(3, 3, 0.1)}) == 0);
  CHECK(select_view({constant_map(3, 3, 0.2), constant_map(3, 3, 0.5)}) == 1);
  CHECK(select_view({constant_map(3, 3, 0.5), constant_map(3, 3, 0.5)}) == 0);

  // A: mostly low with two extreme pixels; B: broadly high
  Heatmap a = constant_map(10, 10, 0.1);
  a.values[0] = 50.0;
  a.values[1] = 40.0;
  Heatmap b = constant_map(10, 10, 0.6);
  std::vector<double> av = a.values;
  std::sort(av.begin(), av.end());
  CHECK(covered_percentile(a, 90) == av[89]);
  CHECK(covered_percentile(b, 90) == 0.6);
  CHECK(select_view({a, b}) == 1);

  Heatmap empty = constant_map(2, 2, 1.0);
  empty.covered.assign(4, 0);
  CHECK(std::isinf(covered_percentile(empty, 90)));
}

TEST_CASE("rle round trip") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::uint8_t> mask(137);
    for (auto& v : mask) v = rng.uniform() < 0.3;
    CHECK(rle_decode(rle_encode(mask), mask.size()) == mask);
  }
  CHECK(rle_encode({0, 1, 1, 0, 1}) == "1 2 4 1");
  CHECK_THROWS_AS(rle_decode("1 2 3", 10), Error);
  CHECK_THROWS_AS(rle_decode("8 5", 10), Error);
  CHECK_THROWS_AS(rle_decode("a b", 10), Error);
}

TEST_CASE("fixture parsing and affinity lookup") {
  const auto doc = nlohmann::json::parse(R"({
    "width": 4, "height": 2, "method": "aligned", "target": "tea", "truth_rle": "0 2",
    "crops": [{"rect": [0, 0, 2, 2], "label": "coffee", "relevance": 0.5},
              {"mask_rle": "2 2 6 2", "label": "soap", "relevance": 0.25, "affinity": 0.1}]})");
  OpenWorldFixture fx = fixture_from_json(doc, "x");
  CHECK(fx.method == "aligned");
  CHECK(fx.truth == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0, 0, 0});
  CHECK(fx.crops[1].pixels == std::vector<std::uint32_t>{2, 3, 6, 7});
  const AffinityMatrix m({"coffee", "soap", "tea"}, {0, 0.2, 0.8, 0.5, 0, 0.5, 0.9, 0.1, 0});
  resolve_affinities(fx, m);
  CHECK(fx.crops[0].affinity == 0.8);
  CHECK(fx.crops[1].affinity == 0.1);
  CHECK_THROWS_AS(fixture_from_json(nlohmann::json::parse(R"({"width": 2, "height": 2, "crops": []})")), Error);
}

TEST_CASE("pgm export") {
  Heatmap h = constant_map(2, 1, 0.0);
  h.values = {0.5, 1.0};
  CHECK(heatmap_to_pgm(h) == "P2\n2 1\n255\n128 255\n");
}

TEST_CASE("summary per method") {
  const auto s = summarize({{"a", "m1", 1.0}, {"b", "m1", 0.5}, {"c", "m2", 0.25}});
  REQUIRE(s.size() == 2);
  CHECK(s[0].method == "m1");
  CHECK(s[0].mean_iou == 0.75);
  CHECK(s[0].stderr_iou == doctest::Approx(0.25));
  CHECK(s[1].count == 1);
}
