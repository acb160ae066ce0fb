#include "sms/openworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sms/error.hpp"
#include "sms/scene_io.hpp"

namespace sms {

std::vector<std::uint32_t> crop_pixels(const CropRecord& crop, int width, int height) {
  require(width > 0 && height > 0, "image dimensions must be positive");
  std::vector<std::uint32_t> out;
  if (crop.rect) {
    const PixelRect& r = *crop.rect;
    require(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= width && r.y1 <= height && r.x0 < r.x1 && r.y0 < r.y1,
            "crop rectangle empty or outside the image");
    out.reserve(static_cast<std::size_t>(r.x1 - r.x0) * (r.y1 - r.y0));
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) out.push_back(static_cast<std::uint32_t>(y * width + x));
    }
    return out;
  }
  out = crop.pixels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  require(!out.empty(), "crop mask is empty");
  require(out.back() < static_cast<std::uint64_t>(width) * height, "crop mask outside the image");
  return out;
}

Heatmap aggregate(const std::vector<CropRecord>& crops, int width, int height) {
  require(!crops.empty(), "aggregate needs at least one crop");
  std::vector<std::size_t> order(crops.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return crops[a].weighted() < crops[b].weighted();
  });

  Heatmap h;
  h.width = width;
  h.height = height;
  h.values.assign(static_cast<std::size_t>(width) * height, 0.0);
  h.covered.assign(h.values.size(), 0);
  std::vector<std::uint32_t> count(h.values.size(), 0);
  for (std::size_t i : order) {
    const double w = crops[i].weighted();
    require(std::isfinite(w) && crops[i].affinity >= 0.0 && crops[i].relevance >= 0.0,
            "crop scores must be finite and non-negative");
    for (std::uint32_t p : crop_pixels(crops[i], width, height)) {
      h.values[p] += w;
      ++count[p];
    }
  }
  for (std::size_t p = 0; p < h.values.size(); ++p) {
    if (count[p] == 0) {
      h.coverage_gap = true;
      continue;
    }
    h.values[p] /= count[p];
    h.covered[p] = 1;
  }
  return h;
}

double threshold_value(const Heatmap& heat, const ThresholdRule& rule) {
  if (rule.kind == ThresholdRule::Kind::Absolute) return rule.value;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < heat.size(); ++p) {
    if (heat.covered[p]) {
      sum += heat.values[p];
      ++n;
    }
  }
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double mean = sum / n;
  double var = 0.0;
  for (std::size_t p = 0; p < heat.size(); ++p) {
    if (heat.covered[p]) var += (heat.values[p] - mean) * (heat.values[p] - mean);
  }
  return mean + rule.k * std::sqrt(var / n);
}

std::vector<std::uint8_t> binarize(const Heatmap& heat, const ThresholdRule& rule) {
  const double t = threshold_value(heat, rule);
  std::vector<std::uint8_t> out(heat.size(), 0);
  for (std::size_t p = 0; p < heat.size(); ++p) out[p] = heat.covered[p] && heat.values[p] >= t;
  return out;
}

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  require(a.size() == b.size(), "masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    inter += a[p] && b[p];
    uni += a[p] || b[p];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_at_threshold(const Heatmap& heat, const std::vector<std::uint8_t>& truth,
                        const ThresholdRule& rule) {
  require(truth.size() == heat.size(), "truth mask and heatmap differ in size");
  return iou(binarize(heat, rule), truth);
}

double covered_percentile(const Heatmap& heat, double pct) {
  require(pct > 0.0 && pct <= 100.0, "percentile must be in (0,100]");
  std::vector<double> v;
  for (std::size_t p = 0; p < heat.size(); ++p) {
    if (heat.covered[p]) v.push_back(heat.values[p]);
  }
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

std::size_t select_view(const std::vector<Heatmap>& views) {
  require(!views.empty(), "select_view needs at least one view");
  std::size_t best = 0;
  double best_v = covered_percentile(views[0], 90.0);
  for (std::size_t i = 1; i < views.size(); ++i) {
    const double v = covered_percentile(views[i], 90.0);
    if (v > best_v) {
      best = i;
      best_v = v;
    }
  }
  return best;
}

std::string rle_encode(const std::vector<std::uint8_t>& mask) {
  std::ostringstream out;
  bool first = true;
  for (std::size_t p = 0; p < mask.size();) {
    if (!mask[p]) {
      ++p;
      continue;
    }
    std::size_t q = p;
    while (q < mask.size() && mask[q]) ++q;
    out << (first ? "" : " ") << p << ' ' << (q - p);
    first = false;
    p = q;
  }
  return out.str();
}

std::vector<std::uint8_t> rle_decode(const std::string& rle, std::size_t size) {
  std::vector<std::uint8_t> mask(size, 0);
  std::istringstream in(rle);
  long long start = 0, len = 0;
  while (in >> start) {
    if (!(in >> len)) fail(ErrorCode::Parse, "run-length mask has an odd number of values");
    if (start < 0 || len <= 0 || static_cast<std::size_t>(start + len) > size) {
      fail(ErrorCode::Parse, "run-length mask run outside the image");
    }
    std::fill(mask.begin() + start, mask.begin() + start + len, std::uint8_t{1});
  }
  if (!in.eof()) fail(ErrorCode::Parse, "run-length mask is not numeric");
  return mask;
}

OpenWorldFixture fixture_from_json(const nlohmann::json& doc, const std::string& name) {
  try {
    OpenWorldFixture fx;
    fx.name = name;
    fx.width = doc.at("width").get<int>();
    fx.height = doc.at("height").get<int>();
    require(fx.width > 0 && fx.height > 0, "image dimensions must be positive");
    fx.method = doc.value("method", std::string("default"));
    fx.target = doc.value("target", std::string());
    const std::size_t size = static_cast<std::size_t>(fx.width) * fx.height;
    if (doc.contains("truth_rle")) fx.truth = rle_decode(doc["truth_rle"].get<std::string>(), size);
    for (const auto& c : doc.at("crops")) {
      CropRecord crop;
      if (c.contains("rect")) {
        const auto r = c["rect"].get<std::vector<int>>();
        require(r.size() == 4, "rect needs four values");
        crop.rect = PixelRect{r[0], r[1], r[2], r[3]};
      } else {
        const auto mask = rle_decode(c.at("mask_rle").get<std::string>(), size);
        for (std::size_t p = 0; p < size; ++p) {
          if (mask[p]) crop.pixels.push_back(static_cast<std::uint32_t>(p));
        }
      }
      crop.label = c.value("label", std::string());
      crop.relevance = c.at("relevance").get<double>();
      fx.affinity_given.push_back(c.contains("affinity"));
      crop.affinity = c.value("affinity", 0.0);
      crop_pixels(crop, fx.width, fx.height);
      fx.crops.push_back(std::move(crop));
    }
    require(!fx.crops.empty(), "fixture has no crops");
    return fx;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, "open-world fixture " + name + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    fail(ErrorCode::Parse, "open-world fixture " + name + ": " + e.what());
  }
}

OpenWorldFixture load_fixture(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, "open-world fixture " + path + ": " + e.what());
  }
  return fixture_from_json(doc, path);
}

void resolve_affinities(OpenWorldFixture& fx, const AffinityMatrix& m) {
  for (std::size_t i = 0; i < fx.crops.size(); ++i) {
    if (fx.affinity_given[i]) continue;
    require(!fx.target.empty(), "fixture " + fx.name + " needs a target to look up affinities");
    fx.crops[i].affinity = m.lookup(fx.crops[i].label, fx.target);
    fx.affinity_given[i] = true;
  }
}

std::string heatmap_to_pgm(const Heatmap& heat) {
  double hi = 0.0;
  for (double v : heat.values) hi = std::max(hi, v);
  std::ostringstream out;
  out << "P2\n" << heat.width << ' ' << heat.height << "\n255\n";
  for (int y = 0; y < heat.height; ++y) {
    for (int x = 0; x < heat.width; ++x) {
      const double v = heat.values[static_cast<std::size_t>(y) * heat.width + x];
      const int g = hi > 0.0 ? static_cast<int>(std::lround(v / hi * 255.0)) : 0;
      out << (x ? " " : "") << g;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<OpenWorldSummary> summarize(const std::vector<OpenWorldRow>& rows) {
  std::map<std::string, std::vector<double>> by;
  for (const auto& r : rows) by[r.method].push_back(r.iou);
  std::vector<OpenWorldSummary> out;
  for (const auto& [method, v] : by) {
    OpenWorldSummary s;
    s.method = method;
    s.count = v.size();
    for (double x : v) s.mean_iou += x;
    s.mean_iou /= static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean_iou) * (x - s.mean_iou);
      s.stderr_iou = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace sms
