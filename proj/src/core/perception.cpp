#include "sms/perception.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sms/error.hpp"
#include "sms/rng.hpp"
#include "sms/scene_io.hpp"

namespace sms {

std::size_t DetectionBelief::argmax() const {
  require(!label_probs.empty(), "empty belief");
  return static_cast<std::size_t>(std::max_element(label_probs.begin(), label_probs.end()) -
                                  label_probs.begin());
}

DetectionBelief DetectionBelief::one_hot(const std::vector<std::string>& labels, std::size_t index) {
  require(index < labels.size(), "label index out of range");
  DetectionBelief b;
  b.labels = labels;
  b.label_probs.assign(labels.size(), 0.0);
  b.label_probs[index] = 1.0;
  return b;
}

DetectionBelief simulate_detection(const std::string& true_label,
                                   const std::vector<std::string>& labels, double noise_p,
                                   std::uint64_t seed) {
  require(noise_p >= 0.0 && noise_p <= 1.0, "noise_p must be in [0,1]");
  const auto it = std::find(labels.begin(), labels.end(), true_label);
  require(it != labels.end(), "true label not in object list: " + true_label);
  std::size_t reported = static_cast<std::size_t>(it - labels.begin());
  if (noise_p > 0.0) {
    Rng rng(seed);
    if (rng.uniform() < noise_p) reported = rng.index(labels.size());
  }
  return DetectionBelief::one_hot(labels, reported);
}

std::uint64_t detection_seed(std::uint64_t rollout_seed, const std::string& object_id) {
  return mix_seed(rollout_seed, fnv1a(object_id));
}

DetectionBelief ocr_refine(const DetectionBelief& belief, const OcrSignal& ocr, double temperature,
                           double epsilon) {
  require(belief.label_probs.size() == ocr.scores.size(), "belief and OCR sizes differ");
  require(temperature > 0.0 && std::isfinite(temperature), "temperature must be positive");
  require(epsilon >= 0.0, "epsilon must be non-negative");
  for (double s : ocr.scores) require(std::isfinite(s), "OCR scores must be finite");
  const std::size_t n = ocr.scores.size();
  if (n == 0) return belief;

  const double lo = *std::min_element(ocr.scores.begin(), ocr.scores.end());
  std::vector<double> w(n);
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::pow(ocr.scores[i] - lo + epsilon, 1.0 / temperature);
    wsum += w[i];
  }

  DetectionBelief out = belief;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.label_probs[i] = wsum > 0.0 ? belief.label_probs[i] * (w[i] / wsum) : 0.0;
    sum += out.label_probs[i];
  }
  if (!(sum > 0.0)) {
    DetectionBelief same = belief;
    same.flagged = true;
    return same;
  }
  for (double& p : out.label_probs) p /= sum;
  return out;
}

void record_first_seen(KnownWorld& world, const VisibilityReport& report, const Scene& scene,
                       const std::map<std::string, DetectionBelief>& beliefs) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i >= report.is_detected.size() || !report.is_detected[i]) continue;
    const PlacedObject& o = scene.objects[i];
    if (world.knows(o.name())) continue;
    const auto b = beliefs.find(o.name());
    require(b != beliefs.end(), "no belief for newly detected object " + o.name());
    world.known_objects.push_back({o.name(), b->second.argmax_label(), o.position, o.spec.dims});
  }
}

std::map<std::string, OcrSignal> load_ocr_fixture(const std::string& path) {
  try {
    const auto doc = nlohmann::json::parse(read_text_file(path));
    std::map<std::string, OcrSignal> out;
    for (const auto& [name, entry] : doc.items()) {
      out[name].scores = entry.at("scores").get<std::vector<double>>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, "OCR fixture " + path + ": " + e.what());
  }
}

}  // namespace sms
