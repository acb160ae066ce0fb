#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sms/geometry.hpp"
#include "sms/occupancy.hpp"

namespace sms {

// Probability vector over a closed label list.
struct DetectionBelief {
  std::vector<std::string> labels;
  std::vector<double> label_probs;
  bool flagged = false;

  std::size_t argmax() const;  // lowest index on ties
  const std::string& argmax_label() const { return labels.at(argmax()); }
  static DetectionBelief one_hot(const std::vector<std::string>& labels, std::size_t index);
};

// Raw per-class similarity scores from detected text.
struct OcrSignal {
  std::vector<double> scores;
};

// With probability noise_p the reported label is drawn uniformly from the
// list (possibly the true one); the belief is one-hot on what is reported.
DetectionBelief simulate_detection(const std::string& true_label,
                                   const std::vector<std::string>& labels, double noise_p,
                                   std::uint64_t seed);

// Seed for one object's detection draw within a rollout.
std::uint64_t detection_seed(std::uint64_t rollout_seed, const std::string& object_id);

DetectionBelief ocr_refine(const DetectionBelief& belief, const OcrSignal& ocr,
                           double temperature = 1.0, double epsilon = 0.01);

// Appends newly detected objects at their current pose; existing entries are
// never touched.
void record_first_seen(KnownWorld& world, const VisibilityReport& report, const Scene& scene,
                       const std::map<std::string, DetectionBelief>& beliefs);

// {"object": {"scores": [...]}, ...}
std::map<std::string, OcrSignal> load_ocr_fixture(const std::string& path);

}  // namespace sms
