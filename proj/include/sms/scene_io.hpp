#pragma once

#include <string>

#include "json.hpp"
#include "sms/geometry.hpp"

namespace sms {

// Scene document:
//   {"shelf": {"width", "depth", "height", "camera_offset"},
//    "objects": [{"name", "dims": [w, d, h], "position": [x, y], "category_path": [...]}],
//    "target": "<name>"}
// Lengths are written with 6 decimals.
std::string scene_to_text(const Scene& scene);
Scene scene_from_json(const nlohmann::json& doc);
Scene scene_from_text(const std::string& text);

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace sms
