#include "sms/scene_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sms/error.hpp"

namespace sms {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

double number(const nlohmann::json& v, const char* what) {
  if (!v.is_number()) fail(ErrorCode::Parse, std::string("expected number for ") + what);
  return v.get<double>();
}

}  // namespace

std::string scene_to_text(const Scene& scene) {
  std::ostringstream out;
  const ShelfSpec& s = scene.shelf;
  out << "{\n  \"shelf\": {\"width\": " << fixed6(s.width) << ", \"depth\": " << fixed6(s.depth)
      << ", \"height\": " << fixed6(s.height) << ", \"camera_offset\": " << fixed6(s.camera_offset)
      << "},\n  \"objects\": [";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    out << (i ? ",\n    " : "\n    ") << "{\"name\": " << quoted(o.spec.name) << ", \"dims\": ["
        << fixed6(o.spec.dims.w) << ", " << fixed6(o.spec.dims.d) << ", " << fixed6(o.spec.dims.h)
        << "], \"position\": [" << fixed6(o.position.x) << ", " << fixed6(o.position.y)
        << "], \"category_path\": [";
    for (std::size_t k = 0; k < o.spec.category_path.size(); ++k) {
      out << (k ? ", " : "") << quoted(o.spec.category_path[k]);
    }
    out << "]}";
  }
  out << "\n  ],\n  \"target\": "
      << quoted(scene.objects.empty() ? std::string() : scene.target().spec.name) << "\n}\n";
  return out.str();
}

Scene scene_from_json(const nlohmann::json& doc) {
  try {
    Scene scene;
    const auto& sh = doc.at("shelf");
    scene.shelf.width = number(sh.at("width"), "shelf.width");
    scene.shelf.depth = number(sh.at("depth"), "shelf.depth");
    scene.shelf.height = number(sh.at("height"), "shelf.height");
    if (sh.contains("camera_offset")) {
      scene.shelf.camera_offset = number(sh.at("camera_offset"), "shelf.camera_offset");
    }
    for (const auto& jo : doc.at("objects")) {
      PlacedObject o;
      o.spec.name = jo.at("name").get<std::string>();
      const auto& d = jo.at("dims");
      if (!d.is_array() || d.size() != 3) fail(ErrorCode::Parse, "dims must be [w,d,h]");
      o.spec.dims = {number(d[0], "dims"), number(d[1], "dims"), number(d[2], "dims")};
      const auto& p = jo.at("position");
      if (!p.is_array() || p.size() != 2) fail(ErrorCode::Parse, "position must be [x,y]");
      o.position = {number(p[0], "position"), number(p[1], "position")};
      if (jo.contains("category_path")) {
        o.spec.category_path = jo.at("category_path").get<std::vector<std::string>>();
      }
      scene.objects.push_back(std::move(o));
    }
    const std::string target = doc.at("target").get<std::string>();
    scene.target_index = scene.index_of(target);
    scene.validate();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("scene document: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    fail(ErrorCode::Parse, std::string("scene document: ") + e.what());
  }
}

Scene scene_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("scene document: ") + e.what());
  }
  return scene_from_json(doc);
}

void save_scene(const Scene& scene, const std::string& path) {
  write_text_file(path, scene_to_text(scene));
}

Scene load_scene(const std::string& path) { return scene_from_text(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

}  // namespace sms
