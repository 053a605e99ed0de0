#include "bigraph/scene_io.hpp"

#include <fstream>

#include "bigraph/image.hpp"

namespace bigraph {

Json to_json(const Vec3d& v) { return Json::array({v.x, v.y, v.z}); }

Vec3d vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidScene("expected a 3-element array, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const Camera& c) {
  return {{"position", to_json(c.position)},
          {"look_at", to_json(c.look_at)},
          {"up", to_json(c.up)},
          {"vertical_fov_deg", c.vertical_fov_deg},
          {"width", c.width},
          {"height", c.height}};
}

Camera camera_from_json(const Json& j) {
  Camera c;
  if (j.contains("position")) c.position = vec3_from_json(j["position"]);
  if (j.contains("look_at")) c.look_at = vec3_from_json(j["look_at"]);
  if (j.contains("up")) c.up = vec3_from_json(j["up"]);
  c.vertical_fov_deg = j.value("vertical_fov_deg", c.vertical_fov_deg);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  return c;
}

Json to_json(const Material& m) {
  return {{"color", to_json(m.color)},
          {"ambient", m.ambient},
          {"diffuse", m.diffuse},
          {"specular", m.specular},
          {"shininess", m.shininess}};
}

Material material_from_json(const Json& j) {
  Material m;
  if (j.contains("color")) m.color = vec3_from_json(j["color"]);
  m.ambient = j.value("ambient", m.ambient);
  m.diffuse = j.value("diffuse", m.diffuse);
  m.specular = j.value("specular", m.specular);
  m.shininess = j.value("shininess", m.shininess);
  return m;
}

Json to_json(const ObjectInstance& o) {
  return {{"shape", std::string(to_string(o.shape))},
          {"material", to_json(o.material)},
          {"translation", to_json(o.translation)},
          {"rotation", o.rotation},
          {"scale", to_json(o.scale)}};
}

ObjectInstance object_from_json(const Json& j) {
  ObjectInstance o;
  o.shape = shape_from_string(j.at("shape").get<std::string>());
  if (j.contains("material")) o.material = material_from_json(j["material"]);
  if (j.contains("scale")) o.scale = vec3_from_json(j["scale"]);
  if (j.contains("translation")) {
    o.translation = vec3_from_json(j["translation"]);
  } else {
    o.translation = {0.0, 0.0, o.scale.z};
  }
  o.rotation = j.value("rotation", 0.0);
  return o;
}

Json to_json(const Texture& t) {
  return {{"height", t.height}, {"width", t.width}, {"texels", t.texels}};
}

Texture texture_from_json(const Json& j) {
  Texture t;
  t.height = j.at("height").get<int>();
  t.width = j.at("width").get<int>();
  if (j.contains("texels")) {
    t.texels = j["texels"].get<std::vector<double>>();
  } else {
    t.texels.assign(static_cast<std::size_t>(t.height) * t.width * 3, j.value("fill", 0.5));
  }
  if (t.texels.size() != static_cast<std::size_t>(t.height) * t.width * 3) {
    throw InvalidScene("texture texel count does not match its dimensions");
  }
  return t;
}

Json to_json(const Scene& s) {
  Json lights = Json::array();
  for (const auto& l : s.lights) lights.push_back({{"position", to_json(l.position)}, {"intensity", to_json(l.intensity)}});
  Json objects = Json::array();
  for (const auto& o : s.objects) objects.push_back(to_json(o));
  Json walls = Json::array();
  for (const auto& w : s.walls) {
    walls.push_back({{"point", to_json(w.point)},
                     {"normal", to_json(w.normal)},
                     {"color", to_json(w.color)},
                     {"ambient", w.ambient},
                     {"diffuse", w.diffuse}});
  }
  Json floor = {{"color", to_json(s.floor.color)},
                {"ambient", s.floor.ambient},
                {"diffuse", s.floor.diffuse},
                {"mapping",
                 {{"center_x", s.floor.mapping.center_x},
                  {"center_y", s.floor.mapping.center_y},
                  {"extent", s.floor.mapping.extent}}},
                {"pattern", to_json(s.floor.pattern)}};
  return {{"camera", to_json(s.camera)},
          {"lights", lights},
          {"floor", floor},
          {"objects", objects},
          {"walls", walls},
          {"ambient_light", to_json(s.ambient_light)},
          {"background", to_json(s.background)},
          {"shadows", s.shadows}};
}

Scene scene_from_json(const Json& j) {
  Scene s;
  if (j.contains("camera")) s.camera = camera_from_json(j["camera"]);
  for (const auto& l : j.value("lights", Json::array())) {
    s.lights.push_back({vec3_from_json(l.at("position")), vec3_from_json(l.at("intensity"))});
  }
  if (j.contains("floor")) {
    const Json& f = j["floor"];
    if (f.contains("color")) s.floor.color = vec3_from_json(f["color"]);
    s.floor.ambient = f.value("ambient", s.floor.ambient);
    s.floor.diffuse = f.value("diffuse", s.floor.diffuse);
    if (f.contains("mapping")) {
      const Json& m = f["mapping"];
      s.floor.mapping.center_x = m.value("center_x", s.floor.mapping.center_x);
      s.floor.mapping.center_y = m.value("center_y", s.floor.mapping.center_y);
      s.floor.mapping.extent = m.value("extent", s.floor.mapping.extent);
    }
    if (f.contains("pattern")) s.floor.pattern = texture_from_json(f["pattern"]);
  }
  if (s.floor.pattern.texels.empty()) s.floor.pattern = flat_texture(1, 1, 1.0);
  for (const auto& o : j.value("objects", Json::array())) s.objects.push_back(object_from_json(o));
  for (const auto& w : j.value("walls", Json::array())) {
    Wall wall;
    wall.point = vec3_from_json(w.at("point"));
    wall.normal = vec3_from_json(w.at("normal"));
    if (w.contains("color")) wall.color = vec3_from_json(w["color"]);
    wall.ambient = w.value("ambient", wall.ambient);
    wall.diffuse = w.value("diffuse", wall.diffuse);
    s.walls.push_back(wall);
  }
  if (j.contains("ambient_light")) s.ambient_light = vec3_from_json(j["ambient_light"]);
  if (j.contains("background")) s.background = vec3_from_json(j["background"]);
  s.shadows = j.value("shadows", s.shadows);
  return s;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

Scene read_scene(const std::filesystem::path& path) {
  Scene s = scene_from_json(read_json(path));
  validate(s);
  return s;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) { write_json(path, to_json(scene)); }

}  // namespace bigraph
