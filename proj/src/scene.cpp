#include "bigraph/scene.hpp"

#include <algorithm>

namespace bigraph {

std::string_view to_string(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::sphere:
      return "sphere";
    case ShapeClass::cube:
      return "cube";
    case ShapeClass::cylinder:
      return "cylinder";
  }
  return "sphere";
}

ShapeClass shape_from_string(std::string_view name) {
  if (name == "sphere") return ShapeClass::sphere;
  if (name == "cube") return ShapeClass::cube;
  if (name == "cylinder") return ShapeClass::cylinder;
  throw InvalidScene("unknown shape class: " + std::string(name));
}

void Camera::validate() const {
  if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0)) throw InvalidScene("camera: vertical fov must be in (0, 180)");
  if (width <= 0 || height <= 0) throw InvalidScene("camera: image size must be positive");
  const Vec3d view = look_at - position;
  if (norm(view) <= 0.0) throw InvalidScene("camera: look-at equals position");
  if (norm(cross(view, up)) <= 1e-12 * norm(view) * norm(up)) throw InvalidScene("camera: up is parallel to the view direction");
}

CameraRays::CameraRays(const Camera& camera) : camera_(camera) {
  camera.validate();
  forward_ = normalize(camera.look_at - camera.position);
  right_ = normalize(cross(forward_, camera.up));
  up_ = cross(right_, forward_);
  tan_half_ = std::tan(camera.vertical_fov_deg * std::numbers::pi / 360.0);
  aspect_ = static_cast<double>(camera.width) / camera.height;
}

Ray CameraRays::ray(int row, int col) const {
  const double sx = (2.0 * (col + 0.5) / camera_.width - 1.0) * tan_half_ * aspect_;
  const double sy = (1.0 - 2.0 * (row + 0.5) / camera_.height) * tan_half_;
  return {camera_.position, normalize(forward_ + right_ * sx + up_ * sy)};
}

std::optional<std::array<double, 2>> CameraRays::project(const Vec3d& p) const {
  const Vec3d d = p - camera_.position;
  const double depth = dot(d, forward_);
  if (depth <= 1e-9) return std::nullopt;
  const double sx = dot(d, right_) / depth / (tan_half_ * aspect_);
  const double sy = dot(d, up_) / depth / tan_half_;
  const double col = (sx + 1.0) * 0.5 * camera_.width;
  const double row = (1.0 - sy) * 0.5 * camera_.height;
  return std::array<double, 2>{row, col};
}

Texture flat_texture(int height, int width, double value) {
  Texture t;
  t.height = height;
  t.width = width;
  t.texels.assign(static_cast<std::size_t>(height) * width * 3, value);
  return t;
}

ObjectInstance resting_object(ShapeClass shape, const Material& material, double x, double y, double rotation,
                              const Vec3d& scale) {
  ObjectInstance o;
  o.shape = shape;
  o.material = material;
  o.translation = {x, y, scale.z};
  o.rotation = rotation;
  o.scale = scale;
  return o;
}

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvalidScene(std::string(what) + " must lie in [0,1]");
}

}  // namespace

void validate(const Material& m) {
  for (int i = 0; i < 3; ++i) check_unit(m.color[i], "material color");
  check_unit(m.ambient, "material ambient");
  check_unit(m.diffuse, "material diffuse");
  check_unit(m.specular, "material specular");
  if (!(m.shininess > 0.0) || !std::isfinite(m.shininess)) throw InvalidScene("material shininess must be finite and > 0");
}

void validate(const ObjectInstance& o) {
  validate(o.material);
  for (int i = 0; i < 3; ++i) {
    if (!(o.scale[i] > 0.0) || !std::isfinite(o.scale[i])) throw InvalidScene("object scale must be finite and > 0");
    if (!std::isfinite(o.translation[i])) throw InvalidScene("object translation must be finite");
  }
  if (std::abs(o.translation.z - o.scale.z) > 1e-9 * std::max(1.0, o.scale.z)) {
    throw InvalidScene("object does not rest on the floor (translation z must equal scale z)");
  }
}

void validate(const Scene& scene) {
  scene.camera.validate();
  if (scene.lights.empty()) throw InvalidScene("scene needs at least one light");
  for (const auto& l : scene.lights) {
    for (int i = 0; i < 3; ++i) {
      if (!(l.intensity[i] >= 0.0)) throw InvalidScene("light intensity must be >= 0");
    }
  }
  const auto& f = scene.floor;
  if (f.pattern.height <= 0 || f.pattern.width <= 0 ||
      f.pattern.texels.size() != static_cast<std::size_t>(f.pattern.height) * f.pattern.width * 3) {
    throw InvalidScene("floor pattern has inconsistent dimensions");
  }
  for (double v : f.pattern.texels) check_unit(v, "floor pattern texel");
  for (int i = 0; i < 3; ++i) check_unit(f.color[i], "floor color");
  check_unit(f.ambient, "floor ambient");
  check_unit(f.diffuse, "floor diffuse");
  for (const auto& o : scene.objects) validate(o);
}

Scene default_scene(int width, int height, int lights, int pattern_size) {
  Scene s;
  s.camera.width = width;
  s.camera.height = height;
  static constexpr std::array<std::array<double, 3>, 8> kSpread = {{
      {3.0, -3.0, 6.0},
      {-3.0, -3.0, 6.0},
      {3.0, 3.0, 6.0},
      {-3.0, 3.0, 6.0},
      {0.0, 0.0, 7.0},
      {0.0, -5.0, 5.0},
      {5.0, 0.0, 5.0},
      {-5.0, 0.0, 5.0},
  }};
  for (int k = 0; k < lights; ++k) {
    const auto& p = kSpread[static_cast<std::size_t>(k) % kSpread.size()];
    s.lights.push_back({{p[0], p[1], p[2]}, {1.0, 1.0, 1.0}});
  }
  s.floor.color = {0.5, 0.5, 0.5};
  s.floor.pattern = flat_texture(pattern_size, pattern_size, 0.5);
  s.floor.ambient = 0.2;
  s.floor.diffuse = 0.5;
  s.shadows = true;
  return s;
}

}  // namespace bigraph
