#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bigraph/image.hpp"
#include "bigraph/scene.hpp"

namespace bigraph {

template <class T>
struct HitT {
  T t;
  Vec3<T> point;
  Vec3<T> normal;
};

using Hit = HitT<double>;

inline constexpr double kHitEpsilon = 1e-9;
inline constexpr double kShadowOffset = 1e-6;
inline constexpr std::size_t kMaxLights = 64;

/// Plain-double copy of an object.
template <class T>
ObjectInstance plain_object(const ObjectInstanceT<T>& o) {
  ObjectInstance p;
  p.shape = o.shape;
  p.material.color = value_of(o.material.color);
  p.material.ambient = value_of(o.material.ambient);
  p.material.diffuse = value_of(o.material.diffuse);
  p.material.specular = value_of(o.material.specular);
  p.material.shininess = value_of(o.material.shininess);
  p.translation = value_of(o.translation);
  p.rotation = value_of(o.rotation);
  p.scale = value_of(o.scale);
  return p;
}

/// Geometry-only plain copy (no pattern texels) used for background tracing.
template <class T>
Scene plain_geometry(const SceneT<T>& s) {
  Scene p;
  p.camera = s.camera;
  p.walls = s.walls;
  p.ambient_light = s.ambient_light;
  p.background = s.background;
  p.shadows = s.shadows;
  p.floor.mapping = s.floor.mapping;
  for (const auto& o : s.objects) p.objects.push_back(plain_object(o));
  return p;
}

namespace detail {

// Rotation about +z by angle with precomputed cosine/sine.
template <class T>
Vec3<T> rotate_z(const Vec3<T>& v, const T& c, const T& s) {
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

template <class T>
struct LocalHit {
  T t;
  Vec3<T> normal;  // canonical-frame normal (unnormalized allowed)
};

template <class T>
std::optional<LocalHit<T>> hit_sphere(const Vec3<T>& o, const Vec3<T>& d) {
  const T a = dot(d, d);
  const T b = dot(o, d);
  const T c = dot(o, o) - 1.0;
  const T disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const T sq = sqrt(disc);
  T t = (-b - sq) / a;
  if (!(t > kHitEpsilon)) {
    t = (-b + sq) / a;
    if (!(t > kHitEpsilon)) return std::nullopt;
  }
  return LocalHit<T>{t, o + d * t};
}

template <class T>
std::optional<LocalHit<T>> hit_cube(const Vec3<T>& o, const Vec3<T>& d) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  T enter = T(-inf), exit = T(inf);
  int enter_axis = -1, exit_axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (abs(value_of(d[i])) < 1e-15) {
      if (abs(value_of(o[i])) > 1.0) return std::nullopt;
      continue;
    }
    T t1 = (-1.0 - o[i]) / d[i];
    T t2 = (1.0 - o[i]) / d[i];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > enter) {
      enter = t1;
      enter_axis = i;
    }
    if (t2 < exit) {
      exit = t2;
      exit_axis = i;
    }
  }
  if (enter > exit || !(exit > kHitEpsilon)) return std::nullopt;
  Vec3<T> n{T(0.0), T(0.0), T(0.0)};
  if (enter > kHitEpsilon && enter_axis >= 0) {
    n[enter_axis] = T(value_of(d[enter_axis]) > 0.0 ? -1.0 : 1.0);
    return LocalHit<T>{enter, n};
  }
  if (exit_axis < 0) return std::nullopt;
  n[exit_axis] = T(value_of(d[exit_axis]) > 0.0 ? 1.0 : -1.0);
  return LocalHit<T>{exit, n};
}

template <class T>
std::optional<LocalHit<T>> hit_cylinder(const Vec3<T>& o, const Vec3<T>& d) {
  std::optional<LocalHit<T>> best;
  auto consider = [&](const T& t, const Vec3<T>& n) {
    if (t > kHitEpsilon && (!best || t < best->t)) best = LocalHit<T>{t, n};
  };
  const T a = d.x * d.x + d.y * d.y;
  if (value_of(a) > 1e-30) {
    const T b = o.x * d.x + o.y * d.y;
    const T c = o.x * o.x + o.y * o.y - 1.0;
    const T disc = b * b - a * c;
    if (disc >= 0.0) {
      const T sq = sqrt(disc);
      for (const T& t : {(-b - sq) / a, (-b + sq) / a}) {
        const T z = o.z + d.z * t;
        if (z >= -1.0 && z <= 1.0) consider(t, Vec3<T>{o.x + d.x * t, o.y + d.y * t, T(0.0)});
      }
    }
  }
  if (abs(value_of(d.z)) > 1e-15) {
    for (double cap : {-1.0, 1.0}) {
      const T t = (cap - o.z) / d.z;
      const T x = o.x + d.x * t;
      const T y = o.y + d.y * t;
      if (x * x + y * y <= 1.0) consider(t, Vec3<T>{T(0.0), T(0.0), T(cap)});
    }
  }
  return best;
}

}  // namespace detail

/// Nearest positive-t intersection of a world-space ray with a placed
/// primitive. The ray direction must be unit length; t is world distance.
template <class T>
std::optional<HitT<T>> intersect(const Vec3<T>& origin, const Vec3<T>& direction, const ObjectInstanceT<T>& obj) {
  const T c = cos(obj.rotation);
  const T s = sin(obj.rotation);
  const Vec3<T> rel = origin - obj.translation;
  const Vec3<T> ro = detail::rotate_z(rel, c, -s);
  const Vec3<T> rd = detail::rotate_z(direction, c, -s);
  const Vec3<T> lo{ro.x / obj.scale.x, ro.y / obj.scale.y, ro.z / obj.scale.z};
  const Vec3<T> ld{rd.x / obj.scale.x, rd.y / obj.scale.y, rd.z / obj.scale.z};

  std::optional<detail::LocalHit<T>> local;
  switch (obj.shape) {
    case ShapeClass::sphere:
      local = detail::hit_sphere(lo, ld);
      break;
    case ShapeClass::cube:
      local = detail::hit_cube(lo, ld);
      break;
    case ShapeClass::cylinder:
      local = detail::hit_cylinder(lo, ld);
      break;
  }
  if (!local) return std::nullopt;
  const Vec3<T> ln{local->normal.x / obj.scale.x, local->normal.y / obj.scale.y, local->normal.z / obj.scale.z};
  const Vec3<T> wn = normalize(detail::rotate_z(ln, c, s));
  return HitT<T>{local->t, origin + direction * local->t, wn};
}

/// Phong reflection at a surface point: ambient + per-light diffuse and
/// specular, each light gated by `visible[k]`, clamped to [0,1].
/// Specular is only added on the lit side of the surface (N·L > 0).
template <class T>
Vec3<T> shade_phong(const Vec3<T>& point, const Vec3<T>& normal, const Vec3<T>& view_dir,
                    const Vec3<T>& base_color, const T& ambient, const T& diffuse, const T* specular,
                    const T* shininess, std::span<const PointLightT<T>> lights, const Vec3d& ambient_light,
                    std::span<const char> visible) {
  Vec3<T> rgb{base_color.x * ambient * ambient_light.x, base_color.y * ambient * ambient_light.y,
              base_color.z * ambient * ambient_light.z};
  for (std::size_t k = 0; k < lights.size(); ++k) {
    if (!visible[k]) continue;
    const Vec3<T> to_light = normalize(lights[k].position - point);
    const T n_dot_l = dot(normal, to_light);
    if (!(n_dot_l > 0.0)) continue;
    const T lambert = diffuse * n_dot_l;
    Vec3<T> term = base_color * lambert;
    if (specular != nullptr) {
      const Vec3<T> reflected = normal * (2.0 * n_dot_l) - to_light;
      const T r_dot_v = dot(reflected, view_dir);
      if (r_dot_v > 0.0) {
        const T spec = *specular * pow(r_dot_v, *shininess);
        term = term + Vec3<T>{spec, spec, spec};
      }
    }
    rgb = rgb + hadamard(term, lights[k].intensity);
  }
  return {clamp(rgb.x, 0.0, 1.0), clamp(rgb.y, 0.0, 1.0), clamp(rgb.z, 0.0, 1.0)};
}

/// Bilinear, clamp-to-edge floor texture lookup at world point (x, y).
template <class T>
Vec3<T> sample_floor(const FloorT<T>& floor, double x, double y) {
  const auto& tex = floor.pattern;
  const double u = (x - floor.mapping.center_x) / floor.mapping.extent + 0.5;
  const double v = (y - floor.mapping.center_y) / floor.mapping.extent + 0.5;
  const double fx = std::clamp(u * tex.width - 0.5, 0.0, static_cast<double>(tex.width - 1));
  const double fy = std::clamp((1.0 - v) * tex.height - 0.5, 0.0, static_cast<double>(tex.height - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, tex.width - 1);
  const int y1 = std::min(y0 + 1, tex.height - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  Vec3<T> out;
  for (int ch = 0; ch < 3; ++ch) {
    const T top = tex.at(y0, x0, ch) * (1.0 - wx) + tex.at(y0, x1, ch) * wx;
    const T bottom = tex.at(y1, x0, ch) * (1.0 - wx) + tex.at(y1, x1, ch) * wx;
    out[ch] = top * (1.0 - wy) + bottom * wy;
  }
  return out;
}

/// True when any object blocks the segment from `point` to `light`.
bool occluded(std::span<const ObjectInstance> objects, const Vec3d& point, const Vec3d& light);

/// Surface hit by a primary ray when objects are ignored.
struct BackgroundHit {
  enum class Kind { none, floor, wall } kind = Kind::none;
  double t = std::numeric_limits<double>::infinity();
  int wall = -1;
  Vec3d point;
  Vec3d normal;
};

BackgroundHit trace_background(const Scene& scene, const Ray& ray);

/// Color of one primary ray.
/// `geometry` is the plain copy of `scene` used for shadow rays.
template <class T>
Vec3<T> trace_ray(const SceneT<T>& scene, const Scene& geometry, const Ray& ray, const BackgroundHit& bg,
                  int* hit_object = nullptr) {
  std::optional<HitT<T>> best;
  int best_index = -1;
  const Vec3<T> origin(ray.origin);
  const Vec3<T> dir(ray.direction);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    auto hit = intersect(origin, dir, scene.objects[i]);
    if (hit && value_of(hit->t) < bg.t && (!best || hit->t < best->t)) {
      best = hit;
      best_index = static_cast<int>(i);
    }
  }
  if (hit_object) *hit_object = best_index;

  std::array<char, kMaxLights> visible{};
  const std::size_t nl = scene.lights.size();
  auto fill_visibility = [&](const Vec3d& p, const Vec3d& n) {
    for (std::size_t k = 0; k < nl; ++k) {
      visible[k] = !scene.shadows ||
                   !occluded(geometry.objects, p + n * kShadowOffset, value_of(scene.lights[k].position));
    }
  };
  const Vec3<T> view = -dir;

  if (best) {
    const auto& m = scene.objects[static_cast<std::size_t>(best_index)].material;
    fill_visibility(value_of(best->point), value_of(best->normal));
    return shade_phong<T>(best->point, best->normal, view, m.color, m.ambient, m.diffuse, &m.specular,
                          &m.shininess, scene.lights, scene.ambient_light, std::span<const char>(visible.data(), nl));
  }
  switch (bg.kind) {
    case BackgroundHit::Kind::floor: {
      const auto& f = scene.floor;
      const Vec3<T> base = hadamard(f.color, sample_floor(f, bg.point.x, bg.point.y));
      fill_visibility(bg.point, bg.normal);
      return shade_phong<T>(Vec3<T>(bg.point), Vec3<T>(bg.normal), view, base, f.ambient, f.diffuse, nullptr,
                            nullptr, scene.lights, scene.ambient_light, std::span<const char>(visible.data(), nl));
    }
    case BackgroundHit::Kind::wall: {
      const Wall& w = scene.walls[static_cast<std::size_t>(bg.wall)];
      fill_visibility(bg.point, bg.normal);
      const T ka(w.ambient), kd(w.diffuse);
      return shade_phong<T>(Vec3<T>(bg.point), Vec3<T>(bg.normal), view, Vec3<T>(w.color), ka, kd, nullptr,
                            nullptr, scene.lights, scene.ambient_light, std::span<const char>(visible.data(), nl));
    }
    case BackgroundHit::Kind::none:
      break;
  }
  return Vec3<T>(scene.background);
}

/// Renders the scene: one ray per pixel center.
template <class T>
BasicImage<T> render(const SceneT<T>& scene) {
  if (scene.lights.size() > kMaxLights) throw InvalidScene("too many lights");
  const Scene geometry = plain_geometry(scene);
  const CameraRays rays(scene.camera);
  BasicImage<T> image(scene.camera.height, scene.camera.width, 3);
  for (int r = 0; r < scene.camera.height; ++r) {
    for (int c = 0; c < scene.camera.width; ++c) {
      const Ray ray = rays.ray(r, c);
      const BackgroundHit bg = trace_background(geometry, ray);
      const Vec3<T> rgb = trace_ray(scene, geometry, ray, bg);
      image.at(r, c, 0) = rgb.x;
      image.at(r, c, 1) = rgb.y;
      image.at(r, c, 2) = rgb.z;
    }
  }
  return image;
}

/// Index of the object seen through each pixel, -1 for background.
std::vector<int> render_hit_mask(const Scene& scene);

/// Screen-space rectangle [row0,row1)×[col0,col1).
struct PixelRect {
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0;
  bool empty() const noexcept { return row0 >= row1 || col0 >= col1; }
};

/// Conservative pixel rectangle containing every pixel whose primary ray can hit `obj`.
PixelRect object_pixel_bounds(const CameraRays& rays, const Camera& camera, const ObjectInstance& obj);

/// Background (floor, walls, constant color) of a scene with shadows disabled,
/// cached so a single object can be re-rendered inside its pixel bounds only.
class BackgroundCache {
 public:
  explicit BackgroundCache(Scene globals);

  const Scene& globals() const noexcept { return globals_; }
  const Image& image() const noexcept { return image_; }
  const Camera& camera() const noexcept { return globals_.camera; }
  PixelRect full_rect() const noexcept { return {0, globals_.camera.height, 0, globals_.camera.width}; }

  /// Pixel bounds of `obj` on this camera.
  PixelRect bounds(const ObjectInstance& obj) const;

  /// Writes the single-object render of the pixels in `rect` into `out`, an
  /// image covering `window` (pixel (r, c) lives at (r - window.row0, c - window.col0)).
  /// `out` must already hold the background elsewhere.
  void render_object(const ObjectInstance& obj, const PixelRect& rect, const PixelRect& window, Image& out) const;

  /// Full single-object render (bit-identical to `render` of the globals plus `obj`, shadows off).
  Image render_object(const ObjectInstance& obj) const;

 private:
  Scene globals_;
  CameraRays rays_;
  std::vector<Ray> primary_;
  std::vector<BackgroundHit> hits_;
  Image image_;
};

}  // namespace bigraph
