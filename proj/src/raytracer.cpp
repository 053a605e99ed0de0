#include "bigraph/raytracer.hpp"

#include <cmath>

namespace bigraph {

bool occluded(std::span<const ObjectInstance> objects, const Vec3d& point, const Vec3d& light) {
  const Vec3d to_light = light - point;
  const double dist = norm(to_light);
  const Vec3d dir = to_light / dist;
  for (const auto& obj : objects) {
    const auto hit = intersect<double>(point, dir, obj);
    if (hit && hit->t < dist) return true;
  }
  return false;
}

BackgroundHit trace_background(const Scene& scene, const Ray& ray) {
  BackgroundHit best;
  if (ray.direction.z < -1e-12) {
    const double t = -ray.origin.z / ray.direction.z;
    if (t > kHitEpsilon) {
      best.kind = BackgroundHit::Kind::floor;
      best.t = t;
      best.point = ray.origin + ray.direction * t;
      best.point.z = 0.0;
      best.normal = {0.0, 0.0, 1.0};
    }
  }
  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    const Wall& w = scene.walls[i];
    const double denom = dot(ray.direction, w.normal);
    if (std::abs(denom) < 1e-12) continue;
    const double t = dot(w.point - ray.origin, w.normal) / denom;
    if (t > kHitEpsilon && t < best.t) {
      best.kind = BackgroundHit::Kind::wall;
      best.t = t;
      best.wall = static_cast<int>(i);
      best.point = ray.origin + ray.direction * t;
      const Vec3d n = normalize(w.normal);
      best.normal = denom > 0.0 ? -n : n;
    }
  }
  return best;
}

std::vector<int> render_hit_mask(const Scene& scene) {
  const CameraRays rays(scene.camera);
  std::vector<int> mask(static_cast<std::size_t>(scene.camera.width) * scene.camera.height, -1);
  for (int r = 0; r < scene.camera.height; ++r) {
    for (int c = 0; c < scene.camera.width; ++c) {
      const Ray ray = rays.ray(r, c);
      const BackgroundHit bg = trace_background(scene, ray);
      double best = bg.t;
      int idx = -1;
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto hit = intersect(ray.origin, ray.direction, scene.objects[i]);
        if (hit && hit->t < best) {
          best = hit->t;
          idx = static_cast<int>(i);
        }
      }
      mask[static_cast<std::size_t>(r) * scene.camera.width + c] = idx;
    }
  }
  return mask;
}

PixelRect object_pixel_bounds(const CameraRays& rays, const Camera& camera, const ObjectInstance& obj) {
  const PixelRect full{0, camera.height, 0, camera.width};
  const double c = std::cos(obj.rotation);
  const double s = std::sin(obj.rotation);
  double rmin = 1e300, rmax = -1e300, cmin = 1e300, cmax = -1e300;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3d local{(corner & 1 ? 1.0 : -1.0) * obj.scale.x, (corner & 2 ? 1.0 : -1.0) * obj.scale.y,
                      (corner & 4 ? 1.0 : -1.0) * obj.scale.z};
    const Vec3d world = obj.translation + Vec3d{c * local.x - s * local.y, s * local.x + c * local.y, local.z};
    const auto p = rays.project(world);
    if (!p) return full;
    rmin = std::min(rmin, (*p)[0]);
    rmax = std::max(rmax, (*p)[0]);
    cmin = std::min(cmin, (*p)[1]);
    cmax = std::max(cmax, (*p)[1]);
  }
  // One pixel of margin around the projected hull.
  PixelRect rect;
  rect.row0 = std::clamp(static_cast<int>(std::floor(rmin)) - 1, 0, camera.height);
  rect.row1 = std::clamp(static_cast<int>(std::ceil(rmax)) + 1, 0, camera.height);
  rect.col0 = std::clamp(static_cast<int>(std::floor(cmin)) - 1, 0, camera.width);
  rect.col1 = std::clamp(static_cast<int>(std::ceil(cmax)) + 1, 0, camera.width);
  if (rmax < -1e6 || rmin > 1e6 || cmax < -1e6 || cmin > 1e6) return PixelRect{};
  return rect;
}

BackgroundCache::BackgroundCache(Scene globals) : globals_(std::move(globals)), rays_(globals_.camera) {
  globals_.objects.clear();
  globals_.shadows = false;
  if (globals_.lights.size() > kMaxLights) throw InvalidScene("too many lights");
  const int h = globals_.camera.height;
  const int w = globals_.camera.width;
  hits_.resize(static_cast<std::size_t>(h) * w);
  primary_.resize(static_cast<std::size_t>(h) * w);
  image_ = Image(h, w, 3);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Ray ray = rays_.ray(r, c);
      const BackgroundHit bg = trace_background(globals_, ray);
      primary_[static_cast<std::size_t>(r) * w + c] = ray;
      hits_[static_cast<std::size_t>(r) * w + c] = bg;
      const Vec3d rgb = trace_ray(globals_, globals_, ray, bg);
      image_.at(r, c, 0) = rgb.x;
      image_.at(r, c, 1) = rgb.y;
      image_.at(r, c, 2) = rgb.z;
    }
  }
}

PixelRect BackgroundCache::bounds(const ObjectInstance& obj) const {
  return object_pixel_bounds(rays_, globals_.camera, obj);
}

void BackgroundCache::render_object(const ObjectInstance& obj, const PixelRect& rect, const PixelRect& window,
                                    Image& out) const {
  const int w = globals_.camera.width;
  const auto& m = obj.material;
  const std::array<char, kMaxLights> all_visible = [] {
    std::array<char, kMaxLights> v{};
    v.fill(1);
    return v;
  }();
  const std::span<const char> visible(all_visible.data(), globals_.lights.size());
  const int r0 = std::max(rect.row0, window.row0), r1 = std::min(rect.row1, window.row1);
  const int c0 = std::max(rect.col0, window.col0), c1 = std::min(rect.col1, window.col1);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * w + c;
      const Ray& ray = primary_[idx];
      const int orow = r - window.row0, ocol = c - window.col0;
      const auto hit = intersect(ray.origin, ray.direction, obj);
      if (hit && hit->t < hits_[idx].t) {
        const Vec3d view = -ray.direction;
        const Vec3d rgb = shade_phong<double>(hit->point, hit->normal, view, m.color, m.ambient, m.diffuse,
                                              &m.specular, &m.shininess, globals_.lights,
                                              globals_.ambient_light, visible);
        out.at(orow, ocol, 0) = rgb.x;
        out.at(orow, ocol, 1) = rgb.y;
        out.at(orow, ocol, 2) = rgb.z;
      } else {
        for (int ch = 0; ch < 3; ++ch) out.at(orow, ocol, ch) = image_.at(r, c, ch);
      }
    }
  }
}

Image BackgroundCache::render_object(const ObjectInstance& obj) const {
  Image out = image_;
  render_object(obj, bounds(obj), full_rect(), out);
  return out;
}

}  // namespace bigraph
