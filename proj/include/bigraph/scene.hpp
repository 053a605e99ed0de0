#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bigraph/vec3.hpp"

namespace bigraph {

class InvalidScene : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ShapeClass { sphere = 0, cube = 1, cylinder = 2 };

inline constexpr int kShapeCount = 3;

std::string_view to_string(ShapeClass shape);
ShapeClass shape_from_string(std::string_view name);

struct Camera {
  Vec3d position{0.0, -6.0, 4.0};
  Vec3d look_at{0.0, 0.0, 0.0};
  Vec3d up{0.0, 0.0, 1.0};
  double vertical_fov_deg = 42.5;
  int width = 80;
  int height = 60;

  void validate() const;
};

/// Primary ray through the center of pixel (row, col).
struct Ray {
  Vec3d origin;
  Vec3d direction;
};

/// Precomputed camera basis.
class CameraRays {
 public:
  explicit CameraRays(const Camera& camera);
  Ray ray(int row, int col) const;
  /// Projects a world point to continuous (row, col) pixel coordinates; nullopt behind the camera.
  std::optional<std::array<double, 2>> project(const Vec3d& p) const;

 private:
  Camera camera_;
  Vec3d forward_, right_, up_;
  double tan_half_ = 0.0;
  double aspect_ = 1.0;
};

template <class T>
struct PointLightT {
  Vec3<T> position;
  Vec3<T> intensity;
};

template <class T>
struct MaterialT {
  Vec3<T> color{T(0.5), T(0.5), T(0.5)};
  T ambient = T(0.3);
  T diffuse = T(0.6);
  T specular = T(0.3);
  T shininess = T(10.0);
};

/// H×W×3 texture, row-major, values in [0,1].
template <class T>
struct TextureT {
  int height = 0;
  int width = 0;
  std::vector<T> texels;

  T& at(int r, int c, int ch) { return texels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  const T& at(int r, int c, int ch) const { return texels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
};

/// Maps floor point (x, y) to texture coordinates: the texture covers a square
/// of side `extent` meters centered at `center`; lookups clamp to the edge.
struct FloorMapping {
  double center_x = 0.0;
  double center_y = 2.0;
  double extent = 16.0;
};

template <class T>
struct FloorT {
  Vec3<T> color{T(0.5), T(0.5), T(0.5)};
  TextureT<T> pattern;
  T ambient = T(0.3);
  T diffuse = T(0.6);
  FloorMapping mapping;
};

/// Constant-appearance vertical plane (room profile backdrop).
struct Wall {
  Vec3d point;
  Vec3d normal;
  Vec3d color{0.8, 0.8, 0.8};
  double ambient = 0.3;
  double diffuse = 0.6;
};

template <class T>
struct ObjectInstanceT {
  ShapeClass shape = ShapeClass::sphere;
  MaterialT<T> material;
  Vec3<T> translation{T(0.0), T(0.0), T(1.0)};
  T rotation = T(0.0);
  Vec3<T> scale{T(1.0), T(1.0), T(1.0)};
};

template <class T>
struct SceneT {
  Camera camera;
  std::vector<PointLightT<T>> lights;
  FloorT<T> floor;
  std::vector<ObjectInstanceT<T>> objects;
  std::vector<Wall> walls;
  Vec3d ambient_light{1.0, 1.0, 1.0};
  Vec3d background{0.0, 0.0, 0.0};
  bool shadows = true;
};

using PointLight = PointLightT<double>;
using Material = MaterialT<double>;
using Texture = TextureT<double>;
using Floor = FloorT<double>;
using ObjectInstance = ObjectInstanceT<double>;
using Scene = SceneT<double>;

Texture flat_texture(int height, int width, double value);

/// Object placed so that its scaled body rests on the floor plane z = 0.
ObjectInstance resting_object(ShapeClass shape, const Material& material, double x, double y, double rotation,
                              const Vec3d& scale);

void validate(const Material& material);
void validate(const ObjectInstance& object);
void validate(const Scene& scene);

/// Camera at the default pose with `lights` lights spread above the scene,
/// intensity split so the floor does not saturate, and a flat mid-gray floor.
Scene default_scene(int width, int height, int lights = 5, int pattern_size = 200);

}  // namespace bigraph
