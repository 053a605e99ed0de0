#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bigraph/image.hpp"
#include "bigraph/scene.hpp"

namespace bigraph {

/// Mean over pixels and channels of the squared difference.
double l2_image_loss(const Image& rendered, const Image& target);

/// One training image with the placement of the objects it shows. Object
/// materials are ignored; they are what the optimizer recovers.
struct SceneOptTarget {
  Image image;
  std::vector<ObjectInstance> objects;
};

struct SceneOptConfig {
  int epochs = 7;
  double learning_rate = 0.01;
  /// Round-robin passes over the targets inside each group phase of an epoch.
  int steps_per_group = 10;
  double max_shininess = 100.0;
  bool optimize_lights = true;
  bool optimize_floor = true;

  void validate() const;
};

inline constexpr double kMinShininess = 1e-3;

struct OptimizedScene {
  Scene globals;                                // lights and floor; no objects
  std::vector<std::vector<Material>> materials;  // per target, per object
  std::vector<double> epoch_loss;               // [0] before any step, then one per epoch
  std::vector<double> final_loss;               // per target
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int epoch, std::string group);
  int epoch() const noexcept { return epoch_; }
  const std::string& group() const noexcept { return group_; }

 private:
  int epoch_;
  std::string group_;
};

using SceneOptProgress = std::function<void(int epoch, double mean_loss)>;

/// Alternating ADAM fit of the shared globals (lights, floor) and the
/// per-object materials. `init` supplies camera, walls and starting globals;
/// `init_material` starts every object.
OptimizedScene optimize_scene(const std::vector<SceneOptTarget>& targets, const Scene& init,
                              const Material& init_material, const SceneOptConfig& cfg,
                              const SceneOptProgress& progress = {});

/// Scene rendered for target `i` of an optimization result.
Scene scene_for_target(const OptimizedScene& result, const SceneOptTarget& target, std::size_t i);

}  // namespace bigraph
