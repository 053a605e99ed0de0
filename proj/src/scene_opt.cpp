#include "bigraph/scene_opt.hpp"

#include <cmath>

#include "bigraph/adam.hpp"
#include "bigraph/raytracer.hpp"

namespace bigraph {

double l2_image_loss(const Image& rendered, const Image& target) {
  if (!rendered.same_shape(target)) throw std::invalid_argument("l2_image_loss: image shapes differ");
  if (rendered.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered.data()[i] - target.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(rendered.size());
}

void SceneOptConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("scene-opt: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("scene-opt: learning rate must be > 0");
  if (steps_per_group < 1) throw std::invalid_argument("scene-opt: steps per group must be >= 1");
  if (!(max_shininess > kMinShininess)) throw std::invalid_argument("scene-opt: max shininess too small");
}

NonFiniteLoss::NonFiniteLoss(int epoch, std::string group)
    : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " while updating the " + group +
                         " parameters"),
      epoch_(epoch),
      group_(std::move(group)) {}

namespace {

constexpr int kMaterialParams = 7;

// Makes `value` a tape leaf when `tape` is given, otherwise a constant.
class LeafMaker {
 public:
  explicit LeafMaker(Tape* tape) : tape_(tape) {}
  Var operator()(double value) {
    if (!tape_) return Var(value);
    Var v = Var::leaf(*tape_, value);
    leaves_.push_back(v);
    return v;
  }
  Vec3<Var> operator()(const Vec3d& v) { return {(*this)(v.x), (*this)(v.y), (*this)(v.z)}; }
  const std::vector<Var>& leaves() const noexcept { return leaves_; }

 private:
  Tape* tape_;
  std::vector<Var> leaves_;
};

std::vector<double> pack_globals(const Scene& s) {
  std::vector<double> p;
  for (const auto& l : s.lights) {
    for (int i = 0; i < 3; ++i) p.push_back(l.position[i]);
    for (int i = 0; i < 3; ++i) p.push_back(l.intensity[i]);
  }
  for (int i = 0; i < 3; ++i) p.push_back(s.floor.color[i]);
  p.push_back(s.floor.ambient);
  p.push_back(s.floor.diffuse);
  p.insert(p.end(), s.floor.pattern.texels.begin(), s.floor.pattern.texels.end());
  return p;
}

void unpack_globals(std::span<const double> p, Scene& s) {
  std::size_t k = 0;
  for (auto& l : s.lights) {
    for (int i = 0; i < 3; ++i) l.position[i] = p[k++];
    for (int i = 0; i < 3; ++i) l.intensity[i] = p[k++];
  }
  for (int i = 0; i < 3; ++i) s.floor.color[i] = p[k++];
  s.floor.ambient = p[k++];
  s.floor.diffuse = p[k++];
  for (double& t : s.floor.pattern.texels) t = p[k++];
}

std::vector<double> pack_material(const Material& m) {
  return {m.color.x, m.color.y, m.color.z, m.ambient, m.diffuse, m.specular, m.shininess};
}

Material unpack_material(std::span<const double> p) {
  Material m;
  m.color = {p[0], p[1], p[2]};
  m.ambient = p[3];
  m.diffuse = p[4];
  m.specular = p[5];
  m.shininess = p[6];
  return m;
}

void clamp_globals(Scene& s) {
  for (auto& l : s.lights)
    for (int i = 0; i < 3; ++i) l.intensity[i] = std::max(0.0, l.intensity[i]);
  for (int i = 0; i < 3; ++i) s.floor.color[i] = std::clamp(s.floor.color[i], 0.0, 1.0);
  s.floor.ambient = std::clamp(s.floor.ambient, 0.0, 1.0);
  s.floor.diffuse = std::clamp(s.floor.diffuse, 0.0, 1.0);
  for (double& t : s.floor.pattern.texels) t = std::clamp(t, 0.0, 1.0);
}

void clamp_material(Material& m, double max_shininess) {
  for (int i = 0; i < 3; ++i) m.color[i] = std::clamp(m.color[i], 0.0, 1.0);
  m.ambient = std::clamp(m.ambient, 0.0, 1.0);
  m.diffuse = std::clamp(m.diffuse, 0.0, 1.0);
  m.specular = std::clamp(m.specular, 0.0, 1.0);
  m.shininess = std::clamp(m.shininess, kMinShininess, max_shininess);
}

SceneT<Var> lift_scene(const Scene& globals, const SceneOptTarget& target, const std::vector<Material>& materials,
                       LeafMaker& global_leaf, LeafMaker& object_leaf) {
  SceneT<Var> s;
  s.camera = globals.camera;
  s.walls = globals.walls;
  s.ambient_light = globals.ambient_light;
  s.background = globals.background;
  s.shadows = globals.shadows;
  for (const auto& l : globals.lights) {
    PointLightT<Var> v;
    v.position = global_leaf(l.position);
    v.intensity = global_leaf(l.intensity);
    s.lights.push_back(v);
  }
  s.floor.color = global_leaf(globals.floor.color);
  s.floor.ambient = global_leaf(globals.floor.ambient);
  s.floor.diffuse = global_leaf(globals.floor.diffuse);
  s.floor.mapping = globals.floor.mapping;
  s.floor.pattern.height = globals.floor.pattern.height;
  s.floor.pattern.width = globals.floor.pattern.width;
  s.floor.pattern.texels.reserve(globals.floor.pattern.texels.size());
  for (double t : globals.floor.pattern.texels) s.floor.pattern.texels.push_back(global_leaf(t));
  for (std::size_t i = 0; i < target.objects.size(); ++i) {
    const ObjectInstance& o = target.objects[i];
    const Material& m = materials[i];
    ObjectInstanceT<Var> v;
    v.shape = o.shape;
    v.translation = Vec3<Var>(o.translation);
    v.rotation = o.rotation;
    v.scale = Vec3<Var>(o.scale);
    v.material.color = object_leaf(m.color);
    v.material.ambient = object_leaf(m.ambient);
    v.material.diffuse = object_leaf(m.diffuse);
    v.material.specular = object_leaf(m.specular);
    v.material.shininess = object_leaf(m.shininess);
    s.objects.push_back(v);
  }
  return s;
}

Var l2_loss_var(const BasicImage<Var>& rendered, const Image& target) {
  Var acc = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const Var d = rendered.data()[i] - target.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(rendered.size());
}

// Loss and gradient with respect to one parameter group of one target.
struct GroupGradient {
  double loss;
  std::vector<double> gradient;
};

GroupGradient group_gradient(const Scene& globals, const SceneOptTarget& target,
                             const std::vector<Material>& materials, bool global_group) {
  Tape tape;
  TapeScope scope(tape);
  LeafMaker g(global_group ? &tape : nullptr);
  LeafMaker o(global_group ? nullptr : &tape);
  const SceneT<Var> scene = lift_scene(globals, target, materials, g, o);
  const Var loss = l2_loss_var(render(scene), target.image);
  const auto& leaves = global_group ? g.leaves() : o.leaves();
  GroupGradient out{loss.value(), std::vector<double>(leaves.size(), 0.0)};
  if (!std::isfinite(out.loss) || loss.is_constant()) return out;
  const std::vector<double> adj = tape.adjoints(loss.index());
  for (std::size_t i = 0; i < leaves.size(); ++i) out.gradient[i] = adj[static_cast<std::size_t>(leaves[i].index())];
  return out;
}

Scene compose(const Scene& globals, const SceneOptTarget& target, const std::vector<Material>& materials) {
  Scene s = globals;
  s.objects = target.objects;
  for (std::size_t i = 0; i < s.objects.size(); ++i) s.objects[i].material = materials[i];
  return s;
}

}  // namespace

Scene scene_for_target(const OptimizedScene& result, const SceneOptTarget& target, std::size_t i) {
  return compose(result.globals, target, result.materials.at(i));
}

OptimizedScene optimize_scene(const std::vector<SceneOptTarget>& targets, const Scene& init,
                              const Material& init_material, const SceneOptConfig& cfg,
                              const SceneOptProgress& progress) {
  cfg.validate();
  if (targets.empty()) throw std::invalid_argument("scene-opt: no targets");
  for (const auto& t : targets) {
    if (t.image.height() != init.camera.height || t.image.width() != init.camera.width || t.image.channels() != 3) {
      throw std::invalid_argument("scene-opt: target image size differs from the camera");
    }
  }

  OptimizedScene result;
  result.globals = init;
  result.globals.objects.clear();
  clamp_globals(result.globals);
  result.materials.resize(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Material m = init_material;
    clamp_material(m, cfg.max_shininess);
    result.materials[i].assign(targets[i].objects.size(), m);
  }

  std::vector<double> global_params = pack_globals(result.globals);
  AdamState global_state(global_params.size(), cfg.learning_rate);
  std::vector<std::vector<AdamState>> object_states(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    object_states[i].assign(targets[i].objects.size(), AdamState(kMaterialParams, cfg.learning_rate));
  }

  auto mean_loss = [&](std::vector<double>* per_target) {
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double l = l2_image_loss(render(compose(result.globals, targets[i], result.materials[i])), targets[i].image);
      if (per_target) per_target->push_back(l);
      acc += l;
    }
    return acc / static_cast<double>(targets.size());
  };

  const double initial = mean_loss(nullptr);
  if (!std::isfinite(initial)) throw NonFiniteLoss(0, "initial");
  result.epoch_loss.push_back(initial);
  if (progress) progress(0, initial);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.optimize_lights || cfg.optimize_floor) {
      for (int pass = 0; pass < cfg.steps_per_group; ++pass) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
          GroupGradient g = group_gradient(result.globals, targets[i], result.materials[i], true);
          if (!std::isfinite(g.loss)) throw NonFiniteLoss(epoch, "global");
          const std::size_t light_params = result.globals.lights.size() * 6;
          if (!cfg.optimize_lights) std::fill(g.gradient.begin(), g.gradient.begin() + static_cast<long>(light_params), 0.0);
          if (!cfg.optimize_floor) std::fill(g.gradient.begin() + static_cast<long>(light_params), g.gradient.end(), 0.0);
          adam_step(global_state, global_params, g.gradient);
          unpack_globals(global_params, result.globals);
          clamp_globals(result.globals);
          global_params = pack_globals(result.globals);
        }
      }
    }
    for (int pass = 0; pass < cfg.steps_per_group; ++pass) {
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i].objects.empty()) continue;
        const GroupGradient g = group_gradient(result.globals, targets[i], result.materials[i], false);
        if (!std::isfinite(g.loss)) throw NonFiniteLoss(epoch, "object");
        for (std::size_t o = 0; o < targets[i].objects.size(); ++o) {
          std::vector<double> params = pack_material(result.materials[i][o]);
          const std::span<const double> grads(g.gradient.data() + o * kMaterialParams, kMaterialParams);
          adam_step(object_states[i][o], params, grads);
          Material m = unpack_material(params);
          clamp_material(m, cfg.max_shininess);
          result.materials[i][o] = m;
        }
      }
    }
    const double loss = mean_loss(nullptr);
    if (!std::isfinite(loss)) throw NonFiniteLoss(epoch, "object");
    result.epoch_loss.push_back(loss);
    if (progress) progress(epoch, loss);
  }
  mean_loss(&result.final_loss);
  return result;
}

}  // namespace bigraph
