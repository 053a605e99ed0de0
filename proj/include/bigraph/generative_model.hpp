#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigraph/distributions.hpp"
#include "bigraph/likelihood.hpp"
#include "bigraph/mcmc.hpp"
#include "bigraph/raytracer.hpp"
#include "bigraph/scene.hpp"

namespace bigraph {

/// Constrained coordinates of one object, in storage order.
inline constexpr std::size_t kObjectDims = 16;
const std::vector<std::string>& object_dim_names();

/// Unconstrained coordinates sampled by MCMC: the same order with the three
/// class weights replaced by two free logits.
inline constexpr std::size_t kBijectedDims = 15;
const std::vector<std::string>& bijected_dim_names();

inline constexpr std::size_t kMaterialDims = 7;  // c_r, c_g, c_b, k_a, k_d, k_s, alpha
inline constexpr double kMaxShininessPrior = 100.0;

struct ObjectParams {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  Vec3d scale{1.0, 1.0, 1.0};
  Material material;
  std::array<double, 3> kappa{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  /// Renderer shape: argmax of kappa, first index on ties.
  ShapeClass shape() const;
  std::array<double, kMaterialDims> material_vector() const;
  void set_material_vector(std::span<const double> m);

  std::array<double, kObjectDims> to_vector() const;
  static ObjectParams from_vector(std::span<const double> v);
};

/// Object resting on the floor (z from the scale).
ObjectInstance to_instance(const ObjectParams& p);

/// Class weights concentrated on `shape` (`mass` on it, the rest split evenly).
std::array<double, 3> soft_one_hot(ShapeClass shape, double mass = 0.98);

nlohmann::json to_json(const ObjectParams& p);
ObjectParams object_params_from_json(const nlohmann::json& j);

/// Truncated (not renormalized) 1-D mixture prior of one material property,
/// plus the unconstrained-to-constrained map used by the sampler.
struct MaterialPrior {
  Gmm gmm;
  double low = 0.0;
  double high = 1.0;
  bool open_low = false;  // support is (low, high] instead of [low, high]
  Bijector bijector = Bijector::identity();

  bool in_support(double m) const { return (open_low ? m > low : m >= low) && m <= high; }
  double log_pdf(double m) const;
  /// Rejection draw from the truncated mixture.
  double sample(Rng& rng) const;
};

struct PriorConfig {
  std::array<double, 2> translation_mean{0.0, 0.025};  // offset from the camera look-at
  double translation_sigma = 0.08;
  std::array<double, 2> translation_half_extent{0.45, 0.35};
  std::array<double, 2> center{0.0, 0.0};
  double rotation_mean = 0.0;
  double rotation_concentration = 0.0;
  double scale_mu = 0.025;
  double scale_sigma = 1e-4;
  double kappa_temperature = 0.5;
  std::array<double, 3> kappa_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  void validate() const;
};

/// Material priors used when no scene-opt fit is available: two-component
/// mixtures spread over the unit interval (and over (0, 100] for shininess).
std::array<MaterialPrior, kMaterialDims> default_material_priors();

/// EM fit (two components) of each material property over `materials`, with
/// the sampler bijector fitted on draws from that mixture.
std::array<MaterialPrior, kMaterialDims> fit_material_priors(std::span<const Material> materials,
                                                             std::uint64_t seed = 0);

class PriorSet {
 public:
  explicit PriorSet(PriorConfig cfg = {}, std::array<MaterialPrior, kMaterialDims> materials = default_material_priors());

  struct Terms {
    double x = 0.0, y = 0.0, theta = 0.0;
    std::array<double, 3> scale{};
    std::array<double, kMaterialDims> material{};
    double kappa = 0.0;
    double total() const;
  };

  Terms log_prior_terms(const ObjectParams& p) const;
  double log_prior(const ObjectParams& p) const;
  ObjectParams sample(Rng& rng) const;

  const PriorConfig& config() const noexcept { return cfg_; }
  const std::array<MaterialPrior, kMaterialDims>& materials() const noexcept { return materials_; }
  const TruncNormal& x_prior() const noexcept { return x_; }
  const TruncNormal& y_prior() const noexcept { return y_; }
  const VonMises& rotation_prior() const noexcept { return theta_; }
  const LogNormal& scale_prior() const noexcept { return scale_; }
  const GumbelSoftmax& kappa_prior() const noexcept { return kappa_; }

  /// Unconstrained-to-constrained maps, one per bijected coordinate except
  /// the class logits (see `kappa_bijector`).
  std::array<Bijector, kBijectedDims - 2> bijectors() const;
  SoftmaxBijector kappa_bijector() const;

  /// Constrained parameters for bijected coordinates `u`, with the summed log|det|.
  ObjectParams constrain(std::span<const double> u, double* log_det = nullptr) const;
  std::vector<double> unconstrain(const ObjectParams& p) const;

 private:
  PriorConfig cfg_;
  std::array<MaterialPrior, kMaterialDims> materials_;
  TruncNormal x_, y_;
  VonMises theta_;
  LogNormal scale_;
  GumbelSoftmax kappa_;
};

nlohmann::json to_json(const PriorSet& prior);
PriorSet prior_set_from_json(const nlohmann::json& j);

/// Prior config centered on the camera look-at of `globals`.
PriorConfig prior_config_for(const Scene& globals, double scale_sigma);

struct PredictiveDraw {
  ObjectParams params;
  Image image;
};

/// `n` prior draws and their shadowless single-object renders.
std::vector<PredictiveDraw> sample_prior_predictive(const PriorSet& prior, const BackgroundCache& cache, int n,
                                                    std::uint64_t seed);

struct LikelihoodTerms {
  double color = 0.0;
  double neural = 0.0;
  double total() const { return color + neural; }
};

/// Likelihood of one observed image given a single object over cached
/// background. Only the object's pixel bounds (plus the convolution
/// footprint) are re-evaluated per call.
class ObservationModel {
 public:
  ObservationModel(std::shared_ptr<const BackgroundCache> cache, Image observed, LikelihoodConfig cfg,
                   std::optional<ConvLayer> layer = std::nullopt, std::vector<int> channels = {});

  LikelihoodTerms log_likelihood(const ObjectInstance& obj) const;
  /// Same value from a full render, without the incremental shortcuts.
  LikelihoodTerms log_likelihood_full(const ObjectInstance& obj) const;

  const BackgroundCache& cache() const noexcept { return *cache_; }
  const Image& observed() const noexcept { return observed_; }
  const LikelihoodConfig& config() const noexcept { return cfg_; }

 private:
  double neural_contribution(double fd, double fr) const;

  std::shared_ptr<const BackgroundCache> cache_;
  Image observed_;
  LikelihoodConfig cfg_;
  std::optional<ConvLayer> layer_;
  std::vector<int> channels_;
  ColorTerm color_term_;
  int height_, width_;
  // Summed-area tables of the per-pixel background contributions, (H+1)x(W+1).
  std::vector<double> color_sat_;
  std::vector<double> neural_sat_;
  FeatureMaps observed_features_;

  double rect_sum(const std::vector<double>& sat, const PixelRect& r) const;
};

/// Unnormalized posterior over one object's parameters in bijected space.
class ObjectPosterior : public SamplingTarget {
 public:
  ObjectPosterior(PriorSet prior, std::shared_ptr<const ObservationModel> observation);

  std::size_t dim() const override { return kBijectedDims; }
  double log_density(std::span<const double> u) const override;
  std::vector<double> sample_initial(Rng& rng) const override;
  std::vector<std::string> names() const override;
  std::vector<double> constrain(std::span<const double> u) const override;

  /// log prior + log likelihood in constrained space (no Jacobian).
  double log_target(const ObjectParams& p) const;

  const PriorSet& prior() const noexcept { return prior_; }
  const ObservationModel& observation() const noexcept { return *observation_; }

 private:
  PriorSet prior_;
  std::shared_ptr<const ObservationModel> observation_;
};

/// Per-coordinate posterior median in constrained space.
ObjectParams posterior_median(const PosteriorSamples& samples);

}  // namespace bigraph
