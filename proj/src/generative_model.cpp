#include "bigraph/generative_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bigraph/scene_io.hpp"

namespace bigraph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::array<const char*, kMaterialDims> kMaterialNames = {"c_r", "c_g", "c_b", "k_a", "k_d", "k_s", "alpha"};

}  // namespace

const std::vector<std::string>& object_dim_names() {
  static const std::vector<std::string> names = {"x",   "y",   "theta", "s_x", "s_y", "s_z",
                                                 "c_r", "c_g", "c_b",   "k_a", "k_d", "k_s",
                                                 "alpha", "kappa_sphere", "kappa_cube", "kappa_cylinder"};
  return names;
}

const std::vector<std::string>& bijected_dim_names() {
  static const std::vector<std::string> names = {"x",   "y",   "theta", "s_x", "s_y", "s_z",
                                                 "c_r", "c_g", "c_b",   "k_a", "k_d", "k_s",
                                                 "alpha", "kappa_logit_sphere", "kappa_logit_cube"};
  return names;
}

ShapeClass ObjectParams::shape() const {
  int best = 0;
  for (int k = 1; k < kShapeCount; ++k)
    if (kappa[static_cast<std::size_t>(k)] > kappa[static_cast<std::size_t>(best)]) best = k;
  return static_cast<ShapeClass>(best);
}

std::array<double, kMaterialDims> ObjectParams::material_vector() const {
  return {material.color.x, material.color.y, material.color.z, material.ambient,
          material.diffuse, material.specular, material.shininess};
}

void ObjectParams::set_material_vector(std::span<const double> m) {
  material.color = {m[0], m[1], m[2]};
  material.ambient = m[3];
  material.diffuse = m[4];
  material.specular = m[5];
  material.shininess = m[6];
}

std::array<double, kObjectDims> ObjectParams::to_vector() const {
  std::array<double, kObjectDims> v{};
  v[0] = x;
  v[1] = y;
  v[2] = theta;
  for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(3 + i)] = scale[i];
  const auto m = material_vector();
  std::copy(m.begin(), m.end(), v.begin() + 6);
  std::copy(kappa.begin(), kappa.end(), v.begin() + 13);
  return v;
}

ObjectParams ObjectParams::from_vector(std::span<const double> v) {
  if (v.size() != kObjectDims) throw std::invalid_argument("object params: expected 16 coordinates");
  ObjectParams p;
  p.x = v[0];
  p.y = v[1];
  p.theta = v[2];
  p.scale = {v[3], v[4], v[5]};
  p.set_material_vector(v.subspan(6, kMaterialDims));
  p.kappa = {v[13], v[14], v[15]};
  return p;
}

ObjectInstance to_instance(const ObjectParams& p) {
  return resting_object(p.shape(), p.material, p.x, p.y, p.theta, p.scale);
}

std::array<double, 3> soft_one_hot(ShapeClass shape, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("soft_one_hot: mass must lie in (0,1)");
  std::array<double, 3> k;
  k.fill((1.0 - mass) / 2.0);
  k[static_cast<std::size_t>(shape)] = mass;
  return k;
}

nlohmann::json to_json(const ObjectParams& p) {
  return {{"x", p.x},
          {"y", p.y},
          {"theta", p.theta},
          {"scale", to_json(p.scale)},
          {"material", to_json(p.material)},
          {"kappa", p.kappa},
          {"shape", std::string(to_string(p.shape()))}};
}

ObjectParams object_params_from_json(const nlohmann::json& j) {
  ObjectParams p;
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.theta = j.value("theta", 0.0);
  p.scale = vec3_from_json(j.at("scale"));
  p.material = material_from_json(j.at("material"));
  if (j.contains("kappa")) {
    p.kappa = j.at("kappa").get<std::array<double, 3>>();
  } else {
    p.kappa = soft_one_hot(shape_from_string(j.at("shape").get<std::string>()));
  }
  return p;
}

double MaterialPrior::log_pdf(double m) const {
  if (!in_support(m)) return -kInf;
  return gmm.log_pdf(m);
}

double MaterialPrior::sample(Rng& rng) const {
  for (int i = 0; i < 100000; ++i) {
    const double m = gmm.sample(rng);
    if (in_support(m)) return m;
  }
  throw InvalidDistribution("material prior: mixture has negligible mass inside its support");
}

void PriorConfig::validate() const {
  if (!(translation_sigma > 0.0)) throw InvalidDistribution("prior: translation sigma must be > 0");
  for (double h : translation_half_extent)
    if (!(h > 0.0)) throw InvalidDistribution("prior: translation half extent must be > 0");
  if (!(rotation_concentration >= 0.0)) throw InvalidDistribution("prior: rotation concentration must be >= 0");
  if (!(scale_sigma > 0.0)) throw InvalidDistribution("prior: scale sigma must be > 0");
  if (!(kappa_temperature > 0.0)) throw InvalidDistribution("prior: class temperature must be > 0");
}

namespace {

MaterialPrior make_material_prior(Gmm gmm, double low, double high, bool open_low, std::uint64_t seed) {
  MaterialPrior mp;
  mp.gmm = std::move(gmm);
  mp.gmm.validate();
  mp.low = low;
  mp.high = high;
  mp.open_low = open_low;
  Rng rng(seed);
  std::vector<double> draws(4000);
  for (double& d : draws) d = mp.sample(rng);
  mp.bijector = fit_gmm_bijector(draws).inverted_affine();
  return mp;
}

}  // namespace

std::array<MaterialPrior, kMaterialDims> default_material_priors() {
  std::array<MaterialPrior, kMaterialDims> out;
  for (std::size_t i = 0; i < kMaterialDims; ++i) {
    const bool alpha = i == kMaterialDims - 1;
    Gmm g;
    g.weights = {0.5, 0.5};
    g.means = alpha ? std::vector<double>{10.0, 50.0} : std::vector<double>{0.3, 0.7};
    g.variances = alpha ? std::vector<double>{49.0, 400.0} : std::vector<double>{0.04, 0.04};
    out[i] = make_material_prior(std::move(g), 0.0, alpha ? kMaxShininessPrior : 1.0, alpha, 1000 + i);
  }
  return out;
}

std::array<MaterialPrior, kMaterialDims> fit_material_priors(std::span<const Material> materials, std::uint64_t seed) {
  if (materials.size() < 2) throw InvalidDistribution("material prior fit needs at least two materials");
  std::array<MaterialPrior, kMaterialDims> out;
  for (std::size_t i = 0; i < kMaterialDims; ++i) {
    std::vector<double> values;
    for (const auto& m : materials) {
      ObjectParams p;
      p.material = m;
      values.push_back(p.material_vector()[i]);
    }
    const bool alpha = i == kMaterialDims - 1;
    GmmFit fit = fit_gmm_em(values, 2);
    out[i] = make_material_prior(std::move(fit.gmm), 0.0, alpha ? kMaxShininessPrior : 1.0, alpha,
                                 derive_seed(seed, i));
  }
  return out;
}

double PriorSet::Terms::total() const {
  double t = x + y + theta + kappa;
  for (double s : scale) t += s;
  for (double m : material) t += m;
  return t;
}

PriorSet::PriorSet(PriorConfig cfg, std::array<MaterialPrior, kMaterialDims> materials)
    : cfg_(cfg),
      materials_(std::move(materials)),
      x_(cfg.center[0] + cfg.translation_mean[0], cfg.translation_sigma, cfg.center[0] - cfg.translation_half_extent[0],
         cfg.center[0] + cfg.translation_half_extent[0]),
      y_(cfg.center[1] + cfg.translation_mean[1], cfg.translation_sigma, cfg.center[1] - cfg.translation_half_extent[1],
         cfg.center[1] + cfg.translation_half_extent[1]),
      theta_(cfg.rotation_mean, cfg.rotation_concentration),
      scale_(cfg.scale_mu, cfg.scale_sigma),
      kappa_(std::vector<double>(cfg.kappa_probs.begin(), cfg.kappa_probs.end()), cfg.kappa_temperature) {
  cfg_.validate();
  for (const auto& m : materials_) m.gmm.validate();
}

PriorSet::Terms PriorSet::log_prior_terms(const ObjectParams& p) const {
  Terms t;
  t.x = x_.log_pdf(p.x);
  t.y = y_.log_pdf(p.y);
  t.theta = theta_.log_pdf(p.theta);
  for (int i = 0; i < 3; ++i) t.scale[static_cast<std::size_t>(i)] = scale_.log_pdf(p.scale[i]);
  const auto m = p.material_vector();
  for (std::size_t i = 0; i < kMaterialDims; ++i) t.material[i] = materials_[i].log_pdf(m[i]);
  t.kappa = kappa_.log_pdf(p.kappa);
  return t;
}

double PriorSet::log_prior(const ObjectParams& p) const {
  const double v = log_prior_terms(p).total();
  return std::isnan(v) ? -kInf : v;
}

ObjectParams PriorSet::sample(Rng& rng) const {
  ObjectParams p;
  p.x = x_.sample(rng);
  p.y = y_.sample(rng);
  p.theta = theta_.sample(rng);
  for (int i = 0; i < 3; ++i) p.scale[i] = scale_.sample(rng);
  std::array<double, kMaterialDims> m{};
  for (std::size_t i = 0; i < kMaterialDims; ++i) m[i] = materials_[i].sample(rng);
  p.set_material_vector(m);
  // Extreme Gumbel draws can round a coordinate to exactly 0 or 1.
  for (;;) {
    const auto k = kappa_.sample(rng);
    std::copy(k.begin(), k.end(), p.kappa.begin());
    if (std::isfinite(kappa_.log_pdf(p.kappa))) break;
  }
  return p;
}

std::array<Bijector, kBijectedDims - 2> PriorSet::bijectors() const {
  std::array<Bijector, kBijectedDims - 2> b;
  b[0] = Bijector::affine(cfg_.translation_sigma, cfg_.center[0] + cfg_.translation_mean[0]);
  b[1] = Bijector::affine(cfg_.translation_sigma, cfg_.center[1] + cfg_.translation_mean[1]);
  b[2] = Bijector::sigmoid(std::numbers::pi / 2.0, 0.0, -std::numbers::pi, std::numbers::pi);
  for (std::size_t i = 0; i < 3; ++i) b[3 + i] = Bijector::exp_affine(cfg_.scale_sigma, cfg_.scale_mu);
  for (std::size_t i = 0; i < kMaterialDims; ++i) b[6 + i] = materials_[i].bijector;
  return b;
}

SoftmaxBijector PriorSet::kappa_bijector() const { return SoftmaxBijector(3, 1.0 / cfg_.kappa_temperature); }

ObjectParams PriorSet::constrain(std::span<const double> u, double* log_det) const {
  if (u.size() != kBijectedDims) throw std::invalid_argument("constrain: expected 15 coordinates");
  const auto b = bijectors();
  std::array<double, kObjectDims> v{};
  double ld = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    v[i] = b[i].forward(u[i]);
    if (log_det) ld += b[i].log_det(u[i]);
  }
  const SoftmaxBijector sb = kappa_bijector();
  const auto logits = u.subspan(13, 2);
  const auto k = sb.forward(logits);
  std::copy(k.begin(), k.end(), v.begin() + 13);
  if (log_det) *log_det = ld + sb.log_det(logits);
  return ObjectParams::from_vector(v);
}

std::vector<double> PriorSet::unconstrain(const ObjectParams& p) const {
  const auto b = bijectors();
  auto v = p.to_vector();
  // Keep the rotation strictly inside the open sigmoid range.
  v[2] = std::clamp(v[2], -std::numbers::pi * (1.0 - 1e-12), std::numbers::pi * (1.0 - 1e-12));
  std::vector<double> u(kBijectedDims);
  for (std::size_t i = 0; i < b.size(); ++i) u[i] = b[i].inverse(v[i]);
  const auto l = kappa_bijector().inverse(p.kappa);
  u[13] = l[0];
  u[14] = l[1];
  return u;
}

namespace {

nlohmann::json to_json(const MaterialPrior& m, const char* name) {
  if (m.bijector.kind() != Bijector::Kind::affine && m.bijector.kind() != Bijector::Kind::identity) {
    throw std::invalid_argument("material prior bijector must be affine");
  }
  return {{"name", name},
          {"weights", m.gmm.weights},
          {"means", m.gmm.means},
          {"variances", m.gmm.variances},
          {"low", m.low},
          {"high", m.high},
          {"open_low", m.open_low},
          {"bijector", {{"scale", m.bijector.scale()}, {"shift", m.bijector.shift()}}}};
}

MaterialPrior material_prior_from_json(const nlohmann::json& j) {
  MaterialPrior m;
  m.gmm.weights = j.at("weights").get<std::vector<double>>();
  m.gmm.means = j.at("means").get<std::vector<double>>();
  m.gmm.variances = j.at("variances").get<std::vector<double>>();
  m.gmm.validate();
  m.low = j.at("low").get<double>();
  m.high = j.at("high").get<double>();
  m.open_low = j.value("open_low", false);
  const auto& b = j.at("bijector");
  m.bijector = Bijector::affine(b.at("scale").get<double>(), b.at("shift").get<double>());
  return m;
}

}  // namespace

nlohmann::json to_json(const PriorSet& prior) {
  const PriorConfig& c = prior.config();
  nlohmann::json j;
  j["translation_mean"] = c.translation_mean;
  j["translation_sigma"] = c.translation_sigma;
  j["translation_half_extent"] = c.translation_half_extent;
  j["center"] = c.center;
  j["rotation_mean"] = c.rotation_mean;
  j["rotation_concentration"] = c.rotation_concentration;
  j["scale_mu"] = c.scale_mu;
  j["scale_sigma"] = c.scale_sigma;
  j["kappa_temperature"] = c.kappa_temperature;
  j["kappa_probs"] = c.kappa_probs;
  j["materials"] = nlohmann::json::array();
  for (std::size_t i = 0; i < kMaterialDims; ++i) j["materials"].push_back(to_json(prior.materials()[i], kMaterialNames[i]));
  return j;
}

PriorSet prior_set_from_json(const nlohmann::json& j) {
  PriorConfig c;
  c.translation_mean = j.value("translation_mean", c.translation_mean);
  c.translation_sigma = j.value("translation_sigma", c.translation_sigma);
  c.translation_half_extent = j.value("translation_half_extent", c.translation_half_extent);
  c.center = j.value("center", c.center);
  c.rotation_mean = j.value("rotation_mean", c.rotation_mean);
  c.rotation_concentration = j.value("rotation_concentration", c.rotation_concentration);
  c.scale_mu = j.value("scale_mu", c.scale_mu);
  c.scale_sigma = j.value("scale_sigma", c.scale_sigma);
  c.kappa_temperature = j.value("kappa_temperature", c.kappa_temperature);
  c.kappa_probs = j.value("kappa_probs", c.kappa_probs);
  auto materials = default_material_priors();
  if (j.contains("materials")) {
    const auto& arr = j.at("materials");
    if (arr.size() != kMaterialDims) throw std::invalid_argument("prior: expected 7 material priors");
    for (std::size_t i = 0; i < kMaterialDims; ++i) materials[i] = material_prior_from_json(arr[i]);
  }
  return PriorSet(c, materials);
}

PriorConfig prior_config_for(const Scene& globals, double scale_sigma) {
  PriorConfig c;
  c.center = {globals.camera.look_at.x, globals.camera.look_at.y};
  c.scale_sigma = scale_sigma;
  return c;
}

std::vector<PredictiveDraw> sample_prior_predictive(const PriorSet& prior, const BackgroundCache& cache, int n,
                                                    std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("prior predictive: n must be >= 0");
  Rng rng(seed);
  std::vector<PredictiveDraw> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    PredictiveDraw d;
    d.params = prior.sample(rng);
    d.image = cache.render_object(to_instance(d.params));
    out.push_back(std::move(d));
  }
  return out;
}

// --- observation model ----------------------------------------------------

namespace {

PixelRect expand(const PixelRect& r, int by, int height, int width) {
  return {std::max(r.row0 - by, 0), std::min(r.row1 + by, height), std::max(r.col0 - by, 0),
          std::min(r.col1 + by, width)};
}

std::vector<double> summed_area(const std::vector<double>& values, int height, int width) {
  std::vector<double> sat(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
  for (int r = 0; r < height; ++r) {
    double row = 0.0;
    for (int c = 0; c < width; ++c) {
      row += values[static_cast<std::size_t>(r) * width + c];
      sat[static_cast<std::size_t>(r + 1) * (width + 1) + c + 1] = sat[static_cast<std::size_t>(r) * (width + 1) + c + 1] + row;
    }
  }
  return sat;
}

}  // namespace

ObservationModel::ObservationModel(std::shared_ptr<const BackgroundCache> cache, Image observed, LikelihoodConfig cfg,
                                   std::optional<ConvLayer> layer, std::vector<int> channels)
    : cache_(std::move(cache)),
      observed_(std::move(observed)),
      cfg_(cfg),
      layer_(std::move(layer)),
      channels_(std::move(channels)),
      color_term_(cfg.color_sigma) {
  cfg_.validate();
  if (!cache_) throw std::invalid_argument("observation model: no background cache");
  const Image& bg = cache_->image();
  if (!observed_.same_shape(bg)) {
    throw std::invalid_argument("observation model: observed image must be " + std::to_string(bg.width()) + "x" +
                                std::to_string(bg.height()) + " RGB");
  }
  height_ = bg.height();
  width_ = bg.width();
  const std::size_t npix = static_cast<std::size_t>(height_) * width_;
  std::vector<double> color(npix, 0.0);
  for (std::size_t p = 0; p < npix; ++p) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double d = bg.data()[p * 3 + ch] - observed_.data()[p * 3 + ch];
      color[p] += d * d;
    }
  }
  color_sat_ = summed_area(color, height_, width_);
  if (cfg_.neural) {
    if (!layer_) throw std::invalid_argument("observation model: neural likelihood needs a conv layer");
    if (channels_.empty()) throw std::invalid_argument("observation model: neural likelihood needs selected channels");
    observed_features_ = conv_features(*layer_, observed_, channels_);
    const FeatureMaps fb = conv_features(*layer_, bg, channels_);
    std::vector<double> neural(npix, 0.0);
    for (std::size_t k = 0; k < channels_.size(); ++k)
      for (std::size_t p = 0; p < npix; ++p)
        neural[p] += neural_contribution(observed_features_.data[k * npix + p], fb.data[k * npix + p]);
    neural_sat_ = summed_area(neural, height_, width_);
  }
}

double ObservationModel::neural_contribution(double fd, double fr) const {
  const double d = fd - fr;
  return cfg_.neural_form == NeuralForm::gaussian ? d * d : d;
}

double ObservationModel::rect_sum(const std::vector<double>& sat, const PixelRect& r) const {
  const std::size_t w = static_cast<std::size_t>(width_) + 1;
  return sat[static_cast<std::size_t>(r.row1) * w + r.col1] - sat[static_cast<std::size_t>(r.row0) * w + r.col1] -
         sat[static_cast<std::size_t>(r.row1) * w + r.col0] + sat[static_cast<std::size_t>(r.row0) * w + r.col0];
}

LikelihoodTerms ObservationModel::log_likelihood(const ObjectInstance& obj) const {
  const PixelRect full = cache_->full_rect();
  const PixelRect rect = cache_->bounds(obj);
  double color_sq = rect_sum(color_sat_, full);
  double neural_sum = cfg_.neural ? rect_sum(neural_sat_, full) : 0.0;
  if (!rect.empty()) {
    const PixelRect window = expand(rect, cfg_.neural ? 2 : 0, height_, width_);
    const int wh = window.row1 - window.row0, ww = window.col1 - window.col0;
    Image buf(wh, ww, 3);
    const Image& bg = cache_->image();
    for (int r = 0; r < wh; ++r)
      for (int c = 0; c < ww; ++c)
        for (int ch = 0; ch < 3; ++ch) buf.at(r, c, ch) = bg.at(window.row0 + r, window.col0 + c, ch);
    cache_->render_object(obj, rect, window, buf);

    CompensatedSum sq;
    for (int r = rect.row0; r < rect.row1; ++r) {
      for (int c = rect.col0; c < rect.col1; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          const double d = buf.at(r - window.row0, c - window.col0, ch) - observed_.at(r, c, ch);
          sq.add(d * d);
        }
      }
    }
    color_sq += sq.value() - rect_sum(color_sat_, rect);

    if (cfg_.neural) {
      const PixelRect inner = expand(rect, 1, height_, width_);
      const ConvLayer& layer = *layer_;
      const std::size_t npix = static_cast<std::size_t>(height_) * width_;
      CompensatedSum acc;
      for (std::size_t k = 0; k < channels_.size(); ++k) {
        const int ch_out = channels_[k];
        for (int r = inner.row0; r < inner.row1; ++r) {
          for (int c = inner.col0; c < inner.col1; ++c) {
            double v = layer.bias[static_cast<std::size_t>(ch_out)];
            for (int ky = 0; ky < 3; ++ky) {
              const int rr = r + ky - 1;
              if (rr < 0 || rr >= height_) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int cc = c + kx - 1;
                if (cc < 0 || cc >= width_) continue;
                for (int i = 0; i < layer.in_channels; ++i) {
                  v += layer.weight(ch_out, i, ky, kx) * buf.at(rr - window.row0, cc - window.col0, i);
                }
              }
            }
            const double fr = v > 0.0 ? v : 0.0;
            acc.add(neural_contribution(observed_features_.data[k * npix + static_cast<std::size_t>(r) * width_ + c], fr));
          }
        }
      }
      neural_sum += acc.value() - rect_sum(neural_sat_, inner);
    }
  }
  LikelihoodTerms t;
  t.color = static_cast<double>(observed_.size()) * color_term_.log_peak - color_term_.inv_2var * color_sq;
  if (cfg_.neural) t.neural = cfg_.neural_form == NeuralForm::gaussian ? -neural_sum / cfg_.neural_scale : neural_sum;
  return t;
}

LikelihoodTerms ObservationModel::log_likelihood_full(const ObjectInstance& obj) const {
  const Image rendered = cache_->render_object(obj);
  LikelihoodTerms t;
  t.color = color_loglik(rendered, observed_, cfg_.color_sigma);
  if (cfg_.neural) t.neural = neural_loglik(*layer_, channels_, rendered, observed_, cfg_.neural_scale, cfg_.neural_form);
  return t;
}

// --- posterior target -----------------------------------------------------

ObjectPosterior::ObjectPosterior(PriorSet prior, std::shared_ptr<const ObservationModel> observation)
    : prior_(std::move(prior)), observation_(std::move(observation)) {
  if (!observation_) throw std::invalid_argument("object posterior: no observation model");
}

double ObjectPosterior::log_target(const ObjectParams& p) const {
  const double lp = prior_.log_prior(p);
  if (!std::isfinite(lp)) return -kInf;
  return lp + observation_->log_likelihood(to_instance(p)).total();
}

double ObjectPosterior::log_density(std::span<const double> u) const {
  for (double v : u)
    if (!std::isfinite(v)) return -kInf;
  double log_det = 0.0;
  const ObjectParams p = prior_.constrain(u, &log_det);
  const double lt = log_target(p);
  if (!std::isfinite(lt) || !std::isfinite(log_det)) return -kInf;
  return lt + log_det;
}

std::vector<double> ObjectPosterior::sample_initial(Rng& rng) const { return prior_.unconstrain(prior_.sample(rng)); }

std::vector<std::string> ObjectPosterior::names() const { return object_dim_names(); }

std::vector<double> ObjectPosterior::constrain(std::span<const double> u) const {
  const auto v = prior_.constrain(u).to_vector();
  return {v.begin(), v.end()};
}

ObjectParams posterior_median(const PosteriorSamples& samples) {
  std::array<double, kObjectDims> v{};
  const auto& names = object_dim_names();
  for (std::size_t i = 0; i < kObjectDims; ++i) {
    const int k = samples.index_of(names[i]);
    if (k < 0) throw std::invalid_argument("posterior median: missing coordinate " + names[i]);
    std::vector<double> x = samples.pooled(k);
    if (x.empty()) throw std::invalid_argument("posterior median: no draws");
    const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    double med = *mid;
    if (x.size() % 2 == 0) med = 0.5 * (med + *std::max_element(x.begin(), mid));
    v[i] = med;
  }
  const double total = v[13] + v[14] + v[15];
  for (std::size_t i = 13; i < kObjectDims; ++i) v[i] /= total;
  return ObjectParams::from_vector(v);
}

}  // namespace bigraph
