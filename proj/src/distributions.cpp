#include "bigraph/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>

namespace bigraph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double normal_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z - kLogSqrt2Pi);
}

double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Uniform draw on the open interval (0, 1).
double open_uniform(Rng& rng) {
  for (;;) {
    const double u = std::generate_canonical<double, 53>(rng);
    if (u > 0.0 && u < 1.0) return u;
  }
}

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

// log I0(x) without overflow.
double log_bessel_i0(double x) {
  if (x < 500.0) return std::log(std::cyl_bessel_i(0.0, x));
  const double inv = 1.0 / x;
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log1p(inv / 8.0 + 9.0 * inv * inv / 128.0);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

// --- TruncNormal -----------------------------------------------------------

TruncNormal::TruncNormal(double mu, double sigma, double lower, double upper)
    : mu_(mu), sigma_(sigma), lower_(lower), upper_(upper) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidDistribution("TruncNormal: sigma must be finite and > 0");
  if (!(lower < upper)) throw InvalidDistribution("TruncNormal: lower must be < upper");
  alpha_ = (lower - mu) / sigma;
  beta_ = (upper - mu) / sigma;
  double z;
  if (alpha_ >= 0.0) {
    z = upper_tail(alpha_) - upper_tail(beta_);
  } else if (beta_ <= 0.0) {
    z = normal_cdf(beta_) - normal_cdf(alpha_);
  } else {
    z = 1.0 - normal_cdf(alpha_) - upper_tail(beta_);
  }
  if (!(z > 0.0)) throw InvalidDistribution("TruncNormal: interval carries no probability mass");
  log_norm_ = std::log(sigma) + std::log(z);
}

double TruncNormal::log_pdf(double x) const {
  if (!(x >= lower_ && x <= upper_)) return -kInf;
  const double z = (x - mu_) / sigma_;
  return -0.5 * z * z - kLogSqrt2Pi - log_norm_;
}

double TruncNormal::sample(Rng& rng) const {
  const double u = open_uniform(rng);
  double z;
  if (alpha_ >= 0.0) {
    const double qa = upper_tail(alpha_), qb = upper_tail(beta_);
    z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (qa - u * (qa - qb)));
  } else {
    const double pa = normal_cdf(alpha_), pb = normal_cdf(beta_);
    z = normal_quantile(pa + u * (pb - pa));
  }
  return std::clamp(mu_ + sigma_ * z, lower_, upper_);
}

double TruncNormal::mean() const {
  const double z = std::exp(log_norm_) / sigma_;
  return mu_ + sigma_ * (normal_pdf(alpha_) - normal_pdf(beta_)) / z;
}

double TruncNormal::variance() const {
  const double z = std::exp(log_norm_) / sigma_;
  const double a_term = std::isinf(alpha_) ? 0.0 : alpha_ * normal_pdf(alpha_);
  const double b_term = std::isinf(beta_) ? 0.0 : beta_ * normal_pdf(beta_);
  const double d = (normal_pdf(alpha_) - normal_pdf(beta_)) / z;
  return sigma_ * sigma_ * (1.0 + (a_term - b_term) / z - d * d);
}

// --- VonMises --------------------------------------------------------------

VonMises::VonMises(double mu, double concentration) : mu_(mu), kappa_(concentration) {
  if (!(concentration >= 0.0) || !std::isfinite(concentration)) {
    throw InvalidDistribution("VonMises: concentration must be finite and >= 0");
  }
  log_norm_ = std::log(2.0 * std::numbers::pi) + log_bessel_i0(concentration);
}

double VonMises::log_pdf(double x) const {
  if (!(x >= -std::numbers::pi && x <= std::numbers::pi)) return -kInf;
  return kappa_ * std::cos(x - mu_) - log_norm_;
}

double VonMises::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double theta;
  if (kappa_ < 1e-6) {
    theta = mu_ + std::numbers::pi * (2.0 * u(rng) - 1.0);
  } else {
    // Best and Fisher (1979) rejection sampler.
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa_ * kappa_);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa_);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    double f;
    for (;;) {
      const double u1 = u(rng), u2 = open_uniform(rng);
      const double z = std::cos(std::numbers::pi * u1);
      f = (1.0 + r * z) / (r + z);
      const double c = kappa_ * (r - f);
      if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) break;
    }
    const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
    theta = mu_ + sign * std::acos(std::clamp(f, -1.0, 1.0));
  }
  theta = std::remainder(theta, 2.0 * std::numbers::pi);
  return std::clamp(theta, -std::numbers::pi, std::numbers::pi);
}

// --- LogNormal -------------------------------------------------------------

LogNormal::LogNormal(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidDistribution("LogNormal: sigma must be finite and > 0");
}

double LogNormal::log_pdf(double x) const {
  if (!(x > 0.0)) return -kInf;
  const double z = (std::log(x) - mu_) / sigma_;
  return -0.5 * z * z - std::log(x * sigma_) - kLogSqrt2Pi;
}

double LogNormal::sample(Rng& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  return std::exp(mu_ + sigma_ * n(rng));
}

double LogNormal::mean() const { return std::exp(mu_ + 0.5 * sigma_ * sigma_); }

double LogNormal::variance() const {
  return std::expm1(sigma_ * sigma_) * std::exp(2.0 * mu_ + sigma_ * sigma_);
}

// --- GumbelSoftmax ---------------------------------------------------------

GumbelSoftmax::GumbelSoftmax(std::vector<double> probabilities, double temperature)
    : probs_(std::move(probabilities)), temperature_(temperature) {
  if (probs_.size() < 2) throw InvalidDistribution("GumbelSoftmax: need at least two classes");
  if (!(temperature > 0.0)) throw InvalidDistribution("GumbelSoftmax: temperature must be > 0");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p > 0.0)) throw InvalidDistribution("GumbelSoftmax: probabilities must be > 0");
    total += p;
  }
  for (double& p : probs_) p /= total;
  const double k = static_cast<double>(probs_.size());
  log_const_ = std::lgamma(k) + (k - 1.0) * std::log(temperature);
}

double GumbelSoftmax::log_pdf(std::span<const double> y) const {
  if (y.size() != probs_.size()) return -kInf;
  double total = 0.0;
  for (double v : y) {
    if (!(v > 0.0 && v < 1.0)) return -kInf;
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) return -kInf;
  const double t = temperature_;
  std::vector<double> terms(y.size());
  double acc = log_const_;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double ly = std::log(y[k]);
    acc += std::log(probs_[k]) - (t + 1.0) * ly;
    terms[k] = std::log(probs_[k]) - t * ly;
  }
  return acc - static_cast<double>(y.size()) * log_sum_exp(terms);
}

std::vector<double> GumbelSoftmax::sample(Rng& rng) const {
  std::vector<double> logits(probs_.size());
  for (std::size_t k = 0; k < probs_.size(); ++k) {
    const double g = -std::log(-std::log(open_uniform(rng)));
    logits[k] = (std::log(probs_[k]) + g) / temperature_;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - m));
  // Keep every coordinate strictly inside (0, 1) so the density is defined.
  for (double& l : logits) l = std::clamp(l / total, 1e-300, 1.0 - 1e-16);
  return logits;
}

// --- Gmm -------------------------------------------------------------------

void Gmm::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
    throw InvalidDistribution("GMM: component arrays must be nonempty and of equal length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= 0.0)) throw InvalidDistribution("GMM: weights must be >= 0");
    if (!(variances[k] > 0.0)) throw InvalidDistribution("GMM: variances must be > 0");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidDistribution("GMM: weights must sum to 1");
}

double Gmm::log_pdf(double x) const {
  std::vector<double> terms(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    terms[k] = std::log(weights[k]) + normal_log_pdf(x, means[k], std::sqrt(variances[k]));
  }
  return log_sum_exp(terms);
}

double Gmm::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const std::size_t k = pick(rng);
  std::normal_distribution<double> n(means[k], std::sqrt(variances[k]));
  return n(rng);
}

double Gmm::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * means[k];
  return m;
}

double Gmm::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * (variances[k] + (means[k] - m) * (means[k] - m));
  return v;
}

GmmFit fit_gmm_em(std::span<const double> samples, int components, double tolerance, int max_iterations) {
  const std::size_t n = samples.size();
  const std::size_t kc = static_cast<std::size_t>(components);
  if (components < 1) throw InvalidDistribution("GMM: need at least one component");
  if (n < 2 * kc) throw InvalidDistribution("GMM: need at least 2K samples");

  GmmFit fit;
  Gmm& g = fit.gmm;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < kc; ++k) {
    const std::size_t b = k * n / kc, e = (k + 1) * n / kc;
    double mean = 0.0;
    for (std::size_t i = b; i < e; ++i) mean += sorted[i];
    mean /= static_cast<double>(e - b);
    double var = 0.0;
    for (std::size_t i = b; i < e; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
    var /= static_cast<double>(e - b);
    if (var < kGmmVarianceFloor) {
      var = kGmmVarianceFloor;
      fit.variance_floored = true;
    }
    g.weights.push_back(1.0 / static_cast<double>(kc));
    g.means.push_back(mean);
    g.variances.push_back(var);
  }

  std::vector<double> resp(n * kc);
  std::vector<double> terms(kc);
  auto e_step = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kc; ++k) {
        terms[k] = std::log(g.weights[k]) + normal_log_pdf(samples[i], g.means[k], std::sqrt(g.variances[k]));
      }
      const double lse = log_sum_exp(terms);
      total += lse;
      for (std::size_t k = 0; k < kc; ++k) resp[i * kc + k] = std::exp(terms[k] - lse);
    }
    return total;
  };

  double ll = e_step();
  for (int it = 0; it < max_iterations; ++it) {
    for (std::size_t k = 0; k < kc; ++k) {
      double nk = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * kc + k];
        sum += resp[i * kc + k] * samples[i];
      }
      if (nk <= 0.0) continue;
      const double mean = sum / nk;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += resp[i * kc + k] * (samples[i] - mean) * (samples[i] - mean);
      var /= nk;
      if (var < kGmmVarianceFloor) {
        var = kGmmVarianceFloor;
        fit.variance_floored = true;
      }
      g.weights[k] = nk / static_cast<double>(n);
      g.means[k] = mean;
      g.variances[k] = var;
    }
    const double total_w = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (double& w : g.weights) w /= total_w;
    const double next = e_step();
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    if (next < ll - 1e-9 * std::max(1.0, std::abs(ll))) fit.monotone = false;
    const double delta = (next - ll) / static_cast<double>(n);
    ll = next;
    if (std::abs(delta) < tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

// --- KDE -------------------------------------------------------------------

double scott_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw InvalidDistribution("Scott bandwidth needs at least two samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return std::max(kBandwidthFloor, sd * std::pow(static_cast<double>(n), -0.2));
}

Kde1D::Kde1D(std::vector<double> samples) : Kde1D(samples, scott_bandwidth(samples)) {}

Kde1D::Kde1D(std::vector<double> samples, double bandwidth) : samples_(std::move(samples)), h_(bandwidth) {
  if (samples_.empty()) throw InvalidDistribution("KDE: no samples");
  if (!(h_ > 0.0)) throw InvalidDistribution("KDE: bandwidth must be > 0");
  sorted_ = samples_;
  std::sort(sorted_.begin(), sorted_.end());
}

double Kde1D::pdf(double x) const {
  double acc = 0.0;
  for (double s : samples_) {
    const double z = (x - s) / h_;
    acc += std::exp(-0.5 * z * z);
  }
  return acc / (static_cast<double>(samples_.size()) * h_) * std::exp(-kLogSqrt2Pi);
}

std::vector<double> Kde1D::pdf_grid(double lo, double step, std::size_t n) const {
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const double inv_h2 = 1.0 / (h_ * h_);
  const double q = std::exp(-step * step * inv_h2);
  const double half = 0.5 * step * step * inv_h2;
  constexpr double kCutoff = 1e-30;
  // Each kernel is evaluated by the ratio recurrence
  // k(j+1) = k(j) * exp(-(d_j*step)/h^2 - step^2/(2h^2)), d_j = g_j - x,
  // walking outward from the grid point nearest the sample.
  for (double x : sorted_) {
    const double pos = (x - lo) / step;
    const auto j0 = static_cast<std::ptrdiff_t>(
        std::clamp(std::round(pos), 0.0, static_cast<double>(n - 1)));
    const double d0 = lo + static_cast<double>(j0) * step - x;
    const double k0 = std::exp(-0.5 * d0 * d0 * inv_h2);
    if (k0 < kCutoff) continue;
    out[static_cast<std::size_t>(j0)] += k0;
    double k = k0;
    double r = std::exp(-d0 * step * inv_h2 - half);
    for (auto j = j0 + 1; j < static_cast<std::ptrdiff_t>(n); ++j) {
      k *= r;
      if (k < kCutoff) break;
      out[static_cast<std::size_t>(j)] += k;
      r *= q;
    }
    k = k0;
    r = std::exp(d0 * step * inv_h2 - half);
    for (auto j = j0 - 1; j >= 0; --j) {
      k *= r;
      if (k < kCutoff) break;
      out[static_cast<std::size_t>(j)] += k;
      r *= q;
    }
  }
  const double norm = std::exp(-kLogSqrt2Pi) / (static_cast<double>(samples_.size()) * h_);
  for (double& v : out) v *= norm;
  return out;
}

double Kde1D::sample(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  std::normal_distribution<double> n(0.0, h_);
  const double base = samples_[pick(rng)];
  return base + n(rng);
}

double Kde1D::mean() const {
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

double kl_divergence_kde(const Kde1D& p, const Kde1D& q) {
  const double lo = std::min(p.min() - 3.0 * p.bandwidth(), q.min() - 3.0 * q.bandwidth());
  const double hi = std::max(p.max() + 3.0 * p.bandwidth(), q.max() + 3.0 * q.bandwidth());
  const double step = (hi - lo) / static_cast<double>(kKlGridPoints - 1);
  const std::vector<double> pg = p.pdf_grid(lo, step, kKlGridPoints);
  const std::vector<double> qg = q.pdf_grid(lo, step, kKlGridPoints);
  double kl = 0.0;
  for (std::size_t i = 0; i < kKlGridPoints; ++i) {
    if (pg[i] <= 0.0) continue;
    kl += pg[i] * std::log(pg[i] / std::max(qg[i], kKlDensityFloor));
  }
  return kl * step;
}

// --- bijectors -------------------------------------------------------------

Bijector Bijector::identity() { return Bijector{}; }

Bijector Bijector::affine(double scale, double shift) {
  if (scale == 0.0 || !std::isfinite(scale)) throw InvalidDistribution("affine bijector: scale must be finite and nonzero");
  Bijector b;
  b.kind_ = Kind::affine;
  b.scale_ = scale;
  b.shift_ = shift;
  return b;
}

Bijector Bijector::sigmoid(double slope, double shift, double low, double high) {
  if (slope == 0.0 || !(low < high)) throw InvalidDistribution("sigmoid bijector: need slope != 0 and low < high");
  Bijector b;
  b.kind_ = Kind::sigmoid;
  b.scale_ = slope;
  b.shift_ = shift;
  b.low_ = low;
  b.high_ = high;
  return b;
}

Bijector Bijector::exp_affine(double scale, double shift) {
  if (scale == 0.0 || !std::isfinite(scale)) throw InvalidDistribution("exp-affine bijector: scale must be finite and nonzero");
  Bijector b;
  b.kind_ = Kind::exp_affine;
  b.scale_ = scale;
  b.shift_ = shift;
  return b;
}

double Bijector::forward(double u) const {
  switch (kind_) {
    case Kind::identity:
      return u;
    case Kind::affine:
      return scale_ * u + shift_;
    case Kind::sigmoid: {
      const double z = scale_ * u + shift_;
      const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      return low_ + (high_ - low_) * s;
    }
    case Kind::exp_affine:
      return std::exp(scale_ * u + shift_);
  }
  return u;
}

double Bijector::inverse(double x) const {
  switch (kind_) {
    case Kind::identity:
      return x;
    case Kind::affine:
      return (x - shift_) / scale_;
    case Kind::sigmoid: {
      const double t = (x - low_) / (high_ - low_);
      return (std::log(t) - std::log1p(-t) - shift_) / scale_;
    }
    case Kind::exp_affine:
      return (std::log(x) - shift_) / scale_;
  }
  return x;
}

double Bijector::log_det(double u) const {
  switch (kind_) {
    case Kind::identity:
      return 0.0;
    case Kind::affine:
      return std::log(std::abs(scale_));
    case Kind::sigmoid: {
      const double z = scale_ * u + shift_;
      return std::log(high_ - low_) + std::log(std::abs(scale_)) - softplus(z) - softplus(-z);
    }
    case Kind::exp_affine:
      return std::log(std::abs(scale_)) + scale_ * u + shift_;
  }
  return 0.0;
}

Bijector Bijector::inverted_affine() const {
  if (kind_ == Kind::identity) return *this;
  if (kind_ != Kind::affine) throw InvalidDistribution("only affine bijectors can be inverted in closed form");
  return affine(1.0 / scale_, -shift_ / scale_);
}

SoftmaxBijector::SoftmaxBijector(std::size_t k, double omega) : k_(k), omega_(omega) {
  if (k < 2) throw InvalidDistribution("softmax bijector: need at least two classes");
  if (!(omega > 0.0)) throw InvalidDistribution("softmax bijector: omega must be > 0");
}

std::vector<double> SoftmaxBijector::forward(std::span<const double> logits) const {
  if (logits.size() != k_ - 1) throw InvalidDistribution("softmax bijector: expected K-1 logits");
  std::vector<double> z(k_, 0.0);
  for (std::size_t i = 0; i + 1 < k_; ++i) z[i] = omega_ * logits[i];
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) total += (v = std::exp(v - m));
  for (double& v : z) v /= total;
  return z;
}

std::vector<double> SoftmaxBijector::inverse(std::span<const double> simplex) const {
  if (simplex.size() != k_) throw InvalidDistribution("softmax bijector: expected K coordinates");
  std::vector<double> l(k_ - 1);
  for (std::size_t i = 0; i + 1 < k_; ++i) l[i] = (std::log(simplex[i]) - std::log(simplex[k_ - 1])) / omega_;
  return l;
}

double SoftmaxBijector::log_det(std::span<const double> logits) const {
  // det of omega*(diag(p) - p p^T) restricted to K-1 coordinates is
  // omega^(K-1) * prod_{i=1..K} p_i.
  std::vector<double> z(k_, 0.0);
  for (std::size_t i = 0; i + 1 < k_; ++i) z[i] = omega_ * logits[i];
  const double lse = log_sum_exp(z);
  double acc = static_cast<double>(k_ - 1) * std::log(omega_);
  for (double v : z) acc += v - lse;
  return acc;
}

Bijector fit_gmm_bijector(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw InvalidDistribution("bijector fit needs at least two samples");
  double s1 = 0.0, s2 = 0.0;
  for (double m : samples) {
    s1 += m;
    s2 += m * m;
  }
  // NLL(w, b) = 0.5 * sum (w m + b)^2 - n log w, minimized by damped Newton.
  auto nll = [&](double w, double b) { return 0.5 * (w * w * s2 + 2.0 * w * b * s1 + n * b * b) - n * std::log(w); };
  double w = 1.0, b = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double gw = w * s2 + b * s1 - n / w;
    const double gb = w * s1 + n * b;
    const double hww = s2 + n / (w * w), hwb = s1, hbb = n;
    const double det = hww * hbb - hwb * hwb;
    if (!(det > 0.0)) break;
    const double dw = (hbb * gw - hwb * gb) / det;
    const double db = (hww * gb - hwb * gw) / det;
    double t = 1.0;
    const double f0 = nll(w, b);
    while (t > 1e-12 && (w - t * dw <= 0.0 || nll(w - t * dw, b - t * db) > f0)) t *= 0.5;
    w -= t * dw;
    b -= t * db;
    if (std::abs(t * dw) < 1e-14 * std::abs(w) && std::abs(t * db) < 1e-14 * (1.0 + std::abs(b))) break;
  }
  return Bijector::affine(w, b);
}

}  // namespace bigraph
