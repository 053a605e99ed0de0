#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bigraph {

using Rng = std::mt19937_64;

class InvalidDistribution : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Standard normal CDF and quantile.
double normal_cdf(double z);
double normal_quantile(double p);
double normal_log_pdf(double x, double mu, double sigma);

/// Normal(mu, sigma) restricted to [lower, upper].
class TruncNormal {
 public:
  TruncNormal(double mu, double sigma, double lower, double upper);

  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;

  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

 private:
  double mu_, sigma_, lower_, upper_;
  double log_norm_;  // log(sigma * Z), Z the retained normal mass
  double alpha_, beta_;
};

/// Von Mises on [-pi, pi].
class VonMises {
 public:
  VonMises(double mu, double concentration);

  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double mu() const noexcept { return mu_; }
  double concentration() const noexcept { return kappa_; }

 private:
  double mu_, kappa_;
  double log_norm_;
};

class LogNormal {
 public:
  LogNormal(double mu, double sigma);

  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;
  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }

 private:
  double mu_, sigma_;
};

/// Concrete (Gumbel-Softmax) distribution on the K-simplex. The density is
/// with respect to Lebesgue measure on the first K-1 coordinates; the last
/// coordinate is implied.
class GumbelSoftmax {
 public:
  GumbelSoftmax(std::vector<double> probabilities, double temperature);

  double log_pdf(std::span<const double> y) const;
  std::vector<double> sample(Rng& rng) const;
  std::size_t size() const noexcept { return probs_.size(); }
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  double temperature() const noexcept { return temperature_; }

 private:
  std::vector<double> probs_;
  double temperature_;
  double log_const_;
};

/// One-dimensional Gaussian mixture.
struct Gmm {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  void validate() const;
  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;
};

struct GmmFit {
  Gmm gmm;
  std::vector<double> log_likelihood;  // total log-likelihood after each iteration
  int iterations = 0;
  bool converged = false;
  bool variance_floored = false;
  bool monotone = true;
};

inline constexpr double kGmmVarianceFloor = 1e-6;

/// EM for a K-component 1-D mixture, initialized by splitting the sorted
/// samples into K equal-count groups. Stops when the mean per-sample
/// log-likelihood improves by less than `tolerance` or after `max_iterations`.
GmmFit fit_gmm_em(std::span<const double> samples, int components = 2, double tolerance = 1e-8,
                  int max_iterations = 500);

inline constexpr double kBandwidthFloor = 1e-6;

/// h = std(samples, ddof=1) * n^(-1/5), floored.
double scott_bandwidth(std::span<const double> samples);

/// Gaussian kernel density estimate over 1-D samples.
class Kde1D {
 public:
  explicit Kde1D(std::vector<double> samples);
  Kde1D(std::vector<double> samples, double bandwidth);

  double pdf(double x) const;
  double sample(Rng& rng) const;
  double mean() const;
  double bandwidth() const noexcept { return h_; }
  const std::vector<double>& samples() const noexcept { return samples_; }
  double min() const noexcept { return sorted_.front(); }
  double max() const noexcept { return sorted_.back(); }

  /// Densities on the uniform grid lo + i*step, i in [0, n).
  std::vector<double> pdf_grid(double lo, double step, std::size_t n) const;

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
  double h_;
};

inline constexpr std::size_t kKlGridPoints = 512;
inline constexpr double kKlDensityFloor = 1e-12;

/// Grid estimate of KL(p || q) over the union support widened by 3 bandwidths.
double kl_divergence_kde(const Kde1D& p, const Kde1D& q);

// --- bijectors ------------------------------------------------------------

/// Scalar invertible map with log|d forward / du|.
class Bijector {
 public:
  enum class Kind { identity, affine, sigmoid, exp_affine };

  static Bijector identity();
  /// u -> scale*u + shift.
  static Bijector affine(double scale, double shift);
  /// u -> low + (high-low) * sigmoid(slope*u + shift).
  static Bijector sigmoid(double slope, double shift, double low, double high);
  /// u -> exp(scale*u + shift); matches LogNormal(shift, scale) to Normal(0,1).
  static Bijector exp_affine(double scale, double shift);

  double forward(double u) const;
  double inverse(double x) const;
  double log_det(double u) const;

  /// Affine bijector whose forward is this one's inverse (affine kind only).
  Bijector inverted_affine() const;

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  double shift() const noexcept { return shift_; }
  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }

 private:
  Kind kind_ = Kind::identity;
  double scale_ = 1.0, shift_ = 0.0, low_ = 0.0, high_ = 1.0;
};

/// Maps K-1 free logits (the last pinned at 0) to the K-simplex:
/// p = softmax(omega * [l, 0]).
class SoftmaxBijector {
 public:
  SoftmaxBijector(std::size_t k, double omega);

  std::vector<double> forward(std::span<const double> logits) const;
  std::vector<double> inverse(std::span<const double> simplex) const;
  /// log|det| of the map from logits to the first K-1 simplex coordinates.
  double log_det(std::span<const double> logits) const;
  std::size_t size() const noexcept { return k_; }
  double omega() const noexcept { return omega_; }

 private:
  std::size_t k_;
  double omega_;
};

/// Affine map (omega, phi) taking data to approximately standard normal,
/// fitted by Newton's method on the transformed negative log-likelihood.
Bijector fit_gmm_bijector(std::span<const double> samples);

}  // namespace bigraph
