#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bigraph/distributions.hpp"

using namespace bigraph;

namespace {

constexpr double kPi = std::numbers::pi;

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

struct Moments {
  double mean, var;
};

template <class Draw>
Moments sample_moments(Draw draw, int n) {
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = draw();
    s += x;
    ss += x * x;
  }
  const double mean = s / n;
  return {mean, ss / n - mean * mean};
}

// Mean within 3 standard errors; variance within 3 standard errors using the
// normal-theory approximation sd(var_hat) ~ var*sqrt(2/n) inflated for tails.
void check_moments(const Moments& m, double mean, double var, int n, double var_inflation = 2.0) {
  CHECK(std::abs(m.mean - mean) < 3.0 * std::sqrt(var / n));
  CHECK(std::abs(m.var - var) < 3.0 * var_inflation * var * std::sqrt(2.0 / n));
}

}  // namespace

TEST_CASE("closed-form log densities") {
  const VonMises uniform(0.0, 0.0);
  for (double x : {-3.0, -1.0, 0.0, 2.5}) CHECK(uniform.log_pdf(x) == doctest::Approx(std::log(1.0 / (2.0 * kPi))).epsilon(1e-14));

  const TruncNormal wide(0.3, 1.7, -1e9, 1e9);
  CHECK(wide.log_pdf(0.3) == doctest::Approx(normal_log_pdf(0.3, 0.3, 1.7)).epsilon(1e-12));
  CHECK(std::abs(wide.log_pdf(0.3) - normal_log_pdf(0.3, 0.3, 1.7)) < 1e-9);

  const double mu = 0.025, sigma = 0.25;
  const LogNormal ln(mu, sigma);
  CHECK(std::exp(ln.log_pdf(std::exp(mu))) == doctest::Approx(1.0 / (std::exp(mu) * sigma * std::sqrt(2.0 * kPi))));
  CHECK(ln.log_pdf(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(ln.log_pdf(-1.0) == -std::numeric_limits<double>::infinity());

  const TruncNormal tn(0.0, 1.0, -1.0, 1.0);
  CHECK(tn.log_pdf(1.5) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(TruncNormal(0.0, 0.0, -1.0, 1.0), InvalidDistribution);
  CHECK_THROWS_AS(TruncNormal(0.0, 1.0, 1.0, -1.0), InvalidDistribution);
}

TEST_CASE("every density integrates to one") {
  const TruncNormal tn(0.1, 0.08, -0.45, 0.45);
  CHECK(integrate([&](double x) { return std::exp(tn.log_pdf(x)); }, -0.45, 0.45) == doctest::Approx(1.0).epsilon(1e-3));
  const TruncNormal tail(0.0, 1.0, 2.0, 6.0);
  CHECK(integrate([&](double x) { return std::exp(tail.log_pdf(x)); }, 2.0, 6.0) == doctest::Approx(1.0).epsilon(1e-3));

  for (double k : {0.0, 0.7, 4.0, 30.0}) {
    const VonMises vm(0.5, k);
    CHECK(integrate([&](double x) { return std::exp(vm.log_pdf(x)); }, -kPi, kPi) == doctest::Approx(1.0).epsilon(1e-3));
  }

  const LogNormal ln(0.025, 0.25);
  CHECK(integrate([&](double x) { return std::exp(ln.log_pdf(x)); }, 1e-9, 20.0) == doctest::Approx(1.0).epsilon(1e-3));

  const Gmm g{{0.3, 0.7}, {0.2, 0.6}, {0.01, 0.02}};
  CHECK(integrate([&](double x) { return std::exp(g.log_pdf(x)); }, -3.0, 4.0) == doctest::Approx(1.0).epsilon(1e-3));

  Rng rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(300);
  for (double& v : s) v = n(rng);
  const Kde1D kde(s);
  CHECK(integrate([&](double x) { return kde.pdf(x); }, -12.0, 12.0) == doctest::Approx(1.0).epsilon(1e-3));

  // Concrete density over the 2-simplex: integrate y2 over [0, 1-y1], then y1.
  const GumbelSoftmax gs({0.2, 0.3, 0.5}, 0.5);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double total = ts.integrate(
      [&](double y1) {
        return ts.integrate(
            [&](double y2) {
              const double y[3] = {y1, y2, 1.0 - y1 - y2};
              return y[2] > 0.0 ? std::exp(gs.log_pdf(y)) : 0.0;
            },
            0.0, 1.0 - y1, 1e-9);
      },
      0.0, 1.0, 1e-9);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("samplers reproduce analytic moments") {
  constexpr int n = 50000;
  Rng rng(2024);

  const TruncNormal tn(0.0, 0.08, -0.45, 0.45);
  check_moments(sample_moments([&] { return tn.sample(rng); }, n), tn.mean(), tn.variance(), n);
  const TruncNormal skew(0.3, 1.0, 0.0, 5.0);
  check_moments(sample_moments([&] { return skew.sample(rng); }, n), skew.mean(), skew.variance(), n);

  // TruncNormal moment formulas against quadrature.
  const double qmean = integrate([&](double x) { return x * std::exp(skew.log_pdf(x)); }, 0.0, 5.0);
  const double qvar = integrate([&](double x) { return (x - qmean) * (x - qmean) * std::exp(skew.log_pdf(x)); }, 0.0, 5.0);
  CHECK(skew.mean() == doctest::Approx(qmean).epsilon(1e-8));
  CHECK(skew.variance() == doctest::Approx(qvar).epsilon(1e-8));

  const LogNormal ln(0.025, 0.25);
  check_moments(sample_moments([&] { return ln.sample(rng); }, n), ln.mean(), ln.variance(), n, 3.0);

  // E[cos(x - mu)] = I1(k)/I0(k); Var[cos] from quadrature.
  const VonMises vm(0.4, 2.0);
  const double ecos = std::cyl_bessel_i(1.0, 2.0) / std::cyl_bessel_i(0.0, 2.0);
  const double vcos = integrate([&](double x) { return std::pow(std::cos(x - 0.4) - ecos, 2) * std::exp(vm.log_pdf(x)); }, -kPi, kPi);
  check_moments(sample_moments([&] { return std::cos(vm.sample(rng) - 0.4); }, n), ecos, vcos, n);
  const VonMises flat(0.0, 0.0);
  check_moments(sample_moments([&] { return flat.sample(rng); }, n), 0.0, kPi * kPi / 3.0, n);

  const Gmm g{{0.3, 0.7}, {0.2, 0.6}, {0.01, 0.02}};
  check_moments(sample_moments([&] { return g.sample(rng); }, n), g.mean(), g.variance(), n);

  // Gumbel-max: the argmax of a concrete draw is categorical(probabilities).
  const GumbelSoftmax gs({0.2, 0.3, 0.5}, 0.5);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) {
    const auto y = gs.sample(rng);
    CHECK(std::abs(std::accumulate(y.begin(), y.end(), 0.0) - 1.0) < 1e-12);
    ++counts[static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin())];
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = gs.probabilities()[k];
    CHECK(std::abs(counts[k] / static_cast<double>(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("samplers are deterministic given a seed") {
  const TruncNormal tn(0.0, 1.0, -1.0, 2.0);
  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(tn.sample(a) == tn.sample(b));
}

TEST_CASE("EM recovers a well-separated two-component mixture") {
  Rng rng(10);
  std::normal_distribution<double> left(0.0, 0.1), right(5.0, 0.1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> s(2000);
  for (double& v : s) v = coin(rng) ? left(rng) : right(rng);
  const GmmFit fit = fit_gmm_em(s);
  std::vector<double> means = fit.gmm.means;
  std::sort(means.begin(), means.end());
  CHECK(std::abs(means[0] - 0.0) < 0.05);
  CHECK(std::abs(means[1] - 5.0) < 0.05);
  CHECK(fit.monotone);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9 * std::abs(fit.log_likelihood[i - 1]));
  }
  CHECK(fit.converged);
}

TEST_CASE("EM log-likelihood never decreases on an overlapping mixture") {
  Rng rng(12);
  std::normal_distribution<double> a(0.3, 0.1), b(0.5, 0.15);
  std::vector<double> s(1500);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 3 == 0 ? a(rng) : b(rng);
  const GmmFit fit = fit_gmm_em(s);
  CHECK(fit.monotone);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9 * std::abs(fit.log_likelihood[i - 1]));
}

TEST_CASE("EM on identical samples floors the variance and sits on the value") {
  const std::vector<double> s(20, 0.42);
  const GmmFit fit = fit_gmm_em(s);
  CHECK(fit.variance_floored);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(fit.gmm.means[k] == doctest::Approx(0.42));
    CHECK(fit.gmm.variances[k] == kGmmVarianceFloor);
  }
  CHECK_THROWS_AS((void)fit_gmm_em(std::vector<double>{1.0, 2.0, 3.0}), InvalidDistribution);
}

TEST_CASE("Scott bandwidth follows the formula") {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(100);
  for (double& v : s) v = n(rng);
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / 100.0;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 99.0);
  for (double& v : s) v = 2.0 * (v - mean) / sd;  // sample std exactly 2
  CHECK(std::abs(scott_bandwidth(s) - 2.0 * std::pow(100.0, -0.2)) < 1e-6);
  CHECK(std::abs(scott_bandwidth(s) - 0.79621434110699454) < 1e-6);

  std::vector<double> scaled = s;
  for (double& v : scaled) v *= 3.5;
  CHECK(scott_bandwidth(scaled) == doctest::Approx(3.5 * scott_bandwidth(s)).epsilon(1e-12));
  CHECK_THROWS_AS((void)scott_bandwidth(std::vector<double>{1.0}), InvalidDistribution);
  CHECK(scott_bandwidth(std::vector<double>{2.0, 2.0, 2.0}) == kBandwidthFloor);
}

TEST_CASE("grid KDE evaluation matches direct summation") {
  Rng rng(8);
  std::normal_distribution<double> n(1.0, 0.5);
  std::vector<double> s(700);
  for (double& v : s) v = n(rng);
  const Kde1D kde(s);
  const double lo = -2.0, step = 0.013;
  const auto grid = kde.pdf_grid(lo, step, 400);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double direct = kde.pdf(lo + static_cast<double>(i) * step);
    CHECK(std::abs(grid[i] - direct) <= 1e-9 * std::max(direct, 1e-3));
  }
}

TEST_CASE("KL divergence between KDEs") {
  Rng rng(21);
  std::normal_distribution<double> n0(0.0, 1.0), n1(1.0, 1.0);
  std::vector<double> a(10000), b(10000);
  for (double& v : a) v = n0(rng);
  for (double& v : b) v = n1(rng);
  const Kde1D p(a), q(b);
  CHECK(std::abs(kl_divergence_kde(p, p)) < 1e-6);
  const double pq = kl_divergence_kde(p, q);
  const double qp = kl_divergence_kde(q, p);
  CHECK(std::abs(pq - 0.5) < 0.05);
  CHECK(pq != qp);
}

TEST_CASE("scalar bijectors invert and report the log Jacobian") {
  const Bijector aff = Bijector::affine(2.0, 1.0);
  CHECK(aff.forward(3.0) == 7.0);
  CHECK(aff.log_det(3.0) == doctest::Approx(std::log(2.0)));
  CHECK(Bijector::sigmoid(1.0, 0.0, 0.0, 1.0).forward(0.0) == 0.5);

  const std::vector<Bijector> all{aff, Bijector::sigmoid(kPi / 2.0, 0.0, -kPi, kPi), Bijector::sigmoid(0.7, -0.3, 0.0, 1.0),
                                  Bijector::exp_affine(0.25, 0.025), Bijector::affine(-0.5, 0.2).inverted_affine()};
  for (const Bijector& bj : all) {
    for (double u : {-2.3, -0.4, 0.0, 0.9, 1.7}) {
      CHECK(std::abs(bj.inverse(bj.forward(u)) - u) < 1e-10);
      const double h = 1e-5;
      const double numeric = (bj.forward(u + h) - bj.forward(u - h)) / (2.0 * h);
      CHECK(std::abs(bj.log_det(u) - std::log(std::abs(numeric))) < 1e-6);
    }
  }
}

TEST_CASE("softmax bijector pins the last logit and reports the simplex Jacobian") {
  const SoftmaxBijector sb(3, 2.0);
  const std::vector<double> logits{0.4, -1.1};
  const auto p = sb.forward(logits);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const auto back = sb.inverse(p);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(back[i] - logits[i]) < 1e-10);

  const double h = 1e-6;
  double jac[2][2];
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> up = logits, down = logits;
    up[j] += h;
    down[j] -= h;
    const auto pu = sb.forward(up), pd = sb.forward(down);
    for (std::size_t i = 0; i < 2; ++i) jac[i][j] = (pu[i] - pd[i]) / (2.0 * h);
  }
  const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
  CHECK(std::abs(sb.log_det(logits) - std::log(std::abs(det))) < 1e-6);
}

TEST_CASE("GMM-matching affine standardizes mixture samples") {
  Rng rng(5);
  const Gmm g{{0.4, 0.6}, {0.2, 0.7}, {0.003, 0.01}};
  std::vector<double> s(10000);
  for (double& v : s) v = g.sample(rng);
  const Bijector b = fit_gmm_bijector(s);
  std::vector<double> t;
  for (double v : s) t.push_back(b.forward(v));
  const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  double ss = 0.0;
  for (double v : t) ss += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(std::sqrt(ss / static_cast<double>(t.size())) - 1.0) < 0.05);

  // Moment-matching oracle on unimodal data.
  std::normal_distribution<double> n(0.6, 0.05);
  std::vector<double> u(5000);
  for (double& v : u) v = n(rng);
  const double um = std::accumulate(u.begin(), u.end(), 0.0) / 5000.0;
  double uss = 0.0;
  for (double v : u) uss += (v - um) * (v - um);
  const double usd = std::sqrt(uss / 5000.0);
  const Bijector bu = fit_gmm_bijector(u);
  CHECK(bu.scale() == doctest::Approx(1.0 / usd).epsilon(0.1));
  CHECK(bu.shift() == doctest::Approx(-um / usd).epsilon(0.1));
}
