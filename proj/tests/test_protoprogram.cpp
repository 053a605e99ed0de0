#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bigraph/protoprogram.hpp"

using namespace bigraph;

namespace {

// Posterior-like draws with every object coordinate; class weights favor `shape`.
PosteriorSamples fake_posterior(std::uint64_t seed, double shift, ShapeClass shape, int chains = 2, int draws = 300) {
  PosteriorSamples s;
  s.names = object_dim_names();
  s.chains = chains;
  s.draws = draws;
  s.dim = static_cast<int>(kObjectDims);
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < chains * draws; ++i) {
    ObjectParams p;
    p.x = 0.1 * z(rng);
    p.y = 0.1 * z(rng);
    p.theta = z(rng);
    p.scale = {1.0 + shift + 0.05 * z(rng), 1.0 + 0.05 * z(rng), 1.0 + 0.05 * z(rng)};
    p.material = Material{{0.5 + shift + 0.05 * z(rng), 0.4 + 0.05 * z(rng), 0.3 + 0.05 * z(rng)},
                          0.3 + 0.02 * z(rng), 0.7 + 0.02 * z(rng), 0.2 + 0.02 * z(rng), 20.0 + z(rng)};
    p.kappa = soft_one_hot(shape, 0.8 + 0.05 * z(rng));
    const auto v = p.to_vector();
    s.data.insert(s.data.end(), v.begin(), v.end());
  }
  return s;
}

ProtoProgram shifted(const ProtoProgram& p, double delta) {
  std::vector<Kde1D> kdes;
  for (const auto& k : p.kdes()) {
    auto x = k.samples();
    for (double& v : x) v += delta;
    kdes.emplace_back(std::move(x));
  }
  return ProtoProgram(p.names(), std::move(kdes), p.sources());
}

void check_same_densities(const ProtoProgram& a, const ProtoProgram& b) {
  REQUIRE(a.names() == b.names());
  for (std::size_t i = 0; i < a.names().size(); ++i) {
    const Kde1D& ka = a.kde(i);
    const Kde1D& kb = b.kde(i);
    CHECK(ka.bandwidth() == doctest::Approx(kb.bandwidth()).epsilon(1e-12));
    const double lo = ka.min() - 3.0 * ka.bandwidth(), hi = ka.max() + 3.0 * ka.bandwidth();
    for (int g = 0; g <= 50; ++g) {
      const double x = lo + (hi - lo) * g / 50.0;
      CHECK(std::abs(ka.pdf(x) - kb.pdf(x)) < 1e-9);
    }
  }
}

}  // namespace

TEST_CASE("program construction") {
  const auto post = fake_posterior(1, 0.0, ShapeClass::cube);
  const ProtoProgram p = ProtoProgram::build(post, {}, "img");
  CHECK(p.names() == program_dim_names());
  for (const char* pose : {"x", "y", "theta"}) {
    CHECK(std::find(p.names().begin(), p.names().end(), pose) == p.names().end());
  }
  CHECK(p.sample_count() == 600);
  CHECK(p.shots() == 1);
  const int sx = post.index_of("s_x");
  const auto pooled = post.pooled(sx);
  const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / pooled.size();
  CHECK(p.kde(0).mean() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(p.kde(0).bandwidth() == doctest::Approx(scott_bandwidth(pooled)).epsilon(1e-12));

  const ProtoProgram thin = ProtoProgram::build(post, ProgramConfig{100});
  CHECK(thin.sample_count() == 100);
  CHECK(thin.kde(0).samples()[1] == pooled[6]);  // every sixth draw

  const ProtoProgram back = proto_program_from_json(to_json(p));
  CHECK(back.sources() == p.sources());
  check_same_densities(p, back);

  PosteriorSamples missing = post;
  missing.names[4] = "other";
  CHECK_THROWS(ProtoProgram::build(missing));
}

TEST_CASE("distance properties") {
  const ProtoProgram a = ProtoProgram::build(fake_posterior(1, 0.0, ShapeClass::cube));
  const ProtoProgram b = ProtoProgram::build(fake_posterior(2, 0.1, ShapeClass::cube));
  const ProtoProgram c = ProtoProgram::build(fake_posterior(3, 0.0, ShapeClass::sphere));

  CHECK(std::abs(distance(a, a)) < 1e-12);
  CHECK(std::abs(distance(a, a, KappaMode::discrete)) < 1e-12);
  CHECK(distance(a, b) > 0.0);
  CHECK(distance(a, b) != doctest::Approx(distance(b, a)).epsilon(1e-6));

  const auto terms = distance_terms(a, b);
  CHECK(std::accumulate(terms.begin(), terms.end(), 0.0) == doctest::Approx(distance(a, b)).epsilon(1e-13));
  for (double t : terms) CHECK(t >= -1e-9);

  // Moving both programs by the same offset leaves every term unchanged.
  const auto moved = distance_terms(shifted(a, 0.37), shifted(b, 0.37));
  for (std::size_t i = 0; i < terms.size(); ++i) CHECK(moved[i] == doctest::Approx(terms[i]).epsilon(1e-6).scale(1e-9));

  // Discrete mode: class weights contribute one categorical term.
  const auto disc = distance_terms(a, c, KappaMode::discrete);
  const std::size_t k0 = program_dim_names().size() - 3;
  CHECK(disc[k0 + 1] == 0.0);
  CHECK(disc[k0 + 2] == 0.0);
  // All cube draws versus all sphere draws: the floor bounds the categorical KL.
  CHECK(disc[k0] == doctest::Approx(-std::log(kKlDensityFloor)).epsilon(1e-12));
  CHECK(std::abs(distance(c, c, KappaMode::discrete)) < 1e-12);
}

TEST_CASE("classification") {
  const ProtoProgram query = ProtoProgram::build(fake_posterior(10, 0.0, ShapeClass::cube));
  const std::vector<ProtoProgram> classes{ProtoProgram::build(fake_posterior(11, 0.3, ShapeClass::cube)),
                                          ProtoProgram::build(fake_posterior(12, 0.0, ShapeClass::cube)),
                                          ProtoProgram::build(fake_posterior(13, 0.0, ShapeClass::cylinder))};
  for (KappaMode mode : {KappaMode::relaxed, KappaMode::discrete}) {
    const auto p = classify(query, classes, mode);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);
  }
  const std::vector<double> far{1e6, 1e6 + 1.0, 1e300};
  const auto p = softmax_negative(far);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(p[2] == 0.0);
  CHECK_THROWS(softmax_negative(std::vector<double>{}));
}

TEST_CASE("merging") {
  const ProtoProgram a = ProtoProgram::build(fake_posterior(20, 0.0, ShapeClass::cube), {}, "a");
  const ProtoProgram b = ProtoProgram::build(fake_posterior(21, 0.2, ShapeClass::cube, 1, 200), {}, "b");
  const ProtoProgram c = ProtoProgram::build(fake_posterior(22, -0.1, ShapeClass::sphere, 3, 100), {}, "c");

  const ProtoProgram ab = merge(a, b);
  CHECK(ab.sample_count() == a.sample_count() + b.sample_count());
  CHECK(ab.sources() == std::vector<std::string>{"a", "b"});
  check_same_densities(ab, merge(b, a));
  check_same_densities(merge(ab, c), merge(a, merge(b, c)));
  const std::vector<ProtoProgram> all{a, b, c};
  check_same_densities(merge_all(all), merge(ab, c));
  CHECK(merge_all(all).shots() == 3);

  // The merged KDE is rebuilt over the pooled draws.
  std::vector<double> pooled = a.kde(3).samples();
  pooled.insert(pooled.end(), b.kde(3).samples().begin(), b.kde(3).samples().end());
  CHECK(ab.kde(3).bandwidth() == doctest::Approx(scott_bandwidth(pooled)).epsilon(1e-12));
}

TEST_CASE("sampling a concept") {
  Scene globals = default_scene(24, 18, 2, 8);
  const BackgroundCache cache(globals);
  const PriorSet prior(prior_config_for(globals, 0.25));
  const ProtoProgram p = ProtoProgram::build(fake_posterior(30, 0.0, ShapeClass::cylinder));
  const auto draws = sample_concept(p, prior, cache, 6, 9);
  REQUIRE(draws.size() == 6);
  const auto again = sample_concept(p, prior, cache, 6, 9);
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const auto& cd = draws[d];
    CHECK(cd.values == again[d].values);
    CHECK(cd.image.data() == again[d].image.data());
    REQUIRE(cd.values.size() == p.names().size());
    for (std::size_t i = 0; i < cd.values.size(); ++i) {
      const Kde1D& k = p.kde(i);
      CHECK(cd.values[i] >= k.min() - 3.0 * k.bandwidth());
      CHECK(cd.values[i] <= k.max() + 3.0 * k.bandwidth());
    }
    CHECK(cd.params.theta == 0.0);
    CHECK(cd.params.x == doctest::Approx(prior.config().center[0] + prior.config().translation_mean[0]));
    CHECK(cd.params.shape() == ShapeClass::cylinder);
    CHECK(cd.params.kappa[0] + cd.params.kappa[1] + cd.params.kappa[2] == doctest::Approx(1.0));
    CHECK(cd.image.height() == 18);
  }
}
