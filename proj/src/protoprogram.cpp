#include "bigraph/protoprogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bigraph {

const std::vector<std::string>& program_dim_names() {
  static const std::vector<std::string> names = {"s_x", "s_y", "s_z",   "c_r",          "c_g",        "c_b",
                                                 "k_a", "k_d", "k_s",   "alpha",        "kappa_sphere", "kappa_cube",
                                                 "kappa_cylinder"};
  return names;
}

ProtoProgram::ProtoProgram(std::vector<std::string> names, std::vector<Kde1D> kdes, std::vector<std::string> sources)
    : names_(std::move(names)), kdes_(std::move(kdes)), sources_(std::move(sources)) {
  if (names_.empty() || names_.size() != kdes_.size()) throw std::invalid_argument("program: names and KDEs differ in count");
  for (const auto& k : kdes_) {
    if (k.samples().size() != kdes_.front().samples().size()) {
      throw std::invalid_argument("program: every coordinate needs the same number of samples");
    }
  }
}

ProtoProgram ProtoProgram::build(const PosteriorSamples& samples, const ProgramConfig& cfg, std::string source) {
  const auto& names = program_dim_names();
  std::vector<Kde1D> kdes;
  for (const auto& name : names) {
    const int k = samples.index_of(name);
    if (k < 0) throw std::invalid_argument("program: posterior lacks coordinate " + name);
    std::vector<double> x = samples.pooled(k);
    if (x.empty()) throw std::invalid_argument("program: posterior has no draws");
    if (cfg.max_samples > 0 && x.size() > cfg.max_samples) {
      std::vector<double> thin(cfg.max_samples);
      for (std::size_t i = 0; i < cfg.max_samples; ++i) thin[i] = x[i * x.size() / cfg.max_samples];
      x = std::move(thin);
    }
    kdes.emplace_back(std::move(x));
  }
  return ProtoProgram(names, std::move(kdes), {std::move(source)});
}

nlohmann::json to_json(const ProtoProgram& p) {
  nlohmann::json dims = nlohmann::json::array();
  for (std::size_t i = 0; i < p.names().size(); ++i) {
    dims.push_back({{"name", p.names()[i]}, {"bandwidth", p.kde(i).bandwidth()}, {"samples", p.kde(i).samples()}});
  }
  return {{"sources", p.sources()}, {"shots", p.shots()}, {"dims", dims}};
}

ProtoProgram proto_program_from_json(const nlohmann::json& j) {
  std::vector<std::string> names;
  std::vector<Kde1D> kdes;
  for (const auto& d : j.at("dims")) {
    names.push_back(d.at("name").get<std::string>());
    auto samples = d.at("samples").get<std::vector<double>>();
    if (d.contains("bandwidth")) {
      kdes.emplace_back(std::move(samples), d.at("bandwidth").get<double>());
    } else {
      kdes.emplace_back(std::move(samples));
    }
  }
  return ProtoProgram(std::move(names), std::move(kdes), j.value("sources", std::vector<std::string>{}));
}

ProtoProgram merge(const ProtoProgram& a, const ProtoProgram& b) {
  if (a.names() != b.names()) throw std::invalid_argument("merge: programs have different coordinates");
  std::vector<Kde1D> kdes;
  for (std::size_t i = 0; i < a.names().size(); ++i) {
    std::vector<double> x = a.kde(i).samples();
    const auto& y = b.kde(i).samples();
    x.insert(x.end(), y.begin(), y.end());
    kdes.emplace_back(std::move(x));
  }
  std::vector<std::string> sources = a.sources();
  sources.insert(sources.end(), b.sources().begin(), b.sources().end());
  return ProtoProgram(a.names(), std::move(kdes), std::move(sources));
}

ProtoProgram merge_all(std::span<const ProtoProgram> programs) {
  if (programs.empty()) throw std::invalid_argument("merge: no programs");
  if (programs.size() == 1) return programs.front();
  // Concatenate once instead of rebuilding KDEs pairwise.
  const auto& names = programs.front().names();
  std::vector<Kde1D> kdes;
  std::vector<std::string> sources;
  for (const auto& p : programs) {
    if (p.names() != names) throw std::invalid_argument("merge: programs have different coordinates");
    sources.insert(sources.end(), p.sources().begin(), p.sources().end());
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<double> x;
    for (const auto& p : programs) x.insert(x.end(), p.kde(i).samples().begin(), p.kde(i).samples().end());
    kdes.emplace_back(std::move(x));
  }
  return ProtoProgram(names, std::move(kdes), std::move(sources));
}

namespace {

std::vector<double> class_frequencies(const ProtoProgram& p, std::size_t first) {
  std::vector<double> freq(3, 0.0);
  const std::size_t n = p.sample_count();
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (p.kde(first + k).samples()[s] > p.kde(first + best).samples()[s]) best = k;
    freq[best] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(n);
  return freq;
}

}  // namespace

std::vector<double> distance_terms(const ProtoProgram& query, const ProtoProgram& cls, KappaMode mode) {
  if (query.names() != cls.names()) throw std::invalid_argument("distance: programs have different coordinates");
  std::vector<double> terms(query.names().size(), 0.0);
  std::size_t kappa_first = query.names().size();
  if (mode == KappaMode::discrete) {
    const auto it = std::find(query.names().begin(), query.names().end(), "kappa_sphere");
    if (it == query.names().end() || static_cast<std::size_t>(it - query.names().begin()) + 3 > query.names().size()) {
      throw std::invalid_argument("distance: discrete class mode needs the three class weights");
    }
    kappa_first = static_cast<std::size_t>(it - query.names().begin());
  }
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i >= kappa_first && i < kappa_first + 3) continue;
    terms[i] = kl_divergence_kde(cls.kde(i), query.kde(i));
  }
  if (mode == KappaMode::discrete) {
    const auto p = class_frequencies(cls, kappa_first);
    const auto q = class_frequencies(query, kappa_first);
    double kl = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
      if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - std::log(std::max(q[k], kKlDensityFloor)));
    terms[kappa_first] = kl;
  }
  return terms;
}

double distance(const ProtoProgram& query, const ProtoProgram& cls, KappaMode mode) {
  double total = 0.0;
  for (double t : distance_terms(query, cls, mode)) total += t;
  return total;
}

std::vector<double> softmax_negative(std::span<const double> distances) {
  if (distances.empty()) throw std::invalid_argument("classify: no classes");
  const double dmin = *std::min_element(distances.begin(), distances.end());
  std::vector<double> p(distances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] = std::exp(-(distances[i] - dmin)));
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> classify(const ProtoProgram& query, std::span<const ProtoProgram> classes, KappaMode mode) {
  std::vector<double> d;
  for (const auto& c : classes) d.push_back(distance(query, c, mode));
  return softmax_negative(d);
}

std::vector<ConceptDraw> sample_concept(const ProtoProgram& program, const PriorSet& prior,
                                        const BackgroundCache& cache, int n, std::uint64_t seed) {
  const auto& names = object_dim_names();
  std::vector<int> slot(program.names().size());
  for (std::size_t i = 0; i < slot.size(); ++i) {
    const auto it = std::find(names.begin(), names.end(), program.names()[i]);
    if (it == names.end()) throw std::invalid_argument("sample_concept: unknown coordinate " + program.names()[i]);
    slot[i] = static_cast<int>(it - names.begin());
  }
  const PriorConfig& pc = prior.config();
  ObjectParams canonical;
  canonical.x = pc.center[0] + pc.translation_mean[0];
  canonical.y = pc.center[1] + pc.translation_mean[1];
  canonical.theta = 0.0;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ConceptDraw> out;
  for (int d = 0; d < n; ++d) {
    ConceptDraw cd;
    auto v = canonical.to_vector();
    for (std::size_t i = 0; i < slot.size(); ++i) {
      const Kde1D& kde = program.kde(i);
      std::uniform_int_distribution<std::size_t> pick(0, kde.samples().size() - 1);
      const double center = kde.samples()[pick(rng)];
      double z;
      do {
        z = normal(rng);
      } while (std::abs(z) > 3.0);
      const double value = center + kde.bandwidth() * z;
      cd.values.push_back(value);
      v[static_cast<std::size_t>(slot[i])] = value;
    }
    // Kernel tails can leave the valid ranges; clamp before rendering.
    for (std::size_t i = 3; i < 6; ++i) v[i] = std::max(v[i], 1e-3);
    for (std::size_t i = 6; i < 12; ++i) v[i] = std::clamp(v[i], 0.0, 1.0);
    v[12] = std::clamp(v[12], 1e-3, kMaxShininessPrior);
    double total = 0.0;
    for (std::size_t i = 13; i < 16; ++i) total += (v[i] = std::max(v[i], 1e-9));
    for (std::size_t i = 13; i < 16; ++i) v[i] /= total;
    cd.params = ObjectParams::from_vector(v);
    cd.image = cache.render_object(to_instance(cd.params));
    out.push_back(std::move(cd));
  }
  return out;
}

}  // namespace bigraph
