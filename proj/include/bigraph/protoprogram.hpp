#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigraph/distributions.hpp"
#include "bigraph/generative_model.hpp"
#include "bigraph/mcmc.hpp"

namespace bigraph {

/// Non-pose coordinates summarized by a program, in order.
const std::vector<std::string>& program_dim_names();

enum class KappaMode {
  relaxed,   // one KDE per class weight, compared like any other coordinate
  discrete,  // KL between argmax-class frequencies replaces the three weight terms
};

struct ProgramConfig {
  /// Evenly spaced thinning of the pooled draws when there are more (0 keeps all).
  std::size_t max_samples = 0;
};

/// Per-coordinate Gaussian KDEs over pooled posterior draws of one or more images.
class ProtoProgram {
 public:
  ProtoProgram(std::vector<std::string> names, std::vector<Kde1D> kdes, std::vector<std::string> sources);

  static ProtoProgram build(const PosteriorSamples& samples, const ProgramConfig& cfg = {}, std::string source = "");

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Kde1D>& kdes() const noexcept { return kdes_; }
  const Kde1D& kde(std::size_t i) const { return kdes_.at(i); }
  const std::vector<std::string>& sources() const noexcept { return sources_; }
  std::size_t shots() const noexcept { return sources_.size(); }
  std::size_t sample_count() const { return kdes_.front().samples().size(); }

 private:
  std::vector<std::string> names_;
  std::vector<Kde1D> kdes_;
  std::vector<std::string> sources_;
};

nlohmann::json to_json(const ProtoProgram& p);
ProtoProgram proto_program_from_json(const nlohmann::json& j);

/// KDEs rebuilt over the concatenated samples (bandwidths recomputed).
ProtoProgram merge(const ProtoProgram& a, const ProtoProgram& b);
ProtoProgram merge_all(std::span<const ProtoProgram> programs);

/// Per-coordinate KL(class || query) terms.
std::vector<double> distance_terms(const ProtoProgram& query, const ProtoProgram& cls,
                                   KappaMode mode = KappaMode::relaxed);
/// Sum of `distance_terms`.
double distance(const ProtoProgram& query, const ProtoProgram& cls, KappaMode mode = KappaMode::relaxed);

/// Softmax of the negated distances.
std::vector<double> softmax_negative(std::span<const double> distances);
std::vector<double> classify(const ProtoProgram& query, std::span<const ProtoProgram> classes,
                             KappaMode mode = KappaMode::relaxed);

struct ConceptDraw {
  std::vector<double> values;  // one value per program coordinate
  ObjectParams params;          // assembled object at the canonical pose
  Image image;
};

/// Canonical pose: translation at the prior mean, zero rotation.
/// Each coordinate is drawn from its KDE with kernels truncated at 3 bandwidths.
std::vector<ConceptDraw> sample_concept(const ProtoProgram& program, const PriorSet& prior,
                                        const BackgroundCache& cache, int n, std::uint64_t seed);

}  // namespace bigraph
