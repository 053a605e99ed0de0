#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigraph/distributions.hpp"

namespace bigraph {

/// Unnormalized log-density over an unconstrained space, with a map back to
/// the constrained (reported) coordinates. Implementations must be safe to
/// call concurrently.
class SamplingTarget {
 public:
  virtual ~SamplingTarget() = default;

  virtual std::size_t dim() const = 0;
  virtual double log_density(std::span<const double> u) const = 0;
  /// Starting point in unconstrained space.
  virtual std::vector<double> sample_initial(Rng& rng) const = 0;

  /// Names of the constrained coordinates returned by `constrain`.
  virtual std::vector<std::string> names() const;
  virtual std::vector<double> constrain(std::span<const double> u) const;
};

class InitializationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RmhConfig {
  int chains = 4;
  int draws = 3000;    // kept draws per chain, after burn-in
  int burn_in = 300;
  double initial_scale = 0.05;
  double accept_low = 0.20;
  double accept_high = 0.50;
  bool tune = true;
  int tuning_rounds = 10;
  int pilot_steps = 500;
  /// Each chain starts at the best of this many initial draws.
  int init_candidates = 1;
  int init_attempts = 100;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

nlohmann::json to_json(const RmhConfig& cfg);
RmhConfig rmh_config_from_json(const nlohmann::json& j, RmhConfig base = {});

struct TuneResult {
  std::vector<double> scales;
  double acceptance = 0.0;
  int rounds = 0;
  bool converged = false;
};

/// Draws in constrained space, stored chain-major: [chain][draw][dim].
struct PosteriorSamples {
  std::vector<std::string> names;
  int chains = 0;
  int draws = 0;
  int dim = 0;
  std::vector<double> data;
  std::vector<double> acceptance;  // per chain
  std::vector<double> scales;      // proposal diagonal used for the kept draws
  bool tuning_converged = true;

  double at(int chain, int draw, int k) const {
    return data[(static_cast<std::size_t>(chain) * draws + draw) * dim + k];
  }
  int index_of(std::string_view name) const;
  /// All chains of one coordinate, pooled in chain order.
  std::vector<double> pooled(int k) const;
  std::vector<double> chain_values(int chain, int k) const;
};

/// Metropolis-Hastings acceptance: true with probability min(1, exp(log_ratio)).
bool mh_accept(double log_ratio, Rng& rng);

/// Seed of chain `index` derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// One random-walk chain of `steps` proposals. `visit` sees every state after
/// its accept/reject step. Returns the acceptance rate.
double rmh_chain(const SamplingTarget& target, std::vector<double>& state, double& log_density,
                 std::span<const double> scales, int steps, Rng& rng,
                 const std::function<void(std::span<const double>)>& visit = {});

/// Short pilot chains that rescale the diagonal by 1.5 when acceptance is
/// above the window and by 0.5 when below, until inside or out of rounds.
TuneResult tune_proposal(const SamplingTarget& target, std::vector<double> initial_scales, const RmhConfig& cfg);

std::vector<double> initial_state(const SamplingTarget& target, Rng& rng, const RmhConfig& cfg);

PosteriorSamples rmh_sample(const SamplingTarget& target, const RmhConfig& cfg);

struct Diagnostics {
  std::vector<double> rhat;  // empty with a single chain
  std::vector<double> ess;
  std::vector<double> acceptance;
};

/// Rank-normalized split R-hat (max of bulk and folded) and bulk ESS.
Diagnostics diagnostics(const PosteriorSamples& samples);

/// Rank-normalized split R-hat of one coordinate given per-chain draws.
double split_rhat(const std::vector<std::vector<double>>& chains);
double bulk_ess(const std::vector<std::vector<double>>& chains);

inline constexpr std::uint32_t kBigpVersion = 1;

/// "BIGP", u32 version, u32 chains, u32 draws, u32 dim, dim names
/// (u32 length + UTF-8), then f64 draws chain-major.
void write_bigp(const std::filesystem::path& path, const PosteriorSamples& samples);
PosteriorSamples read_bigp(const std::filesystem::path& path);

/// Runs fn(0..n-1) on up to `threads` workers (0: hardware concurrency).
/// The first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace bigraph
