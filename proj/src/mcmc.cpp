#include "bigraph/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "bigraph/binary_io.hpp"

namespace bigraph {

std::vector<std::string> SamplingTarget::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < dim(); ++i) out.push_back("u" + std::to_string(i));
  return out;
}

std::vector<double> SamplingTarget::constrain(std::span<const double> u) const {
  return {u.begin(), u.end()};
}

void RmhConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("rmh: chains must be >= 1");
  if (draws < 1) throw std::invalid_argument("rmh: draws must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("rmh: burn-in must be >= 0");
  if (!(initial_scale > 0.0) || !std::isfinite(initial_scale)) throw std::invalid_argument("rmh: initial scale must be > 0");
  if (!(accept_low > 0.0 && accept_low < accept_high && accept_high < 1.0)) {
    throw std::invalid_argument("rmh: acceptance window must satisfy 0 < low < high < 1");
  }
  if (tune && (tuning_rounds < 1 || pilot_steps < 1)) throw std::invalid_argument("rmh: tuning needs rounds >= 1 and pilot steps >= 1");
  if (init_candidates < 1 || init_attempts < 1) throw std::invalid_argument("rmh: init candidates and attempts must be >= 1");
  if (threads < 0) throw std::invalid_argument("rmh: threads must be >= 0");
}

nlohmann::json to_json(const RmhConfig& c) {
  return {{"chains", c.chains},           {"draws", c.draws},
          {"burn_in", c.burn_in},         {"initial_scale", c.initial_scale},
          {"accept_low", c.accept_low},   {"accept_high", c.accept_high},
          {"tune", c.tune},               {"tuning_rounds", c.tuning_rounds},
          {"pilot_steps", c.pilot_steps}, {"init_candidates", c.init_candidates},
          {"init_attempts", c.init_attempts}, {"seed", c.seed}};
}

RmhConfig rmh_config_from_json(const nlohmann::json& j, RmhConfig c) {
  c.chains = j.value("chains", c.chains);
  c.draws = j.value("draws", c.draws);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.initial_scale = j.value("initial_scale", c.initial_scale);
  c.accept_low = j.value("accept_low", c.accept_low);
  c.accept_high = j.value("accept_high", c.accept_high);
  c.tune = j.value("tune", c.tune);
  c.tuning_rounds = j.value("tuning_rounds", c.tuning_rounds);
  c.pilot_steps = j.value("pilot_steps", c.pilot_steps);
  c.init_candidates = j.value("init_candidates", c.init_candidates);
  c.init_attempts = j.value("init_attempts", c.init_attempts);
  c.seed = j.value("seed", c.seed);
  return c;
}

int PosteriorSamples::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> PosteriorSamples::pooled(int k) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(chains) * draws);
  for (int c = 0; c < chains; ++c)
    for (int d = 0; d < draws; ++d) out.push_back(at(c, d, k));
  return out;
}

std::vector<double> PosteriorSamples::chain_values(int chain, int k) const {
  std::vector<double> out(static_cast<std::size_t>(draws));
  for (int d = 0; d < draws; ++d) out[static_cast<std::size_t>(d)] = at(chain, d, k);
  return out;
}

bool mh_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::log(u(rng)) < log_ratio;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double rmh_chain(const SamplingTarget& target, std::vector<double>& state, double& log_density,
                 std::span<const double> scales, int steps, Rng& rng,
                 const std::function<void(std::span<const double>)>& visit) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> proposal(state.size());
  long accepted = 0;
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < state.size(); ++i) proposal[i] = state[i] + scales[i] * normal(rng);
    const double lp = target.log_density(proposal);
    if (std::isfinite(lp) && mh_accept(lp - log_density, rng)) {
      state.swap(proposal);
      log_density = lp;
      ++accepted;
    }
    if (visit) visit(state);
  }
  return steps > 0 ? static_cast<double>(accepted) / steps : 0.0;
}

std::vector<double> initial_state(const SamplingTarget& target, Rng& rng, const RmhConfig& cfg) {
  std::vector<double> best;
  double best_lp = -std::numeric_limits<double>::infinity();
  int found = 0;
  for (int attempt = 0; attempt < cfg.init_attempts && found < cfg.init_candidates; ++attempt) {
    std::vector<double> u = target.sample_initial(rng);
    const double lp = target.log_density(u);
    if (!std::isfinite(lp)) continue;
    ++found;
    if (lp > best_lp) {
      best_lp = lp;
      best = std::move(u);
    }
  }
  if (found == 0) {
    throw InitializationFailed("no finite initial state after " + std::to_string(cfg.init_attempts) + " attempts");
  }
  return best;
}

TuneResult tune_proposal(const SamplingTarget& target, std::vector<double> initial_scales, const RmhConfig& cfg) {
  if (cfg.tuning_rounds < 1) throw std::invalid_argument("tune_proposal: rounds must be >= 1");
  if (initial_scales.size() != target.dim()) throw std::invalid_argument("tune_proposal: scale dimension mismatch");
  Rng rng(derive_seed(cfg.seed, 0xFFFFFFFFULL));
  std::vector<double> state = initial_state(target, rng, cfg);
  double lp = target.log_density(state);
  TuneResult r;
  r.scales = std::move(initial_scales);
  for (int round = 1; round <= cfg.tuning_rounds; ++round) {
    r.acceptance = rmh_chain(target, state, lp, r.scales, cfg.pilot_steps, rng);
    r.rounds = round;
    if (r.acceptance >= cfg.accept_low && r.acceptance <= cfg.accept_high) {
      r.converged = true;
      break;
    }
    if (round == cfg.tuning_rounds) break;
    const double factor = r.acceptance > cfg.accept_high ? 1.5 : 0.5;
    for (double& s : r.scales) s *= factor;
  }
  return r;
}

PosteriorSamples rmh_sample(const SamplingTarget& target, const RmhConfig& cfg) {
  cfg.validate();
  const std::size_t dim_u = target.dim();
  PosteriorSamples out;
  out.names = target.names();
  out.chains = cfg.chains;
  out.draws = cfg.draws;
  out.dim = static_cast<int>(out.names.size());
  out.scales.assign(dim_u, cfg.initial_scale);
  if (cfg.tune) {
    const TuneResult t = tune_proposal(target, out.scales, cfg);
    out.scales = t.scales;
    out.tuning_converged = t.converged;
  }
  out.data.resize(static_cast<std::size_t>(out.chains) * out.draws * out.dim);
  out.acceptance.assign(static_cast<std::size_t>(out.chains), 0.0);

  parallel_for(static_cast<std::size_t>(cfg.chains), cfg.threads, [&](std::size_t c) {
    Rng rng(derive_seed(cfg.seed, c));
    std::vector<double> state = initial_state(target, rng, cfg);
    double lp = target.log_density(state);
    rmh_chain(target, state, lp, out.scales, cfg.burn_in, rng);
    double* dst = out.data.data() + c * static_cast<std::size_t>(out.draws) * out.dim;
    out.acceptance[c] = rmh_chain(target, state, lp, out.scales, cfg.draws, rng, [&](std::span<const double> u) {
      const std::vector<double> x = target.constrain(u);
      std::copy(x.begin(), x.end(), dst);
      dst += out.dim;
    });
  });
  return out;
}

namespace {

std::vector<double> rank_normalize(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank over ties
    const double p = (rank - 0.375) / (static_cast<double>(n) + 0.25);
    for (std::size_t k = i; k <= j; ++k) z[order[k]] = normal_quantile(p);
    i = j + 1;
  }
  return z;
}

std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

std::vector<std::vector<double>> rank_normalize_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const std::vector<double> z = rank_normalize(all);
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  for (const auto& c : chains) {
    out.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(pos), z.begin() + static_cast<std::ptrdiff_t>(pos + c.size()));
    pos += c.size();
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double basic_rhat(const std::vector<std::vector<double>>& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(var_of(c));
  }
  const double w = mean_of(vars);
  const double b = n * var_of(means);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double basic_ess(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), acov0(m);
  for (std::size_t j = 0; j < m; ++j) means[j] = mean_of(chains[j]);
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (chains[j][i] - means[j]) * (chains[j][i + lag] - means[j]);
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  const double dn = static_cast<double>(n);
  const double mean_var = mean_acov(0) * dn / (dn - 1.0);
  double var_plus = mean_var * (dn - 1.0) / dn;
  if (m > 1) var_plus += var_of(means);
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);

  std::vector<double> rho(n + 1, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t + 3 < n && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;
  // Geyer initial monotone sequence
  for (std::size_t s = 1; s + 3 <= max_t; s += 2) {
    if (rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s]) {
      rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
      rho[s + 2] = rho[s + 1];
    }
  }
  double tau = -1.0;
  for (std::size_t s = 0; s <= max_t; ++s) tau += 2.0 * rho[s];
  tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

void check_chains(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw std::invalid_argument("diagnostics: no chains");
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw std::invalid_argument("diagnostics: chains differ in length");
  }
  if (chains.front().size() < 4) throw std::invalid_argument("diagnostics: need at least 4 draws per chain");
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  const auto split = split_chains(chains);
  const double bulk = basic_rhat(rank_normalize_chains(split));
  std::vector<double> all;
  for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2), all.end());
  const double median = all[all.size() / 2];
  auto folded = split;
  for (auto& c : folded)
    for (double& x : c) x = std::abs(x - median);
  const double tail = basic_rhat(rank_normalize_chains(folded));
  return std::max(bulk, tail);
}

double bulk_ess(const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  return basic_ess(rank_normalize_chains(split_chains(chains)));
}

Diagnostics diagnostics(const PosteriorSamples& s) {
  Diagnostics d;
  d.acceptance = s.acceptance;
  for (int k = 0; k < s.dim; ++k) {
    std::vector<std::vector<double>> chains;
    for (int c = 0; c < s.chains; ++c) chains.push_back(s.chain_values(c, k));
    if (s.chains >= 2) d.rhat.push_back(split_rhat(chains));
    d.ess.push_back(bulk_ess(chains));
  }
  return d;
}

void write_bigp(const std::filesystem::path& path, const PosteriorSamples& s) {
  if (s.names.size() != static_cast<std::size_t>(s.dim) ||
      s.data.size() != static_cast<std::size_t>(s.chains) * s.draws * s.dim) {
    throw std::invalid_argument("write_bigp: inconsistent sample shape");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  binary::write_magic(os, "BIGP");
  binary::write<std::uint32_t>(os, kBigpVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.chains));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.draws));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.dim));
  for (const auto& n : s.names) binary::write_string(os, n);
  for (double v : s.data) binary::write<double>(os, v);
  if (!os) throw IoError("write failed: " + path.string());
}

PosteriorSamples read_bigp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  binary::expect_magic(is, "BIGP");
  const auto version = binary::read<std::uint32_t>(is);
  if (version != kBigpVersion) throw IoError("unsupported BIGP version " + std::to_string(version));
  PosteriorSamples s;
  s.chains = static_cast<int>(binary::read<std::uint32_t>(is));
  s.draws = static_cast<int>(binary::read<std::uint32_t>(is));
  s.dim = static_cast<int>(binary::read<std::uint32_t>(is));
  const std::size_t count = static_cast<std::size_t>(s.chains) * s.draws * s.dim;
  if (s.dim > 4096 || count > (std::size_t{1} << 31)) throw IoError("BIGP: implausible shape");
  for (int i = 0; i < s.dim; ++i) s.names.push_back(binary::read_string(is));
  s.data.resize(count);
  for (double& v : s.data) v = binary::read<double>(is);
  return s;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bigraph
