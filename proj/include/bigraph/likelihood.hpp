#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bigraph/image.hpp"

namespace bigraph {

/// One 3x3 convolution, stride 1, zero "same" padding, followed by ReLU.
struct ConvLayer {
  int out_channels = 64;
  int in_channels = 3;
  std::vector<double> kernel;  // [out][in][3][3]
  std::vector<double> bias;    // [out]
  bool random_fallback = false;

  double weight(int o, int i, int ky, int kx) const {
    return kernel[((static_cast<std::size_t>(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
  void validate() const;
};

/// He-initialized weights with small random biases, fully determined by `seed`.
ConvLayer random_conv_layer(std::uint64_t seed, int out_channels = 64, int in_channels = 3);

inline constexpr std::uint32_t kBigwVersion = 1;

/// "BIGW", u32 version, then two tensors (kernel, bias), each as u32 rank,
/// rank x u32 dims, f32 little-endian row-major values.
void write_bigw(const std::filesystem::path& path, const ConvLayer& layer);
ConvLayer read_bigw(const std::filesystem::path& path);

/// Reads `path` when given and present; otherwise returns seeded random
/// weights with `random_fallback` set.
ConvLayer load_conv_layer(const std::optional<std::filesystem::path>& path, std::uint64_t seed);

/// Feature maps stored [channel][row][col].
struct FeatureMaps {
  int channels = 0, height = 0, width = 0;
  std::vector<double> data;

  double at(int ch, int r, int c) const {
    return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
};

/// Features for every output channel, or only `channels` (in that order) when nonempty.
FeatureMaps conv_features(const ConvLayer& layer, const Image& image, const std::vector<int>& channels = {});

/// Feature value of one output channel at one pixel.
double conv_feature_at(const ConvLayer& layer, const Image& image, int channel, int row, int col);

struct ChannelSelection {
  std::vector<int> channels;  // ascending accumulated loss, first top_k
  std::vector<double> losses; // accumulated per-channel loss, indexed by channel
  int top_k = 3;
};

nlohmann::json to_json(const ChannelSelection& s);
ChannelSelection channel_selection_from_json(const nlohmann::json& j);

/// Ranks channels by the summed per-channel feature MSE between observed and
/// reconstructed images and keeps the `top_k` smallest.
ChannelSelection select_channels(const ConvLayer& layer, const std::vector<std::pair<Image, Image>>& pairs,
                                 int top_k = 3);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      c_ += (sum_ - t) + x;
    } else {
      c_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

enum class NeuralForm { gaussian, literal };

struct LikelihoodConfig {
  double color_sigma = 1.0;
  double neural_scale = 0.05;
  bool neural = false;  // NP3 when true
  NeuralForm neural_form = NeuralForm::gaussian;

  void validate() const;
};

/// log of TruncNormal(xi; 0, sigma, -1, 1) at xi = 0 and its quadratic factor.
struct ColorTerm {
  double log_peak;   // per-element log-density at zero residual
  double inv_2var;   // 1 / (2 sigma^2)
  explicit ColorTerm(double sigma);
  double log_density(double residual) const { return log_peak - inv_2var * residual * residual; }
};

/// Sum over pixels and channels of the residual log-density.
double color_loglik(const Image& rendered, const Image& observed, double sigma);

/// -(1/scale) * sum over selected channels and pixels of the squared feature
/// difference (gaussian form), or the plain signed sum of F_D - F_R (literal form).
double neural_loglik(const ConvLayer& layer, const std::vector<int>& channels, const Image& rendered,
                     const Image& observed, double scale, NeuralForm form = NeuralForm::gaussian);

}  // namespace bigraph
