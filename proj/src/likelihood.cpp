#include "bigraph/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "bigraph/binary_io.hpp"
#include "bigraph/distributions.hpp"

namespace bigraph {

void ConvLayer::validate() const {
  if (out_channels <= 0 || in_channels <= 0) throw std::invalid_argument("conv layer: channel counts must be positive");
  if (kernel.size() != static_cast<std::size_t>(out_channels) * in_channels * 9) {
    throw std::invalid_argument("conv layer: kernel size does not match [out, in, 3, 3]");
  }
  if (bias.size() != static_cast<std::size_t>(out_channels)) throw std::invalid_argument("conv layer: bias size mismatch");
  for (double v : kernel)
    if (!std::isfinite(v)) throw std::invalid_argument("conv layer: non-finite kernel weight");
  for (double v : bias)
    if (!std::isfinite(v)) throw std::invalid_argument("conv layer: non-finite bias");
}

ConvLayer random_conv_layer(std::uint64_t seed, int out_channels, int in_channels) {
  ConvLayer layer;
  layer.out_channels = out_channels;
  layer.in_channels = in_channels;
  Rng rng(seed);
  std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (9.0 * in_channels)));
  std::normal_distribution<double> small(0.0, 0.05);
  // Values are rounded to f32 so a BIGW round trip is lossless.
  layer.kernel.resize(static_cast<std::size_t>(out_channels) * in_channels * 9);
  for (double& w : layer.kernel) w = static_cast<float>(he(rng));
  layer.bias.resize(static_cast<std::size_t>(out_channels));
  for (double& b : layer.bias) b = static_cast<float>(small(rng));
  layer.random_fallback = true;
  return layer;
}

namespace {

void write_tensor(std::ostream& os, const std::vector<std::uint32_t>& dims, const std::vector<double>& values) {
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) binary::write<std::uint32_t>(os, d);
  for (double v : values) binary::write<float>(os, static_cast<float>(v));
}

std::vector<double> read_tensor(std::istream& is, std::vector<std::uint32_t>& dims) {
  const auto rank = binary::read<std::uint32_t>(is);
  if (rank == 0 || rank > 8) throw IoError("BIGW: unsupported tensor rank " + std::to_string(rank));
  dims.resize(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = binary::read<std::uint32_t>(is);
    count *= d;
  }
  if (count > (1u << 26)) throw IoError("BIGW: tensor too large");
  std::vector<double> values(count);
  for (double& v : values) v = binary::read<float>(is);
  return values;
}

}  // namespace

void write_bigw(const std::filesystem::path& path, const ConvLayer& layer) {
  layer.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  binary::write_magic(os, "BIGW");
  binary::write<std::uint32_t>(os, kBigwVersion);
  write_tensor(os,
               {static_cast<std::uint32_t>(layer.out_channels), static_cast<std::uint32_t>(layer.in_channels), 3u, 3u},
               layer.kernel);
  write_tensor(os, {static_cast<std::uint32_t>(layer.out_channels)}, layer.bias);
  if (!os) throw IoError("write failed: " + path.string());
}

ConvLayer read_bigw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  binary::expect_magic(is, "BIGW");
  const auto version = binary::read<std::uint32_t>(is);
  if (version != kBigwVersion) throw IoError("unsupported BIGW version " + std::to_string(version));
  std::vector<std::uint32_t> kdims, bdims;
  ConvLayer layer;
  layer.kernel = read_tensor(is, kdims);
  layer.bias = read_tensor(is, bdims);
  if (kdims.size() != 4 || kdims[2] != 3 || kdims[3] != 3) throw IoError("BIGW: kernel must have shape [out, in, 3, 3]");
  if (bdims.size() != 1 || bdims[0] != kdims[0]) throw IoError("BIGW: bias must have shape [out]");
  layer.out_channels = static_cast<int>(kdims[0]);
  layer.in_channels = static_cast<int>(kdims[1]);
  try {
    layer.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("BIGW: ") + e.what());
  }
  return layer;
}

ConvLayer load_conv_layer(const std::optional<std::filesystem::path>& path, std::uint64_t seed) {
  if (path && std::filesystem::exists(*path)) return read_bigw(*path);
  return random_conv_layer(seed);
}

double conv_feature_at(const ConvLayer& layer, const Image& image, int channel, int row, int col) {
  double acc = layer.bias[static_cast<std::size_t>(channel)];
  for (int ky = 0; ky < 3; ++ky) {
    const int r = row + ky - 1;
    if (r < 0 || r >= image.height()) continue;
    for (int kx = 0; kx < 3; ++kx) {
      const int c = col + kx - 1;
      if (c < 0 || c >= image.width()) continue;
      for (int i = 0; i < layer.in_channels; ++i) acc += layer.weight(channel, i, ky, kx) * image.at(r, c, i);
    }
  }
  return acc > 0.0 ? acc : 0.0;
}

FeatureMaps conv_features(const ConvLayer& layer, const Image& image, const std::vector<int>& channels) {
  if (image.channels() != layer.in_channels) throw std::invalid_argument("conv_features: image channel count mismatch");
  std::vector<int> chans = channels;
  if (chans.empty()) {
    chans.resize(static_cast<std::size_t>(layer.out_channels));
    std::iota(chans.begin(), chans.end(), 0);
  }
  FeatureMaps f;
  f.channels = static_cast<int>(chans.size());
  f.height = image.height();
  f.width = image.width();
  f.data.resize(static_cast<std::size_t>(f.channels) * f.height * f.width);
  for (std::size_t k = 0; k < chans.size(); ++k) {
    const int ch = chans[k];
    if (ch < 0 || ch >= layer.out_channels) throw std::out_of_range("conv_features: channel index out of range");
    for (int r = 0; r < f.height; ++r)
      for (int c = 0; c < f.width; ++c)
        f.data[(k * static_cast<std::size_t>(f.height) + r) * f.width + c] = conv_feature_at(layer, image, ch, r, c);
  }
  return f;
}

nlohmann::json to_json(const ChannelSelection& s) {
  return {{"channels", s.channels}, {"losses", s.losses}, {"top_k", s.top_k}};
}

ChannelSelection channel_selection_from_json(const nlohmann::json& j) {
  ChannelSelection s;
  s.channels = j.at("channels").get<std::vector<int>>();
  s.losses = j.value("losses", std::vector<double>{});
  s.top_k = j.value("top_k", static_cast<int>(s.channels.size()));
  return s;
}

ChannelSelection select_channels(const ConvLayer& layer, const std::vector<std::pair<Image, Image>>& pairs, int top_k) {
  if (pairs.empty()) throw std::invalid_argument("select_channels: no image pairs");
  if (top_k < 1 || top_k > layer.out_channels) throw std::invalid_argument("select_channels: top_k out of range");
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(layer.out_channels));
  for (const auto& [observed, reconstructed] : pairs) {
    if (!observed.same_shape(reconstructed)) throw std::invalid_argument("select_channels: pair shapes differ");
    const FeatureMaps fd = conv_features(layer, observed);
    const FeatureMaps fr = conv_features(layer, reconstructed);
    const std::size_t n = static_cast<std::size_t>(fd.height) * fd.width;
    for (int m = 0; m < layer.out_channels; ++m) {
      CompensatedSum mse;
      for (std::size_t p = 0; p < n; ++p) {
        const double d = fd.data[m * n + p] - fr.data[m * n + p];
        mse.add(d * d);
      }
      acc[static_cast<std::size_t>(m)].add(mse.value() / static_cast<double>(n));
    }
  }
  ChannelSelection s;
  s.top_k = top_k;
  for (const auto& a : acc) s.losses.push_back(a.value());
  std::vector<int> order(static_cast<std::size_t>(layer.out_channels));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return s.losses[static_cast<std::size_t>(a)] < s.losses[static_cast<std::size_t>(b)];
  });
  s.channels.assign(order.begin(), order.begin() + top_k);
  return s;
}

void LikelihoodConfig::validate() const {
  if (!(color_sigma > 0.0)) throw std::invalid_argument("likelihood: color sigma must be > 0");
  if (!(neural_scale > 0.0)) throw std::invalid_argument("likelihood: neural scale must be > 0");
}

ColorTerm::ColorTerm(double sigma) {
  const TruncNormal tn(0.0, sigma, -1.0, 1.0);
  log_peak = tn.log_pdf(0.0);
  inv_2var = 0.5 / (sigma * sigma);
}

double color_loglik(const Image& rendered, const Image& observed, double sigma) {
  if (!rendered.same_shape(observed)) throw std::invalid_argument("color_loglik: image shapes differ");
  const ColorTerm term(sigma);
  CompensatedSum sq;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered.data()[i] - observed.data()[i];
    sq.add(d * d);
  }
  return static_cast<double>(rendered.size()) * term.log_peak - term.inv_2var * sq.value();
}

double neural_loglik(const ConvLayer& layer, const std::vector<int>& channels, const Image& rendered,
                     const Image& observed, double scale, NeuralForm form) {
  if (!rendered.same_shape(observed)) throw std::invalid_argument("neural_loglik: image shapes differ");
  const FeatureMaps fr = conv_features(layer, rendered, channels);
  const FeatureMaps fd = conv_features(layer, observed, channels);
  CompensatedSum acc;
  for (std::size_t i = 0; i < fr.data.size(); ++i) {
    const double d = fd.data[i] - fr.data[i];
    acc.add(form == NeuralForm::gaussian ? d * d : d);
  }
  return form == NeuralForm::gaussian ? -acc.value() / scale : acc.value();
}

}  // namespace bigraph
