#include "bigraph/benchmark.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "bigraph/image.hpp"
#include "bigraph/raytracer.hpp"
#include "bigraph/scene_io.hpp"

namespace bigraph {

namespace fs = std::filesystem;

std::string_view to_string(LightingProfile p) {
  switch (p) {
    case LightingProfile::standard:
      return "standard";
    case LightingProfile::dark:
      return "dark";
    case LightingProfile::room:
      return "room";
  }
  return "standard";
}

LightingProfile lighting_profile_from_string(std::string_view name) {
  if (name == "standard") return LightingProfile::standard;
  if (name == "dark") return LightingProfile::dark;
  if (name == "room") return LightingProfile::room;
  throw std::invalid_argument("unknown lighting profile: " + std::string(name));
}

void DatasetSpec::validate() const {
  if (train_classes < 0 || test_classes < 0 || train_classes + test_classes < 1) {
    throw std::invalid_argument("dataset: need at least one class");
  }
  if (shots < 1) throw std::invalid_argument("dataset: shots must be >= 1");
  if (width < 8 || height < 8) throw std::invalid_argument("dataset: image must be at least 8x8");
  if (!(scale_sigma > 0.0)) throw std::invalid_argument("dataset: scale sigma must be > 0");
  if (pattern_size < 1) throw std::invalid_argument("dataset: pattern size must be >= 1");
}

nlohmann::json to_json(const DatasetSpec& s) {
  return {{"train_classes", s.train_classes},
          {"test_classes", s.test_classes},
          {"shots", s.shots},
          {"width", s.width},
          {"height", s.height},
          {"profile", std::string(to_string(s.profile))},
          {"scale_sigma", s.scale_sigma},
          {"shadows", s.shadows},
          {"pattern_size", s.pattern_size},
          {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j, DatasetSpec s) {
  s.train_classes = j.value("train_classes", s.train_classes);
  s.test_classes = j.value("test_classes", s.test_classes);
  s.shots = j.value("shots", s.shots);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  if (j.contains("profile")) s.profile = lighting_profile_from_string(j.at("profile").get<std::string>());
  s.scale_sigma = j.value("scale_sigma", s.scale_sigma);
  s.shadows = j.value("shadows", s.shadows);
  s.pattern_size = j.value("pattern_size", s.pattern_size);
  s.seed = j.value("seed", s.seed);
  return s;
}

std::span<const ColorPreset> clevr_colors() {
  static const std::array<ColorPreset, 8> colors = {{
      {"gray", {87.0 / 255.0, 87.0 / 255.0, 87.0 / 255.0}},
      {"red", {173.0 / 255.0, 35.0 / 255.0, 35.0 / 255.0}},
      {"blue", {42.0 / 255.0, 75.0 / 255.0, 215.0 / 255.0}},
      {"green", {29.0 / 255.0, 105.0 / 255.0, 20.0 / 255.0}},
      {"brown", {129.0 / 255.0, 74.0 / 255.0, 25.0 / 255.0}},
      {"purple", {129.0 / 255.0, 38.0 / 255.0, 192.0 / 255.0}},
      {"cyan", {41.0 / 255.0, 208.0 / 255.0, 208.0 / 255.0}},
      {"yellow", {255.0 / 255.0, 238.0 / 255.0, 51.0 / 255.0}},
  }};
  return colors;
}

Material clevr_material(std::string_view name, const Vec3d& color) {
  Material m;
  m.color = color;
  if (name == "rubber") {
    m.ambient = 0.3;
    m.diffuse = 0.7;
    m.specular = 0.1;
    m.shininess = 5.0;
  } else if (name == "metal") {
    m.ambient = 0.25;
    m.diffuse = 0.45;
    m.specular = 0.9;
    m.shininess = 40.0;
  } else {
    throw std::invalid_argument("unknown material preset: " + std::string(name));
  }
  return m;
}

nlohmann::json to_json(const Concept& c) {
  return {{"id", c.id},
          {"split", c.split},
          {"shape", std::string(to_string(c.shape))},
          {"color", c.color},
          {"material_name", c.material_name},
          {"material", to_json(c.material)},
          {"scale", to_json(c.scale)}};
}

Concept concept_from_json(const nlohmann::json& j) {
  Concept c;
  c.id = j.at("id").get<std::string>();
  c.split = j.at("split").get<std::string>();
  c.shape = shape_from_string(j.at("shape").get<std::string>());
  c.color = j.value("color", "");
  c.material_name = j.value("material_name", "");
  c.material = material_from_json(j.at("material"));
  c.scale = vec3_from_json(j.at("scale"));
  return c;
}

Scene dataset_globals(const DatasetSpec& spec) {
  spec.validate();
  Scene s = default_scene(spec.width, spec.height, 5, spec.pattern_size);
  for (auto& l : s.lights) l.intensity = {0.35, 0.35, 0.35};
  if (spec.profile == LightingProfile::dark) {
    for (auto& l : s.lights) l.intensity = l.intensity * 0.25;
  }
  s.shadows = spec.shadows;
  s.floor.color = {1.0, 1.0, 1.0};
  s.floor.ambient = 0.2;
  s.floor.diffuse = 0.5;
  Rng rng(derive_seed(spec.seed, 0x466C6F6FULL));
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  const double p1 = phase(rng), p2 = phase(rng), p3 = phase(rng);
  const int n = spec.pattern_size;
  Texture& tex = s.floor.pattern;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double u = (c + 0.5) / n, v = (r + 0.5) / n;
      if (spec.profile == LightingProfile::room) {
        // Wood-like stripes.
        const double t = 0.5 + 0.5 * std::sin(two_pi * (12.0 * v + 0.6 * std::sin(two_pi * (2.0 * u + p1))));
        const double g = 0.8 + 0.2 * t;
        tex.at(r, c, 0) = 0.62 * g;
        tex.at(r, c, 1) = 0.45 * g;
        tex.at(r, c, 2) = 0.30 * g;
      } else {
        const double g = 0.75 + 0.08 * std::sin(two_pi * (3.0 * u + p1)) * std::sin(two_pi * (2.0 * v + p2)) +
                         0.05 * std::sin(two_pi * (7.0 * u + 5.0 * v + p3));
        for (int ch = 0; ch < 3; ++ch) tex.at(r, c, ch) = g;
      }
    }
  }
  if (spec.profile == LightingProfile::room) {
    const Vec3d wall_color{0.85, 0.82, 0.75};
    s.walls.push_back({{0.0, 6.0, 0.0}, {0.0, -1.0, 0.0}, wall_color, 0.3, 0.6});
    s.walls.push_back({{-6.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, wall_color, 0.3, 0.6});
    s.walls.push_back({{6.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}, wall_color, 0.3, 0.6});
  }
  return s;
}

std::vector<std::string> Dataset::classes(std::string_view split) const {
  std::vector<std::string> out;
  for (const auto& c : concepts)
    if (c.split == split) out.push_back(c.id);
  return out;
}

std::vector<const DatasetImage*> Dataset::images_of(std::string_view split, std::string_view class_id) const {
  std::vector<const DatasetImage*> out;
  for (const auto& img : images)
    if (img.split == split && img.class_id == class_id) out.push_back(&img);
  std::sort(out.begin(), out.end(), [](const DatasetImage* a, const DatasetImage* b) { return a->shot < b->shot; });
  return out;
}

const DatasetImage& Dataset::image(std::string_view id) const {
  for (const auto& img : images)
    if (img.id == id) return img;
  throw std::out_of_range("dataset has no image " + std::string(id));
}

namespace {

std::string class_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%03d", index);
  return buf;
}

nlohmann::json image_meta(const DatasetImage& img, const Concept& c, bool shadows) {
  return {{"id", img.id},
          {"split", img.split},
          {"class", img.class_id},
          {"shot", img.shot},
          {"concept", to_json(c)},
          {"params", to_json(img.truth)},
          {"object", to_json(to_instance(img.truth))},
          {"shadows", shadows},
          {"globals", "globals.json"}};
}

}  // namespace

Scene image_scene(const Dataset& ds, const DatasetImage& img) {
  Scene s = ds.globals;
  s.objects = {to_instance(img.truth)};
  return s;
}

Dataset generate_dataset(const DatasetSpec& spec, const fs::path& root) {
  spec.validate();
  Dataset ds;
  ds.root = root;
  ds.spec = spec;
  ds.globals = dataset_globals(spec);
  const PriorSet pose_prior(prior_config_for(ds.globals, spec.scale_sigma));

  // Distinct (shape, color, material) combinations, reused only when exhausted.
  std::vector<std::array<int, 3>> combos;
  const auto colors = clevr_colors();
  for (int s = 0; s < kShapeCount; ++s)
    for (int c = 0; c < static_cast<int>(colors.size()); ++c)
      for (int m = 0; m < 2; ++m) combos.push_back({s, c, m});
  Rng rng(spec.seed);
  std::shuffle(combos.begin(), combos.end(), rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto scale_draw = [&] {
    const double z = std::clamp(normal(rng), -1.5, 1.5);
    return std::exp(pose_prior.config().scale_mu + spec.scale_sigma * z);
  };
  const int total = spec.train_classes + spec.test_classes;
  for (int i = 0; i < total; ++i) {
    const auto& combo = combos[static_cast<std::size_t>(i) % combos.size()];
    Concept c;
    c.split = i < spec.train_classes ? "train" : "test";
    c.id = class_name(i);
    c.shape = static_cast<ShapeClass>(combo[0]);
    c.color = colors[static_cast<std::size_t>(combo[1])].name;
    c.material_name = combo[2] == 0 ? "rubber" : "metal";
    c.material = clevr_material(c.material_name, colors[static_cast<std::size_t>(combo[1])].rgb);
    switch (c.shape) {
      case ShapeClass::sphere: {
        const double s = scale_draw();
        c.scale = {s, s, s};
        break;
      }
      case ShapeClass::cube:
        c.scale.x = scale_draw();
        c.scale.y = scale_draw();
        c.scale.z = scale_draw();
        break;
      case ShapeClass::cylinder: {
        const double r = scale_draw();
        c.scale = {r, r, scale_draw()};
        break;
      }
    }
    ds.concepts.push_back(c);
  }

  fs::create_directories(root);
  write_scene(root / "globals.json", ds.globals);
  nlohmann::json index = {{"format", "bigraph-dataset"}, {"version", 1}, {"spec", to_json(spec)}};
  index["concepts"] = nlohmann::json::array();
  index["images"] = nlohmann::json::array();
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uint64_t image_index = 0;
  for (const auto& c : ds.concepts) {
    index["concepts"].push_back(to_json(c));
    const fs::path dir = root / c.split / c.id;
    fs::create_directories(dir);
    for (int shot = 0; shot < spec.shots; ++shot) {
      Rng pose_rng(derive_seed(spec.seed, ++image_index));
      DatasetImage img;
      img.split = c.split;
      img.class_id = c.id;
      img.shot = shot;
      img.id = c.split + "/" + c.id + "/" + std::to_string(shot);
      img.image_path = dir / (std::to_string(shot) + ".png");
      img.truth.x = pose_prior.x_prior().sample(pose_rng);
      img.truth.y = pose_prior.y_prior().sample(pose_rng);
      img.truth.theta = angle(pose_rng);
      img.truth.scale = c.scale;
      img.truth.material = c.material;
      img.truth.kappa = soft_one_hot(c.shape);
      write_png(img.image_path, render(image_scene(ds, img)));
      write_json(dir / (std::to_string(shot) + ".json"), image_meta(img, c, spec.shadows));
      index["images"].push_back(img.id);
      ds.images.push_back(std::move(img));
    }
  }
  write_json(root / "dataset.json", index);
  return ds;
}

Dataset load_dataset(const fs::path& root) {
  const nlohmann::json index = read_json(root / "dataset.json");
  if (index.value("format", "") != "bigraph-dataset") throw IoError("not a dataset index: " + (root / "dataset.json").string());
  Dataset ds;
  ds.root = root;
  ds.spec = dataset_spec_from_json(index.at("spec"));
  ds.globals = read_scene(root / "globals.json");
  for (const auto& c : index.at("concepts")) ds.concepts.push_back(concept_from_json(c));
  for (const auto& id : index.at("images")) {
    const std::string sid = id.get<std::string>();
    const fs::path meta_path = root / (sid + ".json");
    const nlohmann::json meta = read_json(meta_path);
    DatasetImage img;
    img.id = sid;
    img.split = meta.at("split").get<std::string>();
    img.class_id = meta.at("class").get<std::string>();
    img.shot = meta.at("shot").get<int>();
    img.image_path = root / (sid + ".png");
    img.truth = object_params_from_json(meta.at("params"));
    ds.images.push_back(std::move(img));
  }
  return ds;
}

// --- inference ------------------------------------------------------------

Image prepare_observation(const Image& image, const BackgroundCache& cache) {
  if (image.channels() != 3) throw std::invalid_argument("observation must be RGB");
  return resize(image, cache.camera().height, cache.camera().width);
}

PosteriorSamples infer_image(const InferenceSetup& setup, const Image& observation) {
  auto om = std::make_shared<ObservationModel>(setup.cache, prepare_observation(observation, *setup.cache),
                                               setup.likelihood, setup.layer, setup.channels);
  const ObjectPosterior target(setup.prior, om);
  return rmh_sample(target, setup.rmh);
}

PosteriorCache::PosteriorCache(Compute compute) : compute_(std::move(compute)) {}

const ImagePosterior& PosteriorCache::get(const DatasetImage& img) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = entries_.find(img.id);
    if (it != entries_.end()) return *it->second;
  }
  auto entry = std::make_unique<ImagePosterior>(compute_(img));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = entries_.emplace(img.id, std::move(entry));
  return *it->second;
}

void PosteriorCache::precompute(std::span<const DatasetImage* const> images, int threads) {
  parallel_for(images.size(), threads, [&](std::size_t i) { get(*images[i]); });
}

std::size_t PosteriorCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

PosteriorCache::Compute posterior_compute(const InferenceSetup& setup) {
  return [setup](const DatasetImage& img) {
    const auto t0 = std::chrono::steady_clock::now();
    InferenceSetup s = setup;
    s.rmh.seed = derive_seed(setup.rmh.seed, fnv1a(img.id));
    const PosteriorSamples samples = infer_image(s, read_image(img.image_path));
    ImagePosterior out{ProtoProgram::build(samples, s.program, img.id), posterior_median(samples),
                       pose_median(samples), samples.acceptance, 0.0};
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };
}

// --- episodes -------------------------------------------------------------

void EpisodeConfig::validate() const {
  if (n_way < 1) throw std::invalid_argument("episodes: n-way must be >= 1");
  if (k_shot < 1) throw std::invalid_argument("episodes: k-shot must be >= 1");
  if (episodes < 1) throw std::invalid_argument("episodes: need at least one episode");
  if (queries_per_class < 0) throw std::invalid_argument("episodes: queries per class must be >= 0");
}

nlohmann::json to_json(const EpisodeSummary& s) {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : s.episodes) {
    eps.push_back({{"classes", e.classes},
                   {"support", e.support},
                   {"queries", e.queries},
                   {"labels", e.labels},
                   {"predictions", e.predictions},
                   {"accuracy", e.accuracy}});
  }
  return {{"accuracy", s.accuracy}, {"stderr", s.stderr_}, {"episodes", eps}};
}

std::vector<EpisodeResult> plan_episodes(const Dataset& ds, const EpisodeConfig& cfg) {
  cfg.validate();
  const auto classes = ds.classes(cfg.split);
  if (static_cast<int>(classes.size()) < cfg.n_way) {
    throw std::invalid_argument("episodes: split '" + cfg.split + "' has " + std::to_string(classes.size()) +
                                " classes, need " + std::to_string(cfg.n_way));
  }
  for (const auto& c : classes) {
    if (static_cast<int>(ds.images_of(cfg.split, c).size()) < cfg.k_shot + 1) {
      throw std::invalid_argument("episodes: class " + c + " has fewer than k-shot + 1 images");
    }
  }
  Rng rng(cfg.seed);
  std::vector<EpisodeResult> plan;
  for (int e = 0; e < cfg.episodes; ++e) {
    EpisodeResult ep;
    std::vector<std::string> pool = classes;
    std::shuffle(pool.begin(), pool.end(), rng);
    ep.classes.assign(pool.begin(), pool.begin() + cfg.n_way);
    for (int k = 0; k < cfg.n_way; ++k) {
      auto imgs = ds.images_of(cfg.split, ep.classes[static_cast<std::size_t>(k)]);
      std::shuffle(imgs.begin(), imgs.end(), rng);
      std::vector<std::string> support;
      for (int i = 0; i < cfg.k_shot; ++i) support.push_back(imgs[static_cast<std::size_t>(i)]->id);
      ep.support.push_back(std::move(support));
      int taken = 0;
      for (std::size_t i = static_cast<std::size_t>(cfg.k_shot); i < imgs.size(); ++i) {
        if (cfg.queries_per_class > 0 && taken >= cfg.queries_per_class) break;
        ep.queries.push_back(imgs[i]->id);
        ep.labels.push_back(k);
        ++taken;
      }
    }
    plan.push_back(std::move(ep));
  }
  return plan;
}

EpisodeSummary run_episodes(const Dataset& ds, const EpisodeConfig& cfg, PosteriorCache& posteriors) {
  std::vector<EpisodeResult> plan = plan_episodes(ds, cfg);
  std::set<std::string> needed;
  for (const auto& ep : plan) {
    for (const auto& s : ep.support) needed.insert(s.begin(), s.end());
    needed.insert(ep.queries.begin(), ep.queries.end());
  }
  std::vector<const DatasetImage*> images;
  for (const auto& id : needed) images.push_back(&ds.image(id));
  posteriors.precompute(images, 1);

  std::map<std::string, ProtoProgram> class_programs;
  std::map<std::pair<std::string, std::string>, double> distances;
  EpisodeSummary summary;
  for (std::size_t e = 0; e < plan.size(); ++e) {
    EpisodeResult& ep = plan[e];
    std::vector<std::string> keys;
    for (const auto& support : ep.support) {
      std::vector<std::string> sorted = support;
      std::sort(sorted.begin(), sorted.end());
      std::string key;
      for (const auto& s : sorted) key += s + ";";
      if (!class_programs.contains(key)) {
        std::vector<ProtoProgram> parts;
        for (const auto& s : support) parts.push_back(posteriors.get(ds.image(s)).program);
        class_programs.emplace(key, merge_all(parts));
      }
      keys.push_back(key);
    }
    if (cfg.shuffle_labels) {
      Rng shuffle_rng(derive_seed(cfg.seed, e));
      std::shuffle(ep.labels.begin(), ep.labels.end(), shuffle_rng);
    }
    int correct = 0;
    for (std::size_t q = 0; q < ep.queries.size(); ++q) {
      const ProtoProgram& query = posteriors.get(ds.image(ep.queries[q])).program;
      std::vector<double> d;
      for (const auto& key : keys) {
        const auto dkey = std::make_pair(ep.queries[q], key);
        auto it = distances.find(dkey);
        if (it == distances.end()) it = distances.emplace(dkey, distance(query, class_programs.at(key), cfg.kappa)).first;
        d.push_back(it->second);
      }
      const auto p = softmax_negative(d);
      const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      ep.predictions.push_back(pred);
      if (pred == ep.labels[q]) ++correct;
    }
    ep.accuracy = ep.queries.empty() ? 0.0 : static_cast<double>(correct) / ep.queries.size();
    summary.episodes.push_back(ep);
  }
  const double n = static_cast<double>(summary.episodes.size());
  double mean = 0.0;
  for (const auto& ep : summary.episodes) mean += ep.accuracy;
  mean /= n;
  double var = 0.0;
  for (const auto& ep : summary.episodes) var += (ep.accuracy - mean) * (ep.accuracy - mean);
  summary.accuracy = mean;
  summary.stderr_ = n > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  return summary;
}

// --- pose error -----------------------------------------------------------

PoseEstimate pose_of(const ObjectParams& p) {
  return {{p.x, p.y, p.scale.z}, p.theta, p.scale};
}

namespace {

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

}  // namespace

PosePosterior pose_median(const PosteriorSamples& samples) {
  const auto& names = object_dim_names();
  std::array<int, kObjectDims> idx{};
  for (std::size_t i = 0; i < kObjectDims; ++i) {
    idx[i] = samples.index_of(names[i]);
    if (idx[i] < 0) throw std::invalid_argument("pose median: missing coordinate " + names[i]);
  }
  struct Draw {
    double x, y, theta, sx, sy, sz;
    int shape;
  };
  std::vector<Draw> draws;
  std::array<int, kShapeCount> counts{};
  for (int c = 0; c < samples.chains; ++c) {
    for (int d = 0; d < samples.draws; ++d) {
      ObjectParams p;
      for (int k = 0; k < kShapeCount; ++k) {
        p.kappa[static_cast<std::size_t>(k)] = samples.at(c, d, idx[13 + static_cast<std::size_t>(k)]);
      }
      const int shape = static_cast<int>(p.shape());
      ++counts[static_cast<std::size_t>(shape)];
      draws.push_back({samples.at(c, d, idx[0]), samples.at(c, d, idx[1]), samples.at(c, d, idx[2]),
                       samples.at(c, d, idx[3]), samples.at(c, d, idx[4]), samples.at(c, d, idx[5]), shape});
    }
  }
  if (draws.empty()) throw std::invalid_argument("pose median: no draws");
  const int shape = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  const double period = static_cast<ShapeClass>(shape) == ShapeClass::cube ? std::numbers::pi / 2.0 : std::numbers::pi;
  const double k = 2.0 * std::numbers::pi / period;
  double cs = 0.0, sn = 0.0;
  for (const auto& d : draws) {
    if (d.shape != shape) continue;
    cs += std::cos(k * d.theta);
    sn += std::sin(k * d.theta);
  }
  const double center = std::atan2(sn, cs) / k;
  std::vector<double> xs, ys, thetas, sxs, sys, szs;
  for (auto d : draws) {
    if (d.shape != shape) continue;
    const long turns = std::lround((d.theta - center) / period);
    d.theta -= static_cast<double>(turns) * period;
    if (period < std::numbers::pi && turns % 2 != 0) std::swap(d.sx, d.sy);
    xs.push_back(d.x);
    ys.push_back(d.y);
    thetas.push_back(d.theta);
    sxs.push_back(d.sx);
    sys.push_back(d.sy);
    szs.push_back(d.sz);
  }
  PosePosterior out;
  out.shape = static_cast<ShapeClass>(shape);
  const double sz = median_of(szs);
  out.pose.translation = {median_of(xs), median_of(ys), sz};
  out.pose.rotation = median_of(thetas);
  out.pose.scale = {median_of(sxs), median_of(sys), sz};
  return out;
}

std::vector<Vec3d> surface_points(ShapeClass shape, int n) {
  if (n < 6) throw std::invalid_argument("surface_points: need at least 6 points");
  constexpr double pi = std::numbers::pi;
  std::vector<Vec3d> pts;
  switch (shape) {
    case ShapeClass::sphere: {
      const int n_lat = std::max(2, static_cast<int>(std::lround(std::sqrt(n / 2.0))));
      const int n_lon = std::max(3, static_cast<int>(std::lround(static_cast<double>(n) / n_lat)));
      for (int i = 0; i < n_lat; ++i) {
        const double lat = -pi / 2.0 + pi * (i + 0.5) / n_lat;
        for (int j = 0; j < n_lon; ++j) {
          const double lon = 2.0 * pi * (j + 0.5) / n_lon;
          pts.push_back({std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)});
        }
      }
      break;
    }
    case ShapeClass::cube: {
      const int g = std::max(2, static_cast<int>(std::lround(std::sqrt(n / 6.0))));
      for (int axis = 0; axis < 3; ++axis) {
        for (double side : {-1.0, 1.0}) {
          for (int a = 0; a < g; ++a) {
            for (int b = 0; b < g; ++b) {
              Vec3d p;
              p[axis] = side;
              p[(axis + 1) % 3] = -1.0 + 2.0 * (a + 0.5) / g;
              p[(axis + 2) % 3] = -1.0 + 2.0 * (b + 0.5) / g;
              pts.push_back(p);
            }
          }
        }
      }
      break;
    }
    case ShapeClass::cylinder: {
      // Side area 4*pi, caps 2*pi: two thirds of the points on the side.
      const double n_side = 2.0 * n / 3.0;
      const int n_h = std::max(2, static_cast<int>(std::lround(std::sqrt(n_side / pi))));
      const int n_a = std::max(3, static_cast<int>(std::lround(n_side / n_h)));
      for (int i = 0; i < n_h; ++i) {
        const double z = -1.0 + 2.0 * (i + 0.5) / n_h;
        for (int j = 0; j < n_a; ++j) {
          const double a = 2.0 * pi * (j + 0.5) / n_a;
          pts.push_back({std::cos(a), std::sin(a), z});
        }
      }
      const double n_cap = n / 6.0;
      const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(n_cap / pi))));
      for (double z : {-1.0, 1.0}) {
        for (int i = 0; i < rings; ++i) {
          const double r = (i + 0.5) / rings;
          const int m = std::max(1, static_cast<int>(std::lround(2.0 * pi * r * rings)));
          for (int j = 0; j < m; ++j) {
            const double a = 2.0 * pi * (j + 0.5) / m;
            pts.push_back({r * std::cos(a), r * std::sin(a), z});
          }
        }
      }
      break;
    }
  }
  return pts;
}

std::vector<Vec3d> transform_points(std::span<const Vec3d> points, const PoseEstimate& pose) {
  const double c = std::cos(pose.rotation), s = std::sin(pose.rotation);
  std::vector<Vec3d> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Vec3d q = hadamard(p, pose.scale);
    out.push_back(pose.translation + Vec3d{c * q.x - s * q.y, s * q.x + c * q.y, q.z});
  }
  return out;
}

NearestNeighborGrid::NearestNeighborGrid(std::vector<Vec3d> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("nearest neighbor grid: no points");
  Vec3d lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  cell_ = extent > 0.0 ? extent / std::max(1.0, std::cbrt(static_cast<double>(points_.size()))) : 1.0;
  origin_ = lo;
  nx_ = static_cast<int>((hi.x - lo.x) / cell_) + 1;
  ny_ = static_cast<int>((hi.y - lo.y) / cell_) + 1;
  nz_ = static_cast<int>((hi.z - lo.z) / cell_) + 1;
  const std::size_t cells = static_cast<std::size_t>(nx_) * ny_ * nz_;
  std::vector<std::uint32_t> cell_of(points_.size());
  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Vec3d d = (points_[i] - origin_) / cell_;
    const int ix = std::min(nx_ - 1, static_cast<int>(d.x));
    const int iy = std::min(ny_ - 1, static_cast<int>(d.y));
    const int iz = std::min(nz_ - 1, static_cast<int>(d.z));
    cell_of[i] = static_cast<std::uint32_t>((static_cast<std::size_t>(iz) * ny_ + iy) * nx_ + ix);
    ++cell_start_[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  cell_items_.resize(points_.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
}

double NearestNeighborGrid::nearest_distance(const Vec3d& q) const {
  const Vec3d d = (q - origin_) / cell_;
  const int cx = static_cast<int>(std::floor(d.x));
  const int cy = static_cast<int>(std::floor(d.y));
  const int cz = static_cast<int>(std::floor(d.z));
  const int max_ring = std::max({std::abs(cx), std::abs(cx - (nx_ - 1)), std::abs(cy), std::abs(cy - (ny_ - 1)),
                                 std::abs(cz), std::abs(cz - (nz_ - 1))});
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r <= max_ring; ++r) {
    const int x0 = std::max(cx - r, 0), x1 = std::min(cx + r, nx_ - 1);
    const int y0 = std::max(cy - r, 0), y1 = std::min(cy + r, ny_ - 1);
    const int z0 = std::max(cz - r, 0), z1 = std::min(cz + r, nz_ - 1);
    for (int z = z0; z <= z1; ++z) {
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (std::max({std::abs(x - cx), std::abs(y - cy), std::abs(z - cz)}) != r) continue;
          const std::size_t c = (static_cast<std::size_t>(z) * ny_ + y) * nx_ + x;
          for (std::uint32_t k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            best = std::min(best, norm(points_[cell_items_[k]] - q));
          }
        }
      }
    }
    // Every unvisited point lies at least r cells away along some axis.
    if (best <= r * cell_) break;
  }
  return best;
}

double adi_error(const PoseEstimate& estimate, const PoseEstimate& truth, ShapeClass shape, int n_points) {
  if (n_points < 100) throw std::invalid_argument("adi: need at least 100 model points");
  const auto model = surface_points(shape, n_points);
  const auto truth_pts = transform_points(model, truth);
  const NearestNeighborGrid grid(transform_points(model, estimate));
  double total = 0.0;
  for (const auto& p : truth_pts) total += grid.nearest_distance(p);
  return total / static_cast<double>(truth_pts.size());
}

nlohmann::json to_json(const AdiReport& r) {
  return {{"class_mean", r.class_mean}, {"per_shot", r.per_shot}, {"overall_mean", r.overall_mean}};
}

AdiReport adi_report(const Dataset& ds, std::string_view split, PosteriorCache& posteriors, int n_points) {
  AdiReport rep;
  std::vector<const DatasetImage*> images;
  for (const auto& img : ds.images)
    if (img.split == split) images.push_back(&img);
  posteriors.precompute(images, 1);
  for (const DatasetImage* img : images) {
    const PoseEstimate& est = posteriors.get(*img).pose.pose;
    rep.per_shot[img->class_id].push_back(adi_error(est, pose_of(img->truth), img->truth.shape(), n_points));
  }
  double total = 0.0;
  for (const auto& [cls, values] : rep.per_shot) {
    const double m = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    rep.class_mean[cls] = m;
    total += m;
  }
  rep.overall_mean = rep.per_shot.empty() ? 0.0 : total / static_cast<double>(rep.per_shot.size());
  return rep;
}

}  // namespace bigraph
