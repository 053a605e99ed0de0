#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigraph/generative_model.hpp"
#include "bigraph/likelihood.hpp"
#include "bigraph/mcmc.hpp"
#include "bigraph/protoprogram.hpp"
#include "bigraph/scene.hpp"

namespace bigraph {

enum class LightingProfile { standard, dark, room };

std::string_view to_string(LightingProfile p);
LightingProfile lighting_profile_from_string(std::string_view name);

struct DatasetSpec {
  int train_classes = 0;
  int test_classes = 5;
  int shots = 6;
  int width = 80;
  int height = 60;
  LightingProfile profile = LightingProfile::standard;
  double scale_sigma = 0.25;
  bool shadows = true;
  int pattern_size = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const DatasetSpec& s);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j, DatasetSpec base = {});

/// Named CLEVR color and material presets.
struct ColorPreset {
  const char* name;
  Vec3d rgb;
};
std::span<const ColorPreset> clevr_colors();
Material clevr_material(std::string_view name, const Vec3d& color);  // "rubber" or "metal"

/// One class: everything except the pose is fixed.
struct Concept {
  std::string id;
  std::string split;
  ShapeClass shape = ShapeClass::sphere;
  std::string color;
  std::string material_name;
  Material material;
  Vec3d scale{1.0, 1.0, 1.0};
};

nlohmann::json to_json(const Concept& c);
Concept concept_from_json(const nlohmann::json& j);

/// Camera, lights, floor and walls of a lighting profile.
Scene dataset_globals(const DatasetSpec& spec);

struct DatasetImage {
  std::string id;  // "<split>/<class>/<shot>"
  std::string split;
  std::string class_id;
  int shot = 0;
  std::filesystem::path image_path;
  ObjectParams truth;
};

struct Dataset {
  std::filesystem::path root;
  DatasetSpec spec;
  Scene globals;
  std::vector<Concept> concepts;
  std::vector<DatasetImage> images;

  std::vector<std::string> classes(std::string_view split) const;
  std::vector<const DatasetImage*> images_of(std::string_view split, std::string_view class_id) const;
  const DatasetImage& image(std::string_view id) const;
};

/// Writes <root>/<split>/<class>/<shot>.png and .json plus <root>/globals.json
/// and <root>/dataset.json.
Dataset generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

/// Scene of one stored image (globals plus the ground-truth object).
Scene image_scene(const Dataset& ds, const DatasetImage& img);

// --- inference over images ------------------------------------------------

struct InferenceSetup {
  std::shared_ptr<const BackgroundCache> cache;
  PriorSet prior;
  LikelihoodConfig likelihood;
  std::optional<ConvLayer> layer;
  std::vector<int> channels;
  RmhConfig rmh;
  ProgramConfig program;
};

/// Observation resized to the camera of `cache` when needed.
Image prepare_observation(const Image& image, const BackgroundCache& cache);

PosteriorSamples infer_image(const InferenceSetup& setup, const Image& observation);

struct PoseEstimate {
  Vec3d translation;
  double rotation = 0.0;
  Vec3d scale{1.0, 1.0, 1.0};
};

PoseEstimate pose_of(const ObjectParams& p);

/// Per-coordinate median over the draws whose argmax class is the most
/// frequent one, after folding rotations that leave that shape unchanged
/// (quarter turns with swapped x/y scales for the cube, half turns otherwise)
/// into one window centered on the circular mean.
struct PosePosterior {
  ShapeClass shape = ShapeClass::sphere;
  PoseEstimate pose;
};
PosePosterior pose_median(const PosteriorSamples& samples);

struct ImagePosterior {
  ProtoProgram program;
  ObjectParams median;
  PosePosterior pose;
  std::vector<double> acceptance;
  double seconds = 0.0;
};

/// Memoized per-image posteriors.
class PosteriorCache {
 public:
  using Compute = std::function<ImagePosterior(const DatasetImage&)>;
  explicit PosteriorCache(Compute compute);

  const ImagePosterior& get(const DatasetImage& img);
  void precompute(std::span<const DatasetImage* const> images, int threads);
  std::size_t size() const;

 private:
  Compute compute_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<ImagePosterior>> entries_;
};

/// Compute function running `infer_image` on the stored PNG with a seed derived from the image id.
PosteriorCache::Compute posterior_compute(const InferenceSetup& setup);

// --- episodes -------------------------------------------------------------

struct EpisodeConfig {
  int n_way = 5;
  int k_shot = 1;
  int episodes = 100;
  int queries_per_class = 0;  // 0: every image not used as support
  std::string split = "test";
  KappaMode kappa = KappaMode::relaxed;
  bool shuffle_labels = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpisodeResult {
  std::vector<std::string> classes;
  std::vector<std::vector<std::string>> support;  // per class
  std::vector<std::string> queries;
  std::vector<int> labels;
  std::vector<int> predictions;
  double accuracy = 0.0;
};

struct EpisodeSummary {
  double accuracy = 0.0;
  double stderr_ = 0.0;
  std::vector<EpisodeResult> episodes;
};

nlohmann::json to_json(const EpisodeSummary& s);

/// Episode plan only (classes, supports, queries); deterministic per seed.
std::vector<EpisodeResult> plan_episodes(const Dataset& ds, const EpisodeConfig& cfg);

EpisodeSummary run_episodes(const Dataset& ds, const EpisodeConfig& cfg, PosteriorCache& posteriors);

// --- pose error -----------------------------------------------------------

/// Deterministic points on the canonical (unit half-extent) surface:
/// latitude-longitude rings for the sphere, per-face grids for the cube,
/// side grid plus polar cap grids for the cylinder. Returns about `n` points.
std::vector<Vec3d> surface_points(ShapeClass shape, int n);
std::vector<Vec3d> transform_points(std::span<const Vec3d> points, const PoseEstimate& pose);

/// Uniform-grid nearest-neighbor search returning the same distances as a linear scan.
class NearestNeighborGrid {
 public:
  explicit NearestNeighborGrid(std::vector<Vec3d> points);
  double nearest_distance(const Vec3d& q) const;

 private:
  std::vector<Vec3d> points_;
  Vec3d origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::uint32_t> cell_start_;  // CSR offsets, size nx*ny*nz+1
  std::vector<std::uint32_t> cell_items_;
};

/// Mean over truth-posed model points of the distance to the nearest estimate-posed point.
double adi_error(const PoseEstimate& estimate, const PoseEstimate& truth, ShapeClass shape, int n_points = 1000);

struct AdiReport {
  std::map<std::string, double> class_mean;
  std::map<std::string, std::vector<double>> per_shot;
  double overall_mean = 0.0;
};

nlohmann::json to_json(const AdiReport& r);

AdiReport adi_report(const Dataset& ds, std::string_view split, PosteriorCache& posteriors, int n_points = 1000);

}  // namespace bigraph
