#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bigraph/benchmark.hpp"
#include "bigraph/image.hpp"
#include "bigraph/raytracer.hpp"
#include "bigraph/scene_io.hpp"
#include "bigraph/scene_opt.hpp"
#include "bigraph/version.hpp"

using namespace bigraph;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad input detected before any work starts; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "[bigraph] " << msg << '\n'; }

struct Global {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config;
};

int resolved_threads(int threads) {
  return threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_image(const fs::path& path, const Image& img) {
  ensure_parent(path);
  if (path.extension() == ".bigi") {
    write_bigi(path, img);
  } else {
    write_png(path, img);
  }
}

// --- config file ---------------------------------------------------------

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Fills options not given on the command line from `section`; flags win.
void apply_section(CLI::App& app, const json& section, const std::vector<std::string>& skip) {
  for (const auto& [key, value] : section.items()) {
    if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("config: unknown key '" + key + "' for " + app.get_name());
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(scalar_text(v));
    } else {
      opt->add_result(scalar_text(value));
    }
    opt->run_callback();
  }
}

json option_value(const CLI::Option* opt) {
  std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
  if (opt->get_type_size() == 0) return opt->count() > 0 && vals.back() != "false";  // flag
  if (opt->count() == 0) {
    if (opt->get_default_str().empty()) return nullptr;
    vals = {opt->get_default_str()};
  }
  auto parse = [](const std::string& s) -> json {
    const json j = json::parse(s, nullptr, false);
    return (!j.is_discarded() && (j.is_number() || j.is_boolean())) ? j : json(s);
  };
  if (opt->get_expected_max() > 1) {
    json arr = json::array();
    for (const auto& v : vals) {
      // Defaults of vector options render as "[a,b]".
      if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
        std::stringstream ss(v.substr(1, v.size() - 2));
        for (std::string item; std::getline(ss, item, ',');) arr.push_back(parse(item));
      } else {
        arr.push_back(parse(v));
      }
    }
    return arr;
  }
  return parse(vals.back());
}

json resolved_config(const CLI::App& sub, const CLI::App& main) {
  json cfg;
  for (const CLI::App* app : {&main, &sub}) {
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "version" || name == "config") continue;
      cfg[name] = option_value(opt);
    }
  }
  cfg["command"] = sub.get_name();
  cfg["version"] = std::string(kLibraryVersion);
  return cfg;
}

// --- shared inference options ----------------------------------------------

struct InferOpts {
  std::string scene;
  std::string priors;
  std::string mode = "p3";
  std::string weights;
  std::string channels;
  double sigma = 1.0;
  double neural_scale = 0.05;
  std::string neural_form = "gaussian";
  double scale_sigma = 0.25;
  int chains = 4;
  int draws = 3000;
  int burn_in = 300;
  int init_candidates = 100;
  int tuning_rounds = 10;
  int pilot_steps = 500;
  double initial_scale = 0.05;
  std::size_t max_samples = 1000;
};

void add_infer_options(CLI::App* app, InferOpts& o, bool scene_required) {
  auto* scene = app->add_option("--scene", o.scene, "Scene JSON with camera, lights and floor (objects ignored)");
  if (scene_required) scene->required()->check(CLI::ExistingFile);
  app->add_option("--priors", o.priors, "Prior JSON (default: built-in material mixtures)")->check(CLI::ExistingFile);
  app->add_option("--mode", o.mode, "Likelihood: p3 (color) or np3 (color + features)")
      ->check(CLI::IsMember({"p3", "np3"}));
  app->add_option("--weights", o.weights, "BIGW feature weights (np3; seeded random when absent)");
  app->add_option("--channels", o.channels, "Channel selection JSON (required for np3)")->check(CLI::ExistingFile);
  app->add_option("--sigma", o.sigma, "Color noise sigma")->check(CLI::PositiveNumber);
  app->add_option("--neural-scale", o.neural_scale, "Feature term scale")->check(CLI::PositiveNumber);
  app->add_option("--neural-form", o.neural_form, "Feature term form")->check(CLI::IsMember({"gaussian", "literal"}));
  app->add_option("--scale-sigma", o.scale_sigma, "Log-scale prior sigma when --priors is absent")
      ->check(CLI::PositiveNumber);
  app->add_option("--chains", o.chains, "MCMC chains")->check(CLI::PositiveNumber);
  app->add_option("--draws", o.draws, "Kept draws per chain")->check(CLI::PositiveNumber);
  app->add_option("--burn-in", o.burn_in, "Discarded draws per chain")->check(CLI::NonNegativeNumber);
  app->add_option("--init-candidates", o.init_candidates, "Prior draws scored per chain start")
      ->check(CLI::PositiveNumber);
  app->add_option("--tuning-rounds", o.tuning_rounds, "Proposal tuning rounds (0 disables)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--pilot-steps", o.pilot_steps, "Steps per tuning round")->check(CLI::PositiveNumber);
  app->add_option("--initial-scale", o.initial_scale, "Initial proposal scale")->check(CLI::PositiveNumber);
  app->add_option("--max-samples", o.max_samples, "Draws kept per program coordinate (0: all)");
}

InferenceSetup build_setup(const InferOpts& o, const Global& g, const Scene* fallback_globals) {
  Scene globals;
  if (!o.scene.empty()) {
    globals = read_scene(o.scene);
  } else if (fallback_globals != nullptr) {
    globals = *fallback_globals;
  } else {
    throw UsageError("--scene is required");
  }
  globals.objects.clear();
  globals.shadows = false;

  InferenceSetup s{std::make_shared<const BackgroundCache>(globals),
                   o.priors.empty() ? PriorSet(prior_config_for(globals, o.scale_sigma))
                                    : prior_set_from_json(read_json(o.priors)),
                   LikelihoodConfig{},
                   std::nullopt,
                   {},
                   RmhConfig{},
                   ProgramConfig{o.max_samples}};
  s.likelihood.color_sigma = o.sigma;
  s.likelihood.neural_scale = o.neural_scale;
  s.likelihood.neural = o.mode == "np3";
  s.likelihood.neural_form = o.neural_form == "literal" ? NeuralForm::literal : NeuralForm::gaussian;
  s.likelihood.validate();
  if (s.likelihood.neural) {
    if (o.channels.empty()) throw UsageError("np3 needs --channels (run select-channels first)");
    const ChannelSelection sel = channel_selection_from_json(read_json(o.channels));
    const std::uint64_t weight_seed = read_json(o.channels).value("weight_seed", g.seed);
    s.layer = load_conv_layer(o.weights.empty() ? std::nullopt : std::optional<fs::path>(o.weights), weight_seed);
    if (s.layer->random_fallback) log("using seeded random feature weights");
    s.channels = sel.channels;
    for (int c : s.channels)
      if (c < 0 || c >= s.layer->out_channels) throw UsageError("channel index out of range for the weights");
  }
  s.rmh.chains = o.chains;
  s.rmh.draws = o.draws;
  s.rmh.burn_in = o.burn_in;
  s.rmh.init_candidates = o.init_candidates;
  s.rmh.tune = o.tuning_rounds > 0;
  s.rmh.tuning_rounds = std::max(o.tuning_rounds, 1);
  s.rmh.pilot_steps = o.pilot_steps;
  s.rmh.initial_scale = o.initial_scale;
  s.rmh.seed = g.seed;
  s.rmh.threads = g.threads;
  s.rmh.validate();
  return s;
}

std::vector<fs::path> images_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext == ".png" || ext == ".bigi") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetImage loose_image(const std::string& id, const fs::path& path) {
  DatasetImage img;
  img.id = id;
  img.image_path = path;
  return img;
}

// --- subcommands -------------------------------------------------------------

struct GenOpts {
  std::string out;
  DatasetSpec spec;
  std::string profile = "standard";
  bool no_shadows = false;
};

int run_gen_dataset(const GenOpts& o, const Global& g) {
  DatasetSpec spec = o.spec;
  spec.profile = lighting_profile_from_string(o.profile);
  spec.shadows = !o.no_shadows;
  spec.seed = g.seed;
  spec.validate();
  log("generating dataset in " + o.out);
  const Dataset ds = generate_dataset(spec, o.out);
  log("wrote " + std::to_string(ds.images.size()) + " images");
  return 0;
}

struct RenderOpts {
  std::string scene;
  std::string out;
  bool no_shadows = false;
  int prior_draws = 0;
  std::string priors;
  double scale_sigma = 0.25;
  int columns = 5;
};

int run_render(const RenderOpts& o, const Global& g) {
  Scene s = read_scene(o.scene);
  if (o.no_shadows) s.shadows = false;
  validate(s);
  if (o.prior_draws > 0) {
    // Contact sheet of prior-predictive renders over the scene's globals.
    s.objects.clear();
    const BackgroundCache cache(s);
    const PriorSet prior =
        o.priors.empty() ? PriorSet(prior_config_for(s, o.scale_sigma)) : prior_set_from_json(read_json(o.priors));
    std::vector<Image> imgs;
    for (auto& d : sample_prior_predictive(prior, cache, o.prior_draws, g.seed)) imgs.push_back(std::move(d.image));
    write_image(o.out, contact_sheet(imgs, o.columns));
  } else {
    write_image(o.out, render(s));
  }
  log("wrote " + o.out);
  return 0;
}

struct OptimizeOpts {
  std::string dataset;
  std::string out;
  std::string loss_csv;
  std::string priors_out;
  std::string split;
  int max_images = 0;
  SceneOptConfig cfg;
  int lights = 5;
  int pattern_size = 200;
  double scale_sigma = 0.25;
};

int run_optimize_scene(const OptimizeOpts& o, const Global& g, const json& config) {
  o.cfg.validate();
  const Dataset ds = load_dataset(o.dataset);
  std::string split = o.split;
  if (split.empty()) split = ds.classes("train").empty() ? "" : "train";
  std::vector<SceneOptTarget> targets;
  for (const auto& img : ds.images) {
    if (!split.empty() && img.split != split) continue;
    if (o.max_images > 0 && static_cast<int>(targets.size()) >= o.max_images) break;
    targets.push_back({read_image(img.image_path), {to_instance(img.truth)}});
  }
  if (targets.empty()) throw UsageError("no images in split '" + split + "'");

  const Camera& cam = ds.globals.camera;
  Scene init = default_scene(cam.width, cam.height, o.lights, o.pattern_size);
  init.camera = cam;
  init.walls = ds.globals.walls;
  init.shadows = ds.globals.shadows;
  log("optimizing over " + std::to_string(targets.size()) + " images");
  const auto t0 = std::chrono::steady_clock::now();
  const OptimizedScene result = optimize_scene(targets, init, Material{}, o.cfg, [](int epoch, double loss) {
    log("epoch " + std::to_string(epoch) + " mean loss " + std::to_string(loss));
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json scene = to_json(result.globals);
  scene["metadata"] = {{"config", config}, {"final_loss", result.final_loss}};
  ensure_parent(o.out);
  write_json(o.out, scene);

  const fs::path csv_path = o.loss_csv.empty() ? sibling(o.out, ".loss.csv") : fs::path(o.loss_csv);
  std::ofstream csv(csv_path);
  csv << "epoch,mean_loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) csv << e << ',' << result.epoch_loss[e] << '\n';

  std::vector<Material> mats;
  for (const auto& per_target : result.materials) mats.insert(mats.end(), per_target.begin(), per_target.end());
  const PriorSet prior(prior_config_for(result.globals, o.scale_sigma), fit_material_priors(mats, g.seed));
  json pj = to_json(prior);
  pj["metadata"] = {{"config", config}, {"materials", mats.size()}};
  const fs::path priors_path = o.priors_out.empty() ? sibling(o.out, ".priors.json") : fs::path(o.priors_out);
  write_json(priors_path, pj);
  log("wrote " + o.out + ", " + csv_path.string() + " and " + priors_path.string() + " after " +
      std::to_string(seconds) + " s");
  return 0;
}

struct SelectOpts {
  std::string dataset;
  std::string scene;
  std::string weights;
  std::string out;
  std::string split;
  int top_k = 3;
  int max_images = 0;
};

int run_select_channels(const SelectOpts& o, const Global& g, const json& config) {
  const Dataset ds = load_dataset(o.dataset);
  Scene globals = o.scene.empty() ? ds.globals : read_scene(o.scene);
  globals.objects.clear();
  const ConvLayer layer =
      load_conv_layer(o.weights.empty() ? std::nullopt : std::optional<fs::path>(o.weights), g.seed);
  if (layer.random_fallback) log("using seeded random feature weights");
  std::string split = o.split;
  if (split.empty()) split = ds.classes("train").empty() ? "" : "train";
  std::vector<std::pair<Image, Image>> pairs;
  for (const auto& img : ds.images) {
    if (!split.empty() && img.split != split) continue;
    if (o.max_images > 0 && static_cast<int>(pairs.size()) >= o.max_images) break;
    Scene s = globals;
    s.objects.push_back(to_instance(img.truth));
    Image rendered = render(s);
    pairs.emplace_back(resize(read_image(img.image_path), rendered.height(), rendered.width()), std::move(rendered));
  }
  if (pairs.empty()) throw UsageError("no images in split '" + split + "'");
  const ChannelSelection sel = select_channels(layer, pairs, o.top_k);
  json j = to_json(sel);
  j["random_fallback"] = layer.random_fallback;
  j["weight_seed"] = g.seed;
  j["metadata"] = {{"config", config}, {"pairs", pairs.size()}};
  ensure_parent(o.out);
  write_json(o.out, j);
  std::ostringstream msg;
  msg << "selected channels";
  for (int c : sel.channels) msg << ' ' << c;
  log(msg.str());
  return 0;
}

json diagnostics_json(const PosteriorSamples& s) {
  const Diagnostics d = diagnostics(s);
  json dims = json::object();
  for (int k = 0; k < s.dim; ++k) {
    json e = {{"ess", d.ess[static_cast<std::size_t>(k)]}};
    if (!d.rhat.empty()) e["rhat"] = d.rhat[static_cast<std::size_t>(k)];
    dims[s.names[static_cast<std::size_t>(k)]] = e;
  }
  return {{"acceptance", s.acceptance},
          {"scales", s.scales},
          {"tuning_converged", s.tuning_converged},
          {"dims", dims}};
}

json pose_json(const PosePosterior& p) {
  return {{"shape", std::string(to_string(p.shape))},
          {"translation", {p.pose.translation.x, p.pose.translation.y, p.pose.translation.z}},
          {"rotation", p.pose.rotation},
          {"scale", {p.pose.scale.x, p.pose.scale.y, p.pose.scale.z}}};
}

struct InferCmd {
  InferOpts infer;
  std::string image;
  std::string out;
  std::string program_out;
};

int run_infer(const InferCmd& o, const Global& g, const json& config) {
  const InferenceSetup setup = build_setup(o.infer, g, nullptr);
  log("sampling " + std::to_string(setup.rmh.chains) + " chains x " + std::to_string(setup.rmh.draws) + " draws");
  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorSamples samples = infer_image(setup, read_image(o.image));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ensure_parent(o.out);
  write_bigp(o.out, samples);
  json side = {{"config", config},
               {"diagnostics", diagnostics_json(samples)},
               {"median", to_json(posterior_median(samples))},
               {"pose", pose_json(pose_median(samples))}};
  write_json(sibling(o.out, ".json"), side);
  if (!o.program_out.empty()) {
    write_json(o.program_out, to_json(ProtoProgram::build(samples, setup.program, o.image)));
  }
  log("wrote " + o.out + " in " + std::to_string(seconds) + " s");
  return 0;
}

struct ClassifyCmd {
  InferOpts infer;
  std::string support;
  std::vector<std::string> queries;
  std::string out;
  std::string kappa = "relaxed";
  int shots = 0;
};

int run_classify(const ClassifyCmd& o, const Global& g, const json& config) {
  const InferenceSetup setup = build_setup(o.infer, g, nullptr);
  std::vector<std::string> classes;
  std::vector<DatasetImage> images;
  std::map<std::string, std::vector<std::string>> support_ids;
  for (const auto& e : fs::directory_iterator(o.support))
    if (e.is_directory()) classes.push_back(e.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw UsageError("support directory has no class subdirectories");
  for (const auto& cls : classes) {
    auto files = images_in(fs::path(o.support) / cls);
    if (o.shots > 0 && static_cast<int>(files.size()) > o.shots) files.resize(static_cast<std::size_t>(o.shots));
    if (files.empty()) throw UsageError("class " + cls + " has no support images");
    for (const auto& f : files) {
      const std::string id = "support/" + cls + "/" + f.stem().string();
      images.push_back(loose_image(id, f));
      support_ids[cls].push_back(id);
    }
  }
  std::vector<std::string> query_ids;
  for (const auto& q : o.queries) {
    const fs::path qp(q);
    if (fs::is_directory(qp)) {
      for (const auto& f : images_in(qp)) {
        fs::path rel = fs::relative(f, qp);
        rel.replace_extension();
        query_ids.push_back(rel.generic_string());
        images.push_back(loose_image("query/" + query_ids.back(), f));
      }
    } else if (fs::is_regular_file(qp)) {
      query_ids.push_back((qp.parent_path().filename() / qp.stem()).generic_string());
      images.push_back(loose_image("query/" + query_ids.back(), qp));
    } else {
      throw UsageError("query path not found: " + q);
    }
  }
  if (query_ids.empty()) throw UsageError("no query images");

  InferenceSetup inner = setup;
  const int threads = resolved_threads(g.threads);
  if (threads > 1) inner.rmh.threads = 1;  // parallel over images instead of chains
  PosteriorCache cache(posterior_compute(inner));
  std::vector<const DatasetImage*> ptrs;
  for (const auto& img : images) ptrs.push_back(&img);
  log("inferring " + std::to_string(images.size()) + " images");
  cache.precompute(ptrs, threads);

  auto find = [&](const std::string& id) -> const DatasetImage& {
    return *std::find_if(images.begin(), images.end(), [&](const DatasetImage& d) { return d.id == id; });
  };
  std::vector<ProtoProgram> programs;
  for (const auto& cls : classes) {
    std::vector<ProtoProgram> shots;
    for (const auto& id : support_ids[cls]) shots.push_back(cache.get(find(id)).program);
    programs.push_back(merge_all(shots));
  }
  const KappaMode mode = o.kappa == "discrete" ? KappaMode::discrete : KappaMode::relaxed;
  ensure_parent(o.out);
  std::ofstream csv(o.out);
  csv << "query_id,predicted_class";
  for (const auto& cls : classes) csv << ",p_" << cls;
  csv << '\n' << std::setprecision(10);
  for (const auto& qid : query_ids) {
    const auto p = classify(cache.get(find("query/" + qid)).program, programs, mode);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    csv << qid << ',' << classes[best];
    for (double v : p) csv << ',' << v;
    csv << '\n';
  }
  write_json(sibling(o.out, ".json"), {{"config", config}, {"classes", classes}, {"support", support_ids}});
  log("wrote " + o.out);
  return 0;
}

struct EvaluateCmd {
  InferOpts infer;
  std::string dataset;
  std::string report;
  std::string split = "test";
  std::string kappa = "relaxed";
  int n_way = 5;
  std::vector<int> k_shots{1};
  int episodes = 100;
  int queries_per_class = 0;
  int adi_points = 1000;
  bool no_adi = false;
};

int run_evaluate(const EvaluateCmd& o, const Global& g, const json& config) {
  const Dataset ds = load_dataset(o.dataset);
  InferenceSetup setup = build_setup(o.infer, g, &ds.globals);
  const int threads = resolved_threads(g.threads);
  if (threads > 1) setup.rmh.threads = 1;
  PosteriorCache cache(posterior_compute(setup));
  std::vector<const DatasetImage*> images;
  for (const auto& img : ds.images)
    if (img.split == o.split) images.push_back(&img);
  if (images.empty()) throw UsageError("no images in split '" + o.split + "'");
  log("inferring " + std::to_string(images.size()) + " images");
  const auto t0 = std::chrono::steady_clock::now();
  cache.precompute(images, threads);

  json accuracy = json::array();
  for (int k : o.k_shots) {
    EpisodeConfig ec;
    ec.n_way = o.n_way;
    ec.k_shot = k;
    ec.episodes = o.episodes;
    ec.queries_per_class = o.queries_per_class;
    ec.split = o.split;
    ec.kappa = o.kappa == "discrete" ? KappaMode::discrete : KappaMode::relaxed;
    ec.seed = g.seed;
    const EpisodeSummary sum = run_episodes(ds, ec, cache);
    log(std::to_string(o.n_way) + "-way " + std::to_string(k) + "-shot accuracy " + std::to_string(sum.accuracy));
    accuracy.push_back({{"n_way", o.n_way},
                        {"k_shot", k},
                        {"mode", o.infer.mode},
                        {"kappa", o.kappa},
                        {"episodes", o.episodes},
                        {"accuracy", sum.accuracy},
                        {"stderr", sum.stderr_}});
  }
  json report = {{"config", config}, {"accuracy", accuracy}};
  if (!o.no_adi) {
    const AdiReport adi = adi_report(ds, o.split, cache, o.adi_points);
    report["adi"] = to_json(adi);
    log("mean ADI " + std::to_string(adi.overall_mean));
  }
  json per_image = json::array();
  for (const auto* img : images) {
    const ImagePosterior& p = cache.get(*img);
    per_image.push_back({{"id", img->id},
                         {"acceptance", p.acceptance},
                         {"shape_truth", std::string(to_string(img->truth.shape()))},
                         {"pose", pose_json(p.pose)}});
  }
  report["images"] = per_image;
  ensure_parent(o.report);
  write_json(o.report, report);
  log("wrote " + o.report + " after " +
      std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
  return 0;
}

struct AdiCmd {
  std::string posterior;
  std::string truth;
  std::string out;
  int points = 1000;
};

int run_adi(const AdiCmd& o, const json& config) {
  const PosteriorSamples samples = read_bigp(o.posterior);
  const json meta = read_json(o.truth);
  const ObjectParams truth = object_params_from_json(meta.contains("params") ? meta.at("params") : meta);
  const PosePosterior est = pose_median(samples);
  const double err = adi_error(est.pose, pose_of(truth), truth.shape(), o.points);
  ensure_parent(o.out);
  write_json(o.out, {{"config", config},
                     {"adi", err},
                     {"truth_shape", std::string(to_string(truth.shape()))},
                     {"estimate", pose_json(est)}});
  log("ADI " + std::to_string(err));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inverse graphics for few-shot concept learning"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version",
                       "bigraph " + std::string(kLibraryVersion) + " (BIGW v" + std::to_string(kBigwVersion) +
                           ", BIGP v" + std::to_string(kBigpVersion) + ", BIGI v" + std::to_string(kBigiVersion) +
                           ")");
  Global g;
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--threads", g.threads, "Worker threads (0: logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "JSON config; keys are option names, optionally under a subcommand key")
      ->check(CLI::ExistingFile);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Render a few-shot dataset");
  gen_cmd->add_option("--out", gen.out, "Dataset root")->required();
  gen_cmd->add_option("--train-classes", gen.spec.train_classes)->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--test-classes", gen.spec.test_classes)->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--shots", gen.spec.shots, "Images per class")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--width", gen.spec.width)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.spec.height)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--profile", gen.profile)->check(CLI::IsMember({"standard", "dark", "room"}));
  gen_cmd->add_option("--scale-sigma", gen.spec.scale_sigma, "Spread of class log-scales")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--pattern-size", gen.spec.pattern_size, "Floor texture size")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--no-shadows", gen.no_shadows);

  RenderOpts ren;
  auto* render_cmd = app.add_subcommand("render", "Render a scene JSON");
  render_cmd->add_option("--scene", ren.scene)->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", ren.out, ".png or .bigi")->required();
  render_cmd->add_flag("--no-shadows", ren.no_shadows);
  render_cmd->add_option("--prior-draws", ren.prior_draws, "Write a contact sheet of prior-predictive renders")
      ->check(CLI::NonNegativeNumber);
  render_cmd->add_option("--priors", ren.priors)->check(CLI::ExistingFile);
  render_cmd->add_option("--scale-sigma", ren.scale_sigma)->check(CLI::PositiveNumber);
  render_cmd->add_option("--columns", ren.columns)->check(CLI::PositiveNumber);

  OptimizeOpts opt;
  auto* opt_cmd = app.add_subcommand("optimize-scene", "Fit lights, floor and materials to dataset images");
  opt_cmd->add_option("--dataset", opt.dataset)->required()->check(CLI::ExistingDirectory);
  opt_cmd->add_option("--out", opt.out, "Scene JSON")->required();
  opt_cmd->add_option("--loss-csv", opt.loss_csv, "Per-epoch loss (default: <out>.loss.csv)");
  opt_cmd->add_option("--priors-out", opt.priors_out, "Fitted prior JSON (default: <out>.priors.json)");
  opt_cmd->add_option("--split", opt.split, "Split to fit (default: train, else all)");
  opt_cmd->add_option("--max-images", opt.max_images)->check(CLI::NonNegativeNumber);
  opt_cmd->add_option("--epochs", opt.cfg.epochs)->check(CLI::PositiveNumber);
  opt_cmd->add_option("--lr", opt.cfg.learning_rate)->check(CLI::PositiveNumber);
  opt_cmd->add_option("--steps-per-group", opt.cfg.steps_per_group)->check(CLI::PositiveNumber);
  opt_cmd->add_option("--lights", opt.lights)->check(CLI::Range(1, static_cast<int>(kMaxLights)));
  opt_cmd->add_option("--pattern-size", opt.pattern_size)->check(CLI::PositiveNumber);
  opt_cmd->add_option("--scale-sigma", opt.scale_sigma, "Log-scale sigma written to the priors")
      ->check(CLI::PositiveNumber);

  SelectOpts sel;
  auto* sel_cmd = app.add_subcommand("select-channels", "Rank feature channels by reconstruction error");
  sel_cmd->add_option("--dataset", sel.dataset)->required()->check(CLI::ExistingDirectory);
  sel_cmd->add_option("--scene", sel.scene, "Fitted scene (default: dataset globals)")->check(CLI::ExistingFile);
  sel_cmd->add_option("--weights", sel.weights, "BIGW file (seeded random when absent)");
  sel_cmd->add_option("--out", sel.out)->required();
  sel_cmd->add_option("--split", sel.split);
  sel_cmd->add_option("--top-k", sel.top_k)->check(CLI::PositiveNumber);
  sel_cmd->add_option("--max-images", sel.max_images)->check(CLI::NonNegativeNumber);

  InferCmd inf;
  auto* inf_cmd = app.add_subcommand("infer", "Sample the posterior of one image");
  add_infer_options(inf_cmd, inf.infer, true);
  inf_cmd->add_option("--image", inf.image)->required()->check(CLI::ExistingFile);
  inf_cmd->add_option("--out", inf.out, "BIGP posterior; a .json summary is written beside it")->required();
  inf_cmd->add_option("--program-out", inf.program_out, "Also write the program JSON");

  ClassifyCmd cls;
  auto* cls_cmd = app.add_subcommand("classify", "Classify query images against support classes");
  add_infer_options(cls_cmd, cls.infer, true);
  cls_cmd->add_option("--support", cls.support, "Directory of class subdirectories")
      ->required()
      ->check(CLI::ExistingDirectory);
  cls_cmd->add_option("--query", cls.queries, "Query image(s) or directories")->required();
  cls_cmd->add_option("--out", cls.out, "Predictions CSV")->required();
  cls_cmd->add_option("--shots", cls.shots, "Support images per class (0: all)")->check(CLI::NonNegativeNumber);
  cls_cmd->add_option("--kappa", cls.kappa)->check(CLI::IsMember({"relaxed", "discrete"}));

  EvaluateCmd ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "N-way K-shot episodes and pose error on a dataset");
  add_infer_options(ev_cmd, ev.infer, false);
  ev_cmd->add_option("--dataset", ev.dataset)->required()->check(CLI::ExistingDirectory);
  ev_cmd->add_option("--report", ev.report)->required();
  ev_cmd->add_option("--split", ev.split);
  ev_cmd->add_option("--n-way", ev.n_way)->check(CLI::PositiveNumber);
  ev_cmd->add_option("--k-shot", ev.k_shots, "One or more shot counts")->check(CLI::PositiveNumber);
  ev_cmd->add_option("--episodes", ev.episodes)->check(CLI::PositiveNumber);
  ev_cmd->add_option("--queries-per-class", ev.queries_per_class)->check(CLI::NonNegativeNumber);
  ev_cmd->add_option("--kappa", ev.kappa)->check(CLI::IsMember({"relaxed", "discrete"}));
  ev_cmd->add_option("--adi-points", ev.adi_points)->check(CLI::Range(100, 1000000));
  ev_cmd->add_flag("--no-adi", ev.no_adi);

  AdiCmd adi;
  auto* adi_cmd = app.add_subcommand("adi", "Pose error of a posterior against a ground-truth record");
  adi_cmd->add_option("--posterior", adi.posterior)->required()->check(CLI::ExistingFile);
  adi_cmd->add_option("--truth", adi.truth, "Image JSON of the dataset (or object parameters)")
      ->required()
      ->check(CLI::ExistingFile);
  adi_cmd->add_option("--out", adi.out)->required();
  adi_cmd->add_option("--points", adi.points)->check(CLI::Range(100, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!g.config.empty()) {
      const json cfg = read_json(g.config);
      if (!cfg.is_object()) throw UsageError("config must be a JSON object");
      std::vector<std::string> sections;
      for (const auto* s : app.get_subcommands({})) sections.push_back(s->get_name());
      apply_section(app, cfg, sections);
      if (cfg.contains(sub->get_name())) apply_section(*sub, cfg.at(sub->get_name()), {});
    }
    const json config = resolved_config(*sub, app);
    log("config " + config.dump());
    const std::string name = sub->get_name();
    if (name == "gen-dataset") return run_gen_dataset(gen, g);
    if (name == "render") return run_render(ren, g);
    if (name == "optimize-scene") return run_optimize_scene(opt, g, config);
    if (name == "select-channels") return run_select_channels(sel, g, config);
    if (name == "infer") return run_infer(inf, g, config);
    if (name == "classify") return run_classify(cls, g, config);
    if (name == "evaluate") return run_evaluate(ev, g, config);
    if (name == "adi") return run_adi(adi, config);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << sub->help();
    return 1;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << sub->help();
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
