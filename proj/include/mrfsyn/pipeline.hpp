#pragma once

#include "io.hpp"
#include "metrics.hpp"

#include <chrono>
#include <cstdio>

namespace mrf {

inline constexpr char const *kVersion = "mrfsyn 0.1.0";

// Each stage maps (config, inputs) to a container. The CLI and regenerate() call exactly these
// functions, and every stage consumes its inputs in their stored f32 form, so a manifest's config
// plus stage name reproduces the artifact bit for bit.

inline nlohmann::json stage_manifest(std::string const &stage, ExperimentConfig const &cfg,
                                     nlohmann::json inputs = nlohmann::json::object())
{
  return {{"stage", stage}, {"version", kVersion}, {"config", cfg}, {"inputs", std::move(inputs)}};
}

inline TissueTable phantom_table(ExperimentConfig const &cfg)
{
  return cfg.phantom.snap_to_grid ? snap_to_grid(cfg.phantom.table, cfg.grid) : cfg.phantom.table;
}

inline ArrayContainer stage_phantom(ExperimentConfig const &cfg)
{
  cfg.validate();
  auto const ph = make_phantom(cfg.phantom.size, cfg.phantom.size, cfg.phantom.seed, phantom_table(cfg), cfg.phantom.b0);
  return to_container(ph, stage_manifest("phantom", cfg));
}

inline ArrayContainer stage_dict(ExperimentConfig const &cfg)
{
  cfg.validate();
  return to_container(build_dictionary(cfg.grid, cfg.fisp), stage_manifest("dict", cfg));
}

inline ArrayContainer stage_acquire(ExperimentConfig const &cfg, ArrayContainer const &phantom)
{
  cfg.validate();
  auto const ph = phantom_from(phantom);
  AcquireOptions opt;
  opt.snr_db = cfg.noise.snr_db;
  opt.seed = cfg.noise.seed;
  opt.model_b0 = cfg.model_b0;
  opt.time_segments = cfg.time_segments;
  auto const inputs = nlohmann::json{{"phantom", phantom.digest()}};
  if (cfg.trajectory == "cartesian") { return to_container(cartesian_acquire(ph, cfg.fisp, opt), stage_manifest("acquire", cfg, inputs)); }
  require(ph.h == ph.w, "acquire: spiral trajectories need a square phantom");
  auto const traj = spiral_preset(cfg.trajectory, ph.h, cfg.fisp.n_tr);
  return to_container(forward_acquire(ph, cfg.fisp, traj, opt), stage_manifest("acquire", cfg, inputs));
}

/// Reconstruction followed by 95th-percentile normalization of the series.
inline ArrayContainer stage_recon(ExperimentConfig const &cfg, ArrayContainer const &kspace)
{
  cfg.validate();
  auto const ks = kspace_from(kspace);
  MrfSeries series;
  if (ks.mode == SamplingMode::Cartesian) {
    series = cartesian_recon(ks);
  } else {
    require(cfg.trajectory != "cartesian", "recon: spiral k-space but the config says cartesian");
    series = grid_recon(ks, spiral_preset(cfg.trajectory, ks.matrix, ks.n_tr), cfg.density_compensation);
  }
  normalize_95th(series);
  return to_container(series, stage_manifest("recon", cfg, {{"kspace", kspace.digest()}}));
}

/// Dictionary matching. The stored PD plane is rescaled by the series normalization, so it is in the
/// units of the phantom's PD.
inline ArrayContainer stage_match(ExperimentConfig const &cfg, ArrayContainer const &series_c, ArrayContainer const &dict_c)
{
  cfg.validate();
  auto const series = series_from(series_c);
  auto const dict = dictionary_from(dict_c);
  require(nlohmann::json(series.spec) == nlohmann::json(dict.spec), "match: dictionary was simulated for a different sequence");
  auto maps = match_image(series, dict);
  for (auto &v : maps.pd.data) { v *= series.normalization; }
  auto m = stage_manifest("match", cfg, {{"series", series_c.digest()}, {"dictionary", dict_c.digest()}});
  m["series_normalization"] = series.normalization;
  return to_container(maps, std::move(m));
}

inline ArrayContainer stage_synth(ExperimentConfig const &cfg, ArrayContainer const &maps_c)
{
  cfg.validate();
  auto const maps = maps_from(maps_c);
  auto const cs = synthesize_from_maps(maps.t1, maps.t2, maps.pd, cfg.contrasts, Provenance::Simulation);
  return to_container(cs, stage_manifest("synth", cfg, {{"maps", maps_c.digest()}}));
}

/// Config of an artifact, taken from its manifest.
inline ExperimentConfig config_of(ArrayContainer const &c)
{
  if (!c.manifest.contains("config")) { throw IoError("artifact manifest has no config"); }
  return config_from_json(c.manifest.at("config"));
}

/// Rebuilds the artifact described by a manifest from scratch, including every upstream stage.
inline ArrayContainer regenerate(nlohmann::json const &manifest)
{
  auto const stage = manifest.at("stage").get<std::string>();
  auto const cfg = config_from_json(manifest.at("config"));
  if (stage == "phantom") { return stage_phantom(cfg); }
  if (stage == "dict") { return stage_dict(cfg); }
  auto const kspace = stage_acquire(cfg, stage_phantom(cfg));
  if (stage == "acquire") { return kspace; }
  auto const series = stage_recon(cfg, kspace);
  if (stage == "recon") { return series; }
  auto const maps = stage_match(cfg, series, stage_dict(cfg));
  if (stage == "match") { return maps; }
  if (stage == "synth") { return stage_synth(cfg, maps); }
  throw InvalidArgument("regenerate: unknown stage '" + stage + "'");
}

// ---- evaluation -------------------------------------------------------------------------------

struct EvalOptions
{
  bool normalize = true; // divide every image by its own 95th percentile before comparing
  std::string method = "simulation";
};

/// Per-slice metrics of synthesized contrasts against the ground truth of the phantom they came from.
inline std::vector<ContrastMetrics> evaluate_slice(ContrastSet const &pred, ContrastSet const &truth, EvalOptions const &opt = {})
{
  std::vector<ContrastMetrics> row;
  auto const p = pred.images();
  auto const t = truth.images();
  for (std::size_t k = 0; k < p.size(); ++k) {
    RealImage x = *p[k], ref = *t[k];
    require(x.same_shape(ref), "eval: prediction and reference differ in shape");
    if (opt.normalize) {
      normalize_95th(ref);
      // An all-zero prediction stays zero instead of failing the run.
      if (percentile95_magnitude(x) > 0.0) { normalize_95th(x); }
    }
    row.push_back(compare_images(x, ref));
  }
  return row;
}

// ---- dataset export ---------------------------------------------------------------------------

struct SplitRatios
{
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline constexpr std::array<char const *, 3> kSplitNames = {"train", "val", "test"};

/// Seeded shuffle of 0..n-1, cut into train/val/test. Train and val sizes are rounded to nearest;
/// test takes the remainder.
inline std::array<std::vector<Index>, 3> split_indices(Index n, SplitRatios const &r, std::uint64_t seed)
{
  require(n >= 1, "split: no slices");
  require(r.train >= 0 && r.val >= 0 && r.test >= 0, "split: ratios must be non-negative");
  require(std::abs(r.train + r.val + r.test - 1.0) < 1e-9, "split: ratios must sum to 1");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  seeded_shuffle(order, seed);
  auto const dn = static_cast<double>(n);
  auto const n_train = std::min<Index>(n, std::llround(r.train * dn));
  auto const n_val = std::min<Index>(n - n_train, std::llround(r.val * dn));
  std::array<std::vector<Index>, 3> out;
  out[0].assign(order.begin(), order.begin() + n_train);
  out[1].assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out[2].assign(order.begin() + n_train + n_val, order.end());
  for (auto &s : out) { std::sort(s.begin(), s.end()); }
  return out;
}

struct DatasetOptions
{
  SplitRatios split;
  std::uint64_t split_seed = 0;
  bool simulation_baseline = false; // also export simulation_pipeline contrasts per record
};

/// Writes one directory per slice under <dir>/<split>/<id>/ and <dir>/manifest.json listing them all.
/// Record files:
///   mrf_input.mrfa     f32 [2t, h, w]: real planes of the normalized series, then imaginary planes
///   time_average.mrfa  f32 [h, w]: |time mean| of the normalized series
///   targets.mrfa       ground-truth T1w/T2w/FLAIR, each divided by its own 95th percentile
///   truth_maps.mrfa    f32 [3, h, w]: T1 ms, T2 ms, PD
///   simulation.mrfa    (optional) simulation-pipeline contrasts, normalized like the targets
inline nlohmann::json export_dataset(std::vector<ExperimentConfig> const &configs, DatasetOptions const &opt,
                                     std::filesystem::path const &dir)
{
  require(!configs.empty(), "export-dataset: no configs given");
  for (auto const &c : configs) { c.validate(); }
  auto const n = static_cast<Index>(configs.size());
  auto const splits = split_indices(n, opt.split, opt.split_seed);
  std::vector<std::string> split_of(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (Index i : splits[s]) { split_of[static_cast<std::size_t>(i)] = kSplitNames[s]; }
  }

  std::map<std::string, Dictionary> dictionaries; // keyed by (grid, sequence) JSON
  nlohmann::json records = nlohmann::json::array();
  for (Index i = 0; i < n; ++i) {
    auto const &cfg = configs[static_cast<std::size_t>(i)];
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "slice_%04lld", static_cast<long long>(i));
    std::string const id = id_buf;
    auto const split = split_of[static_cast<std::size_t>(i)];
    auto const rel = std::filesystem::path(split) / id;

    auto const phantom_c = stage_phantom(cfg);
    auto const ph = phantom_from(phantom_c);
    auto const series_c = stage_recon(cfg, stage_acquire(cfg, phantom_c));
    auto const series = series_from(series_c);
    auto const base = stage_manifest("export-dataset", cfg, {{"phantom", phantom_c.digest()}, {"series", series_c.digest()}});

    nlohmann::json files = nlohmann::json::object();
    auto emit = [&](std::string const &name, ArrayContainer const &c) {
      auto const path = rel / (name + ".mrfa");
      write_container(dir / path, c);
      files[name] = {{"path", path.generic_string()}, {"digest", c.digest()}, {"shape", c.shape}, {"role", c.role}};
    };

    ArrayContainer in{DType::F32, {2 * series.t, series.h, series.w}, "mrf_input",
                      "real planes 0..t-1, imaginary planes t..2t-1 (normalized a.u.)", base, {}};
    in.values.reserve(in.elements());
    for (Cx z : series.data) { in.values.push_back(static_cast<float>(z.real())); }
    for (Cx z : series.data) { in.values.push_back(static_cast<float>(z.imag())); }
    emit("mrf_input", in);

    auto const avg = time_average(series);
    emit("time_average", real_container({series.h, series.w}, "time_average", "normalized a.u.", {&avg}, base));

    auto normalized = [](ContrastSet cs) {
      nlohmann::json scales = nlohmann::json::object();
      auto imgs = cs.images();
      for (std::size_t k = 0; k < imgs.size(); ++k) { scales[kContrastNames[k]] = normalize_95th(*imgs[k]); }
      return std::make_pair(cs, scales);
    };
    auto [targets, target_scales] = normalized(ground_truth_contrasts(ph, cfg.contrasts));
    auto tm = base;
    tm["scales"] = target_scales;
    emit("targets", to_container(targets, tm));
    emit("truth_maps", real_container({3, ph.h, ph.w}, "truth_maps", "planes: t1 ms, t2 ms, pd", {&ph.t1, &ph.t2, &ph.pd}, base));

    if (opt.simulation_baseline) {
      auto const key = nlohmann::json{{"grid", cfg.grid}, {"fisp", cfg.fisp}}.dump();
      if (!dictionaries.contains(key)) { dictionaries.emplace(key, dictionary_from(stage_dict(cfg))); }
      auto const r = simulation_pipeline(series, dictionaries.at(key), cfg.contrasts);
      auto [sim, sim_scales] = normalized(r.contrasts);
      auto sm = base;
      sm["scales"] = sim_scales;
      emit("simulation", to_container(sim, sm));
    }

    records.push_back({{"id", id}, {"index", i}, {"split", split}, {"files", files}, {"config", cfg}});
  }

  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t s = 0; s < splits.size(); ++s) { counts[kSplitNames[s]] = splits[s].size(); }
  nlohmann::json manifest = {
    {"format", "mrfsyn-dataset"},
    {"version", kVersion},
    {"split", {{"ratios", {opt.split.train, opt.split.val, opt.split.test}}, {"seed", opt.split_seed}, {"counts", counts}}},
    {"simulation_baseline", opt.simulation_baseline},
    {"records", records},
  };
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

// ---- bench ------------------------------------------------------------------------------------

struct BenchResult
{
  Index size = 0;
  Index n_tr = 0;
  Index n_atoms = 0;
  Index repeats = 0;
  double dictionary_build_s = 0.0;
  double acquire_s = 0.0;
  double recon_s = 0.0;
  double match_s = 0.0;     // mean over repeats
  double synthesis_s = 0.0; // mean over repeats

  nlohmann::json to_json() const
  {
    return {{"size", size},
            {"n_tr", n_tr},
            {"n_atoms", n_atoms},
            {"repeats", repeats},
            {"threads", thread_count()},
            {"preparation_s", {{"dictionary_build", dictionary_build_s}, {"acquire", acquire_s}, {"recon", recon_s}}},
            {"inference_s", {{"match", match_s}, {"synthesis", synthesis_s}, {"total", match_s + synthesis_s}}}};
  }

  std::string to_text() const
  {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "Inference time for a single %lldx%lld MRF slice (t = %lld, %lld atoms, %d threads)\n",
                  static_cast<long long>(size), static_cast<long long>(size), static_cast<long long>(n_tr),
                  static_cast<long long>(n_atoms), thread_count());
    out += buf;
    auto row = [&](char const *name, double s) {
      std::snprintf(buf, sizeof(buf), "  %-28s %10.4f s\n", name, s);
      out += buf;
    };
    row("Dictionary matching", match_s);
    row("Contrast simulation", synthesis_s);
    row("Simulation pipeline total", match_s + synthesis_s);
    out += "Preparation (not part of inference)\n";
    row("Dictionary build", dictionary_build_s);
    row("Acquisition", acquire_s);
    row("Reconstruction", recon_s);
    return out;
  }
};

inline BenchResult run_bench(ExperimentConfig const &cfg, Index repeats = 1)
{
  require(repeats >= 1, "bench: repeats must be at least 1");
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  BenchResult r;
  r.size = cfg.phantom.size;
  r.n_tr = cfg.fisp.n_tr;
  r.repeats = repeats;

  auto t0 = Clock::now();
  auto const dict = build_dictionary(cfg.grid, cfg.fisp);
  r.dictionary_build_s = seconds(t0, Clock::now());
  r.n_atoms = dict.n_atoms;

  auto const phantom_c = stage_phantom(cfg);
  t0 = Clock::now();
  auto const kspace_c = stage_acquire(cfg, phantom_c);
  r.acquire_s = seconds(t0, Clock::now());
  t0 = Clock::now();
  auto const series = series_from(stage_recon(cfg, kspace_c));
  r.recon_s = seconds(t0, Clock::now());

  for (Index k = 0; k < repeats; ++k) {
    auto const p = simulation_pipeline(series, dict, cfg.contrasts);
    r.match_s += p.timing.match_seconds;
    r.synthesis_s += p.timing.synthesis_seconds;
  }
  r.match_s /= static_cast<double>(repeats);
  r.synthesis_s /= static_cast<double>(repeats);
  return r;
}

} // namespace mrf
