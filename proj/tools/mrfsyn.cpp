// mrfsyn: command-line front end. Each verb reads artifacts, runs one pipeline stage, and writes a
// container whose manifest carries the full experiment config.
//
// Exit status: 0 success, 1 user error (bad flags, missing or corrupt inputs, invalid parameters),
// 2 internal error.

#include "mrfsyn/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace mrf;

namespace {

nlohmann::json read_json(fs::path const &p)
{
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (nlohmann::json::parse_error const &e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

ExperimentConfig base_config(std::string const &path)
{
  return path.empty() ? ExperimentConfig{} : config_from_json(read_json(path));
}

/// Flags that override config fields when given.
struct Overrides
{
  CLI::App *app = nullptr;
  Index size = 64;
  std::uint64_t seed = 0;
  bool snap = false;
  std::string b0 = "none";
  std::string grid = "desk";
  Index n_tr = 500;
  std::uint64_t schedule_seed = 0;
  std::string trajectory = "cartesian";
  double snr_db = 0.0;
  std::uint64_t noise_seed = 0;
  bool model_b0 = false;
  Index time_segments = 8;

  bool given(char const *name) const
  {
    auto const *o = app->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  }

  void add_phantom(CLI::App *a)
  {
    a->add_option("--size", size, "Phantom matrix size (square)");
    a->add_option("--seed", seed, "Phantom seed");
    a->add_flag("--snap-to-grid", snap, "Move tissue parameters onto the dictionary grid");
    a->add_option("--b0", b0, "Off-resonance map: none | blob")->check(CLI::IsMember({"none", "blob"}));
  }
  void add_grid(CLI::App *a) { a->add_option("--grid", grid, "Dictionary grid: desk | full")->check(CLI::IsMember({"desk", "full"})); }
  void add_sequence(CLI::App *a)
  {
    a->add_option("--n-tr", n_tr, "Number of MRF time points");
    a->add_option("--schedule-seed", schedule_seed, "Seed of the flip-angle jitter");
  }
  void add_acquisition(CLI::App *a)
  {
    a->add_option("--trajectory", trajectory, "cartesian | undersampled | dense")
      ->check(CLI::IsMember({"cartesian", "undersampled", "dense"}));
    a->add_option("--snr-db", snr_db, "Add complex Gaussian noise at this SNR (dB)");
    a->add_option("--noise-seed", noise_seed, "Noise seed");
    a->add_flag("--model-b0", model_b0, "Include off-resonance phase in the forward model");
    a->add_option("--time-segments", time_segments, "Time segments for the off-resonance model");
  }

  void apply(ExperimentConfig &c) const
  {
    if (given("--size")) { c.phantom.size = size; }
    if (given("--seed")) { c.phantom.seed = seed; }
    if (given("--snap-to-grid")) { c.phantom.snap_to_grid = snap; }
    if (given("--b0")) { c.phantom.b0 = b0 == "blob" ? B0Spec::default_blob() : B0Spec::none(); }
    if (given("--grid")) {
      c.grid_name = grid;
      c.grid = named_grid(grid);
    }
    if (given("--n-tr") || given("--schedule-seed")) {
      c.fisp = default_fisp(given("--n-tr") ? n_tr : c.fisp.n_tr, given("--schedule-seed") ? schedule_seed : c.fisp.schedule_seed);
    }
    if (given("--trajectory")) { c.trajectory = trajectory; }
    if (given("--snr-db")) { c.noise.snr_db = snr_db; }
    if (given("--noise-seed")) { c.noise.seed = noise_seed; }
    if (given("--model-b0")) { c.model_b0 = model_b0; }
    if (given("--time-segments")) { c.time_segments = time_segments; }
    c.validate();
  }
};

void say(std::string const &what, fs::path const &out, ArrayContainer const &c)
{
  std::cout << what << " -> " << out.string() << " (" << c.digest() << ")\n";
}

std::vector<double> parse_ratios(std::string const &s)
{
  std::vector<double> r;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      r.push_back(std::stod(item));
    } catch (std::exception const &) {
      throw InvalidArgument("--split: cannot parse '" + item + "'");
    }
  }
  require(r.size() == 3, "--split expects three comma-separated ratios (train,val,test)");
  return r;
}

int run(int argc, char **argv)
{
  CLI::App app{"MRF contrast-synthesis workbench"};
  app.require_subcommand(1);
  bool print_config = false;
  app.add_flag("--print-default-config", print_config, "Print the default experiment config as JSON and exit");

  std::string config_path, in, out, dict_path;
  std::vector<std::string> ins, refs, configs;

  auto *phantom = app.add_subcommand("phantom", "Rasterize a head phantom");
  Overrides po{phantom};
  po.add_phantom(phantom);
  po.add_grid(phantom);
  phantom->add_option("--config", config_path, "Base experiment config (JSON)")->check(CLI::ExistingFile);
  phantom->add_option("--out", out, "Output container")->required();

  auto *dict = app.add_subcommand("dict", "Simulate a fingerprint dictionary");
  Overrides dov{dict};
  dov.add_grid(dict);
  dov.add_sequence(dict);
  dict->add_option("--config", config_path, "Base experiment config (JSON)")->check(CLI::ExistingFile);
  dict->add_option("--out", out, "Output container")->required();

  auto *acquire = app.add_subcommand("acquire", "Simulate k-space from a phantom");
  Overrides ao{acquire};
  ao.add_sequence(acquire);
  ao.add_acquisition(acquire);
  acquire->add_option("--in", in, "Phantom container")->required();
  acquire->add_option("--out", out, "Output container")->required();

  auto *recon = app.add_subcommand("recon", "Reconstruct and normalize an MRF series");
  bool no_dcf = false;
  recon->add_option("--in", in, "k-space container")->required();
  recon->add_flag("--no-density-compensation", no_dcf, "Grid without density weights");
  recon->add_option("--out", out, "Output container")->required();

  auto *match = app.add_subcommand("match", "Dictionary matching of an MRF series");
  match->add_option("--in", in, "Series container")->required();
  match->add_option("--dict", dict_path, "Dictionary container")->required();
  match->add_option("--out", out, "Output container")->required();

  auto *synth = app.add_subcommand("synth", "Simulate T1w/T2w/FLAIR from parameter maps");
  synth->add_option("--in", in, "Maps container")->required();
  synth->add_option("--out", out, "Output container")->required();

  auto *eval = app.add_subcommand("eval", "Compare synthesized contrasts with phantom ground truth");
  EvalOptions eopt;
  bool no_norm = false;
  eval->add_option("--in", ins, "Contrast containers, one per slice")->required();
  eval->add_option("--reference", refs, "Phantom containers, in the same order")->required();
  eval->add_option("--method", eopt.method, "Method label for the report");
  eval->add_flag("--no-normalize", no_norm, "Compare raw intensities instead of 95th-percentile normalized images");
  eval->add_option("--out", out, "JSON report (text table goes to stdout)");

  auto *exp = app.add_subcommand("export-dataset", "Write a train/val/test dataset of simulated slices");
  Overrides eo{exp};
  eo.add_phantom(exp);
  eo.add_grid(exp);
  eo.add_sequence(exp);
  eo.add_acquisition(exp);
  Index count = 20;
  std::string split = "0.8,0.1,0.1";
  DatasetOptions dopt;
  exp->add_option("--config", configs, "Experiment configs, one per slice (JSON)")->check(CLI::ExistingFile);
  exp->add_option("--count", count, "Without --config: number of slices, phantom seeds seed..seed+count-1");
  exp->add_option("--split", split, "train,val,test ratios");
  exp->add_option("--split-seed", dopt.split_seed, "Seed of the split shuffle");
  exp->add_flag("--simulation-baseline", dopt.simulation_baseline, "Also export simulation-pipeline contrasts");
  exp->add_option("--out", out, "Output directory")->required();

  auto *bench = app.add_subcommand("bench", "Time the simulation pipeline on one slice");
  Overrides bo{bench};
  bo.add_phantom(bench);
  bo.add_grid(bench);
  bo.add_sequence(bench);
  bo.add_acquisition(bench);
  Index repeats = 1;
  bench->add_option("--config", config_path, "Base experiment config (JSON)")->check(CLI::ExistingFile);
  bench->add_option("--repeat", repeats, "Timed repetitions of match + synthesis");
  bench->add_option("--out", out, "JSON timing report");

  try {
    if (argc >= 2 && std::string(argv[1]) == "--print-default-config") {
      std::cout << nlohmann::json(ExperimentConfig{}).dump(2) << "\n";
      return 0;
    }
    app.parse(argc, argv);
  } catch (CLI::Success const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    app.exit(e);
    return 1;
  }

  if (*phantom) {
    auto cfg = base_config(config_path);
    po.apply(cfg);
    auto const c = stage_phantom(cfg);
    write_container(out, c);
    say("phantom", out, c);
  } else if (*dict) {
    auto cfg = base_config(config_path);
    dov.apply(cfg);
    auto const c = stage_dict(cfg);
    write_container(out, c);
    say("dictionary (" + std::to_string(c.shape[0]) + " atoms)", out, c);
  } else if (*acquire) {
    auto const ph = read_container(in);
    auto cfg = config_of(ph);
    ao.apply(cfg);
    auto const c = stage_acquire(cfg, ph);
    write_container(out, c);
    say("k-space", out, c);
  } else if (*recon) {
    auto const ks = read_container(in);
    auto cfg = config_of(ks);
    if (no_dcf) { cfg.density_compensation = false; }
    auto const c = stage_recon(cfg, ks);
    write_container(out, c);
    say("series", out, c);
  } else if (*match) {
    auto const series = read_container(in);
    auto const dc = read_container(dict_path);
    auto cfg = config_of(series);
    auto const dcfg = config_of(dc);
    if (nlohmann::json(dcfg.grid) != nlohmann::json(cfg.grid)) {
      // A snapped phantom is tied to its grid; anything else just adopts the dictionary's grid.
      require(!cfg.phantom.snap_to_grid, "match: phantom was snapped to a different grid than the dictionary's");
      cfg.grid = dcfg.grid;
      cfg.grid_name = dcfg.grid_name;
    }
    auto const c = stage_match(cfg, series, dc);
    write_container(out, c);
    say("maps", out, c);
  } else if (*synth) {
    auto const maps = read_container(in);
    auto const c = stage_synth(config_of(maps), maps);
    write_container(out, c);
    say("contrasts", out, c);
  } else if (*eval) {
    require(ins.size() == refs.size(), "eval: --in and --reference must list the same number of files");
    eopt.normalize = !no_norm;
    MetricReport report;
    report.method = eopt.method;
    nlohmann::json inputs = nlohmann::json::array();
    for (std::size_t k = 0; k < ins.size(); ++k) {
      auto const pc = read_container(ins[k]);
      auto const rc = read_container(refs[k]);
      auto const pred = contrasts_from(pc);
      auto const truth = ground_truth_contrasts(phantom_from(rc), pred.specs);
      report.add_slice(evaluate_slice(pred, truth, eopt));
      inputs.push_back({{"contrasts", pc.digest()}, {"reference", rc.digest()}, {"config", pc.manifest.value("config", nlohmann::json())}});
    }
    std::cout << report.to_text();
    if (!out.empty()) {
      auto j = report.to_json();
      j["manifest"] = {{"stage", "eval"}, {"version", kVersion}, {"normalize_95th", eopt.normalize}, {"inputs", inputs}};
      write_file_atomic(out, j.dump(2) + "\n");
    }
  } else if (*exp) {
    std::vector<ExperimentConfig> cfgs;
    if (!configs.empty()) {
      for (auto const &p : configs) {
        auto c = config_from_json(read_json(p));
        eo.apply(c);
        cfgs.push_back(std::move(c));
      }
    } else {
      require(count >= 1, "export-dataset: --count must be at least 1");
      ExperimentConfig base;
      eo.apply(base);
      for (Index i = 0; i < count; ++i) {
        auto c = base;
        c.phantom.seed = base.phantom.seed + static_cast<std::uint64_t>(i);
        c.noise.seed = base.noise.seed + static_cast<std::uint64_t>(i);
        cfgs.push_back(std::move(c));
      }
    }
    auto const r = parse_ratios(split);
    dopt.split = {r[0], r[1], r[2]};
    auto const m = export_dataset(cfgs, dopt, out);
    auto const &counts = m.at("split").at("counts");
    std::cout << "dataset -> " << out << " (train " << counts.at("train") << ", val " << counts.at("val") << ", test "
              << counts.at("test") << ")\n";
  } else if (*bench) {
    auto cfg = base_config(config_path);
    bo.apply(cfg);
    auto const r = run_bench(cfg, repeats);
    std::cout << r.to_text();
    if (!out.empty()) {
      auto j = r.to_json();
      j["manifest"] = stage_manifest("bench", cfg);
      write_file_atomic(out, j.dump(2) + "\n");
    }
  }
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  try {
    return run(argc, argv);
  } catch (InvalidArgument const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (IoError const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (fs::filesystem_error const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (std::exception const &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
