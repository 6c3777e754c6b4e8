#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gauss/hsi.hpp"
#include "gauss/io.hpp"
#include "gauss/metrics.hpp"
#include "gauss/networks.hpp"
#include "gauss/pgt.hpp"
#include "gauss/synth.hpp"
#include "gauss/trainer.hpp"

#ifndef GAUSS_BUILD_ID
#define GAUSS_BUILD_ID "unknown"
#endif

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace gauss;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path);
  try {
    json j;
    f >> j;
    return j;
  } catch (const json::exception& e) {
    throw DataError("malformed config " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << text;
  if (!f) throw DataError("write failed: " + path);
}

// Shared flags; every command writes exactly one manifest into --out.
struct CommonArgs {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = ".";
};

struct ManifestWriter {
  json doc;
  std::string out_dir;
  ManifestWriter(const std::string& command, const CommonArgs& args)
      : out_dir(args.out) {
    fs::create_directories(args.out);
    doc["command"] = command;
    doc["config"] = args.config;
    doc["seed"] = args.seed;
    doc["build"] = GAUSS_BUILD_ID;
    doc["started_utc"] = utc_now();
    doc["inputs"] = json::object();
    doc["outputs"] = json::array();
  }
  void input(const std::string& key, const std::string& path) {
    doc["inputs"][key] = path;
  }
  std::string output(const std::string& name) {
    const std::string path = (fs::path(out_dir) / name).string();
    doc["outputs"].push_back(name);
    return path;
  }
  void finish(const json& extra = json::object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = *it;
    doc["finished_utc"] = utc_now();
    write_text((fs::path(out_dir) / "manifest.json").string(), doc.dump(2) + "\n");
  }
};

// --- synth ---

struct SynthArgs {
  synth::SynthConfig cfg;
  std::vector<std::string> library;
  double wl_start = 420.0;
  double wl_stop = 2470.0;
  int wl_count = 198;
};

SynthArgs parse_synth_config(const CommonArgs& common) {
  SynthArgs args;
  args.library = {"data/spectra/material_a.csv", "data/spectra/material_b.csv",
                  "data/spectra/material_c.csv", "data/spectra/material_d.csv"};
  if (!common.config.empty()) {
    const json j = load_json(common.config);
    args.cfg.width = j.value("width", args.cfg.width);
    args.cfg.height = j.value("height", args.cfg.height);
    args.cfg.sources = j.value("sources", args.cfg.sources);
    args.cfg.tile = j.value("tile", args.cfg.tile);
    args.cfg.superpixel = j.value("superpixel", args.cfg.superpixel);
    args.cfg.pure_tile_fraction =
        j.value("pure_tile_fraction", args.cfg.pure_tile_fraction);
    args.cfg.smoothing_passes =
        j.value("smoothing_passes", args.cfg.smoothing_passes);
    if (j.contains("noise_snr_db") && !j["noise_snr_db"].is_null())
      args.cfg.noise_snr_db = j["noise_snr_db"].get<double>();
    if (j.contains("library"))
      args.library = j["library"].get<std::vector<std::string>>();
    if (j.contains("wavelengths")) {
      args.wl_start = j["wavelengths"].value("start", args.wl_start);
      args.wl_stop = j["wavelengths"].value("stop", args.wl_stop);
      args.wl_count = j["wavelengths"].value("count", args.wl_count);
    }
  }
  args.cfg.seed = common.seed;
  return args;
}

void cmd_synth(const CommonArgs& common) {
  ManifestWriter manifest("synth", common);
  SynthArgs args = parse_synth_config(common);
  args.cfg.validate();
  if (static_cast<int>(args.library.size()) != args.cfg.sources)
    throw DataError("synth: config names " + std::to_string(args.library.size()) +
                    " library files for " + std::to_string(args.cfg.sources) +
                    " sources");
  if (args.wl_count < 2) throw DataError("synth: need at least 2 wavelengths");

  std::vector<double> wavelengths(args.wl_count);
  for (int i = 0; i < args.wl_count; ++i)
    wavelengths[i] = args.wl_start + (args.wl_stop - args.wl_start) * i /
                                         (args.wl_count - 1);

  EndmemberMatrix endmembers;
  endmembers.values.resize(args.wl_count, args.cfg.sources);
  std::vector<std::string> names;
  for (int k = 0; k < args.cfg.sources; ++k) {
    const io::SpectralLibraryEntry entry =
        io::load_spectral_library_entry(args.library[k]);
    manifest.input("library_" + std::to_string(k), args.library[k]);
    const std::vector<double> resampled =
        synth::resample_spectrum(entry, wavelengths);
    for (int b = 0; b < args.wl_count; ++b)
      endmembers.values(b, k) = resampled[b];
    names.push_back(entry.name);
  }

  const synth::AbundanceField field = synth::generate_abundances(args.cfg);
  const SpectraMatrix y =
      synth::mix_lmm(endmembers, field.matrix, args.cfg.noise_snr_db, args.cfg.seed);
  const HsiCube cube = matrix_to_cube(y, args.cfg.width, args.cfg.height);

  io::save_cube(cube, manifest.output("cube.hsc"));
  io::write_abundance_csv(field.matrix, manifest.output("gt_abundances.csv"));
  io::write_endmember_csv(endmembers, manifest.output("gt_endmembers.csv"), names);
  manifest.finish({{"width", args.cfg.width},
                   {"height", args.cfg.height},
                   {"bands", args.wl_count},
                   {"sources", args.cfg.sources}});
}

// --- pgt ---

void cmd_pgt(const CommonArgs& common, const std::string& cube_path, int sources) {
  ManifestWriter manifest("pgt", common);
  manifest.input("cube", cube_path);
  const HsiCube cube = io::load_cube(cube_path);
  const SpectraMatrix y = cube_to_matrix(cube);
  const KMeansResult clusters = kmeans(y, sources, common.seed);
  const AbundanceMatrix pgt = one_hot_pseudo_gt(clusters.labels, sources);
  io::write_abundance_csv(pgt, manifest.output("pgt.csv"));
  manifest.finish({{"sources", sources},
                   {"kmeans_iterations", clusters.iterations},
                   {"kmeans_inertia", clusters.inertia}});
}

// --- train ---

TrainConfig parse_train_config(const CommonArgs& common, const json& overrides) {
  TrainConfig cfg;
  json j = overrides;
  if (!common.config.empty() && overrides.is_null()) j = load_json(common.config);
  if (!j.is_null() && !j.empty()) {
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs_per_stage = j.value("epochs_per_stage", cfg.epochs_per_stage);
    if (j.contains("adam")) {
      const json& a = j["adam"];
      cfg.adam.lr = a.value("lr", cfg.adam.lr);
      cfg.adam.beta1 = a.value("beta1", cfg.adam.beta1);
      cfg.adam.beta2 = a.value("beta2", cfg.adam.beta2);
      cfg.adam.epsilon = a.value("epsilon", cfg.adam.epsilon);
    }
    const std::string mn = j.value("mn_loss", "psid");
    if (mn == "psid") cfg.mn_loss = MnLoss::kPsid;
    else if (mn == "mse_raw") cfg.mn_loss = MnLoss::kMseRaw;
    else throw DataError("train: mn_loss must be 'psid' or 'mse_raw'");
  }
  cfg.seed = common.seed;
  cfg.validate();
  return cfg;
}

void write_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "stage,epoch,loss\n";
  char buf[32];
  for (const StageCurve& stage : report.stages) {
    for (std::size_t e = 0; e < stage.losses.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%.17g", stage.losses[e]);
      f << stage.name << ',' << e << ',' << buf << '\n';
    }
  }
  if (!f) throw DataError("write failed: " + path);
}

json report_summary(const TrainReport& report, const std::string& strategy) {
  json stages = json::array();
  for (const StageCurve& stage : report.stages) {
    stages.push_back({{"name", stage.name},
                      {"epochs", stage.losses.size()},
                      {"final_loss", stage.losses.back()}});
  }
  return {{"strategy", strategy},
          {"stages", stages},
          {"max_asc_error", report.max_asc_error},
          {"min_abundance", report.min_abundance}};
}

struct TrainResult {
  GaussModel model;
  TrainReport report;
};

void merge_report(TrainReport& into, TrainReport&& variant) {
  for (StageCurve& c : variant.stages) into.stages.push_back(std::move(c));
  into.wall_seconds += variant.wall_seconds;
  into.max_asc_error = std::max(into.max_asc_error, variant.max_asc_error);
  into.min_abundance = std::min(into.min_abundance, variant.min_abundance);
}

// Runs the full schedule for a strategy; blind/prime continue from a
// supplied pretrained checkpoint when given, else from a fresh initializer
// run on the spot.
TrainResult run_strategy(Strategy strategy, const HsiCube& cube,
                         const AbundanceMatrix* pgt,
                         const AbundanceMatrix* prime_pgt,
                         const std::string& init_dir, const TrainConfig& cfg) {
  TrainResult result;

  auto require_pgt = [&]() -> const AbundanceMatrix& {
    if (!pgt)
      throw DataError("strategy " + strategy_name(strategy) +
                      " needs --pgt for the initializer schedule");
    return *pgt;
  };
  auto init_model = [&]() {
    if (!init_dir.empty()) {
      result.model = load_model(init_dir);
      if (!result.model.pretrained)
        throw DataError("checkpoint at " + init_dir +
                        " was not produced by the initializer schedule");
      if (result.model.bands != cube.bands)
        throw DataError("checkpoint bands do not match cube");
    } else {
      result.model = build_model(cube.bands, require_pgt().sources(), cfg.seed);
      result.report = train_gauss(result.model, cube, *pgt, cfg);
    }
  };

  switch (strategy) {
    case Strategy::kGauss:
      result.model = build_model(cube.bands, require_pgt().sources(), cfg.seed);
      result.report = train_gauss(result.model, cube, *pgt, cfg);
      break;
    case Strategy::kGaussExtended:
      result.model = build_model(cube.bands, require_pgt().sources(), cfg.seed);
      result.report = train_gauss_extended(result.model, cube, *pgt, cfg);
      break;
    case Strategy::kBlind:
      init_model();
      merge_report(result.report, train_blind(result.model, cube, cfg));
      break;
    case Strategy::kPrime:
      if (!prime_pgt) throw DataError("prime needs --prime-pgt");
      init_model();
      merge_report(result.report, train_prime(result.model, cube, *prime_pgt, cfg));
      break;
  }
  return result;
}

void cmd_train(const CommonArgs& common, const std::string& cube_path,
               const std::string& strategy_str, const std::string& pgt_path,
               const std::string& prime_pgt_path, const std::string& init_dir) {
  ManifestWriter manifest("train", common);
  const Strategy strategy = strategy_from_name(strategy_str);
  manifest.input("cube", cube_path);
  const HsiCube cube = io::load_cube(cube_path);
  const TrainConfig cfg = parse_train_config(common, json());

  const bool needs_init =
      strategy == Strategy::kBlind || strategy == Strategy::kPrime;
  if (needs_init && init_dir.empty())
    throw DataError("strategy " + strategy_str +
                    " requires --init with a checkpoint from the initializer "
                    "schedule (run --strategy gauss first)");

  std::optional<AbundanceMatrix> pgt;
  if (!pgt_path.empty()) {
    manifest.input("pgt", pgt_path);
    pgt = io::read_abundance_csv(pgt_path);
    pgt->validate(1e-3);
  }
  std::optional<AbundanceMatrix> prime_pgt;
  if (!prime_pgt_path.empty()) {
    manifest.input("prime_pgt", prime_pgt_path);
    const int k = io::read_abundance_csv(prime_pgt_path).sources();
    prime_pgt = load_external_pgt(prime_pgt_path, k, cube.pixels());
  }
  if (!init_dir.empty()) manifest.input("init", init_dir);

  TrainResult result = run_strategy(strategy, cube, pgt ? &*pgt : nullptr,
                                    prime_pgt ? &*prime_pgt : nullptr, init_dir, cfg);

  save_model(result.model, cfg.adam, manifest.output("model"));
  write_report_csv(result.report, manifest.output("report.csv"));
  write_text(manifest.output("summary.json"),
             report_summary(result.report, strategy_str).dump(2) + "\n");
  manifest.finish({{"wall_seconds", result.report.wall_seconds}});
}

// --- eval ---

json metrics_json(const metrics::EvalReport& r) {
  return {{"armse", r.armse}, {"aaad", r.aaad}, {"aaid", r.aaid},
          {"asad", r.asad},   {"asid", r.asid}, {"permutation", r.permutation}};
}

void write_metrics_csv(const metrics::EvalReport& r, const std::string& path) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", r.armse,
                r.aaad, r.aaid, r.asad, r.asid);
  write_text(path, "armse,aaad,aaid,asad,asid\n" + std::string(buf) + "\n");
}

void cmd_eval(const CommonArgs& common, const std::string& model_dir,
              const std::string& cube_path, const std::string& gt_abundance_path,
              const std::string& gt_endmember_path) {
  ManifestWriter manifest("eval", common);
  manifest.input("model", model_dir);
  manifest.input("cube", cube_path);
  manifest.input("gt_abundances", gt_abundance_path);
  manifest.input("gt_endmembers", gt_endmember_path);

  const GaussModel model = load_model(model_dir);
  const HsiCube cube = io::load_cube(cube_path);
  AbundanceMatrix gt_s = io::read_abundance_csv(gt_abundance_path);
  gt_s.validate(1e-3);
  EndmemberMatrix gt_a = io::read_endmember_csv(gt_endmember_path);
  gt_a.validate();

  const AbundanceMatrix est_s = estimate_abundances(model, cube);
  const EndmemberMatrix est_a = extract_endmembers(model);
  const metrics::EvalReport report = metrics::evaluate(gt_s, est_s, gt_a, est_a);

  write_text(manifest.output("metrics.json"), metrics_json(report).dump(2) + "\n");
  write_metrics_csv(report, manifest.output("metrics.csv"));

  // One graymap per source, rows of the aligned estimate reshaped to the
  // image; abundance 1 maps to pixel 255.
  for (int k = 0; k < model.sources; ++k) {
    MatrixXd plane(cube.height, cube.width);
    const int est_row = report.permutation[k];
    for (int m = 0; m < cube.height; ++m)
      for (int n = 0; n < cube.width; ++n)
        plane(m, n) = est_s.values(est_row, cube.pixel_index(m, n));
    io::write_pgm(plane, manifest.output("abundance_" + std::to_string(k) + ".pgm"));
  }
  io::write_endmember_csv(est_a, manifest.output("endmembers_est.csv"));
  manifest.finish(metrics_json(report));
}

// --- trials ---

void cmd_trials(const CommonArgs& common, int n) {
  if (common.config.empty()) throw DataError("trials requires --config");
  if (n < 1) throw DataError("trials: need at least one trial");
  ManifestWriter manifest("trials", common);
  const json j = load_json(common.config);
  for (const char* key : {"cube", "pgt", "gt_abundances", "gt_endmembers", "strategy"})
    if (!j.contains(key))
      throw DataError(std::string("trials config missing '") + key + "'");

  const std::string cube_path = j["cube"];
  manifest.input("cube", cube_path);
  const HsiCube cube = io::load_cube(cube_path);
  const Strategy strategy = strategy_from_name(j["strategy"]);
  AbundanceMatrix pgt = io::read_abundance_csv(j["pgt"].get<std::string>());
  pgt.validate(1e-3);
  AbundanceMatrix gt_s = io::read_abundance_csv(j["gt_abundances"].get<std::string>());
  gt_s.validate(1e-3);
  EndmemberMatrix gt_a = io::read_endmember_csv(j["gt_endmembers"].get<std::string>());
  std::optional<AbundanceMatrix> prime_pgt;
  if (j.contains("prime_pgt"))
    prime_pgt = load_external_pgt(j["prime_pgt"].get<std::string>(),
                                  pgt.sources(), cube.pixels());

  std::vector<metrics::EvalReport> rows;
  for (int trial = 0; trial < n; ++trial) {
    CommonArgs trial_common = common;
    trial_common.seed = common.seed + static_cast<std::uint64_t>(trial);
    TrainConfig cfg = parse_train_config(
        trial_common, j.contains("train") ? j["train"] : json());
    TrainResult result =
        run_strategy(strategy, cube, &pgt, prime_pgt ? &*prime_pgt : nullptr,
                     "", cfg);
    rows.push_back(metrics::evaluate(gt_s, estimate_abundances(result.model, cube),
                                     gt_a, extract_endmembers(result.model)));
  }

  auto stat = [&](auto pick) {
    double mean = 0.0, var = 0.0;
    for (const auto& r : rows) mean += pick(r);
    mean /= rows.size();
    for (const auto& r : rows) var += std::pow(pick(r) - mean, 2);
    var /= rows.size();
    return std::pair<double, double>(mean, var);
  };

  std::ofstream f(manifest.output("trials.csv"));
  if (!f) throw DataError("cannot open trials.csv for writing");
  f << "trial,armse,aaad,aaid,asad,asid\n";
  char buf[160];
  for (int i = 0; i < n; ++i) {
    const auto& r = rows[i];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g", i,
                  r.armse, r.aaad, r.aaid, r.asad, r.asid);
    f << buf << '\n';
  }
  const auto m_armse = stat([](const auto& r) { return r.armse; });
  const auto m_aaad = stat([](const auto& r) { return r.aaad; });
  const auto m_aaid = stat([](const auto& r) { return r.aaid; });
  const auto m_asad = stat([](const auto& r) { return r.asad; });
  const auto m_asid = stat([](const auto& r) { return r.asid; });
  std::snprintf(buf, sizeof(buf), "mean,%.17g,%.17g,%.17g,%.17g,%.17g",
                m_armse.first, m_aaad.first, m_aaid.first, m_asad.first,
                m_asid.first);
  f << buf << '\n';
  std::snprintf(buf, sizeof(buf), "variance,%.17g,%.17g,%.17g,%.17g,%.17g",
                m_armse.second, m_aaad.second, m_aaid.second, m_asad.second,
                m_asid.second);
  f << buf << '\n';
  if (!f) throw DataError("write failed: trials.csv");
  f.close();
  manifest.finish({{"trials", n}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided encoder-decoder hyperspectral unmixing"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--seed", common.seed, "Root seed for all randomness");
  app.add_option("--config", common.config, "JSON configuration file");
  app.add_option("--out", common.out, "Output directory");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a simulated dataset");

  auto* pgt_cmd = app.add_subcommand("pgt", "Cluster pixels into a one-hot pseudo-ground truth");
  std::string pgt_cube;
  int pgt_sources = 0;
  pgt_cmd->add_option("--cube", pgt_cube, "Input cube file")->required();
  pgt_cmd->add_option("--sources", pgt_sources, "Number of sources K")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model on a cube");
  std::string train_cube, train_strategy, train_pgt, train_prime_pgt, train_init;
  train_cmd->add_option("--cube", train_cube, "Input cube file")->required();
  train_cmd->add_option("--strategy", train_strategy,
                        "gauss | gauss_extended | blind | prime")->required();
  train_cmd->add_option("--pgt", train_pgt, "Pseudo-ground-truth CSV (initializer)");
  train_cmd->add_option("--prime-pgt", train_prime_pgt,
                        "External abundance CSV for the prime variant");
  train_cmd->add_option("--init", train_init, "Pretrained checkpoint directory");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
  std::string eval_model, eval_cube, eval_gt_s, eval_gt_a;
  eval_cmd->add_option("--model", eval_model, "Checkpoint directory")->required();
  eval_cmd->add_option("--cube", eval_cube, "Input cube file")->required();
  eval_cmd->add_option("--gt-abundances", eval_gt_s, "Ground-truth abundance CSV")->required();
  eval_cmd->add_option("--gt-endmembers", eval_gt_a, "Ground-truth endmember CSV")->required();

  auto* trials_cmd = app.add_subcommand("trials", "Repeat train+eval with incremented seeds");
  int trials_n = 5;
  trials_cmd->add_option("-n,--trials", trials_n, "Number of trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) cmd_synth(common);
    else if (pgt_cmd->parsed()) cmd_pgt(common, pgt_cube, pgt_sources);
    else if (train_cmd->parsed())
      cmd_train(common, train_cube, train_strategy, train_pgt, train_prime_pgt,
                train_init);
    else if (eval_cmd->parsed())
      cmd_eval(common, eval_model, eval_cube, eval_gt_s, eval_gt_a);
    else if (trials_cmd->parsed()) cmd_trials(common, trials_n);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
