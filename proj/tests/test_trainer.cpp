#include <doctest.h>

#include <cmath>

#include "gauss/metrics.hpp"
#include "gauss/pgt.hpp"
#include "gauss/synth.hpp"
#include "gauss/trainer.hpp"

using namespace gauss;

namespace {

struct Fixture {
  HsiCube cube;
  AbundanceMatrix gt_abundances;
  EndmemberMatrix endmembers;
};

// Small synthetic scene: structured abundances mixed with well-separated
// smooth spectra.
Fixture make_scene(int side, int bands, int sources, std::uint64_t seed,
                   double pure_fraction = 0.3) {
  synth::SynthConfig cfg;
  cfg.width = side;
  cfg.height = side;
  cfg.sources = sources;
  cfg.tile = side / 4;
  cfg.superpixel = 3;
  cfg.pure_tile_fraction = pure_fraction;
  cfg.smoothing_passes = 1;
  cfg.seed = seed;

  Fixture fx;
  synth::AbundanceField field = synth::generate_abundances(cfg);
  fx.gt_abundances = field.matrix;

  fx.endmembers.values.resize(bands, sources);
  for (int k = 0; k < sources; ++k) {
    for (int b = 0; b < bands; ++b) {
      const double x = static_cast<double>(b) / (bands - 1);
      const double center = (k + 0.5) / sources;
      fx.endmembers.values(b, k) =
          0.15 + 0.8 * std::exp(-std::pow((x - center) / 0.18, 2));
    }
  }
  SpectraMatrix y = synth::mix_lmm(fx.endmembers, fx.gt_abundances, std::nullopt, seed);
  fx.cube = matrix_to_cube(y, side, side);
  return fx;
}

TrainConfig desk_config(std::uint64_t seed, int epochs = 25) {
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.epochs_per_stage = epochs;
  cfg.seed = seed;
  return cfg;
}

AbundanceMatrix kmeans_pgt(const HsiCube& cube, int sources, std::uint64_t seed) {
  const KMeansResult r = kmeans(cube_to_matrix(cube), sources, seed);
  return one_hot_pseudo_gt(r.labels, sources);
}

double smoothed_window_max_increase(const std::vector<double>& losses, int window) {
  // Largest increase between consecutive `window`-sized mean windows.
  double worst = -1e300;
  for (std::size_t i = 0; i + 2 * window <= losses.size(); ++i) {
    double a = 0.0, b = 0.0;
    for (int k = 0; k < window; ++k) {
      a += losses[i + k];
      b += losses[i + window + k];
    }
    worst = std::max(worst, (b - a) / window);
  }
  return worst;
}

}  // namespace

TEST_CASE("approximation stage learns a constant scene almost exactly") {
  HsiCube cube(8, 8, 12);
  for (auto& v : cube.data) v = 0.6;
  GaussModel model = build_model(12, 2, 5);
  AbundanceMatrix pgt = kmeans_pgt(cube, 2, 5);
  TrainConfig cfg = desk_config(5);
  // 64 pixels give few steps per epoch; smaller batches and a faster rate
  // keep the 25-epoch budget meaningful.
  cfg.batch_size = 8;
  cfg.adam.lr = 5e-3;
  TrainReport report = train_gauss(model, cube, pgt, cfg);
  CHECK(report.final_loss("an") < 1e-3);
}

TEST_CASE("unmixing stage classifies separable spectra against the pseudo-ground truth") {
  // Two spectrally distinct materials laid out in halves.
  const int side = 10, bands = 32;
  HsiCube cube(side, side, bands);
  Rng rng(3);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const bool first = c < side / 2;
      for (int b = 0; b < bands; ++b) {
        const double base = first ? 0.2 + 0.5 * b / bands : 0.8 - 0.5 * b / bands;
        cube.at(r, c, b) = std::max(base + 0.01 * rng.normal(), 0.0);
      }
    }
  }
  GaussModel model = build_model(bands, 2, 7);
  AbundanceMatrix pgt = kmeans_pgt(cube, 2, 7);
  TrainConfig cfg = desk_config(7);
  cfg.batch_size = 8;
  cfg.adam.lr = 5e-3;
  TrainReport report = train_gauss(model, cube, pgt, cfg);
  (void)report;

  const AbundanceMatrix est = estimate_abundances(model, cube);
  int agree = 0;
  for (int j = 0; j < est.pixels(); ++j) {
    int got, want;
    est.values.col(j).maxCoeff(&got);
    pgt.values.col(j).maxCoeff(&want);
    agree += (got == want);
  }
  CHECK(agree >= 95);
}

TEST_CASE("initializer stage losses trend downward") {
  Fixture fx = make_scene(12, 16, 3, 11);
  GaussModel model = build_model(16, 3, 11);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 11);
  TrainReport report = train_gauss(model, fx.cube, pgt, desk_config(11));
  REQUIRE(report.stages.size() == 3);
  for (const StageCurve& stage : report.stages) {
    CHECK(smoothed_window_max_increase(stage.losses, 5) <= 1e-4);
  }
}

TEST_CASE("training is deterministic and reports honest final losses") {
  Fixture fx = make_scene(8, 16, 3, 13);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 13);

  GaussModel m1 = build_model(16, 3, 13);
  GaussModel m2 = build_model(16, 3, 13);
  TrainConfig cfg = desk_config(13, 6);
  TrainReport r1 = train_gauss(m1, fx.cube, pgt, cfg);
  TrainReport r2 = train_gauss(m2, fx.cube, pgt, cfg);
  REQUIRE(r1.stages.size() == r2.stages.size());
  for (std::size_t s = 0; s < r1.stages.size(); ++s)
    CHECK(r1.stages[s].losses == r2.stages[s].losses);
  CHECK(hash_model(m1).an == hash_model(m2).an);
  CHECK(hash_model(m1).un == hash_model(m2).un);
  CHECK(hash_model(m1).mn == hash_model(m2).mn);

  // The recorded mixing loss must equal a fresh full-dataset evaluation.
  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(fx.cube);
  const MatrixXd smoothed = nn::predict(m1.an, nbhd.values);
  const MatrixXd reference = smoothed.cwiseMax(kLogEps);
  const MatrixXd reconstructed =
      nn::predict(m1.mn, nn::predict(m1.un, smoothed));
  CHECK(r1.final_loss("mn") ==
        doctest::Approx(nn::loss_psid(reference, reconstructed)).epsilon(1e-9));

  // Constraint slack seen during the run.
  CHECK(r1.max_asc_error <= 1e-9);
  CHECK(r1.min_abundance >= 0.0);
}

TEST_CASE("stage boundaries freeze what they claim to freeze") {
  Fixture fx = make_scene(8, 16, 3, 17);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 17);
  GaussModel model = build_model(16, 3, 17);
  TrainConfig cfg = desk_config(17, 4);
  TrainReport report = train_gauss(model, fx.cube, pgt, cfg);

  // Initializer: the approximation network only changes in its own stage,
  // the mixing network only in the last.
  REQUIRE(report.stages.size() == 3);
  const NetHashes& after_an = report.stages[0].after;
  const NetHashes& after_un = report.stages[1].after;
  const NetHashes& after_mn = report.stages[2].after;
  CHECK(after_an.an != report.initial.an);
  CHECK(after_an.un == report.initial.un);
  CHECK(after_an.mn == report.initial.mn);
  CHECK(after_un.an == after_an.an);
  CHECK(after_un.un != after_an.un);
  CHECK(after_un.mn == after_an.mn);
  CHECK(after_mn.an == after_an.an);
  CHECK(after_mn.un == after_un.un);
  CHECK(after_mn.mn != after_an.mn);

  // Blind: encoder phase leaves the mixing network bit-identical; the
  // approximation network never moves again.
  TrainReport blind = train_blind(model, fx.cube, cfg);
  REQUIRE(blind.stages.size() == 2);
  CHECK(blind.stages[0].name == "blind_encoder");
  CHECK(blind.stages[0].after.mn == blind.initial.mn);
  CHECK(blind.stages[0].after.un != blind.initial.un);
  CHECK(blind.stages[0].after.an == blind.initial.an);
  CHECK(blind.stages[1].after.mn != blind.initial.mn);
  CHECK(blind.stages[1].after.un == blind.stages[0].after.un);
  CHECK(blind.stages[1].after.an == blind.initial.an);
}

TEST_CASE("blind fine-tuning does not worsen the reconstruction objective") {
  Fixture fx = make_scene(12, 16, 3, 19);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 19);
  GaussModel model = build_model(16, 3, 19);
  TrainConfig cfg = desk_config(19);
  train_gauss(model, fx.cube, pgt, cfg);

  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(fx.cube);
  const MatrixXd smoothed = nn::predict(model.an, nbhd.values);
  const MatrixXd reference = smoothed.cwiseMax(kLogEps);
  auto end_to_end = [&](const GaussModel& m) {
    return nn::loss_psid(reference,
                         nn::predict(m.mn, nn::predict(m.un, smoothed)));
  };
  const double before = end_to_end(model);
  TrainReport blind = train_blind(model, fx.cube, cfg);
  const double after = end_to_end(model);
  CHECK(after <= before + 1e-12);
  CHECK(blind.stages[0].losses.size() == static_cast<std::size_t>(cfg.epochs_per_stage));
  CHECK(blind.stages[1].losses.size() == static_cast<std::size_t>(cfg.epochs_per_stage));
}

TEST_CASE("blind training requires a pretrained model") {
  Fixture fx = make_scene(8, 16, 3, 23);
  GaussModel model = build_model(16, 3, 23);
  CHECK_THROWS_AS(train_blind(model, fx.cube, desk_config(23, 2)), DataError);
  AbundanceMatrix ext = kmeans_pgt(fx.cube, 3, 23);
  CHECK_THROWS_AS(train_prime(model, fx.cube, ext, desk_config(23, 2)), DataError);
}

TEST_CASE("oracle re-supervision recovers the true abundances") {
  Fixture fx = make_scene(32, 50, 3, 13, 0.4);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 13);
  GaussModel model = build_model(50, 3, 13);
  TrainConfig cfg = desk_config(13);
  train_gauss(model, fx.cube, pgt, cfg);
  train_prime(model, fx.cube, fx.gt_abundances, cfg);

  const AbundanceMatrix est = estimate_abundances(model, fx.cube);
  const EndmemberMatrix est_a = extract_endmembers(model);
  const metrics::EvalReport r =
      metrics::evaluate(fx.gt_abundances, est, fx.endmembers, est_a);
  CHECK(r.armse <= 0.05);
}

TEST_CASE("re-supervising with the original targets is the initializer tail") {
  Fixture fx = make_scene(8, 16, 3, 31);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 31);
  GaussModel model = build_model(16, 3, 31);
  // Pretrain until the unmixing output actually tracks the pseudo-ground
  // truth; row alignment is then the identity and the reduction is exact.
  TrainConfig pre_cfg = desk_config(31);
  pre_cfg.batch_size = 8;
  pre_cfg.adam.lr = 5e-3;
  train_gauss(model, fx.cube, pgt, pre_cfg);
  TrainConfig cfg = desk_config(31, 5);

  GaussModel via_prime = model;
  GaussModel via_tail = model;
  TrainReport r_prime = train_prime(via_prime, fx.cube, pgt, cfg);
  TrainReport r_tail = detail::run_unmix_mix_schedule(via_tail, fx.cube, pgt, cfg);
  REQUIRE(r_prime.stages.size() == r_tail.stages.size());
  for (std::size_t s = 0; s < r_prime.stages.size(); ++s)
    CHECK(r_prime.stages[s].losses == r_tail.stages[s].losses);
  CHECK(hash_model(via_prime).un == hash_model(via_tail).un);
  CHECK(hash_model(via_prime).mn == hash_model(via_tail).mn);
  CHECK(r_prime.stages[0].losses.size() + r_prime.stages[1].losses.size() ==
        static_cast<std::size_t>(2 * cfg.epochs_per_stage));
}

TEST_CASE("re-supervision aligns external source order to the model") {
  Fixture fx = make_scene(8, 16, 3, 37);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 37);
  GaussModel model = build_model(16, 3, 37);
  TrainConfig cfg = desk_config(37, 5);
  train_gauss(model, fx.cube, pgt, cfg);

  AbundanceMatrix shuffled;
  shuffled.values.resize(3, pgt.pixels());
  shuffled.values.row(0) = pgt.values.row(2);
  shuffled.values.row(1) = pgt.values.row(0);
  shuffled.values.row(2) = pgt.values.row(1);

  GaussModel m_plain = model;
  GaussModel m_shuffled = model;
  TrainReport r_plain = train_prime(m_plain, fx.cube, pgt, cfg);
  TrainReport r_shuffled = train_prime(m_shuffled, fx.cube, shuffled, cfg);
  for (std::size_t s = 0; s < r_plain.stages.size(); ++s)
    CHECK(r_plain.stages[s].losses == r_shuffled.stages[s].losses);
}

TEST_CASE("extended initializer doubles the schedule and keeps improving") {
  Fixture fx = make_scene(8, 16, 3, 41);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 41);
  GaussModel model = build_model(16, 3, 41);
  TrainConfig cfg = desk_config(41, 6);
  TrainReport report = train_gauss_extended(model, fx.cube, pgt, cfg);
  REQUIRE(report.stages.size() == 6);
  std::size_t total = 0;
  for (const StageCurve& s : report.stages) total += s.losses.size();
  CHECK(total == static_cast<std::size_t>(6 * cfg.epochs_per_stage));
  CHECK(report.stages[3].name == "an_2");
  // Second pass ends no worse than the first on the same objective.
  CHECK(report.final_loss("an_2") <= report.stages[0].losses.back() + 1e-9);

  GaussModel again = build_model(16, 3, 41);
  TrainReport replay = train_gauss_extended(again, fx.cube, pgt, cfg);
  for (std::size_t s = 0; s < report.stages.size(); ++s)
    CHECK(report.stages[s].losses == replay.stages[s].losses);
}

TEST_CASE("mixing stage can reconstruct raw pixels instead") {
  Fixture fx = make_scene(8, 16, 3, 43);
  AbundanceMatrix pgt = kmeans_pgt(fx.cube, 3, 43);
  GaussModel model = build_model(16, 3, 43);
  TrainConfig cfg = desk_config(43, 4);
  cfg.mn_loss = MnLoss::kMseRaw;
  TrainReport report = train_gauss(model, fx.cube, pgt, cfg);

  const MatrixXd y = cube_to_matrix(fx.cube).values;
  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(fx.cube);
  const MatrixXd reconstructed = nn::predict(
      model.mn, nn::predict(model.un, nn::predict(model.an, nbhd.values)));
  CHECK(report.final_loss("mn") ==
        doctest::Approx(nn::loss_mse(y, reconstructed)).epsilon(1e-9));
}

TEST_CASE("dimension mismatches are rejected up front") {
  Fixture fx = make_scene(8, 16, 3, 47);
  GaussModel model = build_model(16, 3, 47);
  AbundanceMatrix wrong_k = kmeans_pgt(fx.cube, 4, 47);
  CHECK_THROWS_AS(train_gauss(model, fx.cube, wrong_k, desk_config(47, 2)), DataError);
  AbundanceMatrix wrong_n;
  wrong_n.values = MatrixXd::Constant(3, 10, 1.0 / 3);
  CHECK_THROWS_AS(train_gauss(model, fx.cube, wrong_n, desk_config(47, 2)), DataError);
}
