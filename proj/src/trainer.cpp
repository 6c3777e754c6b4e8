#include "gauss/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "gauss/metrics.hpp"

namespace gauss {

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGauss: return "gauss";
    case Strategy::kGaussExtended: return "gauss_extended";
    case Strategy::kBlind: return "blind";
    case Strategy::kPrime: return "prime";
  }
  throw DataError("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "gauss") return Strategy::kGauss;
  if (name == "gauss_extended") return Strategy::kGaussExtended;
  if (name == "blind") return Strategy::kBlind;
  if (name == "prime") return Strategy::kPrime;
  throw DataError("unknown strategy: " + name +
                  " (expected gauss, gauss_extended, blind or prime)");
}

double TrainReport::final_loss(const std::string& stage) const {
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    if (it->name == stage && !it->losses.empty()) return it->losses.back();
  }
  throw DataError("no such stage in report: " + stage);
}

namespace {

std::uint64_t fnv1a(std::uint64_t hash, const double* data, std::size_t count) {
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < count * sizeof(double); ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t hash_network(const nn::Network& net) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const nn::DenseLayer& layer : net) {
    hash = fnv1a(hash, layer.weights.data(),
                 static_cast<std::size_t>(layer.weights.size()));
    if (layer.bias)
      hash = fnv1a(hash, layer.bias->data(),
                   static_cast<std::size_t>(layer.bias->size()));
  }
  return hash;
}

}  // namespace

NetHashes hash_model(const GaussModel& model) {
  return {hash_network(model.an), hash_network(model.un),
          hash_network(model.mn)};
}

namespace {

enum class LossKind { kSmooth, kCe, kMse, kPsid };

nn::LossValueGrad eval_loss_grad(LossKind kind, const MatrixXd& target,
                                 const MatrixXd& output) {
  switch (kind) {
    case LossKind::kSmooth: return nn::loss_smooth_grad(target, output);
    case LossKind::kCe: return nn::loss_ce_grad(target, output);
    case LossKind::kMse: return nn::loss_mse_grad(target, output);
    case LossKind::kPsid: return nn::loss_psid_grad(target, output);
  }
  throw DataError("unknown loss kind");
}

double eval_loss(LossKind kind, const MatrixXd& target, const MatrixXd& output) {
  switch (kind) {
    case LossKind::kSmooth: return nn::loss_smooth(target, output);
    case LossKind::kCe: return nn::loss_ce(target, output);
    case LossKind::kMse: return nn::loss_mse(target, output);
    case LossKind::kPsid: return nn::loss_psid(target, output);
  }
  throw DataError("unknown loss kind");
}

struct ConstraintStats {
  double max_asc_error = 0.0;
  double min_abundance = 1.0;
};

void check_abundance_batch(const MatrixXd& abundances, const std::string& stage,
                           ConstraintStats& stats) {
  for (int j = 0; j < abundances.cols(); ++j) {
    const double dev = std::abs(abundances.col(j).sum() - 1.0);
    stats.max_asc_error = std::max(stats.max_asc_error, dev);
    if (dev > 1e-9)
      throw NumericError("stage " + stage + ": abundance column sum off by " +
                         std::to_string(dev));
  }
  const double lo = abundances.minCoeff();
  stats.min_abundance = std::min(stats.min_abundance, lo);
  if (lo < 0.0)
    throw NumericError("stage " + stage + ": negative abundance emitted");
}

struct StageSpec {
  std::string name;
  nn::Network* net = nullptr;
  int trainable_prefix = 0;  // layers past this index get zero gradients
  const MatrixXd* inputs = nullptr;
  const MatrixXd* targets = nullptr;  // column-aligned with inputs
  LossKind loss = LossKind::kSmooth;
  std::uint64_t shuffle_label = 0;
  int abundance_layer = -1;  // cache index whose activation is an abundance
};

StageCurve run_stage(const StageSpec& spec, const TrainConfig& cfg,
                     ConstraintStats& stats) {
  nn::Network& net = *spec.net;
  const MatrixXd& inputs = *spec.inputs;
  const MatrixXd& targets = *spec.targets;
  const int n = static_cast<int>(inputs.cols());

  Rng shuffle_rng(derive_seed(cfg.seed, spec.shuffle_label));
  nn::Adam optimizer(net, cfg.adam);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  StageCurve curve;
  curve.name = spec.name;
  curve.losses.reserve(cfg.epochs_per_stage);

  for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
    shuffle_rng.shuffle(order);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      MatrixXd x(inputs.rows(), b), t(targets.rows(), b);
      for (int i = 0; i < b; ++i) {
        x.col(i) = inputs.col(order[start + i]);
        t.col(i) = targets.col(order[start + i]);
      }
      nn::ForwardCache cache = nn::forward(net, x);
      if (spec.abundance_layer >= 0)
        check_abundance_batch(cache.activations[spec.abundance_layer],
                              spec.name, stats);
      nn::LossValueGrad lg = eval_loss_grad(spec.loss, t, cache.output());
      if (!std::isfinite(lg.value))
        throw NumericError("stage " + spec.name + ": non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(start / cfg.batch_size));
      nn::Gradients grads = nn::backward(net, cache, lg.grad);
      for (std::size_t l = spec.trainable_prefix; l < net.size(); ++l) {
        grads.weights[l].setZero();
        if (net[l].bias) grads.biases[l].setZero();
      }
      optimizer.step(net, grads);
    }
    const double full = eval_loss(spec.loss, targets, nn::predict(net, inputs));
    if (!std::isfinite(full))
      throw NumericError("stage " + spec.name + ": non-finite loss after epoch " +
                         std::to_string(epoch));
    curve.losses.push_back(full);
  }
  return curve;
}

// Reference spectra for the reconstruction divergence: the smoothed pixels,
// floored so every column keeps a positive 1-norm (the approximation
// network's output layer is linear and may dip below zero).
MatrixXd psid_reference(const MatrixXd& smoothed) {
  return smoothed.cwiseMax(kLogEps);
}

void check_pgt(const GaussModel& model, const HsiCube& cube,
               const AbundanceMatrix& pgt, const char* who) {
  if (pgt.sources() != model.sources)
    throw DataError(std::string(who) + ": pseudo-ground truth has " +
                    std::to_string(pgt.sources()) + " sources, model has " +
                    std::to_string(model.sources));
  if (pgt.pixels() != cube.pixels())
    throw DataError(std::string(who) + ": pseudo-ground truth has " +
                    std::to_string(pgt.pixels()) + " pixels, cube has " +
                    std::to_string(cube.pixels()));
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void append_report(TrainReport& into, const TrainReport& from,
                   const std::string& suffix = "") {
  for (const StageCurve& c : from.stages) {
    StageCurve copy = c;
    copy.name += suffix;
    into.stages.push_back(std::move(copy));
  }
  into.wall_seconds += from.wall_seconds;
  into.max_asc_error = std::max(into.max_asc_error, from.max_asc_error);
  into.min_abundance = std::min(into.min_abundance, from.min_abundance);
}

}  // namespace

namespace detail {

TrainReport run_unmix_mix_schedule(GaussModel& model, const HsiCube& cube,
                                   const AbundanceMatrix& un_target,
                                   const TrainConfig& cfg) {
  cfg.validate();
  check_pgt(model, cube, un_target, "unmix_mix_schedule");
  Timer timer;
  TrainReport report;
  report.initial = hash_model(model);
  ConstraintStats stats;

  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  const MatrixXd y = cube_to_matrix(cube).values;
  const MatrixXd smoothed = nn::predict(model.an, nbhd.values);

  StageSpec un_spec;
  un_spec.name = "un";
  un_spec.net = &model.un;
  un_spec.trainable_prefix = static_cast<int>(model.un.size());
  un_spec.inputs = &smoothed;
  un_spec.targets = &un_target.values;
  un_spec.loss = LossKind::kCe;
  un_spec.shuffle_label = seed_label::kStageUn;
  un_spec.abundance_layer = static_cast<int>(model.un.size()) - 1;
  report.stages.push_back(run_stage(un_spec, cfg, stats));
  report.stages.back().after = hash_model(model);

  const MatrixXd abundances = nn::predict(model.un, smoothed);
  const MatrixXd reference =
      cfg.mn_loss == MnLoss::kPsid ? psid_reference(smoothed) : y;
  StageSpec mn_spec;
  mn_spec.name = "mn";
  mn_spec.net = &model.mn;
  mn_spec.trainable_prefix = static_cast<int>(model.mn.size());
  mn_spec.inputs = &abundances;
  mn_spec.targets = &reference;
  mn_spec.loss = cfg.mn_loss == MnLoss::kPsid ? LossKind::kPsid : LossKind::kMse;
  mn_spec.shuffle_label = seed_label::kStageMn;
  report.stages.push_back(run_stage(mn_spec, cfg, stats));
  report.stages.back().after = hash_model(model);

  report.max_asc_error = stats.max_asc_error;
  report.min_abundance = stats.min_abundance;
  report.wall_seconds = timer.seconds();
  return report;
}

}  // namespace detail

namespace {

TrainReport train_gauss_once(GaussModel& model, const HsiCube& cube,
                             const AbundanceMatrix& pgt, const TrainConfig& cfg) {
  cfg.validate();
  cube.validate();
  check_pgt(model, cube, pgt, "train_gauss");
  Timer timer;
  TrainReport report;
  report.initial = hash_model(model);
  ConstraintStats stats;

  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  const MatrixXd y = cube_to_matrix(cube).values;

  StageSpec an_spec;
  an_spec.name = "an";
  an_spec.net = &model.an;
  an_spec.trainable_prefix = static_cast<int>(model.an.size());
  an_spec.inputs = &nbhd.values;
  an_spec.targets = &y;
  an_spec.loss = LossKind::kSmooth;
  an_spec.shuffle_label = seed_label::kStageAn;
  report.stages.push_back(run_stage(an_spec, cfg, stats));
  report.stages.back().after = hash_model(model);
  report.max_asc_error = stats.max_asc_error;
  report.min_abundance = stats.min_abundance;

  append_report(report, detail::run_unmix_mix_schedule(model, cube, pgt, cfg));

  model.pretrained = true;
  report.wall_seconds = timer.seconds();
  return report;
}

}  // namespace

TrainReport train_gauss(GaussModel& model, const HsiCube& cube,
                        const AbundanceMatrix& pgt, const TrainConfig& cfg) {
  return train_gauss_once(model, cube, pgt, cfg);
}

TrainReport train_gauss_extended(GaussModel& model, const HsiCube& cube,
                                 const AbundanceMatrix& pgt,
                                 const TrainConfig& cfg) {
  TrainReport report = train_gauss_once(model, cube, pgt, cfg);
  append_report(report, train_gauss_once(model, cube, pgt, cfg), "_2");
  return report;
}

TrainReport train_blind(GaussModel& model, const HsiCube& cube,
                        const TrainConfig& cfg) {
  cfg.validate();
  cube.validate();
  if (!model.pretrained)
    throw DataError("train_blind: model has not been pretrained by the "
                    "initializer schedule");
  Timer timer;
  TrainReport report;
  report.initial = hash_model(model);
  ConstraintStats stats;

  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  const MatrixXd smoothed = nn::predict(model.an, nbhd.values);
  const MatrixXd reference = psid_reference(smoothed);

  // Encoder phase: gradients flow through the frozen mixing network into
  // the unmixing network.
  nn::Network combined = model.un;
  combined.insert(combined.end(), model.mn.begin(), model.mn.end());
  StageSpec enc_spec;
  enc_spec.name = "blind_encoder";
  enc_spec.net = &combined;
  enc_spec.trainable_prefix = static_cast<int>(model.un.size());
  enc_spec.inputs = &smoothed;
  enc_spec.targets = &reference;
  enc_spec.loss = LossKind::kPsid;
  enc_spec.shuffle_label = seed_label::kStageBlindEncoder;
  enc_spec.abundance_layer = static_cast<int>(model.un.size()) - 1;
  report.stages.push_back(run_stage(enc_spec, cfg, stats));
  std::copy(combined.begin(), combined.begin() + model.un.size(),
            model.un.begin());
  report.stages.back().after = hash_model(model);

  // Decoder phase: abundances fixed, mixing network alone.
  const MatrixXd abundances = nn::predict(model.un, smoothed);
  StageSpec dec_spec;
  dec_spec.name = "blind_decoder";
  dec_spec.net = &model.mn;
  dec_spec.trainable_prefix = static_cast<int>(model.mn.size());
  dec_spec.inputs = &abundances;
  dec_spec.targets = &reference;
  dec_spec.loss = LossKind::kPsid;
  dec_spec.shuffle_label = seed_label::kStageBlindDecoder;
  report.stages.push_back(run_stage(dec_spec, cfg, stats));
  report.stages.back().after = hash_model(model);

  report.max_asc_error = stats.max_asc_error;
  report.min_abundance = stats.min_abundance;
  report.wall_seconds = timer.seconds();
  return report;
}

namespace {

// Pearson correlation across pixels; zero for degenerate rows.
double row_correlation(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  Eigen::RowVectorXd ca = a.array() - ma;
  Eigen::RowVectorXd cb = b.array() - mb;
  const double denom = ca.norm() * cb.norm();
  if (denom == 0.0) return 0.0;
  return ca.dot(cb) / denom;
}

// External algorithms order their sources arbitrarily; match their rows to
// this model's cluster order by best total correlation against the current
// unmixing output.
AbundanceMatrix align_external_rows(const AbundanceMatrix& external,
                                    const MatrixXd& current) {
  const int k = external.sources();
  MatrixXd cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      cost(i, j) = -row_correlation(current.row(i), external.values.row(j));
  const std::vector<int> perm = metrics::solve_assignment(cost);
  AbundanceMatrix aligned;
  aligned.values.resize(k, external.pixels());
  for (int i = 0; i < k; ++i)
    aligned.values.row(i) = external.values.row(perm[i]);
  return aligned;
}

}  // namespace

TrainReport train_prime(GaussModel& model, const HsiCube& cube,
                        const AbundanceMatrix& external_pgt,
                        const TrainConfig& cfg) {
  cfg.validate();
  cube.validate();
  if (!model.pretrained)
    throw DataError("train_prime: model has not been pretrained by the "
                    "initializer schedule");
  check_pgt(model, cube, external_pgt, "train_prime");
  external_pgt.validate(1e-3);

  const NeighborhoodMatrix nbhd = build_neighborhood_matrix(cube);
  const MatrixXd smoothed = nn::predict(model.an, nbhd.values);
  const AbundanceMatrix aligned =
      align_external_rows(external_pgt, nn::predict(model.un, smoothed));
  return detail::run_unmix_mix_schedule(model, cube, aligned, cfg);
}

}  // namespace gauss
