#pragma once

#include <string>
#include <vector>

#include "gauss/networks.hpp"

namespace gauss {

enum class Strategy { kGauss, kGaussExtended, kBlind, kPrime };
std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Objective used for the mixing-network stage of the initializer schedule.
// The reconstruction divergence against the smoothed pixels is the default;
// the mean squared error against the raw pixels is kept selectable.
enum class MnLoss { kPsid, kMseRaw };

struct TrainConfig {
  int batch_size = 32;
  int epochs_per_stage = 25;
  std::uint64_t seed = 0;
  nn::AdamParams adam;
  MnLoss mn_loss = MnLoss::kPsid;

  void validate() const {
    if (batch_size < 1) throw DataError("train: batch_size must be >= 1");
    if (epochs_per_stage < 1) throw DataError("train: epochs_per_stage must be >= 1");
  }
};

// Hash of every parameter byte of each sub-network; stage boundaries
// record these so freeze contracts are checkable after the fact.
struct NetHashes {
  std::uint64_t an = 0;
  std::uint64_t un = 0;
  std::uint64_t mn = 0;
};
NetHashes hash_model(const GaussModel& model);

struct StageCurve {
  std::string name;
  // losses[e] re-evaluates the stage objective on the full dataset with
  // the post-epoch weights.
  std::vector<double> losses;
  NetHashes after;  // model state when the stage finished
};

struct TrainReport {
  std::vector<StageCurve> stages;
  NetHashes initial;
  double wall_seconds = 0.0;
  // Worst constraint slack over every abundance batch emitted while
  // training: max |column sum - 1| and the smallest entry seen.
  double max_asc_error = 0.0;
  double min_abundance = 1.0;

  double final_loss(const std::string& stage) const;
};

// Initializer schedule: three sequential stages of cfg.epochs_per_stage
// epochs each. (1) approximation network alone against the true center
// pixels; (2) with it frozen, unmixing network against the pseudo-ground
// truth by cross-entropy; (3) with both frozen, mixing network against the
// smoothed pixels by reconstruction divergence. Marks the model pretrained.
TrainReport train_gauss(GaussModel& model, const HsiCube& cube,
                        const AbundanceMatrix& pgt, const TrainConfig& cfg);

// The initializer run twice back to back, for epoch parity with the
// two-phase variants.
TrainReport train_gauss_extended(GaussModel& model, const HsiCube& cube,
                                 const AbundanceMatrix& pgt, const TrainConfig& cfg);

// Blind fine-tuning of a pretrained model: the pseudo-ground truth is
// dropped, the unmixing and mixing networks are chained, and the
// reconstruction divergence drives first the unmixing network (mixing
// network frozen), then the mixing network (encoder frozen). The
// approximation network stays frozen throughout.
TrainReport train_blind(GaussModel& model, const HsiCube& cube,
                        const TrainConfig& cfg);

// Re-supervision of a pretrained model with an external abundance map:
// the unmixing and mixing stages of the initializer run again with the
// external abundances as the unmixing target. External rows are first
// permuted to this model's cluster order by best correlation against the
// current unmixing output (the source order of an external algorithm has
// no relation to ours).
TrainReport train_prime(GaussModel& model, const HsiCube& cube,
                        const AbundanceMatrix& external_pgt,
                        const TrainConfig& cfg);

namespace detail {
// The unmixing-then-mixing tail of the initializer, run on the model as it
// stands (approximation network frozen). Both the initializer and the
// re-supervised variant reduce to this with their respective targets.
TrainReport run_unmix_mix_schedule(GaussModel& model, const HsiCube& cube,
                                   const AbundanceMatrix& un_target,
                                   const TrainConfig& cfg);
}  // namespace detail

}  // namespace gauss
