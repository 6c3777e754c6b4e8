#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gauss/types.hpp"

namespace gauss::nn {

enum class Activation { kLinear, kRelu, kReluEps, kSoftmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Floor applied by relu_eps so downstream 1-norms stay positive.
inline constexpr double kReluEpsFloor = 1e-7;

// One fully connected layer: z = W x (+ b), a = activation(z).
struct DenseLayer {
  MatrixXd weights;          // out x in
  std::optional<VectorXd> bias;
  Activation activation = Activation::kLinear;

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

using Network = std::vector<DenseLayer>;

// Uniform Glorot initialization; bias (when present) starts at zero.
DenseLayer make_dense_layer(int in_dim, int out_dim, bool with_bias,
                            Activation activation, Rng& rng);

// Column-wise activations.
MatrixXd apply_activation(Activation a, const MatrixXd& z);

// Softmax of one column with max-subtraction stabilization.
VectorXd softmax(const VectorXd& z);

// Forward pass over a layer sequence, keeping what backward needs.
struct ForwardCache {
  std::vector<MatrixXd> inputs;       // input to each layer
  std::vector<MatrixXd> preacts;      // z of each layer
  std::vector<MatrixXd> activations;  // a of each layer
  const MatrixXd& output() const { return activations.back(); }
};

ForwardCache forward(const Network& net, const MatrixXd& x);

// Convenience: forward without cache.
MatrixXd predict(const Network& net, const MatrixXd& x);

// Gradients of a scalar loss with respect to every parameter, plus the
// gradient passed through to the network input.
struct Gradients {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;  // empty vector where the layer has no bias
  MatrixXd input;
};

// Reverse-mode pass. `output_grad` is dLoss/dOutput, shaped like the
// forward output. The softmax Jacobian is applied in full, so any loss
// composes with a softmax output layer (the softmax+cross-entropy pair in
// particular never touches the unstable 1/l_hat quotient alone).
Gradients backward(const Network& net, const ForwardCache& cache,
                   const MatrixXd& output_grad);

// --- Losses. N is the number of columns of the batch. ---

struct LossValueGrad {
  double value = 0.0;
  MatrixXd grad;  // with respect to the estimate argument
};

// (1/N) * ||target - estimate||_F^2
double loss_smooth(const MatrixXd& target, const MatrixXd& estimate);
LossValueGrad loss_smooth_grad(const MatrixXd& target, const MatrixXd& estimate);

// -(1/N) * sum_{j,k} [ l log l_hat + (1-l) log(1-l_hat) ], the per-class
// binary cross-entropy summed over classes. Estimates are clamped to
// [kLogEps, 1-kLogEps] inside the logs.
double loss_ce(const MatrixXd& target, const MatrixXd& estimate);
LossValueGrad loss_ce_grad(const MatrixXd& target, const MatrixXd& estimate);

// (1/(N*B)) * ||target - estimate||_F^2
double loss_mse(const MatrixXd& target, const MatrixXd& estimate);
LossValueGrad loss_mse_grad(const MatrixXd& target, const MatrixXd& estimate);

// Pixel spectral information divergence: columns are 1-norm normalized to
// probability vectors q and q_hat, then the symmetric KL divergence is
// summed over bands and averaged over columns. Both inputs must be
// non-negative with positive column sums; throws NumericError otherwise.
double loss_psid(const MatrixXd& reference, const MatrixXd& estimate);
LossValueGrad loss_psid_grad(const MatrixXd& reference, const MatrixXd& estimate);

// --- Adam ---

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Single-tensor Adam update with bias correction; step must already be
// incremented to the current step number (1 on the first call).
void adam_update(const AdamParams& hp, long step, MatrixXd& m, MatrixXd& v,
                 MatrixXd& param, const MatrixXd& grad);

// Optimizer state for one network: moment buffers shaped like every
// parameter and a shared step counter.
class Adam {
 public:
  Adam(const Network& net, AdamParams hp);

  // Applies one update from `grads` to `net`. The network must have the
  // same shapes the state was built for.
  void step(Network& net, const Gradients& grads);

  long steps_taken() const { return step_; }
  const AdamParams& params() const { return hp_; }

 private:
  AdamParams hp_;
  long step_ = 0;
  std::vector<MatrixXd> mw_, vw_;
  std::vector<MatrixXd> mb_, vb_;  // out x 1, empty where no bias
};

// --- Finite-difference gradient checking ---

using LossFn = std::function<LossValueGrad(const MatrixXd& output)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_layer = -1;
  bool worst_is_bias = false;
  int worst_index = -1;
  bool passed(double tol = 1e-4) const { return max_rel_err <= tol; }
};

// Central finite differences (step h) against backward() for every weight
// and bias. The relative error uses an absolute escape of 1e-8 so exactly
// zero gradients on dead paths compare clean.
GradCheckResult check_gradients(const Network& net, const MatrixXd& x,
                                const LossFn& loss, double h = 1e-4);

// --- Checkpoints ---
// One file: a JSON manifest line (dims, activations, bias flags, Adam
// hyperparameters, step) then all parameters as little-endian f64 in
// declaration order (per layer: weights row-major, then bias).
void save_network(const Network& net, const AdamParams& hp, long step,
                  const std::string& path);
struct LoadedNetwork {
  Network net;
  AdamParams adam;
  long step = 0;
};
LoadedNetwork load_network(const std::string& path);

}  // namespace gauss::nn
