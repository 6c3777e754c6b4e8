#include "gauss/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace gauss::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kReluEps: return "relu_eps";
    case Activation::kSoftmax: return "softmax";
  }
  throw DataError("unknown activation tag");
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "relu_eps") return Activation::kReluEps;
  if (name == "softmax") return Activation::kSoftmax;
  throw DataError("unknown activation name: " + name);
}

DenseLayer make_dense_layer(int in_dim, int out_dim, bool with_bias,
                            Activation activation, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0)
    throw DataError("dense layer dims must be positive");
  DenseLayer layer;
  layer.activation = activation;
  layer.weights.resize(out_dim, in_dim);
  const double limit = std::sqrt(6.0 / (in_dim + out_dim));
  for (int r = 0; r < out_dim; ++r)
    for (int c = 0; c < in_dim; ++c)
      layer.weights(r, c) = rng.uniform(-limit, limit);
  if (activation == Activation::kRelu || activation == Activation::kReluEps) {
    // Inputs to rectifier layers are non-negative throughout this
    // architecture, so a unit whose weight row leans negative starts dead
    // and, at the narrow widths used here, can leave a whole layer dead.
    // Normalizing the row sign keeps every unit initially responsive
    // without changing the magnitude distribution.
    for (int r = 0; r < out_dim; ++r)
      if (layer.weights.row(r).sum() < 0.0) layer.weights.row(r) *= -1.0;
  }
  if (with_bias) layer.bias = VectorXd::Zero(out_dim);
  return layer;
}

VectorXd softmax(const VectorXd& z) {
  if (!z.allFinite()) throw NumericError("softmax: non-finite input");
  VectorXd shifted = z.array() - z.maxCoeff();
  VectorXd e = shifted.array().exp();
  return e / e.sum();
}

MatrixXd apply_activation(Activation a, const MatrixXd& z) {
  switch (a) {
    case Activation::kLinear:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kReluEps:
      return z.cwiseMax(kReluEpsFloor);
    case Activation::kSoftmax: {
      MatrixXd out(z.rows(), z.cols());
      for (int j = 0; j < z.cols(); ++j) out.col(j) = softmax(z.col(j));
      return out;
    }
  }
  throw DataError("unknown activation tag");
}

ForwardCache forward(const Network& net, const MatrixXd& x) {
  if (net.empty()) throw DataError("forward: empty network");
  if (x.rows() != net.front().in_dim())
    throw DataError("forward: input has " + std::to_string(x.rows()) +
                    " rows, layer expects " +
                    std::to_string(net.front().in_dim()));
  ForwardCache cache;
  cache.inputs.reserve(net.size());
  cache.preacts.reserve(net.size());
  cache.activations.reserve(net.size());
  MatrixXd cur = x;
  for (const DenseLayer& layer : net) {
    if (cur.rows() != layer.in_dim())
      throw DataError("forward: layer input dim mismatch");
    cache.inputs.push_back(cur);
    MatrixXd z = layer.weights * cur;
    if (layer.bias) z.colwise() += *layer.bias;
    cache.preacts.push_back(z);
    cur = apply_activation(layer.activation, z);
    cache.activations.push_back(cur);
  }
  return cache;
}

MatrixXd predict(const Network& net, const MatrixXd& x) {
  return forward(net, x).output();
}

namespace {

// dLoss/dZ from dLoss/dA at one layer.
MatrixXd activation_backward(Activation a, const MatrixXd& z,
                             const MatrixXd& act, const MatrixXd& da) {
  switch (a) {
    case Activation::kLinear:
      return da;
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>() * da.array();
    case Activation::kReluEps:
      return (z.array() > kReluEpsFloor).cast<double>() * da.array();
    case Activation::kSoftmax: {
      // dz = a .* (da - <a, da>) column-wise: the full softmax Jacobian.
      MatrixXd dz(z.rows(), z.cols());
      for (int j = 0; j < z.cols(); ++j) {
        const double inner = act.col(j).dot(da.col(j));
        dz.col(j) = act.col(j).array() * (da.col(j).array() - inner);
      }
      return dz;
    }
  }
  throw DataError("unknown activation tag");
}

}  // namespace

Gradients backward(const Network& net, const ForwardCache& cache,
                   const MatrixXd& output_grad) {
  if (cache.activations.size() != net.size())
    throw DataError("backward: cache does not match network");
  Gradients g;
  g.weights.resize(net.size());
  g.biases.resize(net.size());
  MatrixXd da = output_grad;
  for (int l = static_cast<int>(net.size()) - 1; l >= 0; --l) {
    const DenseLayer& layer = net[l];
    MatrixXd dz = activation_backward(layer.activation, cache.preacts[l],
                                      cache.activations[l], da);
    g.weights[l] = dz * cache.inputs[l].transpose();
    if (layer.bias) g.biases[l] = dz.rowwise().sum();
    da = layer.weights.transpose() * dz;
  }
  g.input = std::move(da);
  return g;
}

// --- Losses ---

namespace {
int batch_cols(const MatrixXd& a, const MatrixXd& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError(std::string(who) + ": operand shapes differ");
  if (a.cols() == 0) throw DataError(std::string(who) + ": empty batch");
  return static_cast<int>(a.cols());
}
}  // namespace

double loss_smooth(const MatrixXd& target, const MatrixXd& estimate) {
  const int n = batch_cols(target, estimate, "loss_smooth");
  return (target - estimate).squaredNorm() / n;
}

LossValueGrad loss_smooth_grad(const MatrixXd& target, const MatrixXd& estimate) {
  const int n = batch_cols(target, estimate, "loss_smooth");
  LossValueGrad out;
  MatrixXd diff = estimate - target;
  out.value = diff.squaredNorm() / n;
  out.grad = (2.0 / n) * diff;
  return out;
}

double loss_ce(const MatrixXd& target, const MatrixXd& estimate) {
  return loss_ce_grad(target, estimate).value;
}

LossValueGrad loss_ce_grad(const MatrixXd& target, const MatrixXd& estimate) {
  const int n = batch_cols(target, estimate, "loss_ce");
  Eigen::ArrayXXd l = target.array();
  Eigen::ArrayXXd p = estimate.array().min(1.0 - kLogEps).max(kLogEps);
  LossValueGrad out;
  out.value = -(l * p.log() + (1.0 - l) * (1.0 - p).log()).sum() / n;
  // Where the clamp binds the loss is locally constant in the estimate.
  Eigen::ArrayXXd unclamped =
      (estimate.array() > kLogEps && estimate.array() < 1.0 - kLogEps)
          .cast<double>();
  out.grad = (unclamped * (-(l / p) + (1.0 - l) / (1.0 - p))).matrix() / n;
  return out;
}

double loss_mse(const MatrixXd& target, const MatrixXd& estimate) {
  const int n = batch_cols(target, estimate, "loss_mse");
  return (target - estimate).squaredNorm() / (n * target.rows());
}

LossValueGrad loss_mse_grad(const MatrixXd& target, const MatrixXd& estimate) {
  const int n = batch_cols(target, estimate, "loss_mse");
  LossValueGrad out;
  MatrixXd diff = estimate - target;
  const double scale = 1.0 / (static_cast<double>(n) * target.rows());
  out.value = diff.squaredNorm() * scale;
  out.grad = 2.0 * scale * diff;
  return out;
}

namespace {
void check_psid_operand(const MatrixXd& m, const char* side) {
  if ((m.array() < 0.0).any())
    throw NumericError(std::string("loss_psid: negative entry in ") + side);
  for (int j = 0; j < m.cols(); ++j) {
    if (!(m.col(j).sum() > 0.0))
      throw NumericError(std::string("loss_psid: column ") + std::to_string(j) +
                         " of " + side + " has zero 1-norm");
  }
}
}  // namespace

double loss_psid(const MatrixXd& reference, const MatrixXd& estimate) {
  const int n = batch_cols(reference, estimate, "loss_psid");
  check_psid_operand(reference, "reference");
  check_psid_operand(estimate, "estimate");
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    Eigen::ArrayXd q = (reference.col(j) / reference.col(j).sum()).array().max(kLogEps);
    Eigen::ArrayXd qh = (estimate.col(j) / estimate.col(j).sum()).array().max(kLogEps);
    Eigen::ArrayXd lr = (q / qh).log();
    total += (q * lr - qh * lr).sum();
  }
  return total / n;
}

LossValueGrad loss_psid_grad(const MatrixXd& reference, const MatrixXd& estimate) {
  const int n = batch_cols(reference, estimate, "loss_psid");
  check_psid_operand(reference, "reference");
  check_psid_operand(estimate, "estimate");
  LossValueGrad out;
  out.grad.resize(estimate.rows(), estimate.cols());
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    const double t = estimate.col(j).sum();
    Eigen::ArrayXd q = (reference.col(j) / reference.col(j).sum()).array().max(kLogEps);
    Eigen::ArrayXd qh_raw = (estimate.col(j) / t).array();
    Eigen::ArrayXd qh = qh_raw.max(kLogEps);
    Eigen::ArrayXd lr = (q / qh).log();
    total += (q * lr - qh * lr).sum();
    // d/dqh of [q log(q/qh) + qh log(qh/q)], then through qh = v/t. A
    // component pinned by the clamp contributes nothing.
    Eigen::ArrayXd u =
        (qh_raw > kLogEps).cast<double>() * (1.0 - lr - q / qh);
    const double inner = (qh_raw * u).sum();
    out.grad.col(j) = ((u - inner) / t).matrix();
  }
  out.value = total / n;
  out.grad /= n;
  return out;
}

// --- Adam ---

void adam_update(const AdamParams& hp, long step, MatrixXd& m, MatrixXd& v,
                 MatrixXd& param, const MatrixXd& grad) {
  m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
  v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  param.array() -= hp.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + hp.epsilon);
}

Adam::Adam(const Network& net, AdamParams hp) : hp_(hp) {
  mw_.reserve(net.size());
  for (const DenseLayer& layer : net) {
    mw_.push_back(MatrixXd::Zero(layer.out_dim(), layer.in_dim()));
    vw_.push_back(MatrixXd::Zero(layer.out_dim(), layer.in_dim()));
    const int brows = layer.bias ? layer.out_dim() : 0;
    mb_.push_back(MatrixXd::Zero(brows, brows ? 1 : 0));
    vb_.push_back(MatrixXd::Zero(brows, brows ? 1 : 0));
  }
}

void Adam::step(Network& net, const Gradients& grads) {
  if (net.size() != mw_.size() || grads.weights.size() != mw_.size())
    throw DataError("adam: network does not match optimizer state");
  ++step_;
  for (std::size_t l = 0; l < net.size(); ++l) {
    adam_update(hp_, step_, mw_[l], vw_[l], net[l].weights, grads.weights[l]);
    if (net[l].bias) {
      MatrixXd b = *net[l].bias;
      MatrixXd g = grads.biases[l];
      adam_update(hp_, step_, mb_[l], vb_[l], b, g);
      *net[l].bias = b.col(0);
    }
  }
}

// --- Gradient checking ---

namespace {
double eval_loss(const Network& net, const MatrixXd& x, const LossFn& loss) {
  return loss(predict(net, x)).value;
}
}  // namespace

GradCheckResult check_gradients(const Network& net, const MatrixXd& x,
                                const LossFn& loss, double h) {
  ForwardCache cache = forward(net, x);
  LossValueGrad at_point = loss(cache.output());
  Gradients analytic = backward(net, cache, at_point.grad);

  GradCheckResult result;
  Network probe = net;
  auto consider = [&](double a, double fd, int layer, bool is_bias, int idx) {
    const double diff = std::abs(a - fd);
    double err = 0.0;
    if (diff > 1e-8) err = diff / std::max(std::abs(a), std::abs(fd));
    if (err > result.max_rel_err) {
      result.max_rel_err = err;
      result.worst_layer = layer;
      result.worst_is_bias = is_bias;
      result.worst_index = idx;
    }
  };

  for (std::size_t l = 0; l < net.size(); ++l) {
    MatrixXd& w = probe[l].weights;
    for (int i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double up = eval_loss(probe, x, loss);
      w.data()[i] = saved - h;
      const double down = eval_loss(probe, x, loss);
      w.data()[i] = saved;
      consider(analytic.weights[l].data()[i], (up - down) / (2.0 * h),
               static_cast<int>(l), false, i);
    }
    if (probe[l].bias) {
      VectorXd& b = *probe[l].bias;
      for (int i = 0; i < b.size(); ++i) {
        const double saved = b[i];
        b[i] = saved + h;
        const double up = eval_loss(probe, x, loss);
        b[i] = saved - h;
        const double down = eval_loss(probe, x, loss);
        b[i] = saved;
        consider(analytic.biases[l][i], (up - down) / (2.0 * h),
                 static_cast<int>(l), true, i);
      }
    }
  }
  return result;
}

// --- Checkpoints ---

void save_network(const Network& net, const AdamParams& hp, long step,
                  const std::string& path) {
  nlohmann::json layers = nlohmann::json::array();
  std::size_t count = 0;
  for (const DenseLayer& layer : net) {
    layers.push_back({{"in", layer.in_dim()},
                      {"out", layer.out_dim()},
                      {"bias", layer.bias.has_value()},
                      {"activation", activation_name(layer.activation)}});
    count += static_cast<std::size_t>(layer.weights.size());
    if (layer.bias) count += static_cast<std::size_t>(layer.bias->size());
  }
  nlohmann::json manifest = {{"layers", layers},
                             {"adam",
                              {{"lr", hp.lr},
                               {"beta1", hp.beta1},
                               {"beta2", hp.beta2},
                               {"epsilon", hp.epsilon}}},
                             {"step", step}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << manifest.dump() << '\n';
  std::vector<double> payload;
  payload.reserve(count);
  for (const DenseLayer& layer : net) {
    for (int r = 0; r < layer.weights.rows(); ++r)
      for (int c = 0; c < layer.weights.cols(); ++c)
        payload.push_back(layer.weights(r, c));
    if (layer.bias)
      for (int i = 0; i < layer.bias->size(); ++i)
        payload.push_back((*layer.bias)[i]);
  }
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!f) throw DataError("write failed: " + path);
}

LoadedNetwork load_network(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("checkpoint truncated: " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest in " + path + ": " + e.what());
  }
  LoadedNetwork out;
  out.adam.lr = manifest.at("adam").at("lr");
  out.adam.beta1 = manifest.at("adam").at("beta1");
  out.adam.beta2 = manifest.at("adam").at("beta2");
  out.adam.epsilon = manifest.at("adam").at("epsilon");
  out.step = manifest.at("step");

  std::size_t count = 0;
  for (const auto& spec : manifest.at("layers")) {
    DenseLayer layer;
    const int in = spec.at("in"), outd = spec.at("out");
    if (in <= 0 || outd <= 0)
      throw DataError("checkpoint layer has non-positive dims: " + path);
    layer.weights.resize(outd, in);
    if (spec.at("bias").get<bool>()) layer.bias = VectorXd::Zero(outd);
    layer.activation = activation_from_name(spec.at("activation"));
    count += static_cast<std::size_t>(in) * outd + (layer.bias ? outd : 0);
    out.net.push_back(std::move(layer));
  }
  std::vector<double> payload(count);
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw DataError("checkpoint payload shorter than manifest promises: " + path);
  char extra;
  if (f.read(&extra, 1))
    throw DataError("checkpoint payload longer than manifest promises: " + path);

  std::size_t pos = 0;
  for (DenseLayer& layer : out.net) {
    for (int r = 0; r < layer.weights.rows(); ++r)
      for (int c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = payload[pos++];
    if (layer.bias)
      for (int i = 0; i < layer.bias->size(); ++i) (*layer.bias)[i] = payload[pos++];
    if (!layer.weights.allFinite())
      throw DataError("checkpoint contains non-finite weights: " + path);
  }
  return out;
}

}  // namespace gauss::nn
