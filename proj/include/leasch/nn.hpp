#pragma once

// Dense feed-forward Q-network: relu hidden layers, linear output layer,
// backpropagation of the squared TD error, Adam, global-norm clipping and
// soft (Polyak) parameter blending. All arithmetic is double precision.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "leasch/errors.hpp"
#include "leasch/rng.hpp"

namespace leasch::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kWeightFormatVersion = 1;

struct MlpParams {
  std::vector<int> dims;
  std::vector<Matrix> weights;  // layer k: dims[k+1] x dims[k]
  std::vector<Vector> biases;   // layer k: dims[k+1]

  std::size_t layers() const { return weights.size(); }
  int input_size() const { return dims.front(); }
  int output_size() const { return dims.back(); }

  bool same_shape(const MlpParams& other) const { return dims == other.dims; }

  bool all_finite() const {
    for (std::size_t k = 0; k < layers(); ++k) {
      if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
    }
    return true;
  }
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const MlpParams& p) {
    Gradients g;
    for (std::size_t k = 0; k < p.layers(); ++k) {
      g.weights.push_back(Matrix::Zero(p.weights[k].rows(), p.weights[k].cols()));
      g.biases.push_back(Vector::Zero(p.biases[k].size()));
    }
    return g;
  }

  bool matches(const MlpParams& p) const {
    if (weights.size() != p.layers() || biases.size() != p.layers()) return false;
    for (std::size_t k = 0; k < p.layers(); ++k) {
      if (weights[k].rows() != p.weights[k].rows() || weights[k].cols() != p.weights[k].cols() ||
          biases[k].size() != p.biases[k].size()) {
        return false;
      }
    }
    return true;
  }

  double squared_norm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      s += weights[k].squaredNorm() + biases[k].squaredNorm();
    }
    return s;
  }

  bool has_nan() const {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k].hasNaN() || biases[k].hasNaN()) return true;
    }
    return false;
  }
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& p) {
    AdamState s;
    s.m = Gradients::zeros_like(p);
    s.v = Gradients::zeros_like(p);
    return s;
  }
};

inline void validate_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  for (int d : dims) {
    if (d < 1) throw ConfigError("layer sizes must be positive, got " + std::to_string(d));
  }
}

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
inline MlpParams init_params(const std::vector<int>& dims, std::uint64_t seed) {
  validate_dims(dims);
  Rng rng = make_rng(seed, Stream::init);
  MlpParams p;
  p.dims = dims;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / dims[k]));
    Matrix w(dims[k + 1], dims[k]);
    // Fill row-major so the draw order matches the persisted layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector::Zero(dims[k + 1]));
  }
  return p;
}

/// Zero weights and biases with the given layer sizes.
inline MlpParams zero_params(const std::vector<int>& dims) {
  validate_dims(dims);
  MlpParams p;
  p.dims = dims;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    p.weights.push_back(Matrix::Zero(dims[k + 1], dims[k]));
    p.biases.push_back(Vector::Zero(dims[k + 1]));
  }
  return p;
}

/// Forward pass over a batch; one column per sample.
inline Matrix forward_batch(const MlpParams& p, const Matrix& inputs) {
  if (inputs.rows() != p.input_size()) {
    throw DimensionError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                         std::to_string(p.input_size()));
  }
  Matrix a = inputs;
  for (std::size_t k = 0; k < p.layers(); ++k) {
    Matrix z = p.weights[k] * a;
    z.colwise() += p.biases[k];
    if (k + 1 < p.layers()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

inline Vector forward(const MlpParams& p, std::span<const double> input) {
  if (static_cast<int>(input.size()) != p.input_size()) {
    throw DimensionError("input has length " + std::to_string(input.size()) + ", network expects " +
                         std::to_string(p.input_size()));
  }
  Vector a = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t k = 0; k < p.layers(); ++k) {
    Vector z = p.weights[k] * a + p.biases[k];
    if (k + 1 < p.layers()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

/// Hidden-layer activations for one input, mostly for inspection and tests.
inline std::vector<Vector> hidden_activations(const MlpParams& p, std::span<const double> input) {
  std::vector<Vector> out;
  Vector a = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t k = 0; k + 1 < p.layers(); ++k) {
    a = (p.weights[k] * a + p.biases[k]).cwiseMax(0.0);
    out.push_back(a);
  }
  return out;
}

struct TdResult {
  double loss = 0.0;
  Gradients grads;
};

/// Mean over the batch of (Q(s_j, a_j) - y_j)^2 and its gradient. Only the
/// selected output unit of each sample carries an error signal.
inline TdResult batch_td_gradients(const MlpParams& p, const Matrix& states,
                                   std::span<const int> actions, std::span<const double> targets) {
  const auto batch = states.cols();
  if (states.rows() != p.input_size()) throw DimensionError("state batch has wrong row count");
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch) {
    throw DimensionError("actions/targets must have one entry per state column");
  }
  if (batch == 0) throw DimensionError("empty batch");
  for (int a : actions) {
    if (a < 0 || a >= p.output_size()) {
      throw IndexError("action " + std::to_string(a) + " outside [0, " +
                       std::to_string(p.output_size()) + ")");
    }
  }

  const std::size_t n_layers = p.layers();
  std::vector<Matrix> acts;  // acts[k] feeds layer k
  std::vector<Matrix> pre;   // pre-activations of hidden layers
  acts.reserve(n_layers);
  pre.reserve(n_layers);
  acts.push_back(states);
  for (std::size_t k = 0; k < n_layers; ++k) {
    Matrix z = p.weights[k] * acts.back();
    z.colwise() += p.biases[k];
    if (k + 1 < n_layers) {
      acts.push_back(z.cwiseMax(0.0));
      pre.push_back(std::move(z));
    } else {
      pre.push_back(std::move(z));
    }
  }
  const Matrix& q = pre.back();

  const double scale = 1.0 / static_cast<double>(batch);
  Matrix delta = Matrix::Zero(q.rows(), batch);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double err = q(actions[j], j) - targets[j];
    loss += err * err;
    delta(actions[j], j) = 2.0 * err * scale;
  }

  TdResult out;
  out.loss = loss * scale;
  out.grads.weights.resize(n_layers);
  out.grads.biases.resize(n_layers);
  for (std::size_t k = n_layers; k-- > 0;) {
    out.grads.weights[k] = delta * acts[k].transpose();
    out.grads.biases[k] = delta.rowwise().sum();
    if (k > 0) {
      Matrix back = p.weights[k].transpose() * delta;
      delta = back.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

inline TdResult td_gradients(const MlpParams& p, std::span<const double> state, int action,
                             double target) {
  if (static_cast<int>(state.size()) != p.input_size()) {
    throw DimensionError("state length does not match network input");
  }
  Matrix s = Eigen::Map<const Matrix>(state.data(), static_cast<Eigen::Index>(state.size()), 1);
  const int actions[1] = {action};
  const double targets[1] = {target};
  return batch_td_gradients(p, s, actions, targets);
}

/// Global L2-norm clipping.
inline Gradients clip_gradients(Gradients grads, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("gradient threshold must be positive");
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > threshold) {
    const double s = threshold / norm;
    for (std::size_t k = 0; k < grads.weights.size(); ++k) {
      grads.weights[k] *= s;
      grads.biases[k] *= s;
    }
  }
  return grads;
}

/// Bias-corrected Adam update, in place. Params and optimizer state are left
/// untouched when the gradients contain NaN or the result would be non-finite.
inline void adam_step(MlpParams& p, const Gradients& g, AdamState& opt, double lr) {
  if (!g.matches(p) || !opt.m.matches(p) || !opt.v.matches(p)) {
    throw DimensionError("gradient/optimizer shapes do not match parameters");
  }
  if (g.has_nan()) throw NumericError("NaN in gradients; update refused");

  AdamState next = opt;
  MlpParams updated = p;
  next.step += 1;
  const double t = static_cast<double>(next.step);
  const double c1 = 1.0 - std::pow(next.beta1, t);
  const double c2 = 1.0 - std::pow(next.beta2, t);

  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = next.beta1 * m + (1.0 - next.beta1) * grad;
    v = next.beta2 * v + (1.0 - next.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + next.eps);
  };
  for (std::size_t k = 0; k < p.layers(); ++k) {
    update(updated.weights[k], next.m.weights[k], next.v.weights[k], g.weights[k]);
    update(updated.biases[k], next.m.biases[k], next.v.biases[k], g.biases[k]);
  }
  if (!updated.all_finite()) throw NumericError("Adam update produced non-finite parameters");
  p = std::move(updated);
  opt = std::move(next);
}

/// target <- beta * online + (1 - beta) * target
inline MlpParams soft_update(const MlpParams& online, MlpParams target, double beta) {
  if (!online.same_shape(target)) throw DimensionError("online/target shapes differ");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("smoothing factor must be in (0, 1]");
  for (std::size_t k = 0; k < online.layers(); ++k) {
    target.weights[k] = beta * online.weights[k] + (1.0 - beta) * target.weights[k];
    target.biases[k] = beta * online.biases[k] + (1.0 - beta) * target.biases[k];
  }
  return target;
}

/// Lowest index wins ties.
inline int argmax(const Vector& q) {
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q(i) > q(best)) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const MlpParams& p) {
  nlohmann::json j;
  j["format_version"] = kWeightFormatVersion;
  j["layer_dims"] = p.dims;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t k = 0; k < p.layers(); ++k) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(p.weights[k].size()));
    for (Eigen::Index r = 0; r < p.weights[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < p.weights[k].cols(); ++c) flat.push_back(p.weights[k](r, c));
    }
    j["weights"].push_back(std::move(flat));
    j["biases"].push_back(std::vector<double>(p.biases[k].data(),
                                              p.biases[k].data() + p.biases[k].size()));
  }
  return j;
}

inline MlpParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kWeightFormatVersion) {
      throw ValidationError("unsupported weight format version");
    }
    MlpParams p = zero_params(j.at("layer_dims").get<std::vector<int>>());
    const auto& w = j.at("weights");
    const auto& b = j.at("biases");
    if (w.size() != p.layers() || b.size() != p.layers()) {
      throw ValidationError("layer count does not match layer_dims");
    }
    for (std::size_t k = 0; k < p.layers(); ++k) {
      const auto flat = w[k].get<std::vector<double>>();
      const auto bias = b[k].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != p.weights[k].size() ||
          static_cast<Eigen::Index>(bias.size()) != p.biases[k].size()) {
        throw ValidationError("parameter array size does not match layer_dims");
      }
      std::size_t i = 0;
      for (Eigen::Index r = 0; r < p.weights[k].rows(); ++r) {
        for (Eigen::Index c = 0; c < p.weights[k].cols(); ++c) p.weights[k](r, c) = flat[i++];
      }
      for (std::size_t r = 0; r < bias.size(); ++r) p.biases[k](static_cast<Eigen::Index>(r)) = bias[r];
    }
    if (!p.all_finite()) throw ValidationError("non-finite parameter in weight file");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed weight record: ") + e.what());
  }
}

inline void save_params(const MlpParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << to_json(p).dump(1) << '\n';
}

inline MlpParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("weight file is not valid JSON: ") + e.what());
  }
  return params_from_json(j);
}

}  // namespace leasch::nn
