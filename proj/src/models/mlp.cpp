#include "internal.hpp"

#include <chrono>
#include <numeric>

namespace dac::models {

namespace {

struct Workspace {
  std::vector<Vector> z;  // pre-activations per layer
  std::vector<Vector> a;  // activations, a[0] is the (masked) input
};

// Inverted dropout: kept units are scaled by 1 / (1 - ratio) so inference
// needs no rescaling. An empty mask means no dropout for that layer.
using Masks = std::vector<Vector>;

Real forward(const Network& net, const Eigen::Ref<const Vector>& x, const Masks* masks, Workspace& ws) {
  const std::size_t L = net.weights.size();
  ws.z.resize(L);
  ws.a.resize(L + 1);
  ws.a[0] = x;
  if (masks && (*masks)[0].size()) ws.a[0].array() *= (*masks)[0].array();
  for (std::size_t l = 0; l < L; ++l) {
    ws.z[l] = net.weights[l] * ws.a[l] + net.biases[l];
    if (l + 1 < L) {
      ws.a[l + 1] = ws.z[l].cwiseMax(0.0);
      if (masks && (*masks)[l + 1].size()) ws.a[l + 1].array() *= (*masks)[l + 1].array();
    } else {
      ws.a[l + 1] = ws.z[l];
    }
  }
  return sigmoid(ws.z[L - 1](0));
}

/// Adds scale * d(cross-entropy)/d(theta) for one row to `grad`.
Real accumulate(const Network& net, const Eigen::Ref<const Vector>& x, Real y, const Masks* masks, Real scale,
                Workspace& ws, NetworkGradient& grad) {
  const Real p = forward(net, x, masks, ws);
  const std::size_t L = net.weights.size();
  Vector delta = Vector::Constant(1, (p - y) * scale);
  for (std::size_t l = L; l-- > 0;) {
    grad.weights[l].noalias() += delta * ws.a[l].transpose();
    grad.biases[l] += delta;
    if (l == 0) break;
    Vector back = net.weights[l].transpose() * delta;
    for (Eigen::Index i = 0; i < back.size(); ++i) {
      if (ws.z[l - 1](i) <= 0) back(i) = 0;
    }
    if (masks && (*masks)[l].size()) back.array() *= (*masks)[l].array();
    delta = std::move(back);
  }
  return log_loss(p, y);
}

NetworkGradient zero_gradient(const Network& net) {
  NetworkGradient g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

void fill_mask(Vector& mask, Eigen::Index size, Real ratio, Rng& rng) {
  if (ratio <= 0) {
    mask.resize(0);
    return;
  }
  mask.resize(size);
  const Real keep = 1.0 / (1.0 - ratio);
  for (Eigen::Index i = 0; i < size; ++i) mask(i) = rng.uniform() < ratio ? 0.0 : keep;
}

struct AdaDelta {
  Real rho;
  Real eps;

  template <typename Param, typename Grad>
  void step(Param& theta, const Grad& g, Param& mean_g2, Param& mean_dx2) const {
    mean_g2.array() = rho * mean_g2.array() + (1 - rho) * g.array().square();
    const auto dx = (-((mean_dx2.array() + eps).sqrt() / (mean_g2.array() + eps).sqrt()) * g.array()).eval();
    mean_dx2.array() = rho * mean_dx2.array() + (1 - rho) * dx.square();
    theta.array() += dx;
  }
};

}  // namespace

Network initial_network(int inputs, const std::vector<int>& hidden, std::uint64_t seed) {
  if (inputs <= 0) throw DataError("network needs at least one input");
  std::vector<int> sizes{inputs};
  for (int h : hidden) {
    if (h <= 0) throw UsageError("hidden layer of size " + std::to_string(h));
    sizes.push_back(h);
  }
  sizes.push_back(1);
  Rng rng(seed);
  Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const Real r = std::sqrt(6.0 / static_cast<Real>(in + out));
    Matrix W(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) W(i, j) = rng.uniform(-r, r);
    }
    net.weights.push_back(std::move(W));
    net.biases.push_back(Vector::Zero(out));
  }
  return net;
}

NetworkGradient network_loss_gradient(const Network& net, const Matrix& X, const Vector& y) {
  NetworkGradient g = zero_gradient(net);
  Workspace ws;
  const Real scale = X.rows() ? 1.0 / static_cast<Real>(X.rows()) : 0.0;
  Real loss = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    loss += accumulate(net, X.row(i).transpose(), y(i), nullptr, scale, ws, g);
  }
  g.loss = loss * scale;
  return g;
}

TrainedModel train_mlp(const ModelSpec& spec, const features::FeatureMatrix& train) {
  if (spec.family != Family::MLP) throw UsageError("train_mlp needs an MLP spec");
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  const MlpParams p = mlp_params(spec);

  Matrix X = train.values;
  Vector y = train.label_vector();
  detail::require_two_classes(y);
  if (p.balance_classes) detail::balance_rows(X, y, spec.seed);

  Network net = initial_network(static_cast<int>(X.cols()), p.hidden, derive_seed(spec.seed, 0));
  const std::size_t L = net.weights.size();
  std::vector<Matrix> gw2, dw2;
  std::vector<Vector> gb2, db2;
  for (std::size_t l = 0; l < L; ++l) {
    gw2.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    dw2.push_back(gw2.back());
    gb2.push_back(Vector::Zero(net.biases[l].size()));
    db2.push_back(gb2.back());
  }
  const AdaDelta opt{p.rho, p.epsilon};

  TrainedModel model;
  model.spec = spec;
  model.feature_names = train.names;

  Rng rng(derive_seed(spec.seed, 1));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Workspace ws;
  Masks masks(L);
  const bool dropout = p.input_dropout_ratio > 0 ||
                       std::any_of(p.hidden_dropout_ratios.begin(), p.hidden_dropout_ratios.end(),
                                   [](Real r) { return r > 0; });
  NetworkGradient g = zero_gradient(net);

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index row : order) {
      if (dropout) {
        fill_mask(masks[0], X.cols(), p.input_dropout_ratio, rng);
        for (std::size_t l = 1; l < L; ++l) {
          const Real ratio = p.hidden_dropout_ratios.empty() ? 0.0 : p.hidden_dropout_ratios[l - 1];
          fill_mask(masks[l], net.weights[l - 1].rows(), ratio, rng);
        }
      }
      for (std::size_t l = 0; l < L; ++l) {
        g.weights[l].setZero();
        g.biases[l].setZero();
      }
      accumulate(net, X.row(row).transpose(), y(row), dropout ? &masks : nullptr, 1.0, ws, g);
      for (std::size_t l = 0; l < L; ++l) {
        opt.step(net.weights[l], g.weights[l], gw2[l], dw2[l]);
        opt.step(net.biases[l], g.biases[l], gb2[l], db2[l]);
      }
    }
    Real loss = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) loss += log_loss(forward(net, X.row(i).transpose(), nullptr, ws), y(i));
    model.metadata.loss_curve.push_back(loss / static_cast<Real>(X.rows()));
  }

  model.parameters = std::move(net);
  model.metadata.duration_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - started).count();
  return model;
}

}  // namespace dac::models
