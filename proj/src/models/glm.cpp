#include "internal.hpp"

#include <chrono>

namespace dac::models {

namespace {

// log(1 + e^z) without overflow.
Real softplus(Real z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Real objective(const Matrix& X, const Vector& y, Real b0, const Vector& beta, Real alpha, Real lambda) {
  const Vector eta = (X * beta).array() + b0;
  Real loss = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) loss += softplus(eta(i)) - y(i) * eta(i);
  loss /= static_cast<Real>(y.size());
  return loss + lambda * (alpha * beta.lpNorm<1>() + (1 - alpha) / 2 * beta.squaredNorm());
}

struct Fit {
  Real b0 = 0;
  Vector beta;
  bool converged = false;
  std::vector<Real> curve;
};

// Damped Newton on the smooth (pure L2) objective.
Fit fit_newton(const Matrix& X, const Vector& y, const GlmParams& p) {
  const auto n = static_cast<Real>(X.rows());
  const Eigen::Index k = X.cols() + 1;
  Matrix A(X.rows(), k);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  Vector ridge = Vector::Constant(k, p.lambda * (1 - p.alpha));
  ridge(0) = 0;

  Vector theta = Vector::Zero(k);
  Fit fit;
  auto f = [&](const Vector& t) { return objective(X, y, t(0), t.tail(k - 1), 0.0, p.lambda * (1 - p.alpha)); };
  Real current = f(theta);
  for (int it = 0; it < p.max_iterations; ++it) {
    const Vector eta = A * theta;
    Vector prob(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob(i) = sigmoid(eta(i));
      w(i) = prob(i) * (1 - prob(i));
    }
    const Vector grad = A.transpose() * (prob - y) / n + ridge.cwiseProduct(theta);
    Matrix H = A.transpose() * w.asDiagonal() * A / n;
    H.diagonal() += ridge;
    H.diagonal().array() += 1e-12;
    const Vector step = H.ldlt().solve(grad);

    Real t = 1;
    Vector next = theta - step;
    Real value = f(next);
    const Real slope = grad.dot(step);
    while (value > current - 1e-4 * t * slope && t > 1e-10) {
      t /= 2;
      next = theta - t * step;
      value = f(next);
    }
    const Real change = (next - theta).cwiseAbs().maxCoeff();
    if (value <= current) {
      theta = next;
      current = value;
    }
    fit.curve.push_back(current);
    if (change < p.tolerance || t <= 1e-10) {
      fit.converged = true;
      break;
    }
  }
  fit.b0 = theta(0);
  fit.beta = theta.tail(k - 1);
  return fit;
}

// Iteratively reweighted least squares with cyclic coordinate descent on
// each weighted subproblem, for objectives with an L1 part.
Fit fit_coordinate_descent(const Matrix& X, const Vector& y, const GlmParams& p) {
  const auto n = static_cast<Real>(X.rows());
  const Eigen::Index d = X.cols();
  const Real l1 = p.lambda * p.alpha;
  const Real l2 = p.lambda * (1 - p.alpha);
  Fit fit;
  Real b0 = 0;
  Vector beta = Vector::Zero(d);
  Real current = objective(X, y, b0, beta, p.alpha, p.lambda);

  for (int it = 0; it < p.max_iterations; ++it) {
    const Vector eta = (X * beta).array() + b0;
    Vector w(eta.size()), z(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const Real q = sigmoid(eta(i));
      w(i) = std::max(q * (1 - q), 1e-5);
      z(i) = eta(i) + (y(i) - q) / w(i);
    }
    Real nb0 = b0;
    Vector nbeta = beta;
    Vector r = z - eta;
    const Vector xx = (X.array().square().colwise() * w.array()).colwise().sum().transpose() / n;
    const Real wsum = w.sum();
    for (int inner = 0; inner < 1000; ++inner) {
      Real moved = 0;
      const Real db0 = w.dot(r) / wsum;
      nb0 += db0;
      r.array() -= db0;
      moved = std::abs(db0);
      for (Eigen::Index j = 0; j < d; ++j) {
        if (xx(j) == 0) continue;
        const Real old = nbeta(j);
        const Real g = X.col(j).cwiseProduct(w).dot(r) / n + xx(j) * old;
        const Real shrunk = g > l1 ? g - l1 : (g < -l1 ? g + l1 : 0.0);
        const Real updated = shrunk / (xx(j) + l2);
        if (updated != old) {
          r -= (updated - old) * X.col(j);
          nbeta(j) = updated;
          moved = std::max(moved, std::abs(updated - old));
        }
      }
      if (moved < p.tolerance) break;
    }

    // Step halving keeps the outer iteration monotone.
    Real t = 1;
    Real tb0 = nb0;
    Vector tbeta = nbeta;
    Real value = objective(X, y, tb0, tbeta, p.alpha, p.lambda);
    while (value > current && t > 1e-10) {
      t /= 2;
      tb0 = b0 + t * (nb0 - b0);
      tbeta = beta + t * (nbeta - beta);
      value = objective(X, y, tb0, tbeta, p.alpha, p.lambda);
    }
    Real change = std::abs(tb0 - b0);
    if (d > 0) change = std::max(change, (tbeta - beta).cwiseAbs().maxCoeff());
    if (value <= current) {
      b0 = tb0;
      beta = tbeta;
      current = value;
    }
    fit.curve.push_back(current);
    if (change < p.tolerance || t <= 1e-10) {
      fit.converged = true;
      break;
    }
  }
  fit.b0 = b0;
  fit.beta = beta;
  return fit;
}

}  // namespace

Real glm_objective(const LinearModel& model, const Matrix& X, const Vector& y, Real alpha, Real lambda) {
  return objective(X, y, model.intercept, model.coefficients, alpha, lambda);
}

TrainedModel train_glm(const ModelSpec& spec, const features::FeatureMatrix& train) {
  if (spec.family != Family::GLM) throw UsageError("train_glm needs a GLM spec");
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  const GlmParams p = glm_params(spec);
  const Vector y = train.label_vector();
  detail::require_two_classes(y);

  const Fit fit = p.alpha > 0 ? fit_coordinate_descent(train.values, y, p) : fit_newton(train.values, y, p);

  TrainedModel model;
  model.spec = spec;
  model.feature_names = train.names;
  model.parameters = LinearModel{fit.b0, fit.beta};
  model.metadata.loss_curve = fit.curve;
  model.metadata.converged = fit.converged;
  if (!fit.converged) {
    model.metadata.warnings.push_back("GLM did not converge within " + std::to_string(p.max_iterations) +
                                      " iterations");
    log(LogLevel::Warn, model.metadata.warnings.back());
  }
  model.metadata.duration_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - started).count();
  return model;
}

}  // namespace dac::models
