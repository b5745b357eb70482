#include "internal.hpp"

#include "dac/csv.hpp"

#include <numeric>
#include <set>

namespace dac::models {

TrainedModel train(const ModelSpec& spec, const features::FeatureMatrix& train) {
  if (!train.labels) throw DataError("training matrix has no labels");
  switch (spec.family) {
    case Family::GLM: return train_glm(spec, train);
    case Family::MLP: return train_mlp(spec, train);
    default: return train_tree_ensemble(spec, train);
  }
}

namespace {

Vector network_output(const Network& net, const Matrix& X) {
  Matrix a = X;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix z = a * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    a = l + 1 < net.weights.size() ? Matrix(z.cwiseMax(0.0)) : z;
  }
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out(i) = sigmoid(a(i, 0));
  return out;
}

}  // namespace

Vector predict_proba(const TrainedModel& model, const Matrix& X) {
  if (X.cols() != static_cast<Eigen::Index>(model.feature_names.size())) {
    throw DataError("design matrix has " + std::to_string(X.cols()) + " columns; model expects " +
                    std::to_string(model.feature_names.size()));
  }
  struct Visitor {
    const Matrix& X;
    Vector operator()(const TreeEnsemble& e) const {
      Vector out(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Real sum = 0;
        for (const auto& tree : e.trees) sum += tree.evaluate(X.row(i));
        if (e.boosted) {
          out(i) = sigmoid(e.init_score + sum);
        } else {
          out(i) = e.trees.empty() ? e.init_score : sum / static_cast<Real>(e.trees.size());
        }
      }
      return out;
    }
    Vector operator()(const LinearModel& m) const {
      const Vector eta = (X * m.coefficients).array() + m.intercept;
      return eta.unaryExpr([](Real z) { return sigmoid(z); });
    }
    Vector operator()(const Network& net) const { return network_output(net, X); }
  };
  return std::visit(Visitor{X}, model.parameters);
}

PredictionSet predict(const TrainedModel& model, const features::FeatureMatrix& matrix, Real threshold) {
  if (matrix.names != model.feature_names) {
    const std::set<std::string> have(matrix.names.begin(), matrix.names.end());
    const std::set<std::string> want(model.feature_names.begin(), model.feature_names.end());
    std::vector<std::string> missing, extra;
    for (const auto& n : want) {
      if (!have.count(n)) missing.push_back(n);
    }
    for (const auto& n : have) {
      if (!want.count(n)) extra.push_back(n);
    }
    std::string msg = "feature columns do not match the model";
    if (!missing.empty()) msg += "; missing: " + join(missing, ", ");
    if (!extra.empty()) msg += "; unexpected: " + join(extra, ", ");
    if (missing.empty() && extra.empty()) msg += "; same names in a different order";
    throw DataError(msg);
  }
  PredictionSet out;
  out.tracts = matrix.tracts;
  out.probabilities = predict_proba(model, matrix.values);
  out.labels.resize(static_cast<std::size_t>(out.probabilities.size()));
  for (Eigen::Index i = 0; i < out.probabilities.size(); ++i) {
    out.labels[static_cast<std::size_t>(i)] = out.probabilities(i) >= threshold;
  }
  return out;
}

std::string_view to_string(ImportanceMethod m) {
  switch (m) {
    case ImportanceMethod::RelativeInfluence: return "relative_influence";
    case ImportanceMethod::CoefficientMagnitude: return "coefficient_magnitude";
    case ImportanceMethod::Gedeon: return "gedeon";
  }
  return "?";
}

std::vector<std::size_t> ImportanceReport::order() const {
  std::vector<std::size_t> idx(names.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return relative(static_cast<Eigen::Index>(a)) > relative(static_cast<Eigen::Index>(b));
  });
  return idx;
}

namespace {

// Column j of the share matrix: |W(j, i)| / sum_i |W(j, i)| for each input i.
// Rows whose weights are all zero contribute nothing.
Matrix weight_shares(const Matrix& W) {
  Matrix shares = W.cwiseAbs();
  for (Eigen::Index j = 0; j < shares.rows(); ++j) {
    const Real total = shares.row(j).sum();
    if (total > 0) {
      shares.row(j) /= total;
    } else {
      shares.row(j).setZero();
    }
  }
  return shares;
}

}  // namespace

Vector gedeon_importance(const Network& net) {
  if (net.weights.empty()) return {};
  // P1(j, i) = P(i -> j), one row per first-layer unit.
  const Matrix P1 = weight_shares(net.weights[0]);
  Vector downstream = Vector::Ones(P1.rows());
  if (net.weights.size() > 2) {
    // sum_k P(j -> k) for each first-layer unit j.
    downstream = weight_shares(net.weights[1]).colwise().sum().transpose();
  }
  return P1.transpose() * downstream;
}

ImportanceReport feature_importance(const TrainedModel& model) {
  ImportanceReport report;
  report.names = model.feature_names;
  const auto p = static_cast<Eigen::Index>(model.feature_names.size());
  report.raw = Vector::Zero(p);

  if (const auto* e = std::get_if<TreeEnsemble>(&model.parameters)) {
    report.method = ImportanceMethod::RelativeInfluence;
    for (const auto& tree : e->trees) {
      for (const auto& node : tree.nodes) {
        if (!node.is_leaf()) report.raw(node.feature) += node.improvement;
      }
    }
  } else if (const auto* m = std::get_if<LinearModel>(&model.parameters)) {
    report.method = ImportanceMethod::CoefficientMagnitude;
    report.raw = m->coefficients.cwiseAbs();
  } else {
    report.method = ImportanceMethod::Gedeon;
    report.raw = gedeon_importance(std::get<Network>(model.parameters));
  }
  report.raw = report.raw.cwiseMax(0.0);
  const Real top = p ? report.raw.maxCoeff() : 0.0;
  report.relative = top > 0 ? Vector(report.raw / top) : Vector(Vector::Zero(p));
  return report;
}

void write_importance_csv(std::ostream& out, const ImportanceReport& report, std::size_t top_k) {
  CsvWriter w(out);
  w.row({"rank", "feature", "raw", "relative", "method"});
  const auto order = report.order();
  const std::size_t n = top_k ? std::min(top_k, order.size()) : order.size();
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(order[r]);
    w.row({std::to_string(r + 1), report.names[order[r]], format_real(report.raw(i)),
           format_real(report.relative(i)), std::string(to_string(report.method))});
  }
}

}  // namespace dac::models
