#include "internal.hpp"

#include <chrono>
#include <numeric>

namespace dac::models {

namespace {

// Leaf values are kept inside this log-odds range before shrinkage, so a
// nearly pure leaf with a vanishing hessian cannot produce an overflow.
constexpr Real kMaxLeafLogOdds = 19.0;

enum class LeafRule { Newton, Regularized, Mean };

struct BuildConfig {
  int max_depth = 5;
  Real min_rows = 1;
  Real min_split_improvement = 0;
  LeafRule leaf = LeafRule::Newton;
  Real reg_alpha = 0;
  Real reg_lambda = 0;
  Real shrinkage = 1;
  bool randomized_thresholds = false;
  // Candidate features at depth d: clamp(round(base * change^d), 1, tree features).
  Real candidates_at_root = 1;
  Real candidate_change_per_level = 1;
};

Real soft_threshold(Real g, Real alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0;
}

/// Grows one regression tree by recursive partitioning of per-feature
/// presorted row lists. All lists hold the same rows for a node, in the
/// same [begin, end) slot, so partitioning keeps them aligned.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<std::vector<int>>& presorted, const BuildConfig& config)
      : X_(X), presorted_(presorted), config_(config) {}

  Tree build(const std::vector<Real>& weight, const Vector& target, const Vector& hessian,
             const std::vector<int>& features, Rng& rng) {
    weight_ = &weight;
    target_ = &target;
    hessian_ = &hessian;
    features_ = &features;
    rng_ = &rng;
    order_.assign(features.size(), {});
    for (std::size_t k = 0; k < features.size(); ++k) {
      auto& list = order_[k];
      list.reserve(presorted_[static_cast<std::size_t>(features[k])].size());
      for (int r : presorted_[static_cast<std::size_t>(features[k])]) {
        if (weight[static_cast<std::size_t>(r)] > 0) list.push_back(r);
      }
    }
    scratch_.resize(order_.empty() ? 0 : order_[0].size());
    goes_left_.assign(static_cast<std::size_t>(X_.rows()), 0);
    tree_ = Tree{};
    if (!order_.empty() && !order_[0].empty()) {
      grow(0, order_[0].size(), 0);
    } else {
      tree_.nodes.push_back(TreeNode{});
    }
    return std::move(tree_);
  }

 private:
  struct Split {
    int position = -1;  // index into features_
    Real threshold = 0;
    Real gain = 0;
  };

  Real x(int row, int feature) const { return X_(row, feature); }

  Real leaf_value(Real W, Real S, Real H) const {
    switch (config_.leaf) {
      case LeafRule::Newton: {
        const Real v = H > 1e-300 ? S / H : 0.0;
        return config_.shrinkage * std::clamp(v, -kMaxLeafLogOdds, kMaxLeafLogOdds);
      }
      case LeafRule::Regularized: {
        const Real den = H + config_.reg_lambda;
        const Real v = den > 1e-300 ? soft_threshold(S, config_.reg_alpha) / den : 0.0;
        return config_.shrinkage * std::clamp(v, -kMaxLeafLogOdds, kMaxLeafLogOdds);
      }
      case LeafRule::Mean:
        return W > 0 ? S / W : 0.0;
    }
    return 0;
  }

  int grow(std::size_t begin, std::size_t end, int depth) {
    Real W = 0, S = 0, H = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<std::size_t>(order_[0][i]);
      const Real w = (*weight_)[r];
      W += w;
      S += w * (*target_)(static_cast<Eigen::Index>(r));
      H += w * (*hessian_)(static_cast<Eigen::Index>(r));
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes.back().cover = W;
    tree_.nodes.back().value = leaf_value(W, S, H);

    if (depth >= config_.max_depth || W < 2 * config_.min_rows) return id;
    const Split best = find_split(begin, end, depth, W, S);
    if (best.position < 0 || best.gain <= 0 || best.gain < config_.min_split_improvement) return id;

    const int feature = (*features_)[static_cast<std::size_t>(best.position)];
    for (std::size_t i = begin; i < end; ++i) {
      const int r = order_[0][i];
      goes_left_[static_cast<std::size_t>(r)] = x(r, feature) <= best.threshold ? 1 : 0;
    }
    std::size_t mid = begin;
    for (auto& list : order_) {
      std::size_t l = begin, s = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const int r = list[i];
        if (goes_left_[static_cast<std::size_t>(r)]) {
          list[l++] = r;
        } else {
          scratch_[s++] = r;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(s),
                list.begin() + static_cast<std::ptrdiff_t>(l));
      mid = l;
    }

    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    node.improvement = best.gain;
    return id;
  }

  std::vector<int> candidates(int depth) {
    const auto P = static_cast<std::uint64_t>(features_->size());
    const Real scaled = config_.candidates_at_root * std::pow(config_.candidate_change_per_level, depth);
    const auto k = static_cast<std::uint64_t>(std::clamp<Real>(std::round(scaled), 1, static_cast<Real>(P)));
    std::vector<int> out;
    if (k >= P) {
      out.resize(P);
      std::iota(out.begin(), out.end(), 0);
    } else {
      for (auto v : rng_->sample_without_replacement(P, k)) out.push_back(static_cast<int>(v));
    }
    return out;
  }

  Split find_split(std::size_t begin, std::size_t end, int depth, Real W, Real S) {
    Split best;
    const Real parent = S * S / W;
    for (int position : candidates(depth)) {
      const auto& list = order_[static_cast<std::size_t>(position)];
      const int f = (*features_)[static_cast<std::size_t>(position)];
      const Real lo = x(list[begin], f);
      const Real hi = x(list[end - 1], f);
      if (!(lo < hi)) continue;

      auto consider = [&](Real WL, Real SL, Real threshold) {
        const Real WR = W - WL;
        if (WL < config_.min_rows || WR < config_.min_rows || WL <= 0 || WR <= 0) return;
        const Real SR = S - SL;
        const Real gain = SL * SL / WL + SR * SR / WR - parent;
        if (best.position < 0 || gain > best.gain) best = Split{position, threshold, gain};
      };

      if (config_.randomized_thresholds) {
        Real threshold = rng_->uniform(lo, hi);
        if (!(threshold < hi)) threshold = lo;
        Real WL = 0, SL = 0;
        for (std::size_t i = begin; i < end; ++i) {
          const int r = list[i];
          if (x(r, f) > threshold) break;
          const Real w = (*weight_)[static_cast<std::size_t>(r)];
          WL += w;
          SL += w * (*target_)(r);
        }
        consider(WL, SL, threshold);
        continue;
      }

      Real WL = 0, SL = 0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const int r = list[i];
        const Real w = (*weight_)[static_cast<std::size_t>(r)];
        WL += w;
        SL += w * (*target_)(r);
        const Real a = x(r, f);
        const Real b = x(list[i + 1], f);
        if (!(a < b)) continue;
        Real threshold = a + (b - a) / 2;
        if (!(threshold < b)) threshold = a;
        consider(WL, SL, threshold);
      }
    }
    return best;
  }

  const Matrix& X_;
  const std::vector<std::vector<int>>& presorted_;
  BuildConfig config_;

  const std::vector<Real>* weight_ = nullptr;
  const Vector* target_ = nullptr;
  const Vector* hessian_ = nullptr;
  const std::vector<int>* features_ = nullptr;
  Rng* rng_ = nullptr;

  std::vector<std::vector<int>> order_;
  std::vector<int> scratch_;
  std::vector<char> goes_left_;
  Tree tree_;
};

std::vector<std::vector<int>> presort(const Matrix& X) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    auto& idx = out[static_cast<std::size_t>(f)];
    idx.resize(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
  }
  return out;
}

}  // namespace

namespace detail {

/// Oversamples the minority class with whole-row copies until both classes
/// have the majority's count. Copies are assigned round-robin in a seeded
/// order so the expansion is deterministic.
void balance_rows(Matrix& X, Vector& y, std::uint64_t seed) {
  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0.5 ? pos : neg).push_back(i);
  auto& minority = pos.size() < neg.size() ? pos : neg;
  const auto& majority = pos.size() < neg.size() ? neg : pos;
  if (minority.empty() || minority.size() == majority.size()) return;
  const std::size_t extra = majority.size() - minority.size();
  Rng rng(derive_seed(seed, 0xba1a));
  std::vector<Eigen::Index> order = minority;
  rng.shuffle(order);
  Matrix Xb(X.rows() + static_cast<Eigen::Index>(extra), X.cols());
  Vector yb(Xb.rows());
  Xb.topRows(X.rows()) = X;
  yb.head(y.size()) = y;
  for (std::size_t k = 0; k < extra; ++k) {
    const Eigen::Index src = order[k % order.size()];
    Xb.row(X.rows() + static_cast<Eigen::Index>(k)) = X.row(src);
    yb(y.size() + static_cast<Eigen::Index>(k)) = y(src);
  }
  X = std::move(Xb);
  y = std::move(yb);
}

void require_two_classes(const Vector& y) {
  if (y.size() == 0) throw DataError("training set is empty");
  const Real s = y.sum();
  if (s == 0 || s == static_cast<Real>(y.size())) {
    throw DataError("training labels contain a single class; need both DAC and non-DAC rows");
  }
}

}  // namespace detail

TrainedModel train_tree_ensemble(const ModelSpec& spec, const features::FeatureMatrix& train) {
  if (!is_tree_family(spec.family)) {
    throw UsageError(std::string(to_string(spec.family)) + " is not a tree family");
  }
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  const TreeParams p = tree_params(spec);

  Matrix X = train.values;
  Vector y = train.label_vector();
  detail::require_two_classes(y);
  if (p.balance_classes) detail::balance_rows(X, y, spec.seed);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto n_features = static_cast<std::size_t>(X.cols());
  if (p.min_rows > static_cast<Real>(n)) {
    throw DataError("min_rows " + format_real(p.min_rows) + " exceeds the " + std::to_string(n) +
                    " training rows");
  }
  if (n_features == 0) throw DataError("training matrix has no feature columns");

  const bool boosted = spec.family == Family::GBM || spec.family == Family::XGB;
  BuildConfig config;
  config.max_depth = p.max_depth;
  config.min_rows = p.min_rows;
  config.min_split_improvement = p.min_split_improvement;
  config.randomized_thresholds = spec.family == Family::XRT;
  config.candidate_change_per_level = p.col_sample_rate_change_per_level;
  const auto per_tree = static_cast<std::size_t>(
      std::clamp<Real>(std::round(p.col_sample_rate_per_tree * static_cast<Real>(n_features)), 1,
                       static_cast<Real>(n_features)));
  if (boosted) {
    config.leaf = spec.family == Family::XGB ? LeafRule::Regularized : LeafRule::Newton;
    config.reg_alpha = p.reg_alpha;
    config.reg_lambda = p.reg_lambda;
    config.shrinkage = p.learn_rate;
    config.candidates_at_root = p.col_sample_rate * static_cast<Real>(per_tree);
  } else {
    config.leaf = LeafRule::Mean;
    const Real default_mtries = std::max<Real>(1, std::floor(std::sqrt(static_cast<Real>(n_features))));
    config.candidates_at_root = p.mtries ? static_cast<Real>(*p.mtries) : default_mtries;
  }

  const auto presorted = presort(X);
  TreeBuilder builder(X, presorted, config);

  TreeEnsemble ensemble;
  ensemble.boosted = boosted;
  const Real prior = y.mean();
  ensemble.init_score = boosted ? std::log(prior / (1 - prior)) : prior;

  TrainedModel model;
  model.spec = spec;
  model.feature_names = train.names;

  Vector F = Vector::Constant(static_cast<Eigen::Index>(n), boosted ? ensemble.init_score : 0.0);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(n));
  std::vector<Real> weight(n);

  for (int t = 0; t < p.ntrees; ++t) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));

    std::fill(weight.begin(), weight.end(), 0.0);
    const auto m = static_cast<std::uint64_t>(std::max<Real>(1, std::round(p.sample_rate * static_cast<Real>(n))));
    if (!boosted && p.bootstrap) {
      for (std::uint64_t k = 0; k < m; ++k) weight[rng.below(n)] += 1;
    } else if (m < n) {
      for (auto r : rng.sample_without_replacement(n, m)) weight[r] = 1;
    } else {
      std::fill(weight.begin(), weight.end(), 1.0);
    }

    std::vector<int> tree_features;
    if (per_tree >= n_features) {
      tree_features.resize(n_features);
      std::iota(tree_features.begin(), tree_features.end(), 0);
    } else {
      for (auto f : rng.sample_without_replacement(n_features, per_tree)) tree_features.push_back(static_cast<int>(f));
    }

    Tree tree;
    if (boosted) {
      Vector prob(F.size());
      for (Eigen::Index i = 0; i < F.size(); ++i) prob(i) = sigmoid(F(i));
      const Vector residual = y - prob;
      const Vector hessian = prob.array() * (1 - prob.array());
      tree = builder.build(weight, residual, hessian, tree_features, rng);
    } else {
      tree = builder.build(weight, y, ones, tree_features, rng);
    }
    for (Eigen::Index i = 0; i < F.size(); ++i) F(i) += tree.evaluate(X.row(i));
    ensemble.trees.push_back(std::move(tree));

    Vector prob(F.size());
    const Real count = static_cast<Real>(ensemble.trees.size());
    for (Eigen::Index i = 0; i < F.size(); ++i) prob(i) = boosted ? sigmoid(F(i)) : F(i) / count;
    model.metadata.loss_curve.push_back(mean_log_loss(prob, y));
  }

  model.parameters = std::move(ensemble);
  model.metadata.duration_seconds =
      std::chrono::duration<Real>(std::chrono::steady_clock::now() - started).count();
  return model;
}

}  // namespace dac::models
