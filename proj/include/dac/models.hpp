#pragma once

#include "dac/features.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dac::models {

/// The six model families. XGB is the boosting kernel with L1/L2
/// regularized leaf values; MLP is the "Deep Learning" family.
enum class Family { GBM, XGB, DRF, XRT, GLM, MLP };

inline constexpr std::array<Family, 6> kAllFamilies{Family::DRF, Family::MLP, Family::GBM,
                                                    Family::GLM, Family::XGB, Family::XRT};

std::string_view to_string(Family f);
/// Leaderboard column label, e.g. "DeepLearning".
std::string_view display_name(Family f);
Family parse_family(std::string_view text);
bool is_tree_family(Family f);

// ---------------------------------------------------------------------------
// Hyperparameters

/// A hyperparameter value: None, boolean, number, word (e.g. "gbtree") or
/// list of numbers (e.g. hidden = [50, 50]).
using ParamValue = std::variant<std::monostate, bool, Real, std::string, std::vector<Real>>;

std::string format_param(const ParamValue& value);
/// Inverse of format_param: "None", "True"/"False", numbers, "[a, b]",
/// anything else as a word.
ParamValue parse_param(std::string_view text);

/// Keys a family accepts: every grid-search key reported for it plus the
/// few needed to pin down training (lambda, epochs, mtries, ...).
const std::vector<std::string>& allowed_params(Family f);

struct ModelSpec {
  Family family = Family::GBM;
  std::map<std::string, ParamValue> params;
  std::uint64_t seed = 0;

  /// Throws UsageError on an unknown key, wrong value type, or a value out
  /// of range (rates outside (0,1], non-positive depths or counts, ...).
  void validate() const;
  /// "key=value;key=value" in key order.
  std::string describe() const;

  bool operator==(const ModelSpec&) const = default;
};

struct TreeParams {
  int ntrees = 50;
  int max_depth = 5;
  Real learn_rate = 0.1;
  Real min_rows = 10;
  Real min_split_improvement = 1e-5;
  Real sample_rate = 1.0;
  Real col_sample_rate = 1.0;           // per split, boosting families
  Real col_sample_rate_per_tree = 1.0;
  Real col_sample_rate_change_per_level = 1.0;
  Real reg_alpha = 0.0;
  Real reg_lambda = 0.0;
  std::optional<int> mtries;            // per split, forest families; default sqrt(p)
  bool bootstrap = true;                // forest families
  bool balance_classes = false;
};

struct GlmParams {
  Real alpha = 0.0;   // elastic-net mixing; 0 is pure L2
  Real lambda = 1e-4;
  int max_iterations = 100;
  Real tolerance = 1e-10;
};

struct MlpParams {
  std::vector<int> hidden{64};
  std::vector<Real> hidden_dropout_ratios;  // empty: no dropout
  Real input_dropout_ratio = 0.0;
  Real rho = 0.99;
  Real epsilon = 1e-8;
  int epochs = 10;
  bool balance_classes = false;
};

/// Family defaults overlaid with the ModelSpec parameters.
TreeParams tree_params(const ModelSpec& spec);
GlmParams glm_params(const ModelSpec& spec);
MlpParams mlp_params(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Learned parameters

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1 and carry `value`.
struct TreeNode {
  int feature = -1;
  Real threshold = 0;
  int left = -1;
  int right = -1;
  Real value = 0;
  Real improvement = 0;  // squared-error reduction of the split
  Real cover = 0;        // training weight reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  Real evaluate(const Row& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  bool operator==(const Tree&) const = default;
};

/// Boosted ensembles sum tree outputs onto init_score in log-odds space;
/// forests average per-tree probabilities.
struct TreeEnsemble {
  bool boosted = true;
  Real init_score = 0;
  std::vector<Tree> trees;

  bool operator==(const TreeEnsemble&) const = default;
};

struct LinearModel {
  Real intercept = 0;
  Vector coefficients;

  bool operator==(const LinearModel&) const = default;
};

/// weights[l] maps layer l activations (columns) to layer l+1 (rows).
/// Hidden layers use rectifiers; the single output unit is logistic.
struct Network {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  bool operator==(const Network&) const = default;
};

using ModelParameters = std::variant<TreeEnsemble, LinearModel, Network>;

struct TrainingMetadata {
  std::vector<Real> loss_curve;  // training log-loss per stage / iteration / epoch
  bool converged = true;
  std::vector<std::string> warnings;
  Real duration_seconds = 0;     // not serialized

  bool operator==(const TrainingMetadata& o) const {
    return loss_curve == o.loss_curve && converged == o.converged && warnings == o.warnings;
  }
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<std::string> feature_names;
  ModelParameters parameters;
  std::optional<features::StandardizationStats> standardization;
  TrainingMetadata metadata;

  bool operator==(const TrainedModel&) const = default;
};

// ---------------------------------------------------------------------------
// Training

/// Dispatches on spec.family. `train` must be labeled and hold both classes.
TrainedModel train(const ModelSpec& spec, const features::FeatureMatrix& train);

TrainedModel train_tree_ensemble(const ModelSpec& spec, const features::FeatureMatrix& train);
TrainedModel train_glm(const ModelSpec& spec, const features::FeatureMatrix& train);
TrainedModel train_mlp(const ModelSpec& spec, const features::FeatureMatrix& train);

/// Mean cross-entropy of a network over (X, y) and its gradient with respect
/// to every weight and bias. No dropout.
struct NetworkGradient {
  Real loss = 0;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};
NetworkGradient network_loss_gradient(const Network& net, const Matrix& X, const Vector& y);

/// Seeded initial weights: uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network initial_network(int inputs, const std::vector<int>& hidden, std::uint64_t seed);

/// Objective minimized by train_glm:
///   mean log-loss + lambda * (alpha * |beta|_1 + (1 - alpha) / 2 * |beta|_2^2),
/// with the intercept unpenalized.
Real glm_objective(const LinearModel& model, const Matrix& X, const Vector& y, Real alpha, Real lambda);

// ---------------------------------------------------------------------------
// Prediction and importance

struct PredictionSet {
  std::vector<TractId> tracts;
  Vector probabilities;
  std::vector<bool> labels;
};

/// Probability of the positive class for each row of a standardized design
/// matrix whose columns follow model.feature_names.
Vector predict_proba(const TrainedModel& model, const Matrix& X);

/// Throws DataError listing the feature-name difference when the matrix
/// columns do not match the model's.
PredictionSet predict(const TrainedModel& model, const features::FeatureMatrix& matrix, Real threshold = 0.5);

enum class ImportanceMethod { RelativeInfluence, CoefficientMagnitude, Gedeon };
std::string_view to_string(ImportanceMethod m);

struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::RelativeInfluence;
  std::vector<std::string> names;
  Vector raw;       // >= 0
  Vector relative;  // raw / max(raw); all zero when raw is all zero

  /// Feature indices by descending relative importance, ties by index.
  std::vector<std::size_t> order() const;
};

/// Tree families: summed squared-error improvement of every split on the
/// feature over all trees. GLM: |coefficient| on standardized inputs. MLP:
/// Gedeon weight-share aggregation over the first two weight matrices.
ImportanceReport feature_importance(const TrainedModel& model);

/// Gedeon input importance. With P(i->j) = |W1(j,i)| / sum_i' |W1(j,i')|
/// the share of input i in hidden unit j, and P(j->k) likewise for the
/// second weight matrix,
///   importance(i) = sum_j P(i->j) * sum_k P(j->k).
/// A network with one hidden layer uses the first factor alone.
Vector gedeon_importance(const Network& net);

void write_importance_csv(std::ostream& out, const ImportanceReport& report, std::size_t top_k = 0);

// ---------------------------------------------------------------------------
// Serialization

/// Self-describing text: "dacmodel 1" header, spec block, feature list,
/// standardization block, parameter block. Reals are written in shortest
/// round-trip form so read(write(m)) == m exactly.
void write_model(std::ostream& out, const TrainedModel& model);
TrainedModel read_model(std::istream& in);
std::string model_to_string(const TrainedModel& model);
TrainedModel model_from_string(const std::string& text);

}  // namespace dac::models
