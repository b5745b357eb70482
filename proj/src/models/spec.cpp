#include "dac/models.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace dac::models {

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 6> kNames{{
    {Family::GBM, "GBM"},
    {Family::XGB, "XGB"},
    {Family::DRF, "DRF"},
    {Family::XRT, "XRT"},
    {Family::GLM, "GLM"},
    {Family::MLP, "MLP"},
}};

}  // namespace

std::string_view to_string(Family f) {
  for (const auto& [family, name] : kNames) {
    if (family == f) return name;
  }
  return "?";
}

std::string_view display_name(Family f) {
  switch (f) {
    case Family::GBM: return "GBM";
    case Family::XGB: return "XGBoost";
    case Family::DRF: return "DRF";
    case Family::XRT: return "XRT";
    case Family::GLM: return "GLM";
    case Family::MLP: return "DeepLearning";
  }
  return "?";
}

Family parse_family(std::string_view text) {
  const std::string t = to_lower(trim(text));
  for (const auto& [family, name] : kNames) {
    if (t == to_lower(name) || t == to_lower(display_name(family))) return family;
  }
  if (t == "deep_learning" || t == "dl") return Family::MLP;
  throw UsageError("unknown model family '" + std::string(text) + "'");
}

bool is_tree_family(Family f) {
  return f == Family::GBM || f == Family::XGB || f == Family::DRF || f == Family::XRT;
}

std::string format_param(const ParamValue& value) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "None"; }
    std::string operator()(bool b) const { return b ? "True" : "False"; }
    std::string operator()(Real x) const { return format_real(x); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const std::vector<Real>& v) const {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_real(v[i]);
      }
      return out + "]";
    }
  };
  return std::visit(Visitor{}, value);
}

ParamValue parse_param(std::string_view text) {
  const std::string t = trim(text);
  if (t == "None" || t == "none" || t == "null") return std::monostate{};
  if (t == "True" || t == "true") return true;
  if (t == "False" || t == "false") return false;
  if (auto x = try_parse_real(t)) return *x;
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
    std::vector<Real> values;
    const std::string inner = trim(std::string_view(t).substr(1, t.size() - 2));
    if (!inner.empty()) {
      for (const auto& part : split(inner, ',')) {
        auto x = try_parse_real(trim(part));
        if (!x) throw UsageError("bad list element '" + trim(part) + "' in " + t);
        values.push_back(*x);
      }
    }
    return values;
  }
  if (t.empty()) throw UsageError("empty parameter value");
  return t;
}

const std::vector<std::string>& allowed_params(Family f) {
  static const std::vector<std::string> gbm{
      "balance_classes", "col_sample_rate", "col_sample_rate_change_per_level", "col_sample_rate_per_tree",
      "learn_rate",      "max_depth",       "min_rows",                         "min_split_improvement",
      "ntrees",          "sample_rate"};
  static const std::vector<std::string> xgb{
      "balance_classes", "booster",   "col_sample_rate", "col_sample_rate_change_per_level",
      "col_sample_rate_per_tree", "learn_rate", "max_depth", "min_rows", "min_split_improvement",
      "ntrees", "reg_alpha", "reg_lambda", "sample_rate"};
  static const std::vector<std::string> forest{
      "balance_classes", "bootstrap", "col_sample_rate_change_per_level", "col_sample_rate_per_tree",
      "max_depth",       "min_rows",  "min_split_improvement",            "mtries",
      "ntrees",          "sample_rate"};
  static const std::vector<std::string> glm{"alpha", "lambda", "max_iterations", "tolerance"};
  static const std::vector<std::string> mlp{"balance_classes", "epochs", "epsilon", "hidden",
                                            "hidden_dropout_ratios", "input_dropout_ratio", "rho"};
  switch (f) {
    case Family::GBM: return gbm;
    case Family::XGB: return xgb;
    case Family::DRF:
    case Family::XRT: return forest;
    case Family::GLM: return glm;
    case Family::MLP: return mlp;
  }
  return gbm;
}

namespace {

[[noreturn]] void bad(const ModelSpec& spec, const std::string& key, const std::string& what) {
  throw UsageError(std::string(to_string(spec.family)) + "." + key + ": " + what);
}

const ParamValue* find(const ModelSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  return it == spec.params.end() ? nullptr : &it->second;
}

Real get_real(const ModelSpec& spec, const std::string& key, Real fallback) {
  const ParamValue* v = find(spec, key);
  if (!v) return fallback;
  if (const auto* x = std::get_if<Real>(v)) return *x;
  // A one-element list such as "[0.0]" is accepted for scalars.
  if (const auto* l = std::get_if<std::vector<Real>>(v); l && l->size() == 1) return (*l)[0];
  bad(spec, key, "expected a number, got " + format_param(*v));
}

int get_int(const ModelSpec& spec, const std::string& key, int fallback) {
  const Real x = get_real(spec, key, fallback);
  if (x != std::floor(x) || std::abs(x) > 1e9) bad(spec, key, "expected an integer, got " + format_real(x));
  return static_cast<int>(x);
}

bool get_bool(const ModelSpec& spec, const std::string& key, bool fallback) {
  const ParamValue* v = find(spec, key);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(v)) return *b;
  if (const auto* x = std::get_if<Real>(v); x && (*x == 0 || *x == 1)) return *x == 1;
  bad(spec, key, "expected True or False, got " + format_param(*v));
}

std::vector<Real> get_list(const ModelSpec& spec, const std::string& key) {
  const ParamValue* v = find(spec, key);
  if (!v || std::holds_alternative<std::monostate>(*v)) return {};
  if (const auto* l = std::get_if<std::vector<Real>>(v)) return *l;
  if (const auto* x = std::get_if<Real>(v)) return {*x};
  bad(spec, key, "expected a list, got " + format_param(*v));
}

void check_range(const ModelSpec& spec, const std::string& key, Real x, Real lo, bool lo_open, Real hi,
                 bool hi_open) {
  const bool ok = (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
  if (!ok) {
    std::string range = std::string(lo_open ? "(" : "[") + format_real(lo) + ", " + format_real(hi) +
                        (hi_open ? ")" : "]");
    bad(spec, key, format_real(x) + " outside " + range);
  }
}

constexpr Real kInf = std::numeric_limits<Real>::infinity();

}  // namespace

TreeParams tree_params(const ModelSpec& spec) {
  TreeParams p;
  switch (spec.family) {
    case Family::GBM:
      break;
    case Family::XGB:
      p.max_depth = 6;
      p.min_rows = 1;
      p.learn_rate = 0.3;
      p.reg_lambda = 1;
      p.min_split_improvement = 0;
      break;
    case Family::DRF:
    case Family::XRT:
      p.max_depth = 20;
      p.min_rows = 1;
      p.learn_rate = 1;
      break;
    default:
      throw UsageError(std::string(to_string(spec.family)) + " is not a tree family");
  }
  p.ntrees = get_int(spec, "ntrees", p.ntrees);
  p.max_depth = get_int(spec, "max_depth", p.max_depth);
  p.learn_rate = get_real(spec, "learn_rate", p.learn_rate);
  p.min_rows = get_real(spec, "min_rows", p.min_rows);
  p.min_split_improvement = get_real(spec, "min_split_improvement", p.min_split_improvement);
  p.sample_rate = get_real(spec, "sample_rate", p.sample_rate);
  p.col_sample_rate = get_real(spec, "col_sample_rate", p.col_sample_rate);
  p.col_sample_rate_per_tree = get_real(spec, "col_sample_rate_per_tree", p.col_sample_rate_per_tree);
  p.col_sample_rate_change_per_level =
      get_real(spec, "col_sample_rate_change_per_level", p.col_sample_rate_change_per_level);
  p.reg_alpha = get_real(spec, "reg_alpha", p.reg_alpha);
  p.reg_lambda = get_real(spec, "reg_lambda", p.reg_lambda);
  if (const ParamValue* v = find(spec, "mtries"); v && !std::holds_alternative<std::monostate>(*v)) {
    const int m = get_int(spec, "mtries", -1);
    if (m > 0) p.mtries = m;
  }
  p.bootstrap = get_bool(spec, "bootstrap", p.bootstrap);
  p.balance_classes = get_bool(spec, "balance_classes", p.balance_classes);
  return p;
}

GlmParams glm_params(const ModelSpec& spec) {
  if (spec.family != Family::GLM) throw UsageError("glm_params on a " + std::string(to_string(spec.family)));
  GlmParams p;
  p.alpha = get_real(spec, "alpha", p.alpha);
  p.lambda = get_real(spec, "lambda", p.lambda);
  p.max_iterations = get_int(spec, "max_iterations", p.max_iterations);
  p.tolerance = get_real(spec, "tolerance", p.tolerance);
  return p;
}

MlpParams mlp_params(const ModelSpec& spec) {
  if (spec.family != Family::MLP) throw UsageError("mlp_params on a " + std::string(to_string(spec.family)));
  MlpParams p;
  if (find(spec, "hidden")) {
    p.hidden.clear();
    for (Real h : get_list(spec, "hidden")) {
      if (h != std::floor(h) || h < 0 || h > 1e6) bad(spec, "hidden", "layer sizes must be whole numbers");
      p.hidden.push_back(static_cast<int>(h));
    }
  }
  p.hidden_dropout_ratios = get_list(spec, "hidden_dropout_ratios");
  // A uniform ratio list applies to any depth, so a grid can pair one
  // dropout candidate with several layouts.
  if (!p.hidden_dropout_ratios.empty() && p.hidden_dropout_ratios.size() != p.hidden.size()) {
    const auto& r = p.hidden_dropout_ratios;
    const bool uniform = std::all_of(r.begin(), r.end(), [&](Real x) { return x == r.front(); });
    if (!uniform) {
      bad(spec, "hidden_dropout_ratios", "has " + std::to_string(r.size()) + " entries for " +
                                             std::to_string(p.hidden.size()) + " hidden layers");
    }
    p.hidden_dropout_ratios.assign(p.hidden.size(), r.front());
  }
  p.input_dropout_ratio = get_real(spec, "input_dropout_ratio", p.input_dropout_ratio);
  p.rho = get_real(spec, "rho", p.rho);
  p.epsilon = get_real(spec, "epsilon", p.epsilon);
  p.epochs = get_int(spec, "epochs", p.epochs);
  p.balance_classes = get_bool(spec, "balance_classes", p.balance_classes);
  return p;
}

void ModelSpec::validate() const {
  const auto& allowed = allowed_params(family);
  for (const auto& [key, value] : params) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad(*this, key, "not a parameter of this family (allowed: " + join(allowed, ", ") + ")");
    }
  }
  if (is_tree_family(family)) {
    const TreeParams p = tree_params(*this);
    check_range(*this, "ntrees", p.ntrees, 0, false, 1e6, false);
    check_range(*this, "max_depth", p.max_depth, 1, false, 64, false);
    check_range(*this, "learn_rate", p.learn_rate, 0, false, 1, false);
    check_range(*this, "min_rows", p.min_rows, 0, true, kInf, true);
    check_range(*this, "min_split_improvement", p.min_split_improvement, 0, false, kInf, true);
    check_range(*this, "sample_rate", p.sample_rate, 0, true, 1, false);
    check_range(*this, "col_sample_rate", p.col_sample_rate, 0, true, 1, false);
    check_range(*this, "col_sample_rate_per_tree", p.col_sample_rate_per_tree, 0, true, 1, false);
    check_range(*this, "col_sample_rate_change_per_level", p.col_sample_rate_change_per_level, 0, true, 2,
                false);
    check_range(*this, "reg_alpha", p.reg_alpha, 0, false, kInf, true);
    check_range(*this, "reg_lambda", p.reg_lambda, 0, false, kInf, true);
    if (const ParamValue* b = find(*this, "booster")) {
      const auto* s = std::get_if<std::string>(b);
      if (!s || *s != "gbtree") bad(*this, "booster", "only gbtree is supported, got " + format_param(*b));
    }
    if (const ParamValue* m = find(*this, "mtries"); m && !std::holds_alternative<std::monostate>(*m)) {
      const int v = get_int(*this, "mtries", -1);
      if (v != -1 && v < 1) bad(*this, "mtries", "must be -1 (default) or positive");
    }
  } else if (family == Family::GLM) {
    const GlmParams p = glm_params(*this);
    check_range(*this, "alpha", p.alpha, 0, false, 1, false);
    check_range(*this, "lambda", p.lambda, 0, false, kInf, true);
    check_range(*this, "max_iterations", p.max_iterations, 1, false, 1e6, false);
    check_range(*this, "tolerance", p.tolerance, 0, true, kInf, true);
  } else {
    const MlpParams p = mlp_params(*this);
    if (p.hidden.empty()) bad(*this, "hidden", "needs at least one hidden layer");
    for (int h : p.hidden) {
      if (h <= 0) bad(*this, "hidden", "hidden layer of size " + std::to_string(h));
    }
    for (Real r : p.hidden_dropout_ratios) check_range(*this, "hidden_dropout_ratios", r, 0, false, 1, true);
    check_range(*this, "input_dropout_ratio", p.input_dropout_ratio, 0, false, 1, true);
    check_range(*this, "rho", p.rho, 0, true, 1, true);
    check_range(*this, "epsilon", p.epsilon, 0, false, 1, false);
    check_range(*this, "epochs", p.epochs, 0, false, 1e6, false);
  }
}

std::string ModelSpec::describe() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [key, value] : params) {
    if (!first) out << ';';
    first = false;
    out << key << '=' << format_param(value);
  }
  return out.str();
}

}  // namespace dac::models
