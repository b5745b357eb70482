#include "dac/models.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace dac::models {

namespace {

constexpr int kFormatVersion = 1;

template <typename Seq>
std::string reals(const Seq& values) {
  std::string out;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(values.size()); ++i) {
    out += ' ';
    out += format_real(values[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::string reals(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += format_real(v(i));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string raw() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of model file");
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  /// Reads a "keyword v1 v2 ..." line and returns the values.
  std::vector<std::string> expect(std::string_view keyword) {
    const std::string line = raw();
    std::vector<std::string> tokens;
    for (auto& t : split(line, ' ')) {
      if (!t.empty()) tokens.push_back(std::move(t));
    }
    if (tokens.empty() || tokens[0] != keyword) {
      fail("expected '" + std::string(keyword) + "', found '" + line + "'");
    }
    tokens.erase(tokens.begin());
    return tokens;
  }

  /// "keyword rest of line" where the rest may contain spaces.
  std::string expect_text(std::string_view keyword) {
    const std::string line = raw();
    const std::string prefix = std::string(keyword) + " ";
    if (line.rfind(prefix, 0) != 0) fail("expected '" + std::string(keyword) + "', found '" + line + "'");
    return line.substr(prefix.size());
  }

  Real real(const std::string& token) {
    auto v = try_parse_real(token);
    if (!v) fail("bad number '" + token + "'");
    return *v;
  }

  long long integer(const std::string& token) {
    auto v = try_parse_count(token);
    if (!v) fail("bad integer '" + token + "'");
    return *v;
  }

  std::string one(std::string_view keyword) {
    auto t = expect(keyword);
    if (t.size() != 1) fail("'" + std::string(keyword) + "' takes one value");
    return t[0];
  }

  Vector vector(std::string_view keyword, std::size_t expected) {
    const auto t = expect(keyword);
    if (t.size() != expected) {
      fail("'" + std::string(keyword) + "' has " + std::to_string(t.size()) + " values, expected " +
           std::to_string(expected));
    }
    Vector v(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = real(t[i]);
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("model file line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_model(std::ostream& out, const TrainedModel& model) {
  out << "dacmodel " << kFormatVersion << '\n';
  out << "family " << to_string(model.spec.family) << '\n';
  out << "seed " << model.spec.seed << '\n';
  out << "params " << model.spec.params.size() << '\n';
  for (const auto& [key, value] : model.spec.params) out << "param " << key << ' ' << format_param(value) << '\n';

  out << "features " << model.feature_names.size() << '\n';
  for (const auto& name : model.feature_names) out << "feature " << name << '\n';

  if (model.standardization) {
    const auto& s = *model.standardization;
    out << "standardization " << s.names.size() << '\n';
    for (const auto& name : s.names) out << "feature " << name << '\n';
    out << "mean" << reals(s.mean) << '\n';
    out << "stddev" << reals(s.stddev) << '\n';
    out << "constant";
    for (bool c : s.constant) out << ' ' << (c ? 1 : 0);
    out << '\n';
  } else {
    out << "standardization none\n";
  }

  out << "converged " << (model.metadata.converged ? 1 : 0) << '\n';
  out << "loss_curve " << model.metadata.loss_curve.size() << reals(model.metadata.loss_curve) << '\n';
  out << "warnings " << model.metadata.warnings.size() << '\n';
  for (const auto& w : model.metadata.warnings) out << "warning " << w << '\n';

  struct Visitor {
    std::ostream& out;
    void operator()(const TreeEnsemble& e) const {
      out << "parameters tree_ensemble\n";
      out << "boosted " << (e.boosted ? 1 : 0) << '\n';
      out << "init_score " << format_real(e.init_score) << '\n';
      out << "trees " << e.trees.size() << '\n';
      for (const auto& tree : e.trees) {
        out << "tree " << tree.nodes.size() << '\n';
        for (const auto& n : tree.nodes) {
          out << "node " << n.feature << ' ' << format_real(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
              << format_real(n.value) << ' ' << format_real(n.improvement) << ' ' << format_real(n.cover) << '\n';
        }
      }
    }
    void operator()(const LinearModel& m) const {
      out << "parameters linear\n";
      out << "intercept " << format_real(m.intercept) << '\n';
      out << "coefficients" << reals(m.coefficients) << '\n';
    }
    void operator()(const Network& net) const {
      out << "parameters network\n";
      out << "layers " << net.weights.size() << '\n';
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Matrix& W = net.weights[l];
        out << "layer " << W.rows() << ' ' << W.cols() << '\n';
        for (Eigen::Index i = 0; i < W.rows(); ++i) out << "row" << reals(Vector(W.row(i).transpose())) << '\n';
        out << "bias" << reals(net.biases[l]) << '\n';
      }
    }
  };
  std::visit(Visitor{out}, model.parameters);
  out << "end\n";
}

TrainedModel read_model(std::istream& in) {
  LineReader r(in);
  TrainedModel model;
  {
    const auto v = r.expect("dacmodel");
    if (v.size() != 1 || v[0] != std::to_string(kFormatVersion)) {
      r.fail("unsupported model format version '" + (v.empty() ? std::string() : v[0]) + "'");
    }
  }
  try {
    model.spec.family = parse_family(r.one("family"));
  } catch (const UsageError& e) {
    r.fail(e.what());
  }
  model.spec.seed = std::stoull(r.one("seed"));
  const auto n_params = r.integer(r.one("params"));
  for (long long i = 0; i < n_params; ++i) {
    const std::string rest = r.expect_text("param");
    const auto space = rest.find(' ');
    if (space == std::string::npos) r.fail("param line needs a key and a value");
    model.spec.params[rest.substr(0, space)] = parse_param(rest.substr(space + 1));
  }

  const auto n_features = r.integer(r.one("features"));
  for (long long i = 0; i < n_features; ++i) model.feature_names.push_back(r.expect_text("feature"));
  const auto p = static_cast<std::size_t>(n_features);

  const std::string stand = r.one("standardization");
  if (stand != "none") {
    features::StandardizationStats s;
    const auto k = static_cast<std::size_t>(r.integer(stand));
    for (std::size_t i = 0; i < k; ++i) s.names.push_back(r.expect_text("feature"));
    s.mean = r.vector("mean", k);
    s.stddev = r.vector("stddev", k);
    for (const auto& t : r.expect("constant")) s.constant.push_back(t == "1");
    if (s.constant.size() != k) r.fail("constant flags do not match the standardized feature count");
    model.standardization = std::move(s);
  }

  model.metadata.converged = r.one("converged") == "1";
  {
    auto t = r.expect("loss_curve");
    if (t.empty()) r.fail("loss_curve needs a count");
    const auto n = static_cast<std::size_t>(r.integer(t[0]));
    if (t.size() != n + 1) r.fail("loss_curve count does not match its values");
    for (std::size_t i = 1; i < t.size(); ++i) model.metadata.loss_curve.push_back(r.real(t[i]));
  }
  const auto n_warnings = r.integer(r.one("warnings"));
  for (long long i = 0; i < n_warnings; ++i) model.metadata.warnings.push_back(r.expect_text("warning"));

  const std::string kind = r.one("parameters");
  if (kind == "tree_ensemble") {
    TreeEnsemble e;
    e.boosted = r.one("boosted") == "1";
    e.init_score = r.real(r.one("init_score"));
    const auto n_trees = r.integer(r.one("trees"));
    for (long long t = 0; t < n_trees; ++t) {
      Tree tree;
      const auto n_nodes = r.integer(r.one("tree"));
      for (long long k = 0; k < n_nodes; ++k) {
        const auto v = r.expect("node");
        if (v.size() != 7) r.fail("node needs 7 fields");
        TreeNode node;
        node.feature = static_cast<int>(r.integer(v[0]));
        node.threshold = r.real(v[1]);
        node.left = static_cast<int>(r.integer(v[2]));
        node.right = static_cast<int>(r.integer(v[3]));
        node.value = r.real(v[4]);
        node.improvement = r.real(v[5]);
        node.cover = r.real(v[6]);
        const bool leaf = node.feature < 0;
        if (!leaf && (node.feature >= static_cast<int>(p) || node.left <= k || node.right <= k ||
                      node.left >= n_nodes || node.right >= n_nodes)) {
          r.fail("node " + std::to_string(k) + " has out-of-range links");
        }
        tree.nodes.push_back(node);
      }
      if (tree.nodes.empty()) r.fail("tree without nodes");
      e.trees.push_back(std::move(tree));
    }
    model.parameters = std::move(e);
  } else if (kind == "linear") {
    LinearModel m;
    m.intercept = r.real(r.one("intercept"));
    m.coefficients = r.vector("coefficients", p);
    model.parameters = std::move(m);
  } else if (kind == "network") {
    Network net;
    const auto layers = r.integer(r.one("layers"));
    Eigen::Index previous = static_cast<Eigen::Index>(p);
    for (long long l = 0; l < layers; ++l) {
      const auto dims = r.expect("layer");
      if (dims.size() != 2) r.fail("layer needs rows and columns");
      const auto rows = static_cast<Eigen::Index>(r.integer(dims[0]));
      const auto cols = static_cast<Eigen::Index>(r.integer(dims[1]));
      if (cols != previous) r.fail("layer " + std::to_string(l) + " input size does not chain");
      Matrix W(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) W.row(i) = r.vector("row", static_cast<std::size_t>(cols)).transpose();
      net.weights.push_back(std::move(W));
      net.biases.push_back(r.vector("bias", static_cast<std::size_t>(rows)));
      previous = rows;
    }
    if (layers == 0 || previous != 1) r.fail("network must end in a single output unit");
    model.parameters = std::move(net);
  } else {
    r.fail("unknown parameter block '" + kind + "'");
  }
  r.expect("end");
  return model;
}

std::string model_to_string(const TrainedModel& model) {
  std::ostringstream out;
  write_model(out, model);
  return out.str();
}

TrainedModel model_from_string(const std::string& text) {
  std::istringstream in(text);
  return read_model(in);
}

}  // namespace dac::models
