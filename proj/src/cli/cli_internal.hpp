#pragma once

#include "dac/automl.hpp"
#include "dac/domain.hpp"
#include "dac/features.hpp"
#include "dac/ingest.hpp"
#include "dac/models.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dac::cli {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Option registry: binds CLI11 options and remembers how to report their
// resolved values in the run manifest.

enum class OptionKind { Flag, Scalar, List };

class Registry {
 public:
  explicit Registry(CLI::App& app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    auto* opt = app_.add_option("--" + name, var, help);
    if constexpr (!std::is_same_v<T, std::string>) opt->capture_default_str();
    remember(name, OptionKind::Scalar, [&var] { return json(var); });
    return opt;
  }

  CLI::Option* optional_real(const std::string& name, std::optional<Real>& var, const std::string& help);

  template <typename T>
  CLI::Option* list(const std::string& name, std::vector<T>& var, const std::string& help, bool comma_split = true) {
    auto* opt = app_.add_option("--" + name, var, help);
    if (comma_split) opt->delimiter(',');
    remember(name, OptionKind::List, [&var] { return json(var); });
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help);

  /// Options that do not change any output (worker count, logging) are
  /// parsed but kept out of the manifest.
  void exclude(const std::string& name) { resolved_.erase(name); }

  json resolved() const;
  const std::map<std::string, OptionKind>& kinds() const { return kinds_; }

 private:
  void remember(const std::string& name, OptionKind kind, std::function<json()> get) {
    kinds_[name] = kind;
    resolved_[name] = std::move(get);
  }

  CLI::App& app_;
  std::map<std::string, OptionKind> kinds_;
  std::map<std::string, std::function<json()>> resolved_;
};

/// Turns a config object into command-line tokens. Keys the user already
/// gave on the command line are skipped, so flags override the file.
std::vector<std::string> config_tokens(const json& config, const std::map<std::string, OptionKind>& kinds,
                                       const std::vector<std::string>& user_args);

// ---------------------------------------------------------------------------
// Run context: input digests, atomic outputs, manifest.

class Context {
 public:
  std::string subcommand;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  json config;
  std::ostream* out = nullptr;  // standard output of the run

  /// Reads a whole file (gzip inflated) and records its digest.
  std::string read(const std::string& path);
  /// Writes via a temporary file and rename, creating parent directories.
  void write(const std::string& path, const std::string& content);
  /// Like write, but the file is left out of the manifest digests because
  /// its bytes are not reproducible (wall-clock timings).
  void write_volatile(const std::string& path, const std::string& content);

  /// Writes the manifest; call once after all outputs.
  void finish(const std::string& manifest_path);

 private:
  void check_not_input(const std::string& path) const;

  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::optional<std::string>> outputs_;
};

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::string& path);
/// Manifest path for a single-file output.
std::string manifest_for(const std::string& output);
std::string join_path(const std::string& dir, const std::string& name);

// ---------------------------------------------------------------------------
// Data loading shared by subcommands.

/// Source files in a data directory are named rac_<year>.csv,
/// wac_<year>.csv, acs_<year>.csv and dac.csv (optionally gzipped). Either
/// raw releases or the canonical files written by `ingest` are accepted.
std::optional<std::string> find_source(const std::string& dir, const std::string& stem);
std::string require_source(const std::string& dir, const std::string& stem);
/// Years for which the directory holds a rac_<year> file, ascending.
std::vector<int> years_in(const std::string& dir);

struct SourceOptions {
  std::optional<std::string> map_path;
  ingest::ParseOptions parse;
  std::shared_ptr<const IncomeBinManifest> bins;        // null: standard table
  std::shared_ptr<const IndicatorManifest> indicators;  // null: bundled edition

  const IncomeBinManifest& income_bins() const { return bins ? *bins : IncomeBinManifest::standard(); }
};

/// --income-bins and --indicators, shared by every subcommand that reads
/// census sources.
struct ManifestFlags {
  std::string income_bins;
  std::string indicators;

  void define(Registry& reg, bool with_indicators = true);
  SourceOptions load(Context& ctx) const;
};

std::vector<LodesTractRecord> load_lodes(Context& ctx, const std::string& path, LodesKind kind,
                                         const SourceOptions& options = {});
std::vector<AcsTractIncomeRecord> load_acs(Context& ctx, const std::string& path, const SourceOptions& options = {});
/// Fills missing percentiles and scores.
std::vector<DacRecord> load_dac(Context& ctx, const std::string& path, const SourceOptions& options = {});

/// Builds one variant's matrix for `year` from a data directory. Labels
/// are attached when given.
features::FeatureMatrix matrix_from_dir(Context& ctx, const std::string& dir, features::Variant variant, int year,
                                        const features::LabelMap* labels, const SourceOptions& options = {});

features::FeatureMatrix load_matrix(Context& ctx, const std::string& path);
models::TrainedModel load_model(Context& ctx, const std::string& path);
/// Standardizes with the model's statistics when it carries them.
features::FeatureMatrix prepare_for(const models::TrainedModel& model, const features::FeatureMatrix& matrix);
/// The variant whose feature names the model was trained on.
features::Variant variant_of(const models::TrainedModel& model);

/// "2013-2017", "2013,2015" or repeated values.
std::vector<int> parse_years(const std::vector<std::string>& specs);
std::vector<features::Variant> parse_variants(const std::vector<std::string>& specs);

// ---------------------------------------------------------------------------
// Subcommands.

class Command {
 public:
  virtual ~Command() = default;
  virtual void define(CLI::App& app, Registry& reg) = 0;
  virtual void run(Context& ctx) = 0;
};

std::unique_ptr<Command> make_synth();
std::unique_ptr<Command> make_ingest();
std::unique_ptr<Command> make_score();
std::unique_ptr<Command> make_features();
std::unique_ptr<Command> make_train();
std::unique_ptr<Command> make_evaluate();
std::unique_ptr<Command> make_importance();
std::unique_ptr<Command> make_automl();
std::unique_ptr<Command> make_diagnose();
std::unique_ptr<Command> make_infer();
std::unique_ptr<Command> make_trend();
std::unique_ptr<Command> make_report();

}  // namespace dac::cli
