#include "cli_internal.hpp"

#include "dac/scoring.hpp"
#include "dac/synth.hpp"

#include <filesystem>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace dac::cli {

namespace {

// ---------------------------------------------------------------------------

class SynthCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("out", out_, "Output directory")->required();
    reg.option("tracts", config_.tracts, "Number of tracts");
    reg.list("years", years_, "Corpus years, e.g. 2013-2018; the last carries the labels");
    reg.option("preset", preset_, "default or residence-driven")
        ->check(CLI::IsMember({"default", "residence-driven"}));
    reg.option("noise", config_.noise, "Half-width of the uniform noise on the latent score");
    reg.option("housing-fraction", config_.housing_fraction, "Share of DAC tracts flagged through old housing");
    reg.option("dac-fraction", config_.dac_fraction, "Target DAC share");
    reg.optional_real("latent-threshold", threshold_, "Fixed latent-score threshold instead of --dac-fraction");
    reg.optional_real("coupling", coupling_, "Workplace coupling to resident composition, 0 to 1");
    reg.option("demographic-mixing", config_.demographic_mixing, "Link between deprivation and demographic mix");
    reg.option("drift", config_.drift, "Per-year deprivation drift going back in time");
    reg.list("weights", weights_, "Latent-score weights: income,education,industry");
    reg.flag("geometry", geometry_, "Also write tracts.geojson with toy outlines");
    (void)app;
  }

  void run(Context& ctx) override {
    synth::SynthConfig c = preset_ == "residence-driven" ? synth::SynthConfig::residence_driven() : synth::SynthConfig{};
    c.tracts = config_.tracts;
    c.noise = config_.noise;
    c.housing_fraction = config_.housing_fraction;
    c.dac_fraction = config_.dac_fraction;
    c.demographic_mixing = config_.demographic_mixing;
    c.drift = config_.drift;
    c.threshold = threshold_;
    if (coupling_) c.workplace_coupling = *coupling_;
    if (!years_.empty()) c.years = parse_years(years_);
    if (!weights_.empty()) {
      if (weights_.size() != 3) throw UsageError("--weights takes three values: income,education,industry");
      c.weight_income = weights_[0];
      c.weight_education = weights_[1];
      c.weight_industry = weights_[2];
    }
    c.seed = ctx.seed;
    const auto corpus = synth::generate(c);
    for (const auto& [name, text] : synth::corpus_files(corpus, geometry_)) ctx.write(join_path(out_, name), text);
    Count flagged = 0;
    for (const auto& r : corpus.dac) flagged += r.dac_flag;
    log(LogLevel::Info, std::to_string(corpus.dac.size()) + " tracts, " + std::to_string(flagged) + " DAC");
    ctx.finish(join_path(out_, "manifest.json"));
  }

 private:
  synth::SynthConfig config_;
  std::string out_;
  std::vector<std::string> years_;
  std::string preset_ = "default";
  std::optional<Real> threshold_;
  std::optional<Real> coupling_;
  std::vector<Real> weights_;
  bool geometry_ = false;
};

// ---------------------------------------------------------------------------

std::optional<char> parse_delimiter(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "tab" || text == "\\t" || text == "\t") return '\t';
  if (text == "comma") return ',';
  if (text.size() == 1) return text[0];
  throw UsageError("--delimiter must be one character, 'comma' or 'tab'");
}

class IngestCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("kind", kind_, "Source kind: rac, wac, acs or dac");
    reg.option("input", input_, "Source file (single-file mode)");
    reg.option("dir", dir_, "Directory of rac_/wac_/acs_<year> and dac files (batch mode)");
    reg.option("out", out_, "Canonical output file, or directory in batch mode")->required();
    reg.option("map", map_, "Column map overlay (logical = column lines)");
    reg.flag("strict-sums", strict_, "Treat bin-sum mismatches as errors");
    reg.option("delimiter", delimiter_, "Field delimiter; detected from the header when unset");
    manifests_.define(reg);
    (void)app;
  }

  void run(Context& ctx) override {
    if (input_.empty() == dir_.empty()) throw UsageError("give exactly one of --input or --dir");
    SourceOptions src = manifests_.load(ctx);
    src.parse.strict_sums = strict_;
    src.parse.delimiter = parse_delimiter(delimiter_);
    if (!map_.empty()) src.map_path = map_;
    if (!input_.empty()) {
      if (kind_.empty()) throw UsageError("--input needs --kind");
      ctx.write(out_, convert(ctx, ingest::parse_source_kind(kind_), input_, src));
      ctx.finish(manifest_for(out_));
      return;
    }
    if (!kind_.empty() || !map_.empty()) log(LogLevel::Warn, "--kind and --map apply to single-file mode only");
    src.map_path.reset();
    if (!fs::is_directory(dir_)) throw DataError("input directory '" + dir_ + "' does not exist");
    static const std::regex pattern(R"(((rac|wac|acs)_\d{4}|dac)\.(csv|tsv)(\.gz)?)");
    std::vector<std::pair<std::string, std::string>> sources;
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const std::string name = entry.path().filename().string();
      std::smatch m;
      if (std::regex_match(name, m, pattern)) sources.emplace_back(m[1], entry.path().string());
    }
    if (sources.empty()) throw DataError("no rac_/wac_/acs_<year> or dac files in '" + dir_ + "'");
    std::sort(sources.begin(), sources.end());
    for (const auto& [stem, path] : sources) {
      const std::string prefix = stem.substr(0, 3);
      const auto kind = prefix == "rac"   ? ingest::SourceKind::LodesRac
                        : prefix == "wac" ? ingest::SourceKind::LodesWac
                        : prefix == "acs" ? ingest::SourceKind::Acs
                                          : ingest::SourceKind::Dac;
      ctx.write(join_path(out_, stem + ".csv"), convert(ctx, kind, path, src));
    }
    ctx.finish(join_path(out_, "manifest.json"));
  }

 private:
  static std::string convert(Context& ctx, ingest::SourceKind kind, const std::string& path, const SourceOptions& src) {
    std::ostringstream out;
    switch (kind) {
      case ingest::SourceKind::LodesRac:
      case ingest::SourceKind::LodesWac: {
        const auto lk = kind == ingest::SourceKind::LodesRac ? LodesKind::RAC : LodesKind::WAC;
        const auto records = load_lodes(ctx, path, lk, src);
        for (const auto& r : records) {
          const auto v = validate(r);
          if (!v.ok()) throw DataError(path + ": tract " + r.geo.str() + ": " + v.summary());
        }
        ingest::write_canonical<TractId>(out, records, lk);
        log(LogLevel::Info, path + ": " + std::to_string(records.size()) + " tracts");
        break;
      }
      case ingest::SourceKind::Acs: {
        const auto records = load_acs(ctx, path, src);
        for (const auto& r : records) {
          const auto v = validate(r, src.income_bins());
          if (!v.ok()) throw DataError(path + ": tract " + r.geo.str() + ": " + v.summary());
        }
        ingest::write_canonical<TractId>(out, records, src.income_bins());
        log(LogLevel::Info, path + ": " + std::to_string(records.size()) + " tracts");
        break;
      }
      case ingest::SourceKind::Dac: {
        const auto records = load_dac(ctx, path, src);
        for (const auto& r : records) {
          const auto v = validate(r);
          if (!v.ok()) log(LogLevel::Warn, path + ": tract " + r.tract.str() + ": " + v.summary());
        }
        ingest::write_canonical(out, records, *records.front().indicators.manifest);
        log(LogLevel::Info, path + ": " + std::to_string(records.size()) + " tracts");
        break;
      }
    }
    return out.str();
  }

  std::string kind_, input_, dir_, out_, map_, delimiter_;
  bool strict_ = false;
  ManifestFlags manifests_;
};

// ---------------------------------------------------------------------------

class ScoreCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("dac", dac_, "DAC indicator file")->required();
    reg.option("out", out_, "Per-tract score CSV")->required();
    reg.option("separation", separation_, "Indicator separation CSV");
    manifests_.define(reg);
    (void)app;
  }

  void run(Context& ctx) override {
    auto records = load_dac(ctx, dac_, manifests_.load(ctx));
    std::ostringstream scores;
    scoring::write_scores_csv(scores, records);
    ctx.write(out_, scores.str());
    if (!separation_.empty()) {
      std::ostringstream sep;
      scoring::write_separation_csv(sep, scoring::rank_separation(records));
      ctx.write(separation_, sep.str());
    }
    ctx.finish(manifest_for(out_));
  }

 private:
  std::string dac_, out_, separation_;
  ManifestFlags manifests_;
};

// ---------------------------------------------------------------------------

class FeaturesCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("variant", variant_, "Feature variant: v1a, v1b, v1c, v2a or v2b")->required();
    reg.option("data", data_, "Data directory")->required();
    reg.option("year", year_, "Source year; defaults to the latest in the directory");
    reg.option("labels", labels_, "DAC file for labels; defaults to dac.csv in the data directory");
    reg.flag("no-labels", no_labels_, "Write an unlabeled matrix");
    reg.option("out", out_, "Matrix CSV")->required();
    reg.option("weights-out", weights_out_, "Tract population weights CSV");
    manifests_.define(reg);
    (void)app;
  }

  void run(Context& ctx) override {
    const auto variant = features::parse_variant(variant_);
    const SourceOptions src = manifests_.load(ctx);
    const int year = year_ ? year_ : latest_year(data_);
    std::optional<features::LabelMap> labels;
    if (!no_labels_) {
      std::string path = labels_;
      if (path.empty()) path = find_source(data_, "dac").value_or("");
      if (!path.empty()) labels = features::labels_from(load_dac(ctx, path, src));
    }
    const auto m = matrix_from_dir(ctx, data_, variant, year, labels ? &*labels : nullptr, src);
    std::ostringstream out;
    features::write_matrix_csv(out, m);
    ctx.write(out_, out.str());
    if (!weights_out_.empty()) {
      std::ostringstream w;
      features::write_weights_csv(w, m);
      ctx.write(weights_out_, w.str());
    }
    log(LogLevel::Info, std::to_string(m.rows()) + " rows, " + std::to_string(m.cols()) + " features");
    ctx.finish(manifest_for(out_));
  }

  static int latest_year(const std::string& dir) {
    const auto years = years_in(dir);
    if (years.empty()) throw DataError("no rac_<year> files in '" + dir + "'");
    return years.back();
  }

 private:
  std::string variant_, data_, labels_, out_, weights_out_;
  int year_ = 0;
  bool no_labels_ = false;
  ManifestFlags manifests_;
};

}  // namespace

std::unique_ptr<Command> make_synth() { return std::make_unique<SynthCommand>(); }
std::unique_ptr<Command> make_ingest() { return std::make_unique<IngestCommand>(); }
std::unique_ptr<Command> make_score() { return std::make_unique<ScoreCommand>(); }
std::unique_ptr<Command> make_features() { return std::make_unique<FeaturesCommand>(); }

}  // namespace dac::cli
