#include "cli_internal.hpp"

#include "dac/csv.hpp"
#include "dac/scoring.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;

namespace dac::cli {

// ---------------------------------------------------------------------------
// Registry

CLI::Option* Registry::optional_real(const std::string& name, std::optional<Real>& var, const std::string& help) {
  auto* opt = app_.add_option_function<Real>("--" + name, [&var](const Real& v) { var = v; }, help);
  remember(name, OptionKind::Scalar, [&var] { return var ? json(*var) : json(nullptr); });
  return opt;
}

CLI::Option* Registry::flag(const std::string& name, bool& var, const std::string& help) {
  auto* opt = app_.add_flag("--" + name, var, help);
  remember(name, OptionKind::Flag, [&var] { return json(var); });
  return opt;
}

json Registry::resolved() const {
  json out = json::object();
  for (const auto& [name, get] : resolved_) {
    json v = get();
    if (v.is_null()) continue;
    if (v.is_string() && v.get<std::string>().empty()) continue;
    out[name] = std::move(v);
  }
  return out;
}

namespace {

std::string token_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) return format_real(v.get<Real>());
  throw UsageError("config value " + v.dump() + " is not a string or number");
}

}  // namespace

std::vector<std::string> config_tokens(const json& config, const std::map<std::string, OptionKind>& kinds,
                                       const std::vector<std::string>& user_args) {
  if (!config.is_object()) throw UsageError("config must be a JSON object of option values");
  std::set<std::string> given;
  for (const auto& a : user_args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> tokens;
  for (const auto& [name, value] : config.items()) {
    const auto kind = kinds.find(name);
    if (kind == kinds.end()) throw UsageError("config sets unknown option '" + name + "'");
    if (given.count(name) || value.is_null()) continue;
    switch (kind->second) {
      case OptionKind::Flag:
        if (!value.is_boolean()) throw UsageError("config option '" + name + "' must be true or false");
        if (value.get<bool>()) tokens.push_back("--" + name);
        break;
      case OptionKind::Scalar:
        tokens.push_back("--" + name);
        tokens.push_back(token_text(value));
        break;
      case OptionKind::List:
        if (!value.is_array()) {
          tokens.push_back("--" + name);
          tokens.push_back(token_text(value));
          break;
        }
        for (const auto& item : value) {
          tokens.push_back("--" + name);
          tokens.push_back(token_text(item));
        }
        break;
    }
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Digests and atomic output

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string manifest_for(const std::string& output) { return output + ".manifest.json"; }

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string Context::read(const std::string& path) {
  std::string text = read_file(path);
  inputs_[fs::path(path).lexically_normal().string()] = file_sha256(path);
  return text;
}

void Context::check_not_input(const std::string& path) const {
  if (inputs_.count(fs::path(path).lexically_normal().string())) {
    throw UsageError("refusing to overwrite input file '" + path + "'");
  }
}

namespace {

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

}  // namespace

void Context::write(const std::string& path, const std::string& content) {
  check_not_input(path);
  atomic_write(path, content);
  outputs_[fs::path(path).lexically_normal().string()] = sha256_hex(content);
  log(LogLevel::Info, "wrote " + path);
}

void Context::write_volatile(const std::string& path, const std::string& content) {
  check_not_input(path);
  atomic_write(path, content);
  outputs_[fs::path(path).lexically_normal().string()] = std::nullopt;
  log(LogLevel::Info, "wrote " + path);
}

void Context::finish(const std::string& manifest_path) {
  json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  m["seed"] = seed;
  m["version"] = DAC_VERSION;
  m["inputs"] = json::object();
  for (const auto& [p, d] : inputs_) m["inputs"][p] = d;
  m["outputs"] = json::object();
  for (const auto& [p, d] : outputs_) m["outputs"][p] = d ? json(*d) : json(nullptr);
  check_not_input(manifest_path);
  atomic_write(manifest_path, m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sources

std::optional<std::string> find_source(const std::string& dir, const std::string& stem) {
  for (const char* ext : {".csv", ".csv.gz", ".tsv", ".tsv.gz"}) {
    const fs::path p = fs::path(dir) / (stem + ext);
    if (fs::exists(p)) return p.string();
  }
  return std::nullopt;
}

std::string require_source(const std::string& dir, const std::string& stem) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir + "' does not exist");
  auto p = find_source(dir, stem);
  if (!p) throw DataError("no " + stem + ".csv in '" + dir + "'");
  return *p;
}

std::vector<int> years_in(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir + "' does not exist");
  static const std::regex pattern(R"(rac_(\d{4})\.(csv|tsv)(\.gz)?)");
  std::set<int> years;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) years.insert(std::stoi(m[1]));
  }
  return {years.begin(), years.end()};
}

namespace {

struct Peek {
  bool canonical = false;
  std::size_t geocode_digits = 0;
};

// Looks at the header and first row only. Canonical files start with a
// "geoid" column; raw releases use the source's geocode column.
Peek peek(std::string_view text, const std::string& geocode_column, std::optional<char> delimiter) {
  std::size_t end = text.find('\n');
  if (end != std::string_view::npos) {
    const std::size_t second = text.find('\n', end + 1);
    end = second == std::string_view::npos ? text.size() : second;
  } else {
    end = text.size();
  }
  const CsvTable t = parse_csv(text.substr(0, end), delimiter);
  Peek p;
  p.canonical = !t.header.empty() && t.header[0] == "geoid";
  const auto col = t.column(p.canonical ? "geoid" : geocode_column);
  if (!col) throw SchemaError("missing geocode column '" + geocode_column + "'");
  if (!t.rows.empty()) {
    std::string code = trim(t.rows[0][*col]);
    if (const auto us = code.rfind("US"); us != std::string::npos) code = code.substr(us + 2);
    p.geocode_digits = code.size();
  }
  return p;
}

template <typename Record>
void report_warnings(const std::string& path, const ingest::ParseResult<Record>& r) {
  const std::size_t shown = std::min<std::size_t>(r.warnings.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) log(LogLevel::Warn, path + ": " + r.warnings[i]);
  if (r.warnings.size() > shown) {
    log(LogLevel::Warn, path + ": " + std::to_string(r.warnings.size() - shown) + " more warnings");
  }
}

std::shared_ptr<const IndicatorManifest> indicators_of(const SourceOptions& o) {
  return o.indicators ? o.indicators : IndicatorManifest::bundled();
}

template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const RowError& e) {
    throw RowError(e.line(), path + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

}  // namespace

std::vector<LodesTractRecord> load_lodes(Context& ctx, const std::string& path, LodesKind kind,
                                         const SourceOptions& options) {
  const std::string text = ctx.read(path);
  return with_path(path, [&] {
    ingest::ColumnMap map = ingest::ColumnMap::lodes_default(kind);
    if (options.map_path) map = ingest::ColumnMap::parse(ctx.read(*options.map_path), map);
    const Peek p = peek(text, map.geocode_column(), options.parse.delimiter);
    if (p.canonical) return ingest::read_canonical_lodes(text, kind);
    if (p.geocode_digits == TractId::digits) {
      auto r = ingest::parse_lodes<TractId>(text, map, kind, options.parse);
      report_warnings(path, r);
      return ingest::aggregate_to_tract<TractId>(r.records);
    }
    auto r = ingest::parse_lodes<BlockId>(text, map, kind, options.parse);
    report_warnings(path, r);
    return ingest::aggregate_to_tract<BlockId>(r.records);
  });
}

std::vector<AcsTractIncomeRecord> load_acs(Context& ctx, const std::string& path, const SourceOptions& options) {
  const std::string text = ctx.read(path);
  return with_path(path, [&] {
    ingest::ColumnMap map = ingest::ColumnMap::acs_default(options.income_bins());
    if (options.map_path) map = ingest::ColumnMap::parse(ctx.read(*options.map_path), map);
    const Peek p = peek(text, map.geocode_column(), options.parse.delimiter);
    if (p.canonical) return ingest::read_canonical_acs(text, options.income_bins());
    if (p.geocode_digits == TractId::digits) {
      auto r = ingest::parse_acs<TractId>(text, map, options.income_bins(), options.parse);
      report_warnings(path, r);
      return ingest::aggregate_to_tract<TractId>(r.records);
    }
    auto r = ingest::parse_acs<BlockGroupId>(text, map, options.income_bins(), options.parse);
    report_warnings(path, r);
    return ingest::aggregate_to_tract<BlockGroupId>(r.records);
  });
}

std::vector<DacRecord> load_dac(Context& ctx, const std::string& path, const SourceOptions& options) {
  const std::string text = ctx.read(path);
  auto manifest = indicators_of(options);
  auto records = with_path(path, [&] {
    ingest::ColumnMap map = ingest::ColumnMap::dac_default(*manifest);
    if (options.map_path) map = ingest::ColumnMap::parse(ctx.read(*options.map_path), map);
    const Peek p = peek(text, map.geocode_column(), options.parse.delimiter);
    if (p.canonical) return ingest::read_canonical_dac(text, manifest);
    auto r = ingest::parse_dac(text, map, manifest, options.parse);
    report_warnings(path, r);
    return std::move(r.records);
  });
  if (records.empty()) throw DataError(path + ": no DAC records");
  const bool have_pct = std::all_of(records.begin(), records.end(),
                                    [](const DacRecord& r) { return r.indicators.percentiles.has_value(); });
  if (!have_pct) scoring::assign_percentiles(records, ctx.workers);
  for (auto& r : records) {
    if (r.score) continue;
    const auto& v = r.indicators.values;
    if (std::all_of(v.begin(), v.end(), [](const OptionalReal& x) { return x.has_value(); })) {
      r.score = scoring::dac_score(r.indicators);
    }
  }
  return records;
}

features::FeatureMatrix matrix_from_dir(Context& ctx, const std::string& dir, features::Variant variant, int year,
                                        const features::LabelMap* labels, const SourceOptions& options) {
  using features::Variant;
  const std::string y = std::to_string(year);
  const bool need_rac = variant != Variant::V1b;
  const bool need_wac = variant == Variant::V1b || variant == Variant::V1c || variant == Variant::V2b;
  const bool need_acs = variant == Variant::V2a || variant == Variant::V2b;
  std::vector<LodesTractRecord> rac, wac;
  std::vector<AcsTractIncomeRecord> acs;
  SourceOptions source = options;
  source.map_path.reset();
  if (need_rac) rac = load_lodes(ctx, require_source(dir, "rac_" + y), LodesKind::RAC, source);
  if (need_wac) wac = load_lodes(ctx, require_source(dir, "wac_" + y), LodesKind::WAC, source);
  if (need_acs) acs = load_acs(ctx, require_source(dir, "acs_" + y), source);
  features::BuildLog blog;
  auto m = features::build_variant(variant, rac, wac, acs, labels, year, source.income_bins(), &blog);
  if (blog.dropped_unjoined || blog.dropped_zero_denominator || blog.dropped_unlabeled) {
    log(LogLevel::Info, std::string(features::to_string(variant)) + " " + y + ": dropped " +
                            std::to_string(blog.dropped_unjoined) + " unjoined, " +
                            std::to_string(blog.dropped_zero_denominator) + " zero-denominator, " +
                            std::to_string(blog.dropped_unlabeled) + " unlabeled tracts");
  }
  if (m.rows() == 0) throw DataError(std::string(features::to_string(variant)) + " " + y + ": no tracts left after joining");
  return m;
}

void ManifestFlags::define(Registry& reg, bool with_indicators) {
  reg.option("income-bins", income_bins, "Income bin manifest (key | label | lower edge)");
  if (with_indicators) reg.option("indicators", indicators, "Indicator manifest (key | label)");
}

SourceOptions ManifestFlags::load(Context& ctx) const {
  SourceOptions o;
  if (!income_bins.empty()) {
    o.bins = std::make_shared<const IncomeBinManifest>(IncomeBinManifest::parse(ctx.read(income_bins)));
  }
  if (!indicators.empty()) {
    o.indicators = std::make_shared<const IndicatorManifest>(IndicatorManifest::parse(ctx.read(indicators)));
  }
  return o;
}

features::FeatureMatrix load_matrix(Context& ctx, const std::string& path) {
  const std::string text = ctx.read(path);
  return with_path(path, [&] { return features::read_matrix_csv(text); });
}

models::TrainedModel load_model(Context& ctx, const std::string& path) {
  const std::string text = ctx.read(path);
  try {
    return models::model_from_string(text);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

features::FeatureMatrix prepare_for(const models::TrainedModel& model, const features::FeatureMatrix& matrix) {
  if (!model.standardization) return matrix;
  if (model.standardization->names != matrix.names) {
    // predict() names the differing columns.
    return matrix;
  }
  return model.standardization->apply(matrix);
}

features::Variant variant_of(const models::TrainedModel& model) {
  for (auto v : features::kAllVariants) {
    if (features::feature_names(v) == model.feature_names) return v;
  }
  throw DataError("model features do not match any feature variant");
}

std::vector<int> parse_years(const std::vector<std::string>& specs) {
  std::set<int> years;
  auto year = [](const std::string& s) {
    const auto v = try_parse_count(s);
    if (!v || *v < 1900 || *v > 2100) throw UsageError("bad year '" + s + "'");
    return static_cast<int>(*v);
  };
  for (const auto& spec : specs) {
    for (const auto& part : split(spec, ',')) {
      const std::string p = trim(part);
      if (p.empty()) continue;
      const auto dash = p.find('-');
      if (dash == std::string::npos) {
        years.insert(year(p));
        continue;
      }
      const int a = year(p.substr(0, dash)), b = year(p.substr(dash + 1));
      if (b < a) throw UsageError("empty year range '" + p + "'");
      for (int y = a; y <= b; ++y) years.insert(y);
    }
  }
  if (years.empty()) throw UsageError("no years given");
  return {years.begin(), years.end()};
}

std::vector<features::Variant> parse_variants(const std::vector<std::string>& specs) {
  std::vector<features::Variant> out;
  for (const auto& spec : specs) {
    for (const auto& part : split(spec, ',')) {
      const std::string p = trim(part);
      if (p.empty()) continue;
      const auto v = features::parse_variant(p);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  if (out.empty()) throw UsageError("no feature variants given");
  return out;
}

}  // namespace dac::cli
