#include "dac/cli.hpp"

#include "cli_internal.hpp"

#include "dac/csv.hpp"

#include <iostream>
#include <sstream>

namespace dac::cli {

namespace {

struct Entry {
  const char* name;
  const char* summary;
  std::unique_ptr<Command> (*make)();
};

const std::vector<Entry>& subcommands() {
  static const std::vector<Entry> list{
      {"synth", "Generate a synthetic census corpus", make_synth},
      {"ingest", "Parse raw sources into canonical tract files", make_ingest},
      {"score", "Percentiles, DAC scores and indicator separation", make_score},
      {"features", "Build a feature matrix for one variant and year", make_features},
      {"train", "Train one model", make_train},
      {"automl", "Grid-search every family on each variant", make_automl},
      {"evaluate", "Confusion counts and F1 of a model on a matrix", make_evaluate},
      {"importance", "Feature importance of a model", make_importance},
      {"diagnose", "Compare misclassified tracts with true positives", make_diagnose},
      {"infer", "Classify tracts for other years", make_infer},
      {"trend", "Correlate yearly DAC counts with feature means", make_trend},
      {"report", "Markdown report from the pipeline outputs", make_report},
  };
  return list;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggestion(const std::string& word, const std::vector<std::string>& known) {
  std::string best;
  std::size_t best_d = std::max<std::size_t>(2, word.size() / 3) + 1;
  for (const auto& k : known) {
    const auto d = edit_distance(word, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best.empty() ? "" : "; did you mean '" + best + "'?";
}

std::string usage() {
  std::ostringstream out;
  out << "usage: dac <subcommand> [options]\n\nSubcommands:\n";
  for (const auto& e : subcommands()) {
    std::string name = e.name;
    name.resize(12, ' ');
    out << "  " << name << e.summary << '\n';
  }
  out << "\nCommon options: --seed N, --workers N, --log-level LEVEL, --config FILE\n"
         "Run 'dac <subcommand> --help' for the subcommand's options.\n";
  return out.str();
}

LogLevel parse_log_level(const std::string& s) {
  const std::string v = to_lower(s);
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "warn" || v == "warning") return LogLevel::Warn;
  if (v == "error") return LogLevel::Error;
  if (v == "silent" || v == "quiet") return LogLevel::Silent;
  throw UsageError("unknown log level '" + s + "'");
}

std::string option_name(const std::string& arg) {
  const auto eq = arg.find('=');
  return arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

int run_checked(const std::vector<std::string>& args, std::ostream& out) {
  // Pull out --config and the subcommand; everything else goes to the
  // subcommand parser, including common options given before it.
  std::optional<std::string> config_path;
  std::optional<std::string> sub;
  std::vector<std::string> rest;
  static const std::vector<std::string> valued{"--seed", "--workers", "--log-level"};
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config_path = args[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
      continue;
    }
    if (!sub && !a.empty() && a[0] != '-') {
      sub = a;
      continue;
    }
    rest.push_back(a);
    if (!sub && std::find(valued.begin(), valued.end(), a) != valued.end() && i + 1 < args.size()) {
      rest.push_back(args[++i]);
    }
  }

  json config = json::object();
  if (config_path) {
    try {
      config = json::parse(read_file(*config_path));
    } catch (const json::exception& e) {
      throw UsageError(*config_path + ": " + e.what());
    }
    if (config.is_object() && config.contains("subcommand") && config.contains("config")) {
      const std::string recorded = config["subcommand"].get<std::string>();
      if (sub && *sub != recorded) {
        throw UsageError(*config_path + " is a manifest for '" + recorded + "', not '" + *sub + "'");
      }
      sub = recorded;
      config = config["config"];
    }
  }

  if (!sub) {
    const bool help = std::any_of(rest.begin(), rest.end(), [](const std::string& a) { return a == "--help" || a == "-h"; });
    if (std::find(rest.begin(), rest.end(), "--version") != rest.end()) {
      out << "dac " << version() << '\n';
      return 0;
    }
    if (help) {
      out << usage();
      return 0;
    }
    throw UsageError("no subcommand given\n" + usage());
  }
  const Entry* entry = nullptr;
  std::vector<std::string> names;
  for (const auto& e : subcommands()) {
    names.emplace_back(e.name);
    if (*sub == e.name) entry = &e;
  }
  if (!entry) throw UsageError("unknown subcommand '" + *sub + "'" + suggestion(*sub, names));

  CLI::App app(entry->summary, std::string("dac ") + entry->name);
  app.set_help_flag("-h,--help", "Show this help");
  Registry reg(app);
  Context ctx;
  ctx.subcommand = entry->name;
  ctx.out = &out;
  std::string log_level = "info";
  reg.option("seed", ctx.seed, "Root seed for every random choice");
  reg.option("workers", ctx.workers, "Worker threads; results do not depend on it");
  reg.option("log-level", log_level, "debug, info, warn, error or silent");
  reg.exclude("workers");
  reg.exclude("log-level");
  auto command = entry->make();
  command->define(app, reg);

  std::vector<std::string> known{"--help"};
  for (const auto& [name, kind] : reg.kinds()) known.push_back("--" + name);
  for (const auto& a : rest) {
    if (a.rfind("--", 0) != 0 || a == "--") continue;
    const std::string flag = "--" + option_name(a);
    if (std::find(known.begin(), known.end(), flag) == known.end()) {
      throw UsageError("unknown option '" + flag + "' for " + entry->name + suggestion(flag, known));
    }
  }

  std::vector<std::string> tokens = config_tokens(config, reg.kinds(), rest);
  tokens.insert(tokens.end(), rest.begin(), rest.end());
  std::reverse(tokens.begin(), tokens.end());
  try {
    app.parse(tokens);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  set_log_level(parse_log_level(log_level));
  if (ctx.workers == 0) throw UsageError("--workers must be at least 1");
  ctx.config = reg.resolved();
  command->run(ctx);
  return 0;
}

}  // namespace

std::string version() { return DAC_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_checked(args, out);
  } catch (const UsageError& e) {
    err << "dac: usage error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "dac: data error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "dac: error: " << e.what() << '\n';
    return 1;
  }
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace dac::cli
