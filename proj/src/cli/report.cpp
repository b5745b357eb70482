#include "cli_internal.hpp"

#include "dac/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

namespace dac::cli {

namespace {

std::string fixed(Real v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fixed(const std::string& cell, int digits) {
  const auto v = try_parse_real(cell);
  return v ? fixed(*v, digits) : (cell.empty() ? "n/a" : cell);
}

// Markdown table cells cannot hold a bare pipe.
std::string cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

std::size_t need(const CsvTable& t, const std::string& path, const char* name) {
  const auto c = t.column(name);
  if (!c) throw SchemaError(path + ": missing column '" + std::string(name) + "'");
  return *c;
}

// "v2b_GBM" -> "GBM on LI(R+W)+ACS"; anything else is shown as is.
std::string importance_title(const std::string& path) {
  const std::string stem = std::filesystem::path(path).stem().string();
  const auto us = stem.find('_');
  if (us != std::string::npos) {
    try {
      const auto v = features::parse_variant(stem.substr(0, us));
      const auto f = models::parse_family(stem.substr(us + 1));
      return std::string(models::display_name(f)) + " on " + std::string(features::display_name(v));
    } catch (const std::exception&) {
    }
  }
  return stem;
}

class ReportCommand : public Command {
 public:
  void define(CLI::App& app, Registry& reg) override {
    reg.option("from", grid_, "Best-F1 grid CSV written by automl --table1")->required();
    reg.option("leaderboard", leaderboard_, "Leaderboard CSV");
    reg.list("importance", importance_, "Importance CSVs; repeatable", false);
    reg.option("metrics", metrics_, "Metrics CSV from evaluate");
    reg.option("rankings", rankings_, "Indicator ranking CSV from diagnose");
    reg.option("trend", trend_, "Correlation CSV from trend");
    reg.option("trend-counts", trend_counts_, "Yearly count CSV from trend");
    reg.option("top", top_, "Rows per importance, ranking and leaderboard table");
    reg.option("out", out_, "Markdown file; standard output when unset");
    (void)app;
  }

  void run(Context& ctx) override {
    std::ostringstream md;
    md << "# DAC classification report\n";
    grid_section(ctx, md);
    leaderboard_section(ctx, md);
    metrics_section(ctx, md);
    importance_section(ctx, md);
    rankings_section(ctx, md);
    trend_section(ctx, md);
    if (out_.empty()) {
      *ctx.out << md.str();
      return;
    }
    ctx.write(out_, md.str());
    ctx.finish(manifest_for(out_));
  }

 private:
  static void omitted(std::ostream& md, const std::string& what, const std::string& flag) {
    md << "\n_Omitted: no " << what << " given (" << flag << ")._\n";
    log(LogLevel::Info, "report: " + what + " section omitted");
  }

  void grid_section(Context& ctx, std::ostream& md) const {
    const auto grid = automl::read_grid_csv(ctx.read(grid_));
    md << "\n## Best F1 per feature set and model family\n\n";
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::size_t r = 0; r < grid.rows.size(); ++r) {
      for (std::size_t c = 0; c < grid.cols.size(); ++c) {
        const auto& v = grid.f1[r][c];
        if (v && (!best || *v > *grid.f1[best->first][best->second])) best = std::make_pair(r, c);
      }
    }
    if (best) {
      md << "Best cell: " << models::display_name(grid.cols[best->second]) << " on "
         << features::display_name(grid.rows[best->first]) << ", F1 "
         << fixed(*grid.f1[best->first][best->second], 4) << ".\n\n";
    }
    md << automl::grid_markdown(grid);
    const auto missing = grid.missing_cells();
    if (!missing.empty()) md << "\nMissing cells: " << join(missing, ", ") << ".\n";
  }

  void leaderboard_section(Context& ctx, std::ostream& md) const {
    md << "\n## Leaderboard\n";
    if (leaderboard_.empty()) return omitted(md, "leaderboard", "--leaderboard");
    for (const auto& board : automl::read_leaderboard_csv(ctx.read(leaderboard_))) {
      md << "\n### " << (board.variant ? std::string(features::display_name(*board.variant)) : "All candidates")
         << "\n\n| Rank | Family | F1 | Accuracy | Parameters |\n|--:|:--|--:|--:|:--|\n";
      const std::size_t n = std::min(top_, board.entries.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& e = board.entries[i];
        md << "| " << i + 1 << " | " << models::display_name(e.candidate.spec.family) << " | "
           << (e.f1 ? fixed(*e.f1, 4) : "n/a") << " | " << (e.accuracy ? fixed(*e.accuracy, 4) : "n/a") << " | "
           << cell(e.error.empty() ? e.candidate.spec.describe() : "failed: " + e.error) << " |\n";
      }
    }
  }

  void metrics_section(Context& ctx, std::ostream& md) const {
    md << "\n## Held-out evaluation\n";
    if (metrics_.empty()) return omitted(md, "metrics", "--metrics");
    const CsvTable t = parse_csv(ctx.read(metrics_));
    const auto cm = need(t, metrics_, "metric"), cv = need(t, metrics_, "value");
    md << "\n| Metric | Value |\n|:--|--:|\n";
    for (const auto& row : t.rows) {
      const bool count = row[cm] == "tp" || row[cm] == "fp" || row[cm] == "fn" || row[cm] == "tn";
      md << "| " << cell(row[cm]) << " | " << (count ? row[cv] : fixed(row[cv], 4)) << " |\n";
    }
  }

  void importance_section(Context& ctx, std::ostream& md) const {
    md << "\n## Feature importance\n";
    if (importance_.empty()) return omitted(md, "importance tables", "--importance");
    for (const auto& path : importance_) {
      CsvTable t = parse_csv(ctx.read(path));
      const auto cf = need(t, path, "feature"), cr = need(t, path, "relative"), cm = need(t, path, "method");
      std::stable_sort(t.rows.begin(), t.rows.end(), [&](const auto& a, const auto& b) {
        return try_parse_real(a[cr]).value_or(0) > try_parse_real(b[cr]).value_or(0);
      });
      md << "\n### " << importance_title(path) << "\n\n| Rank | Feature | Relative | Method |\n|--:|:--|--:|:--|\n";
      const std::size_t n = std::min(top_, t.rows.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& row = t.rows[i];
        md << "| " << i + 1 << " | " << cell(row[cf]) << " | " << fixed(row[cr], 3) << " | " << cell(row[cm]) << " |\n";
      }
    }
  }

  void rankings_section(Context& ctx, std::ostream& md) const {
    md << "\n## Misclassified tracts against DAC indicators\n";
    if (rankings_.empty()) return omitted(md, "indicator rankings", "--rankings");
    const CsvTable t = parse_csv(ctx.read(rankings_));
    const auto cg = need(t, rankings_, "group"), ck = need(t, rankings_, "indicator"),
               cl = need(t, rankings_, "label"), cd = need(t, rankings_, "median_delta"),
               cs = need(t, rankings_, "group_size"), cp = need(t, rankings_, "present");
    for (const char* group : {"FN", "FP"}) {
      std::vector<const std::vector<std::string>*> rows;
      for (const auto& row : t.rows) {
        if (row[cg] == group) rows.push_back(&row);
      }
      const std::string title = std::string(group) == "FN" ? "False negatives" : "False positives";
      if (rows.empty()) {
        md << "\n### " << title << "\n\nNone.\n";
        continue;
      }
      md << "\n### " << title << " (" << (*rows.front())[cs] << " tracts)\n\n"
         << "Median percentile gap to the true-positive median.\n\n"
         << "| Rank | Indicator | Label | Median delta | Present |\n|--:|:--|:--|--:|--:|\n";
      const std::size_t n = std::min(top_, rows.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto& row = *rows[i];
        md << "| " << i + 1 << " | " << cell(row[ck]) << " | " << cell(row[cl]) << " | " << fixed(row[cd], 1) << " | "
           << row[cp] << " |\n";
      }
    }
  }

  void trend_section(Context& ctx, std::ostream& md) const {
    md << "\n## DAC estimates by year\n";
    if (trend_counts_.empty()) {
      omitted(md, "yearly counts", "--trend-counts");
    } else {
      const CsvTable t = parse_csv(ctx.read(trend_counts_));
      const auto cy = need(t, trend_counts_, "year"), cc = need(t, trend_counts_, "dac_count");
      md << "\n| Year | DAC tracts |\n|--:|--:|\n";
      for (const auto& row : t.rows) md << "| " << row[cy] << " | " << row[cc] << " |\n";
    }
    md << "\n### Correlation with the yearly DAC count\n";
    if (trend_.empty()) return omitted(md, "trend correlations", "--trend");
    const CsvTable t = parse_csv(ctx.read(trend_));
    const auto cf = need(t, trend_, "feature"), cm = need(t, trend_, "method"), cr = need(t, trend_, "r");
    const auto cflag = t.column("flag");
    md << "\n| Feature | Method | r |\n|:--|:--|--:|\n";
    for (const auto& row : t.rows) {
      std::string r = row[cr].empty() ? "n/a" : fixed(row[cr], 3);
      if (cflag && !row[*cflag].empty()) r += " (" + row[*cflag] + ")";
      md << "| " << cell(row[cf]) << " | " << cell(row[cm]) << " | " << cell(r) << " |\n";
    }
  }

  std::string grid_, leaderboard_, metrics_, rankings_, trend_, trend_counts_, out_;
  std::vector<std::string> importance_;
  std::size_t top_ = 10;
};

}  // namespace

std::unique_ptr<Command> make_report() { return std::make_unique<ReportCommand>(); }

}  // namespace dac::cli
