#include "dac/analysis.hpp"

#include "dac/csv.hpp"
#include "dac/scoring.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace dac::analysis {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::TP: return "TP";
    case Outcome::FP: return "FP";
    case Outcome::FN: return "FN";
    case Outcome::TN: return "TN";
  }
  return "?";
}

void Confusion::add(bool predicted, bool actual) noexcept {
  if (predicted) {
    ++(actual ? tp : fp);
  } else {
    ++(actual ? fn : tn);
  }
}

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) {
    throw DataError("prediction count " + std::to_string(predicted.size()) + " differs from label count " +
                    std::to_string(actual.size()));
  }
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) c.add(predicted[i], actual[i]);
  return c;
}

EvalReport evaluate(const models::PredictionSet& predictions, const features::LabelMap& labels) {
  const std::set<TractId> predicted(predictions.tracts.begin(), predictions.tracts.end());
  if (predicted.size() != predictions.tracts.size()) throw DataError("predictions repeat a tract");
  std::vector<std::string> only_predicted, only_labeled;
  for (const auto& t : predicted) {
    if (!labels.count(t)) only_predicted.push_back(t.str());
  }
  for (const auto& [t, flag] : labels) {
    if (!predicted.count(t)) only_labeled.push_back(t.str());
  }
  if (!only_predicted.empty() || !only_labeled.empty()) {
    auto head = [](const std::vector<std::string>& v) {
      std::vector<std::string> shown(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(v.size(), 10)));
      return std::to_string(v.size()) + (v.empty() ? "" : " (" + join(shown, ", ") + (v.size() > 10 ? ", ..." : "") + ")");
    };
    throw DataError("prediction and label tract sets differ: only in predictions " + head(only_predicted) +
                    "; only in labels " + head(only_labeled));
  }

  EvalReport r;
  r.tracts = predictions.tracts;
  for (std::size_t i = 0; i < predictions.tracts.size(); ++i) {
    const bool p = predictions.labels[i];
    const bool a = labels.at(predictions.tracts[i]);
    r.counts.add(p, a);
    r.outcomes.push_back(p ? (a ? Outcome::TP : Outcome::FP) : (a ? Outcome::FN : Outcome::TN));
    r.probabilities.push_back(predictions.probabilities(static_cast<Eigen::Index>(i)));
  }
  r.precision = r.counts.precision();
  r.recall = r.counts.recall();
  r.f1 = r.counts.f1();
  r.accuracy = r.counts.accuracy();
  return r;
}

void write_metrics_csv(std::ostream& out, const EvalReport& report) {
  CsvWriter w(out);
  w.row({"metric", "value"});
  w.row({"tp", std::to_string(report.counts.tp)});
  w.row({"fp", std::to_string(report.counts.fp)});
  w.row({"fn", std::to_string(report.counts.fn)});
  w.row({"tn", std::to_string(report.counts.tn)});
  w.row({"precision", format_real(report.precision)});
  w.row({"recall", format_real(report.recall)});
  w.row({"f1", format_real(report.f1)});
  w.row({"accuracy", format_real(report.accuracy)});
}

void write_outcomes_csv(std::ostream& out, const EvalReport& report) {
  CsvWriter w(out);
  w.row({"tract_id", "outcome", "dac_prob"});
  for (std::size_t i = 0; i < report.tracts.size(); ++i) {
    w.row({report.tracts[i].str(), std::string(to_string(report.outcomes[i])), format_real(report.probabilities[i])});
  }
}

// ---------------------------------------------------------------------------

namespace {

std::optional<Real> median_of(std::vector<Real> values) {
  if (values.empty()) return std::nullopt;
  return median(std::move(values));
}

GroupRanking rank_group(Outcome group, const std::vector<const TractDiagnostic*>& members, std::size_t k) {
  GroupRanking g;
  g.group = group;
  g.size = members.size();
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<Real> deltas;
    for (const auto* m : members) {
      if (m->deltas[j]) deltas.push_back(*m->deltas[j]);
    }
    g.ranking.push_back(IndicatorDelta{j, median_of(deltas), deltas.size()});
  }
  std::stable_sort(g.ranking.begin(), g.ranking.end(), [](const IndicatorDelta& a, const IndicatorDelta& b) {
    if (a.median_delta.has_value() != b.median_delta.has_value()) return a.median_delta.has_value();
    if (!a.median_delta) return false;
    return std::abs(*a.median_delta) > std::abs(*b.median_delta);
  });
  return g;
}

}  // namespace

ErrorDiagnostics diagnose_errors(const EvalReport& eval, std::span<const DacRecord> dac, unsigned workers) {
  if (dac.empty()) throw DataError("no DAC records to diagnose against");
  ErrorDiagnostics d;
  d.manifest = dac.front().indicators.manifest;
  if (!d.manifest) throw DataError("DAC records carry no indicator manifest");
  const std::size_t k = d.manifest->size();

  const bool has_errors = eval.counts.fp + eval.counts.fn > 0;
  if (!has_errors) return d;
  if (eval.counts.tp == 0) throw DataError("no true-positive tracts to use as the reference group");

  std::vector<DacRecord> records(dac.begin(), dac.end());
  const bool have_pct = std::all_of(records.begin(), records.end(),
                                    [](const DacRecord& r) { return r.indicators.percentiles.has_value(); });
  if (!have_pct) scoring::assign_percentiles(records, workers);
  std::map<TractId, const DacRecord*> by_tract;
  for (const auto& r : records) by_tract[r.tract] = &r;

  auto record_for = [&](const TractId& t) -> const DacRecord& {
    auto it = by_tract.find(t);
    if (it == by_tract.end()) throw DataError("evaluated tract " + t.str() + " has no DAC record");
    return *it->second;
  };

  std::vector<std::vector<Real>> tp_values(k);
  for (std::size_t i = 0; i < eval.tracts.size(); ++i) {
    if (eval.outcomes[i] != Outcome::TP) continue;
    const auto& pct = *record_for(eval.tracts[i]).indicators.percentiles;
    for (std::size_t j = 0; j < k; ++j) {
      if (pct[j]) tp_values[j].push_back(*pct[j]);
    }
  }
  for (std::size_t j = 0; j < k; ++j) d.tp_median.push_back(median_of(tp_values[j]));

  for (std::size_t i = 0; i < eval.tracts.size(); ++i) {
    const Outcome o = eval.outcomes[i];
    if (o != Outcome::FP && o != Outcome::FN) continue;
    TractDiagnostic t;
    t.tract = eval.tracts[i];
    t.outcome = o;
    t.percentiles = *record_for(t.tract).indicators.percentiles;
    for (std::size_t j = 0; j < k; ++j) {
      if (t.percentiles[j] && d.tp_median[j]) {
        t.deltas.push_back(*t.percentiles[j] - *d.tp_median[j]);
      } else {
        t.deltas.push_back(std::nullopt);
      }
    }
    d.tracts.push_back(std::move(t));
  }
  std::sort(d.tracts.begin(), d.tracts.end(),
            [](const TractDiagnostic& a, const TractDiagnostic& b) { return a.tract < b.tract; });

  std::vector<const TractDiagnostic*> fp, fn;
  for (const auto& t : d.tracts) (t.outcome == Outcome::FP ? fp : fn).push_back(&t);
  d.false_positives = rank_group(Outcome::FP, fp, k);
  d.false_negatives = rank_group(Outcome::FN, fn, k);
  return d;
}

void write_diagnostics_csv(std::ostream& out, const ErrorDiagnostics& d) {
  CsvWriter w(out);
  w.row({"tract_id", "outcome", "indicator", "percentile", "tp_median", "delta"});
  auto opt = [](const std::optional<Real>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& t : d.tracts) {
    for (std::size_t j = 0; j < t.percentiles.size(); ++j) {
      w.row({t.tract.str(), std::string(to_string(t.outcome)), (*d.manifest)[j].key, opt(t.percentiles[j]),
             opt(d.tp_median[j]), opt(t.deltas[j])});
    }
  }
}

void write_rankings_csv(std::ostream& out, const ErrorDiagnostics& d) {
  CsvWriter w(out);
  w.row({"group", "rank", "indicator", "label", "median_delta", "abs_median_delta", "group_size", "present"});
  for (const GroupRanking* g : {&d.false_negatives, &d.false_positives}) {
    for (std::size_t r = 0; r < g->ranking.size(); ++r) {
      const auto& e = g->ranking[r];
      const auto& info = (*d.manifest)[e.indicator];
      w.row({std::string(to_string(g->group)), std::to_string(r + 1), info.key, info.label,
             e.median_delta ? format_real(*e.median_delta) : "",
             e.median_delta ? format_real(std::abs(*e.median_delta)) : "", std::to_string(g->size),
             std::to_string(e.present)});
    }
  }
}

// ---------------------------------------------------------------------------

std::map<int, YearInference> infer_years(const models::TrainedModel& model,
                                         const std::map<int, features::FeatureMatrix>& years, Real threshold,
                                         unsigned workers) {
  std::vector<int> keys;
  for (const auto& [year, m] : years) keys.push_back(year);
  std::vector<YearInference> slots(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    try {
      slots[i].predictions = models::predict(model, years.at(keys[i]), threshold);
    } catch (const DataError& e) {
      throw DataError("year " + std::to_string(keys[i]) + ": " + e.what());
    }
    const auto& labels = slots[i].predictions.labels;
    slots[i].dac_count = std::count(labels.begin(), labels.end(), true);
  });
  std::map<int, YearInference> out;
  for (std::size_t i = 0; i < keys.size(); ++i) out.emplace(keys[i], std::move(slots[i]));
  return out;
}

void write_predictions_csv(std::ostream& out, const std::map<int, YearInference>& years) {
  CsvWriter w(out);
  w.row({"year", "tract_id", "dac_prob", "dac_pred"});
  for (const auto& [year, inf] : years) {
    const auto& p = inf.predictions;
    for (std::size_t i = 0; i < p.tracts.size(); ++i) {
      w.row({std::to_string(year), p.tracts[i].str(), format_real(p.probabilities(static_cast<Eigen::Index>(i))),
             p.labels[i] ? "1" : "0"});
    }
  }
}

std::map<int, std::vector<Real>> yearly_feature_means(const std::map<int, features::FeatureMatrix>& years,
                                                      const std::vector<std::string>& names, bool weighted) {
  std::map<int, std::vector<Real>> out;
  for (const auto& [year, m] : years) {
    if (m.rows() == 0) throw DataError("year " + std::to_string(year) + " has no rows");
    Vector w = weighted && m.weights.size() == m.rows() ? m.weights : Vector(Vector::Ones(m.rows()));
    const Real total = w.sum();
    if (!(total > 0)) throw DataError("year " + std::to_string(year) + " has zero total weight");
    std::vector<Real> means;
    for (const auto& name : names) {
      const auto c = m.column(name);
      if (!c) throw DataError("year " + std::to_string(year) + " has no feature '" + name + "'");
      means.push_back(w.dot(m.values.col(static_cast<Eigen::Index>(*c))) / total);
    }
    out.emplace(year, std::move(means));
  }
  return out;
}

std::string_view to_string(CorrelationMethod m) {
  return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

std::optional<Real> pearson(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw DataError("correlation needs equal-length series");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const Real ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<Real>(n);
  const Real mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<Real>(n);
  Real sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::vector<Real> mid_ranks(std::span<const Real> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
  std::vector<Real> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const Real r = (static_cast<Real>(i) + static_cast<Real>(j)) / 2 + 1;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<Real> spearman(std::span<const Real> a, std::span<const Real> b) {
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  return pearson(ra, rb);
}

TrendReport correlate_trends(const std::map<int, Count>& counts, const std::map<int, std::vector<Real>>& means,
                             const std::vector<std::string>& names, CorrelationMethod method) {
  TrendReport r;
  r.method = method;
  for (const auto& [year, count] : counts) {
    if (!means.count(year)) throw DataError("year " + std::to_string(year) + " has counts but no feature means");
    r.years.push_back(year);
    r.counts.push_back(count);
  }
  if (means.size() != counts.size()) throw DataError("feature means cover years without DAC counts");
  if (r.years.size() < 3) {
    throw DataError("trend correlation needs at least 3 years, got " + std::to_string(r.years.size()));
  }
  std::vector<Real> count_series(r.counts.begin(), r.counts.end());
  for (std::size_t f = 0; f < names.size(); ++f) {
    TrendCorrelation c;
    c.feature = names[f];
    for (int year : r.years) {
      const auto& m = means.at(year);
      if (f >= m.size()) throw DataError("year " + std::to_string(year) + " lacks a mean for '" + names[f] + "'");
      c.series.push_back(m[f]);
    }
    c.r = method == CorrelationMethod::Pearson ? pearson(count_series, c.series) : spearman(count_series, c.series);
    if (!c.r) log(LogLevel::Warn, "trend: no correlation for '" + names[f] + "' (constant series)");
    r.correlations.push_back(std::move(c));
  }
  return r;
}

void write_trend_counts_csv(std::ostream& out, const TrendReport& report) {
  CsvWriter w(out);
  std::vector<std::string> header{"year", "dac_count"};
  for (const auto& c : report.correlations) header.push_back(c.feature);
  w.row(header);
  for (std::size_t y = 0; y < report.years.size(); ++y) {
    std::vector<std::string> row{std::to_string(report.years[y]), std::to_string(report.counts[y])};
    for (const auto& c : report.correlations) row.push_back(format_real(c.series[y]));
    w.row(row);
  }
}

void write_trend_correlations_csv(std::ostream& out, const TrendReport& report) {
  CsvWriter w(out);
  w.row({"feature", "method", "r", "flag"});
  for (const auto& c : report.correlations) {
    w.row({c.feature, std::string(to_string(report.method)), c.r ? format_real(*c.r) : "",
           c.r ? "" : "constant_series"});
  }
}

}  // namespace dac::analysis
