#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdsig/csv.hpp"
#include "spdsig/errors.hpp"
#include "spdsig/gar.hpp"
#include "spdsig/ingest.hpp"
#include "spdsig/moments.hpp"
#include "spdsig/run_config.hpp"
#include "spdsig/signal.hpp"

namespace spdsig {

/// Deterministic run log: warnings and notes go here, never into the data
/// files. No timestamps, so reruns stay byte-identical.
struct RunLog {
  std::vector<std::string> lines;

  void warn(const std::string& component, const std::string& message) {
    lines.push_back("warning," + component + "," + message);
  }
  void note(const std::string& component, const std::string& message) {
    lines.push_back("note," + component + "," + message);
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream os(path);
    os << "level,component,message\n";
    for (const auto& l : lines) os << l << '\n';
  }
};

struct MomentRow {
  SpdKey key;
  Date round_date;
  MomentSet moments;
};

struct MomentsResult {
  std::vector<MomentRow> rows;
  std::optional<CorrelationMatrix> correlations;
};

/// Moments for every record of the panel (all variables and horizons), plus
/// the cross-moment correlation matrix when enough complete records exist.
inline MomentsResult compute_moments_panel(const SpdPanel& panel, const RunConfig& cfg,
                                           RunLog* log = nullptr) {
  MomentsResult out;
  const MomentOptions opt = cfg.moment_options();
  for (const SpdRecord& rec : panel.records) {
    const ClosedDistribution closed = close_open_bins(rec.dist, cfg.tail_policy());
    out.rows.push_back(MomentRow{rec.key, rec.round_date, compute_moments(closed, opt)});
  }
  std::vector<MomentSet> sets;
  sets.reserve(out.rows.size());
  for (const MomentRow& r : out.rows) sets.push_back(r.moments);
  try {
    out.correlations = moment_correlations(sets);
  } catch (const Error& e) {
    if (e.code() != errc::insufficient_data) throw;
    if (log) log->warn("moments", std::string("correlations skipped: ") + e.what());
  }
  return out;
}

struct SignalResult {
  std::vector<SignalRecord> records;          // demeaned and classified
  std::vector<RoundAggregate> aggregates;     // per round, ascending
  SsiSeries series;
  int skipped_records = 0;                    // undefined skewness etc.
};

/// The signal stage for one (variable, horizon) slice: per-record median
/// deviation from the target and quartile skewness, forecaster demeaning,
/// classification, per-round aggregation and the index series.
inline SignalResult compute_signal(const SpdPanel& panel, const RunConfig& cfg,
                                   RunLog* log = nullptr) {
  SignalResult out;
  const MomentOptions opt = cfg.moment_options();
  for (const SpdRecord& rec : panel.records) {
    if (rec.key.variable != cfg.variable || rec.key.horizon != cfg.horizon) continue;
    const ClosedDistribution closed = close_open_bins(rec.dist, cfg.tail_policy());
    MomentSet m = compute_moments(closed, opt);
    if (!std::isfinite(m.bowley) || !std::isfinite(m.median)) {
      ++out.skipped_records;
      if (log)
        log->warn("signal", "skipping " + rec.key.forecaster_id + " " +
                                format_quarter(rec.key.round) + ": skewness undefined");
      continue;
    }
    SignalRecord sr;
    sr.forecaster_id = rec.key.forecaster_id;
    sr.round = rec.key.round;
    sr.horizon = rec.key.horizon;
    sr.median_dev = m.median - cfg.target;
    sr.skew = m.bowley;
    out.records.push_back(std::move(sr));
  }
  if (out.records.empty())
    fail(errc::insufficient_data,
         "no usable records for variable '" + cfg.variable + "', horizon '" + cfg.horizon + "'");
  demean_skew_by_forecaster(out.records);
  out.aggregates = aggregate_rounds(out.records, cfg.aggregate_method());
  out.series = ssi_from_aggregates(out.aggregates, cfg.norm());
  return out;
}

/// Survey-based point regressor: the cross-section centre of the per-record
/// distribution means, per round.
inline MacroSeries spf_series(const SpdPanel& panel, const RunConfig& cfg) {
  std::map<Quarter, std::vector<double>> by_round;
  for (const SpdRecord& rec : panel.records) {
    if (rec.key.variable != cfg.variable || rec.key.horizon != cfg.horizon) continue;
    const ClosedDistribution closed = close_open_bins(rec.dist, cfg.tail_policy());
    by_round[rec.key.round].push_back(mean(closed));
  }
  MacroSeries s;
  s.name = "SPF";
  s.transform = "survey_mean";
  const bool use_median = cfg.spf_aggregation == "median";
  for (const auto& [q, vs] : by_round) {
    s.quarters.push_back(q);
    if (use_median) {
      s.values.push_back(linalg::sample_quantile(vs, 0.5));
    } else {
      double m = 0.0;
      for (double v : vs) m += v;
      s.values.push_back(m / static_cast<double>(vs.size()));
    }
  }
  return s;
}

inline MacroSeries ssi_series(const SsiSeries& series) {
  MacroSeries s;
  s.name = "SSI";
  s.transform = "index";
  s.quarters = series.rounds;
  s.values = series.ssi;
  return s;
}

struct GarOutput {
  AlignedPanel panel;
  std::vector<GarModelResult> results;
};

inline GarOutput compute_gar(const RunConfig& cfg, RunLog* log = nullptr) {
  const SpdPanel panel = parse_spd_csv(cfg.spd_csv);
  const SignalResult sig = compute_signal(panel, cfg, log);

  std::vector<std::string> macro_warnings;
  const MacroSeries gdp = load_macro_csv(cfg.gdp_csv, "GDP", cfg.macro_agg(), "yoy_growth",
                                         &macro_warnings);
  const MacroSeries nfci = load_macro_csv(cfg.nfci_csv, "NFCI", cfg.macro_agg(), "level",
                                          &macro_warnings);
  if (log)
    for (const auto& w : macro_warnings) log->warn("ingest", w);

  GarOutput out;
  out.panel = align(gdp, {gdp, nfci, spf_series(panel, cfg), ssi_series(sig.series)},
                    cfg.horizon_quarters);
  if (log && out.panel.dropped_rows > 0)
    log->note("gar", "dropped " + std::to_string(out.panel.dropped_rows) +
                         " incomplete aligned rows");
  const auto grid = standard_model_grid();
  out.results = evaluate_models(out.panel, grid, cfg.gar());
  if (log)
    for (const auto& r : out.results) {
      int unconverged = 0;
      for (const auto& p : r.trace) unconverged += p.fit_converged ? 0 : 1;
      if (unconverged > 0)
        log->warn("gar", r.model.name + ": " + std::to_string(unconverged) +
                             " distribution fits above residual tolerance");
    }
  return out;
}

// ---------------------------------------------------------------------------
// file emission

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) fail(errc::config_error, "cannot write " + (dir / name).string());
  return os;
}

inline std::string fmt(double x) { return csv::format_double(x); }

}  // namespace detail

inline void write_moments_csv(const MomentsResult& res, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "moments.csv");
  csv::write_row(os, std::vector<std::string>{
                         "forecaster_id", "round", "horizon", "variable", "mean", "median",
                         "mode", "variance", "cv", "bowley", "pearson_mode_skew", "kelly",
                         "moors_kurtosis", "flags"});
  for (const MomentRow& r : res.rows) {
    const MomentSet& m = r.moments;
    csv::write_row(os, std::vector<std::string>{
                           r.key.forecaster_id, format_quarter(r.key.round), r.key.horizon,
                           r.key.variable, detail::fmt(m.mean), detail::fmt(m.median),
                           detail::fmt(m.mode), detail::fmt(m.variance), detail::fmt(m.cv),
                           detail::fmt(m.bowley), detail::fmt(m.pearson_mode_skew),
                           detail::fmt(m.kelly), detail::fmt(m.moors_kurtosis),
                           m.flags.to_string()});
  }
}

inline void write_correlations_csv(const CorrelationMatrix& c,
                                   const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "moment_correlations.csv");
  csv::write_row(os, std::vector<std::string>{"", "mean", "cv", "skewness", "kurtosis"});
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<std::string> row{CorrelationMatrix::labels[i]};
    for (std::size_t j = 0; j < 4; ++j) row.push_back(detail::fmt(c.values[i][j]));
    csv::write_row(os, row);
  }
}

inline void write_signals_csv(const SignalResult& res, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "signals.csv");
  csv::write_row(os, std::vector<std::string>{"forecaster_id", "round", "horizon",
                                              "median_dev", "skew", "class"});
  for (const SignalRecord& r : res.records)
    csv::write_row(os, std::vector<std::string>{r.forecaster_id, format_quarter(r.round),
                                                r.horizon, detail::fmt(r.median_dev),
                                                detail::fmt(r.skew),
                                                signal_class_name(r.cls)});
}

inline void write_ssi_csv(const SignalResult& res, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "ssi.csv");
  csv::write_row(os, std::vector<std::string>{"round", "n", "q_bar", "a_bar", "q_q1", "q_q3",
                                              "a_q1", "a_q3", "q_norm", "a_norm", "ssi"});
  for (std::size_t t = 0; t < res.series.rounds.size(); ++t) {
    const RoundAggregate& g = res.aggregates[t];
    csv::write_row(os, std::vector<std::string>{
                           format_quarter(res.series.rounds[t]), std::to_string(g.n),
                           detail::fmt(res.series.q_bar[t]), detail::fmt(res.series.a_bar[t]),
                           detail::fmt(g.q_q1), detail::fmt(g.q_q3), detail::fmt(g.a_q1),
                           detail::fmt(g.a_q3), detail::fmt(res.series.q_norm[t]),
                           detail::fmt(res.series.a_norm[t]), detail::fmt(res.series.ssi[t])});
  }
}

inline void write_class_shares_csv(const SignalResult& res, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "class_shares.csv");
  csv::write_row(os, std::vector<std::string>{"round", "n", "strong_up", "weak_up",
                                              "weak_down", "strong_down", "neutral"});
  for (const RoundAggregate& g : res.aggregates) {
    std::vector<std::string> row{format_quarter(g.round), std::to_string(g.n)};
    for (int c = 0; c < 5; ++c)
      row.push_back(detail::fmt(static_cast<double>(g.class_counts[static_cast<std::size_t>(c)]) /
                                static_cast<double>(g.n)));
    csv::write_row(os, row);
  }
}

inline void write_gar_results_csv(const GarOutput& out, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "gar_results.csv");
  csv::write_row(os, std::vector<std::string>{"model", "regressors", "avg_ls", "avg_crps",
                                              "n_periods", "crossing_count"});
  for (const GarModelResult& r : out.results) {
    std::string regs;
    for (std::size_t i = 0; i < r.model.regressors.size(); ++i) {
      if (i) regs += '+';
      regs += r.model.regressors[i];
    }
    csv::write_row(os, std::vector<std::string>{r.model.name, regs,
                                                detail::fmt(r.avg_log_score),
                                                detail::fmt(r.avg_crps),
                                                std::to_string(r.n_periods),
                                                std::to_string(r.crossing_count)});
  }
}

inline void write_gar_trace_csv(const GarOutput& out, const std::filesystem::path& dir) {
  auto os = detail::open_out(dir, "gar_params_trace.csv");
  csv::write_row(os, std::vector<std::string>{
                         "model", "quarter", "location", "scale", "shape", "dof", "q05", "q25",
                         "q75", "q95", "realized", "log_score", "crps", "crossed",
                         "fit_converged", "fit_residual"});
  for (const GarModelResult& r : out.results)
    for (const PeriodRecord& p : r.trace)
      csv::write_row(os, std::vector<std::string>{
                             r.model.name, format_quarter(p.quarter),
                             detail::fmt(p.params.location), detail::fmt(p.params.scale),
                             detail::fmt(p.params.shape), detail::fmt(p.params.dof),
                             detail::fmt(p.predicted[0]), detail::fmt(p.predicted[1]),
                             detail::fmt(p.predicted[2]), detail::fmt(p.predicted[3]),
                             detail::fmt(p.realized), detail::fmt(p.log_score),
                             detail::fmt(p.crps), p.crossed ? "1" : "0",
                             p.fit_converged ? "1" : "0", detail::fmt(p.fit_residual)});
}

// ---------------------------------------------------------------------------
// commands

inline void run_moments(const RunConfig& cfg, RunLog& log) {
  validate_config(cfg, /*need_macro=*/false);
  const SpdPanel panel = parse_spd_csv(cfg.spd_csv);
  const MomentsResult res = compute_moments_panel(panel, cfg, &log);
  write_moments_csv(res, cfg.out_dir);
  if (res.correlations) write_correlations_csv(*res.correlations, cfg.out_dir);
}

inline void run_signal(const RunConfig& cfg, RunLog& log) {
  validate_config(cfg, /*need_macro=*/false);
  const SpdPanel panel = parse_spd_csv(cfg.spd_csv);
  const SignalResult res = compute_signal(panel, cfg, &log);
  write_signals_csv(res, cfg.out_dir);
  write_ssi_csv(res, cfg.out_dir);
  write_class_shares_csv(res, cfg.out_dir);
}

inline void run_ssi(const RunConfig& cfg, RunLog& log) {
  validate_config(cfg, /*need_macro=*/false);
  const SpdPanel panel = parse_spd_csv(cfg.spd_csv);
  const SignalResult res = compute_signal(panel, cfg, &log);
  if (res.series.rounds.size() < 2)
    fail(errc::insufficient_data, "need at least 2 rounds for the index series");
  write_ssi_csv(res, cfg.out_dir);
  write_class_shares_csv(res, cfg.out_dir);
}

inline void run_gar(const RunConfig& cfg, RunLog& log) {
  validate_config(cfg, /*need_macro=*/true);
  const GarOutput out = compute_gar(cfg, &log);
  write_gar_results_csv(out, cfg.out_dir);
  write_gar_trace_csv(out, cfg.out_dir);
}

inline void run_replicate(const RunConfig& cfg, RunLog& log) {
  validate_config(cfg, /*need_macro=*/true);
  const SpdPanel panel = parse_spd_csv(cfg.spd_csv);
  const MomentsResult mom = compute_moments_panel(panel, cfg, &log);
  write_moments_csv(mom, cfg.out_dir);
  if (mom.correlations) write_correlations_csv(*mom.correlations, cfg.out_dir);
  const SignalResult sig = compute_signal(panel, cfg, &log);
  write_signals_csv(sig, cfg.out_dir);
  write_ssi_csv(sig, cfg.out_dir);
  write_class_shares_csv(sig, cfg.out_dir);
  const GarOutput gar_out = compute_gar(cfg, &log);
  write_gar_results_csv(gar_out, cfg.out_dir);
  write_gar_trace_csv(gar_out, cfg.out_dir);
}

}  // namespace spdsig
