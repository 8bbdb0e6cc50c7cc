#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "spdsig/calendar.hpp"
#include "spdsig/csv.hpp"
#include "spdsig/distribution.hpp"
#include "spdsig/errors.hpp"
#include "spdsig/gar.hpp"

namespace spdsig {

/// Long-format survey histogram schema. One row per bin:
///   forecaster_id,round,horizon,variable,bin_lower,bin_upper,prob
/// `round` is an ISO date; an empty bin_lower (bin_upper) marks the bottom
/// (top) bin as open; `prob` is in percent.
struct SpdSchema {
  std::string forecaster_id = "forecaster_id";
  std::string round = "round";
  std::string horizon = "horizon";
  std::string variable = "variable";
  std::string bin_lower = "bin_lower";
  std::string bin_upper = "bin_upper";
  std::string prob = "prob";
};

struct SpdKey {
  std::string forecaster_id;
  Quarter round;
  std::string horizon;
  std::string variable;

  auto operator<=>(const SpdKey&) const = default;
};

struct SpdRecord {
  SpdKey key;
  Date round_date;  // as reported, before quarter snapping
  BinnedDistribution dist;
};

struct SpdPanel {
  std::vector<SpdRecord> records;
};

namespace detail {

struct SpdRow {
  int line = 0;
  Date date;
  double lower = 0.0, upper = 0.0;  // +-inf for open edges
  double prob = 0.0;
};

}  // namespace detail

/// Parses and validates a long-format histogram panel. Probabilities arrive
/// in percent and leave normalized to one. Bins are sorted by lower edge and
/// must tile an interval; duplicates are reported with both line numbers.
inline SpdPanel parse_spd_csv(const std::string& path, const SpdSchema& schema = {}) {
  csv::Reader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields)) fail(errc::schema_error, "'" + path + "' is empty");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
  std::size_t ncols = fields.size();
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end())
      fail(errc::schema_error, "'" + path + "' is missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = need(schema.forecaster_id), c_round = need(schema.round),
                    c_hor = need(schema.horizon), c_var = need(schema.variable),
                    c_lo = need(schema.bin_lower), c_hi = need(schema.bin_upper),
                    c_p = need(schema.prob);

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<std::tuple<std::string, std::string, std::string, std::string>,
           std::vector<detail::SpdRow>>
      groups;  // key fields as reported (round as raw date string)

  while (reader.next(fields)) {
    const int line = reader.line();
    if (fields.size() != ncols)
      fail(errc::schema_error, "line " + std::to_string(line) + ": expected " +
                                   std::to_string(ncols) + " fields, got " +
                                   std::to_string(fields.size()));
    detail::SpdRow row;
    row.line = line;
    row.date = parse_date(fields[c_round], path + ":" + std::to_string(line));
    row.lower = fields[c_lo].empty()
                    ? -inf
                    : csv::parse_double(fields[c_lo], line, schema.bin_lower);
    row.upper = fields[c_hi].empty()
                    ? inf
                    : csv::parse_double(fields[c_hi], line, schema.bin_upper);
    row.prob = csv::parse_double(fields[c_p], line, schema.prob);
    if (row.prob < 0.0)
      fail(errc::negative_probability,
           "line " + std::to_string(line) + ": negative probability");
    groups[{fields[c_id], fields[c_round], fields[c_hor], fields[c_var]}].push_back(row);
  }
  if (groups.empty()) fail(errc::schema_error, "'" + path + "' has a header but no rows");

  SpdPanel panel;
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(), [](const detail::SpdRow& a, const detail::SpdRow& b) {
      if (a.lower != b.lower) return a.lower < b.lower;
      return a.line < b.line;
    });
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].lower == rows[i - 1].lower)
        fail(errc::schema_error,
             "duplicate bin for (" + std::get<0>(key) + ", " + std::get<1>(key) + ", " +
                 std::get<2>(key) + ", " + std::get<3>(key) + ") on lines " +
                 std::to_string(rows[i - 1].line) + " and " + std::to_string(rows[i].line));
    SpdRecord rec;
    rec.key.forecaster_id = std::get<0>(key);
    rec.round_date = rows.front().date;
    rec.key.round = quarter_of(rec.round_date);
    rec.key.horizon = std::get<2>(key);
    rec.key.variable = std::get<3>(key);
    BinnedDistribution d;
    for (const auto& row : rows) {
      d.bins.push_back(Bin{row.lower, row.upper});
      d.probs.push_back(row.prob);
    }
    try {
      validate_distribution(d);
      rec.dist = normalize(std::move(d));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " in (" + std::get<0>(key) + ", " +
                                std::get<1>(key) + ", " + std::get<2>(key) + ", " +
                                std::get<3>(key) + ") of '" + path + "'");
    }
    panel.records.push_back(std::move(rec));
  }
  return panel;
}

/// Inverse of parse_spd_csv up to row ordering and numeric formatting;
/// probabilities are written back in percent.
inline std::string serialize_spd_panel(const SpdPanel& panel, const SpdSchema& schema = {}) {
  std::ostringstream os;
  csv::write_row(os, std::vector<std::string>{schema.forecaster_id, schema.round,
                                              schema.horizon, schema.variable,
                                              schema.bin_lower, schema.bin_upper,
                                              schema.prob});
  for (const SpdRecord& rec : panel.records) {
    for (std::size_t i = 0; i < rec.dist.size(); ++i) {
      const Bin& b = rec.dist.bins[i];
      csv::write_row(
          os, std::vector<std::string>{
                  rec.key.forecaster_id, format_date(rec.round_date), rec.key.horizon,
                  rec.key.variable, b.lower_open() ? "" : csv::format_double(b.lower),
                  b.upper_open() ? "" : csv::format_double(b.upper),
                  csv::format_double(rec.dist.probs[i] * 100.0)});
    }
  }
  return os.str();
}

/// Quarterly macro series. Inputs finer than quarterly are aggregated.
struct MacroSeries {
  std::string name;
  std::string transform;  // descriptive tag: "level", "yoy_growth", ...
  std::vector<Quarter> quarters;
  std::vector<double> values;
};

enum class MacroAggregation { last_observation, mean };

/// Two-column (date,value) CSV -> validated quarterly series. Multiple
/// observations inside a quarter are collapsed per `agg`; exact duplicate
/// quarterly stamps are an error. Unsorted input is sorted with a warning.
inline MacroSeries load_macro_csv(const std::string& path, const std::string& name,
                                  MacroAggregation agg = MacroAggregation::last_observation,
                                  const std::string& transform = "level",
                                  std::vector<std::string>* warnings = nullptr) {
  csv::Reader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields)) fail(errc::parse_error, "'" + path + "' is empty");
  if (fields.size() != 2)
    fail(errc::parse_error, "'" + path + "' must have exactly two columns (date,value)");
  // header row is optional: accept either "date,value" names or data
  std::vector<std::pair<Date, double>> obs;
  auto try_row = [&](const std::vector<std::string>& f, int line, bool allow_header) {
    if (f.size() != 2)
      fail(errc::parse_error,
           "line " + std::to_string(line) + ": expected 2 fields, got " +
               std::to_string(f.size()));
    try {
      const Date d = parse_date(f[0], path + ":" + std::to_string(line));
      obs.emplace_back(d, csv::parse_double(f[1], line, "value"));
    } catch (const Error&) {
      if (!allow_header) throw;
    }
  };
  try_row(fields, reader.line(), /*allow_header=*/true);
  while (reader.next(fields)) try_row(fields, reader.line(), false);
  if (obs.empty()) fail(errc::parse_error, "'" + path + "' has no observations");

  if (!std::is_sorted(obs.begin(), obs.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; })) {
    if (warnings)
      warnings->push_back("macro series '" + name + "': dates unsorted, sorting");
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  for (std::size_t i = 1; i < obs.size(); ++i)
    if (obs[i].first == obs[i - 1].first)
      fail(errc::duplicate_quarter,
           "duplicate observation date " + format_date(obs[i].first) + " in '" + path + "'");

  MacroSeries s;
  s.name = name;
  s.transform = transform;
  std::map<Quarter, std::vector<double>> by_q;
  for (const auto& [d, v] : obs) by_q[quarter_of(d)].push_back(v);
  for (const auto& [q, vs] : by_q) {
    s.quarters.push_back(q);
    if (agg == MacroAggregation::last_observation) {
      s.values.push_back(vs.back());
    } else {
      double m = 0.0;
      for (double v : vs) m += v;
      s.values.push_back(m / static_cast<double>(vs.size()));
    }
  }
  return s;
}

/// Inner-joins regressor series on quarters and pairs each row with the
/// response h quarters ahead. Rows missing any regressor (or the shifted
/// response) inside the candidate range are dropped and counted.
inline AlignedPanel align(const MacroSeries& response,
                          const std::vector<MacroSeries>& regressors, int h) {
  std::map<Quarter, double> ymap;
  for (std::size_t i = 0; i < response.quarters.size(); ++i)
    ymap[response.quarters[i]] = response.values[i];
  std::vector<std::map<Quarter, double>> xmaps(regressors.size());
  for (std::size_t r = 0; r < regressors.size(); ++r)
    for (std::size_t i = 0; i < regressors[r].quarters.size(); ++i)
      xmaps[r][regressors[r].quarters[i]] = regressors[r].values[i];

  // candidate quarters: the overlap of the regressor ranges whose shifted
  // response exists
  Quarter lo{}, hi{};
  bool first = true;
  for (const MacroSeries& s : regressors) {
    if (s.quarters.empty()) fail(errc::no_overlap, "regressor '" + s.name + "' is empty");
    if (first) {
      lo = s.quarters.front();
      hi = s.quarters.back();
      first = false;
    } else {
      lo = std::max(lo, s.quarters.front());
      hi = std::min(hi, s.quarters.back());
    }
  }
  AlignedPanel panel;
  panel.horizon = h;
  for (const MacroSeries& s : regressors) panel.names.push_back(s.name);

  std::vector<std::vector<double>> rows;
  for (Quarter q = lo; q <= hi; q = q.next()) {
    auto yit = ymap.find(q.next(h));
    if (yit == ymap.end()) continue;
    std::vector<double> row;
    bool complete = true;
    for (const auto& xm : xmaps) {
      auto it = xm.find(q);
      if (it == xm.end() || !std::isfinite(it->second)) {
        complete = false;
        break;
      }
      row.push_back(it->second);
    }
    if (!complete) {
      ++panel.dropped_rows;
      continue;
    }
    panel.quarters.push_back(q);
    panel.y.push_back(yit->second);
    rows.push_back(std::move(row));
  }
  if (panel.quarters.empty())
    fail(errc::no_overlap, "no overlapping quarters after alignment");
  panel.x = Matrix(rows.size(), regressors.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < regressors.size(); ++j) panel.x(i, j) = rows[i][j];
  return panel;
}

}  // namespace spdsig
