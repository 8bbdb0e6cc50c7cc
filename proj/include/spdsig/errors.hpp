#pragma once

#include <stdexcept>
#include <string>

namespace spdsig {

/// Failure codes surfaced by the library. Input-shaped problems map to CLI
/// exit code 1, numerical ones to exit code 2.
enum class errc {
  // distribution core
  zero_mass,
  no_closed_neighbor,
  empty_distribution,
  // moment estimators
  indeterminate_mode,
  mean_near_zero,
  degenerate_iqr,
  zero_std_dev,
  degenerate_range,
  degenerate_octiles,
  insufficient_data,
  // signal / index
  empty_round,
  all_zero_series,
  alignment_error,
  // regression, distribution fitting, scoring
  rank_deficient,
  layout_mismatch,
  non_increasing_quantiles,
  convergence_failure,
  numerical_failure,
  density_underflow,
  // ingestion and configuration
  schema_error,
  non_contiguous_bins,
  negative_probability,
  parse_error,
  duplicate_quarter,
  no_overlap,
  insufficient_history,
  config_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::zero_mass: return "ZeroMass";
    case errc::no_closed_neighbor: return "NoClosedNeighbor";
    case errc::empty_distribution: return "EmptyDistribution";
    case errc::indeterminate_mode: return "IndeterminateMode";
    case errc::mean_near_zero: return "MeanNearZero";
    case errc::degenerate_iqr: return "DegenerateIQR";
    case errc::zero_std_dev: return "ZeroStdDev";
    case errc::degenerate_range: return "DegenerateRange";
    case errc::degenerate_octiles: return "DegenerateOctiles";
    case errc::insufficient_data: return "InsufficientData";
    case errc::empty_round: return "EmptyRound";
    case errc::all_zero_series: return "AllZeroSeries";
    case errc::alignment_error: return "AlignmentError";
    case errc::rank_deficient: return "RankDeficient";
    case errc::layout_mismatch: return "LayoutMismatch";
    case errc::non_increasing_quantiles: return "NonIncreasingQuantiles";
    case errc::convergence_failure: return "ConvergenceFailure";
    case errc::numerical_failure: return "NumericalFailure";
    case errc::density_underflow: return "DensityUnderflow";
    case errc::schema_error: return "SchemaError";
    case errc::non_contiguous_bins: return "NonContiguousBins";
    case errc::negative_probability: return "NegativeProbability";
    case errc::parse_error: return "ParseError";
    case errc::duplicate_quarter: return "DuplicateQuarter";
    case errc::no_overlap: return "NoOverlap";
    case errc::insufficient_history: return "InsufficientHistory";
    case errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

/// True for errors caused by the inputs (files, schemas, degenerate data)
/// rather than by a numerical procedure failing to converge.
inline bool is_input_error(errc c) {
  switch (c) {
    case errc::convergence_failure:
    case errc::numerical_failure:
    case errc::density_underflow:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace spdsig
