#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cgan::data {

using Timestamp = std::chrono::sys_seconds;

struct MeterRecord {
  Timestamp timestamp;
  double load_kw = 0.0;
};

/// Uniformly spaced, strictly increasing series of nonnegative kW readings.
/// resolution_s is inferred from the first gap (0 for a single record).
struct MeterSeries {
  std::vector<MeterRecord> records;
  long resolution_s = 0;

  std::size_t size() const { return records.size(); }
};

/// "2018-06-01T12:30:00Z" (UTC, seconds precision). Throws ParseError.
Timestamp parse_timestamp(const std::string& iso);
std::string format_timestamp(Timestamp t);

/// Validates ordering, spacing uniformity and value range, and infers the
/// resolution. Throws ValidationError with the offending positions.
MeterSeries make_series(std::vector<MeterRecord> records);

/// CSV with header `timestamp,load_kw`. Malformed content raises ParseError
/// carrying the 1-based line number; structural problems (duplicates, gaps)
/// raise ValidationError via make_series.
MeterSeries load_meter_csv(const std::string& path);

/// Loads are written with enough digits to round-trip bit-exactly.
void write_meter_csv(const MeterSeries& series, const std::string& path);

/// Calendar window: inclusive date range, hour range [hour_start, hour_end)
/// with hour_end up to 24. utc_offset_min shifts timestamps into site-local
/// time before the date/hour tests.
struct WindowFilter {
  std::chrono::year_month_day date_start;
  std::chrono::year_month_day date_end;
  int hour_start = 0;
  int hour_end = 24;
  int utc_offset_min = 0;
};

/// One sample per day: the day's in-window readings in time order. Every
/// returned day must contain the same reading count; partial days are a
/// ValidationError and an empty selection is an EmptyDatasetError.
std::vector<Eigen::VectorXd> filter_window(const MeterSeries& series, const WindowFilter& filter);

/// Splits each sample into consecutive groups of group_len (which must divide
/// every sample's length). regroup(samples, 1) yields per-reading scalars.
std::vector<Eigen::VectorXd> regroup(const std::vector<Eigen::VectorXd>& samples, int group_len);

struct ConstraintParams {
  double k1 = 0.0;
  double k2 = 1.0;
  double k3 = 0.0;
  double L = 0.0;  // kW, min of the aggregated series
  double U = 0.0;  // kW, max of the aggregated series
};

/// L and U always come from the aggregated (slow) series. The scale factors
/// come from the fast series when one is available:
///   k1 = min(fast)/L (0 when min(fast) = 0 or L is ~0),
///   k2 = max(fast)/U,
///   k3 = max relative step |z_i - z_{i-1}| / z_{i-1} over pairs with
///        z_{i-1} > eps_div (0 when no pair qualifies).
/// Explicit overrides win; without a fast series, k2 and k3 overrides are
/// mandatory. Throws DegenerateDataError when U = 0.
ConstraintParams estimate_params(const MeterSeries& slow, const MeterSeries* fast = nullptr,
                                 std::optional<double> k1_override = std::nullopt,
                                 std::optional<double> k2_override = std::nullopt,
                                 std::optional<double> k3_override = std::nullopt,
                                 double eps_div = 1e-6);

/// Bounded multiplicative random walk standing in for a real fast-timescale
/// feeder: z_1 ~ U[l_true, u_true], z_i = clamp(z_{i-1}(1+u), l_true, u_true)
/// with u ~ U(-k3_true, k3_true). Draws that would break the relative-step
/// bound are redrawn (clamping toward the interior never does).
struct SyntheticProcessConfig {
  double l_true = 0.55;
  double u_true = 10.26;
  double k3_true = 0.5;
  int n_days = 1;
  std::uint64_t seed = 1;
  std::chrono::year_month_day start_date{std::chrono::year{2018}, std::chrono::June,
                                         std::chrono::day{1}};
};

/// Returns (fast at 1-minute, slow at 15-minute) where each slow reading is
/// the exact mean of its 15 fast samples, timestamped at the window start.
std::pair<MeterSeries, MeterSeries> synth_ground_truth(const SyntheticProcessConfig& cfg);

}  // namespace cgan::data
