#include "cgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cgan/errors.hpp"
#include "cgan/rng.hpp"

namespace cgan::data {

namespace chr = std::chrono;

Timestamp parse_timestamp(const std::string& iso) {
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  char tail = '\0';
  if (std::sscanf(iso.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &hh, &mi, &ss, &tail) !=
          7 ||
      tail != 'Z' || iso.size() != 20)
    throw ParseError("bad timestamp '" + iso + "', expected YYYY-MM-DDTHH:MM:SSZ");
  const chr::year_month_day ymd{chr::year{y}, chr::month{mo}, chr::day{d}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 59)
    throw ParseError("timestamp '" + iso + "' has out-of-range fields");
  return chr::sys_days{ymd} + chr::hours{hh} + chr::minutes{mi} + chr::seconds{ss};
}

std::string format_timestamp(Timestamp t) {
  const auto days = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{days};
  const chr::hh_mm_ss hms{t - days};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

MeterSeries make_series(std::vector<MeterRecord> records) {
  if (records.empty()) throw ValidationError("meter series is empty");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!std::isfinite(records[i].load_kw) || records[i].load_kw < 0.0)
      throw ValidationError("load at record " + std::to_string(i + 1) +
                            " must be finite and >= 0, got " +
                            std::to_string(records[i].load_kw));
  }

  MeterSeries series;
  series.records = std::move(records);
  if (series.records.size() < 2) return series;

  const long step =
      (series.records[1].timestamp - series.records[0].timestamp).count();
  if (step == 0)
    throw ValidationError("duplicate timestamp " +
                          format_timestamp(series.records[0].timestamp));
  if (step < 0) throw ValidationError("timestamps are not increasing");

  std::string gaps;
  int gap_count = 0;
  for (std::size_t i = 1; i < series.records.size(); ++i) {
    const long d = (series.records[i].timestamp - series.records[i - 1].timestamp).count();
    if (d == 0)
      throw ValidationError("duplicate timestamp " +
                            format_timestamp(series.records[i].timestamp));
    if (d < 0) throw ValidationError("timestamps are not increasing at record " +
                                     std::to_string(i + 1));
    if (d != step && gap_count < 5) {
      gaps += "\n  at " + format_timestamp(series.records[i].timestamp) + ": " +
              std::to_string(d) + " s instead of " + std::to_string(step) + " s";
      ++gap_count;
    }
  }
  if (gap_count > 0)
    throw ValidationError("non-uniform spacing (expected " + std::to_string(step) + " s):" +
                          gaps);
  series.resolution_s = step;
  return series;
}

MeterSeries load_meter_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,load_kw")
    throw ParseError(path + ":1: expected header 'timestamp,load_kw', got '" + line + "'");

  std::vector<MeterRecord> records;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected exactly 2 columns");
    MeterRecord rec;
    try {
      rec.timestamp = parse_timestamp(line.substr(0, comma));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string value = line.substr(comma + 1);
    char* end = nullptr;
    rec.load_kw = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad load value '" + value +
                       "'");
    records.push_back(rec);
  }
  if (records.empty()) throw ParseError(path + ": no data rows");
  return make_series(std::move(records));
}

void write_meter_csv(const MeterSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "timestamp,load_kw\n";
  char buf[40];
  for (const auto& rec : series.records) {
    std::snprintf(buf, sizeof(buf), "%.17g", rec.load_kw);
    out << format_timestamp(rec.timestamp) << ',' << buf << '\n';
  }
  if (!out.good()) throw ValidationError("write failed for '" + path + "'");
}

std::vector<Eigen::VectorXd> filter_window(const MeterSeries& series, const WindowFilter& f) {
  if (!f.date_start.ok() || !f.date_end.ok()) throw ConfigError("window filter dates invalid");
  if (chr::sys_days{f.date_start} > chr::sys_days{f.date_end})
    throw ConfigError("window filter date_start after date_end");
  if (f.hour_start < 0 || f.hour_end > 24 || f.hour_start >= f.hour_end)
    throw ConfigError("window filter hours must satisfy 0 <= start < end <= 24");

  const auto day_lo = chr::sys_days{f.date_start};
  const auto day_hi = chr::sys_days{f.date_end};
  const long sec_lo = 3600L * f.hour_start;
  const long sec_hi = 3600L * f.hour_end;

  std::vector<std::pair<chr::sys_days, std::vector<double>>> days;
  for (const auto& rec : series.records) {
    const Timestamp local = rec.timestamp + chr::minutes{f.utc_offset_min};
    const auto day = chr::floor<chr::days>(local);
    if (day < day_lo || day > day_hi) continue;
    const long sod = (local - day).count();
    if (sod < sec_lo || sod >= sec_hi) continue;
    if (days.empty() || days.back().first != day) days.emplace_back(day, std::vector<double>{});
    days.back().second.push_back(rec.load_kw);
  }
  if (days.empty()) throw EmptyDatasetError("window filter selected no readings");

  const std::size_t per_day = days.front().second.size();
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(days.size());
  for (const auto& [day, loads] : days) {
    if (loads.size() != per_day)
      throw ValidationError("uneven day at " +
                            format_timestamp(Timestamp{chr::sys_days{day}}) + ": " +
                            std::to_string(loads.size()) + " readings, expected " +
                            std::to_string(per_day));
    samples.push_back(Eigen::Map<const Eigen::VectorXd>(loads.data(),
                                                        static_cast<Eigen::Index>(loads.size())));
  }
  return samples;
}

std::vector<Eigen::VectorXd> regroup(const std::vector<Eigen::VectorXd>& samples,
                                     int group_len) {
  if (group_len < 1) throw ConfigError("group_len must be >= 1");
  std::vector<Eigen::VectorXd> out;
  for (const auto& s : samples) {
    if (s.size() % group_len != 0)
      throw ConfigError("sample length " + std::to_string(s.size()) +
                        " is not divisible by group size " + std::to_string(group_len));
    for (Eigen::Index i = 0; i < s.size(); i += group_len)
      out.push_back(s.segment(i, group_len));
  }
  return out;
}

ConstraintParams estimate_params(const MeterSeries& slow, const MeterSeries* fast,
                                 std::optional<double> k1_override,
                                 std::optional<double> k2_override,
                                 std::optional<double> k3_override, double eps_div) {
  if (slow.records.empty()) throw EmptyDatasetError("estimate_params: empty slow series");

  ConstraintParams params;
  params.L = slow.records.front().load_kw;
  params.U = params.L;
  for (const auto& rec : slow.records) {
    params.L = std::min(params.L, rec.load_kw);
    params.U = std::max(params.U, rec.load_kw);
  }
  if (params.U == 0.0)
    throw DegenerateDataError("estimate_params: aggregated series is identically zero");

  if (fast && !fast->records.empty()) {
    double fmin = fast->records.front().load_kw;
    double fmax = fmin;
    double k3 = 0.0;
    for (std::size_t i = 0; i < fast->records.size(); ++i) {
      const double v = fast->records[i].load_kw;
      fmin = std::min(fmin, v);
      fmax = std::max(fmax, v);
      if (i > 0) {
        const double prev = fast->records[i - 1].load_kw;
        if (prev > eps_div) k3 = std::max(k3, std::abs(v - prev) / prev);
      }
    }
    params.k1 = (fmin == 0.0 || params.L <= eps_div) ? 0.0 : fmin / params.L;
    params.k2 = fmax / params.U;
    params.k3 = k3;
  } else if (!k2_override || !k3_override) {
    throw ConfigError("estimate_params: without a fast series, k2 and k3 must be supplied");
  }

  if (k1_override) params.k1 = *k1_override;
  if (k2_override) params.k2 = *k2_override;
  if (k3_override) params.k3 = *k3_override;
  return params;
}

std::pair<MeterSeries, MeterSeries> synth_ground_truth(const SyntheticProcessConfig& cfg) {
  if (!(cfg.l_true >= 0.0 && cfg.l_true < cfg.u_true))
    throw ConfigError("synthetic process requires 0 <= l_true < u_true");
  if (!(cfg.k3_true > 0.0 && cfg.k3_true <= 1.0))
    throw ConfigError("synthetic process requires k3_true in (0, 1]");
  if (cfg.n_days < 1) throw ConfigError("synthetic process requires n_days >= 1");
  if (!cfg.start_date.ok()) throw ConfigError("synthetic process start_date invalid");

  Rng rng(cfg.seed);
  const long n_fast = 1440L * cfg.n_days;
  const Timestamp start{chr::sys_days{cfg.start_date}};

  std::vector<MeterRecord> fast;
  fast.reserve(static_cast<std::size_t>(n_fast));
  double z = rng.uniform(cfg.l_true, cfg.u_true);
  fast.push_back({start, z});
  for (long i = 1; i < n_fast; ++i) {
    double next = z;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double u = rng.uniform(-cfg.k3_true, cfg.k3_true);
      next = std::clamp(z * (1.0 + u), cfg.l_true, cfg.u_true);
      if (z <= 0.0 || std::abs(next - z) / z <= cfg.k3_true) break;
      next = z;  // redraw; clamping toward the interior keeps this unreachable
    }
    z = next;
    fast.push_back({start + chr::minutes{i}, z});
  }

  std::vector<MeterRecord> slow;
  slow.reserve(static_cast<std::size_t>(n_fast / 15));
  for (long k = 0; k + 14 < n_fast; k += 15) {
    double sum = 0.0;
    for (long j = 0; j < 15; ++j) sum += fast[static_cast<std::size_t>(k + j)].load_kw;
    slow.push_back({start + chr::minutes{k}, sum / 15.0});
  }
  return {make_series(std::move(fast)), make_series(std::move(slow))};
}

}  // namespace cgan::data
