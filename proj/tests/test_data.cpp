#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "cgan/data.hpp"
#include "cgan/errors.hpp"
#include "cgan/metrics.hpp"
#include "cgan/qp.hpp"

using namespace cgan;
using namespace cgan::data;
namespace chr = std::chrono;

namespace {

Timestamp ts(const std::string& iso) { return parse_timestamp(iso); }

MeterSeries series_at(const std::string& start, long step_s, const std::vector<double>& loads) {
  std::vector<MeterRecord> recs;
  Timestamp t = ts(start);
  for (double v : loads) {
    recs.push_back({t, v});
    t += chr::seconds{step_s};
  }
  return make_series(std::move(recs));
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("timestamp parsing and formatting round-trip") {
  const std::string iso = "2018-06-01T12:30:00Z";
  CHECK(format_timestamp(ts(iso)) == iso);
  CHECK(format_timestamp(ts("2018-06-01T00:00:00Z") + chr::minutes{90}) ==
        "2018-06-01T01:30:00Z");

  CHECK_THROWS_AS(parse_timestamp("2018-06-01 12:30:00"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2018-13-01T00:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2018-02-30T00:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2018-06-01T25:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("garbage"), ParseError);
}

TEST_CASE("series validation infers resolution and rejects defects") {
  auto s = series_at("2018-06-01T00:00:00Z", 900, {1.0, 2.0});
  CHECK(s.resolution_s == 900);

  CHECK_THROWS_AS(make_series({}), ValidationError);
  CHECK_THROWS_AS(series_at("2018-06-01T00:00:00Z", 0, {1.0, 2.0}), ValidationError);

  // gap in the middle
  std::vector<MeterRecord> gapped = {{ts("2018-06-01T00:00:00Z"), 1.0},
                                     {ts("2018-06-01T00:15:00Z"), 2.0},
                                     {ts("2018-06-01T00:45:00Z"), 3.0}};
  CHECK_THROWS_WITH_AS(make_series(gapped), doctest::Contains("non-uniform"), ValidationError);

  std::vector<MeterRecord> unsorted = {{ts("2018-06-01T01:00:00Z"), 1.0},
                                       {ts("2018-06-01T00:00:00Z"), 2.0}};
  CHECK_THROWS_AS(make_series(unsorted), ValidationError);

  CHECK_THROWS_AS(series_at("2018-06-01T00:00:00Z", 900, {1.0, -0.5}), ValidationError);
  CHECK_THROWS_AS(series_at("2018-06-01T00:00:00Z", 900,
                            {1.0, std::numeric_limits<double>::quiet_NaN()}),
                  ValidationError);
}

TEST_CASE("csv round-trips a synthetic day bit-exactly") {
  std::vector<double> loads;
  for (int i = 0; i < 96; ++i) loads.push_back(0.55 + 0.07 * i + 1e-13 * i);
  auto original = series_at("2018-06-01T00:00:00Z", 900, loads);

  const std::string path = temp_path("cgan_roundtrip.csv");
  write_meter_csv(original, path);
  auto loaded = load_meter_csv(path);
  std::filesystem::remove(path);

  REQUIRE(loaded.size() == original.size());
  CHECK(loaded.resolution_s == 900);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.records[i].timestamp == original.records[i].timestamp);
    CHECK(loaded.records[i].load_kw == original.records[i].load_kw);  // bitwise
  }
}

TEST_CASE("csv loader reports line numbers for malformed content") {
  const std::string path = temp_path("cgan_bad.csv");
  auto write_file = [&](const std::string& content) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f);
    std::fputs(content.c_str(), f);
    std::fclose(f);
  };

  write_file("wrong,header\n");
  CHECK_THROWS_WITH_AS(load_meter_csv(path), doctest::Contains(":1:"), ParseError);

  write_file("timestamp,load_kw\n2018-06-01T00:00:00Z,1.0\nnot-a-time,2.0\n");
  CHECK_THROWS_WITH_AS(load_meter_csv(path), doctest::Contains(":3:"), ParseError);

  write_file("timestamp,load_kw\n2018-06-01T00:00:00Z,abc\n");
  CHECK_THROWS_WITH_AS(load_meter_csv(path), doctest::Contains(":2:"), ParseError);

  write_file("timestamp,load_kw\n2018-06-01T00:00:00Z,1.0,extra\n");
  CHECK_THROWS_AS(load_meter_csv(path), ParseError);

  // duplicate timestamps pass parsing but fail series validation
  write_file("timestamp,load_kw\n2018-06-01T00:00:00Z,1.0\n2018-06-01T00:00:00Z,2.0\n");
  CHECK_THROWS_WITH_AS(load_meter_csv(path), doctest::Contains("duplicate"), ValidationError);

  CHECK_THROWS_AS(load_meter_csv(temp_path("cgan_missing_no_such_file.csv")), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("window filter groups the noon hour into 4 readings per day") {
  std::vector<double> loads;
  for (int i = 0; i < 3 * 96; ++i) loads.push_back(1.0 + 0.01 * i);
  auto s = series_at("2018-06-01T00:00:00Z", 900, loads);

  WindowFilter f{chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}},
                 chr::year_month_day{chr::year{2018}, chr::August, chr::day{31}}, 12, 13};
  auto samples = filter_window(s, f);
  REQUIRE(samples.size() == 3);
  for (const auto& day : samples) CHECK(day.size() == 4);
  // 12:00 on day 0 is reading 48
  CHECK(samples[0](0) == doctest::Approx(1.0 + 0.01 * 48).epsilon(1e-15));
  CHECK(samples[1](0) == doctest::Approx(1.0 + 0.01 * (96 + 48)).epsilon(1e-15));

  // purity: same series, same filter, same result
  auto again = filter_window(s, f);
  REQUIRE(again.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(again[i] == samples[i]);
}

TEST_CASE("window filter returns whole days and rejects empty or uneven picks") {
  std::vector<double> loads;
  for (int i = 0; i < 96; ++i) loads.push_back(2.0);
  auto s = series_at("2018-06-01T00:00:00Z", 900, loads);

  WindowFilter all{chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}},
                   chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}}, 0, 24};
  auto samples = filter_window(s, all);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].size() == 96);

  WindowFilter miss{chr::year_month_day{chr::year{2017}, chr::June, chr::day{1}},
                    chr::year_month_day{chr::year{2017}, chr::June, chr::day{2}}, 0, 24};
  CHECK_THROWS_AS(filter_window(s, miss), EmptyDatasetError);

  // second day present only partially: 96 + 4 readings
  std::vector<double> uneven(100, 2.0);
  auto s2 = series_at("2018-06-01T00:00:00Z", 900, uneven);
  WindowFilter two{chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}},
                   chr::year_month_day{chr::year{2018}, chr::June, chr::day{2}}, 0, 24};
  CHECK_THROWS_WITH_AS(filter_window(s2, two), doctest::Contains("uneven"), ValidationError);

  WindowFilter bad_hours{chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}},
                         chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}}, 13, 12};
  CHECK_THROWS_AS(filter_window(s, bad_hours), ConfigError);
}

TEST_CASE("utc offset shifts the local window") {
  // readings at 23:00 and 23:15 UTC on May 31 land in June 1 with +2h offset
  auto s = series_at("2018-05-31T23:00:00Z", 900, {7.0, 8.0});
  WindowFilter f{chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}},
                 chr::year_month_day{chr::year{2018}, chr::June, chr::day{1}}, 0, 24, 120};
  auto samples = filter_window(s, f);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].size() == 2);
  CHECK(samples[0](0) == 7.0);
}

TEST_CASE("regroup splits day samples into fixed-size chunks") {
  std::vector<Eigen::VectorXd> days = {Eigen::VectorXd::LinSpaced(6, 1.0, 6.0)};
  auto scalars = regroup(days, 1);
  REQUIRE(scalars.size() == 6);
  CHECK(scalars[3](0) == doctest::Approx(4.0).epsilon(1e-15));

  auto pairs = regroup(days, 3);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1](0) == doctest::Approx(4.0).epsilon(1e-15));

  CHECK_THROWS_AS(regroup(days, 4), ConfigError);
  CHECK_THROWS_AS(regroup(days, 0), ConfigError);
}

TEST_CASE("parameter estimation follows the documented formulas") {
  auto slow = series_at("2018-06-01T00:00:00Z", 900, {0.55, 7.38, 3.0});
  auto fast = series_at("2018-06-01T00:00:00Z", 60, {5.0, 0.0, 10.26, 7.0});

  auto p = estimate_params(slow, &fast);
  CHECK(p.L == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(p.U == doctest::Approx(7.38).epsilon(1e-15));
  CHECK(p.k1 == 0.0);  // min(fast) = 0
  CHECK(p.k2 == doctest::Approx(10.26 / 7.38).epsilon(1e-12));
  CHECK(p.k2 == doctest::Approx(1.3902).epsilon(1e-4));

  auto ramp = series_at("2018-06-01T00:00:00Z", 60, {2.0, 3.0, 1.5});
  auto p2 = estimate_params(slow, &ramp);
  CHECK(p2.k3 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p2.k1 == doctest::Approx(1.5 / 0.55).epsilon(1e-12));

  auto flat = series_at("2018-06-01T00:00:00Z", 60, {4.0, 4.0, 4.0});
  CHECK(estimate_params(slow, &flat).k3 == 0.0);

  auto zeros = series_at("2018-06-01T00:00:00Z", 900, {0.0, 0.0});
  CHECK_THROWS_AS(estimate_params(zeros, &fast), DegenerateDataError);

  CHECK_THROWS_AS(estimate_params(slow), ConfigError);  // no fast, no overrides
  auto manual = estimate_params(slow, nullptr, 0.1, 1.4, 0.5);
  CHECK(manual.k1 == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(manual.k2 == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(manual.k3 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(manual.L == doctest::Approx(0.55).epsilon(1e-15));
}

TEST_CASE("synthetic process respects its own bounds and aggregates exactly") {
  SyntheticProcessConfig cfg;
  cfg.l_true = 0.55;
  cfg.u_true = 10.26;
  cfg.k3_true = 0.5;
  cfg.n_days = 2;
  cfg.seed = 42;
  auto [fast, slow] = synth_ground_truth(cfg);

  REQUIRE(fast.size() == 2 * 1440);
  REQUIRE(slow.size() == 2 * 96);
  CHECK(fast.resolution_s == 60);
  CHECK(slow.resolution_s == 900);

  Eigen::VectorXd all(static_cast<Eigen::Index>(fast.size()));
  for (std::size_t i = 0; i < fast.size(); ++i) {
    const double v = fast.records[i].load_kw;
    CHECK(v >= cfg.l_true);
    CHECK(v <= cfg.u_true);
    all(static_cast<Eigen::Index>(i)) = v;
  }
  const auto change = metrics::max_consecutive_change(all);
  REQUIRE(change.has_value());
  CHECK(*change <= 100.0 * cfg.k3_true + 1e-9);

  for (std::size_t k = 0; k < slow.size(); ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 15; ++j) sum += fast.records[15 * k + j].load_kw;
    CHECK(std::abs(slow.records[k].load_kw - sum / 15.0) <= 1e-12);
    CHECK(slow.records[k].load_kw >= cfg.l_true);
    CHECK(slow.records[k].load_kw <= cfg.u_true);
  }

  // determinism
  auto [fast2, slow2] = synth_ground_truth(cfg);
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast.records[i].load_kw == fast2.records[i].load_kw);
}

TEST_CASE("estimated polytope contains every synthetic window") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticProcessConfig cfg;
    cfg.l_true = 0.55;
    cfg.u_true = 10.26;
    cfg.k3_true = 0.5;
    cfg.n_days = 1;
    cfg.seed = seed;
    auto [fast, slow] = synth_ground_truth(cfg);

    auto p = estimate_params(slow, &fast);
    CHECK(p.k3 <= cfg.k3_true + 1e-12);
    CHECK(p.k2 * p.U <= cfg.u_true + 1e-12);

    auto P = qp::build_polytope(p.k1, p.k2, p.k3, p.L, p.U, 15);
    Eigen::VectorXd profile(static_cast<Eigen::Index>(fast.size()));
    for (std::size_t i = 0; i < fast.size(); ++i)
      profile(static_cast<Eigen::Index>(i)) = fast.records[i].load_kw;
    CHECK(metrics::count_violations({profile}, P).total() == 0);
  }
}
