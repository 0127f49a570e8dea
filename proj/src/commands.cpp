#include "cgan/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <utility>

#include <json.hpp>

#include "cgan/checkpoint.hpp"
#include "cgan/errors.hpp"
#include "cgan/gan.hpp"
#include "cgan/metrics.hpp"

namespace cgan::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + cfg.out_dir + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void write_json(const json& doc, const std::string& path) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

json polytope_to_json(const qp::RampBoxPolytope& p) {
  return json{{"k1", p.k1},           {"k2", p.k2},
              {"k3", p.k3},           {"hist_min", p.hist_min},
              {"hist_max", p.hist_max}, {"window_len", p.window_len}};
}

qp::RampBoxPolytope polytope_from_json(const json& j, const std::string& origin) {
  try {
    return qp::build_polytope(j.at("k1").get<double>(), j.at("k2").get<double>(),
                              j.at("k3").get<double>(), j.at("hist_min").get<double>(),
                              j.at("hist_max").get<double>(), j.at("window_len").get<int>());
  } catch (const json::exception& e) {
    throw ParseError(origin + ": polytope section malformed: " + e.what());
  }
}

data::ConstraintParams params_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open params file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("params file '" + path + "': " + e.what());
  }
  data::ConstraintParams p;
  try {
    p.k1 = doc.at("k1").get<double>();
    p.k2 = doc.at("k2").get<double>();
    p.k3 = doc.at("k3").get<double>();
    p.L = doc.at("L").get<double>();
    p.U = doc.at("U").get<double>();
  } catch (const json::exception& e) {
    throw ParseError("params file '" + path + "': " + e.what());
  }
  return p;
}

data::MeterSeries load_required_slow(const RunConfig& cfg, const char* why) {
  if (cfg.data.slow_csv.empty())
    throw ConfigError(std::string("data.slow_csv is required ") + why);
  return data::load_meter_csv(cfg.data.slow_csv);
}

data::ConstraintParams estimate_from_data(const RunConfig& cfg) {
  auto slow = load_required_slow(cfg, "to estimate constraint parameters");
  std::optional<data::MeterSeries> fast;
  if (!cfg.data.fast_csv.empty()) fast = data::load_meter_csv(cfg.data.fast_csv);
  return data::estimate_params(slow, fast ? &*fast : nullptr, cfg.estimate.k1, cfg.estimate.k2,
                               cfg.estimate.k3);
}

/// Training samples: the filtered per-day vectors when a window filter is
/// configured, otherwise the whole series as one block; both regrouped into
/// s-wide samples.
std::vector<Eigen::VectorXd> slow_samples(const RunConfig& cfg, const data::MeterSeries& slow) {
  std::vector<Eigen::VectorXd> blocks;
  if (cfg.data.filter) {
    blocks = data::filter_window(slow, *cfg.data.filter);
  } else {
    Eigen::VectorXd all(static_cast<Eigen::Index>(slow.size()));
    for (std::size_t i = 0; i < slow.size(); ++i)
      all(static_cast<Eigen::Index>(i)) = slow.records[i].load_kw;
    blocks.push_back(std::move(all));
  }
  return data::regroup(blocks, cfg.model.s);
}

void write_history_csv(const gan::TrainingHistory& history, const std::string& path) {
  auto out = open_out(path);
  out << "step,loss_d,loss_g,d_real_mean,d_fake_mean\n";
  char buf[160];
  for (const auto& r : history.steps) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss_d, r.loss_g,
                  r.d_real_mean, r.d_fake_mean);
    out << buf;
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string default_sidecar(const std::string& profiles_path) {
  const std::string suffix = ".csv";
  if (profiles_path.size() > suffix.size() &&
      profiles_path.compare(profiles_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return profiles_path.substr(0, profiles_path.size() - suffix.size()) + ".meta.json";
  return profiles_path + ".meta.json";
}

void write_ecdf_csv(const metrics::Ecdf& ecdf, const std::string& path) {
  auto out = open_out(path);
  out << "value,cdf\n";
  const auto& sorted = ecdf.sorted();
  const double n = static_cast<double>(sorted.size());
  char buf[80];
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;  // keep the upper step
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", sorted[i], static_cast<double>(i + 1) / n);
    out << buf;
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

bool close_rel(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

void write_profiles_csv(const std::string& path, const std::vector<Eigen::VectorXd>& profiles) {
  auto out = open_out(path);
  char buf[32];
  for (const auto& p : profiles) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p(i));
      if (i) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<Eigen::VectorXd> read_profiles_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open profiles file '" + path + "'");
  std::vector<Eigen::VectorXd> profiles;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string tok =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      vals.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!profiles.empty() && static_cast<Eigen::Index>(vals.size()) != profiles.front().size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": row length " +
                       std::to_string(vals.size()) + " differs from " +
                       std::to_string(profiles.front().size()));
    profiles.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  if (profiles.empty()) throw ParseError("profiles file '" + path + "' has no rows");
  return profiles;
}

data::ConstraintParams resolve_params(const RunConfig& cfg) {
  switch (cfg.params.kind) {
    case ParamsSource::Kind::Inline:
      return cfg.params.values;
    case ParamsSource::Kind::File:
      return params_from_file(cfg.params.path);
    case ParamsSource::Kind::Estimate:
      return estimate_from_data(cfg);
  }
  throw ConfigError("unreachable params source");
}

qp::RampBoxPolytope resolve_polytope(const RunConfig& cfg) {
  const auto p = resolve_params(cfg);
  return qp::build_polytope(p.k1, p.k2, p.k3, p.L, p.U, cfg.model.m);
}

int run_synth(const RunConfig& cfg) {
  auto scfg = cfg.synth;
  scfg.seed = cfg.synth_seed.value_or(cfg.seed);
  auto [fast, slow] = data::synth_ground_truth(scfg);
  ensure_out_dir(cfg);
  const auto fast_path = out_path(cfg, "fast.csv");
  const auto slow_path = out_path(cfg, "slow.csv");
  data::write_meter_csv(fast, fast_path);
  data::write_meter_csv(slow, slow_path);
  std::cout << "synth: " << fast.size() << " fast rows -> " << fast_path << ", " << slow.size()
            << " slow rows -> " << slow_path << "\n";
  return 0;
}

int run_estimate(const RunConfig& cfg) {
  const auto p = estimate_from_data(cfg);
  ensure_out_dir(cfg);
  const auto path = out_path(cfg, "params.json");
  write_json(json{{"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}, {"L", p.L}, {"U", p.U}}, path);
  std::cout << "estimate: k1=" << p.k1 << " k2=" << p.k2 << " k3=" << p.k3 << " L=" << p.L
            << " U=" << p.U << " -> " << path << "\n";
  return 0;
}

namespace {

void train_one(const RunConfig& cfg, const qp::RampBoxPolytope& polytope,
               const gan::TrainingDataset& dataset, bool constrained, const char* gen_name,
               const char* disc_name, const char* history_name) {
  gan::GeneratorModel gen(polytope, cfg.model.noise_dim, cfg.model.s, cfg.model.hidden, cfg.seed,
                          constrained, cfg.solver);
  gan::DiscriminatorModel disc(cfg.model.s, cfg.model.hidden, cfg.seed);

  gan::TrainingConfig tc;
  tc.batch_size = cfg.train.batch_size;
  tc.total_steps = cfg.train.total_steps;
  tc.d_steps_per_g_step = cfg.train.d_steps_per_g_step;
  tc.gen_loss = cfg.train.loss;
  tc.adam.learning_rate = cfg.train.learning_rate;
  tc.seed = cfg.seed;

  auto history = gan::train(dataset, gen, disc, tc);
  ckpt::save_generator(gen, out_path(cfg, gen_name));
  ckpt::save_discriminator(disc, out_path(cfg, disc_name));
  write_history_csv(history, out_path(cfg, history_name));
  std::cout << "train(" << (constrained ? "constrained" : "baseline") << "): "
            << history.steps.size() << " steps, " << history.skipped_steps << " skipped -> "
            << out_path(cfg, gen_name) << "\n";
}

}  // namespace

int run_train(const RunConfig& cfg) {
  const auto polytope = resolve_polytope(cfg);
  auto slow = load_required_slow(cfg, "to train");
  auto dataset = gan::make_dataset(slow_samples(cfg, slow));
  ensure_out_dir(cfg);
  train_one(cfg, polytope, dataset, true, "generator.json", "discriminator.json", "history.csv");
  if (cfg.train.baseline)
    train_one(cfg, polytope, dataset, false, "baseline_generator.json",
              "baseline_discriminator.json", "baseline_history.csv");
  return 0;
}

int run_generate(const RunConfig& cfg) {
  const std::string ckpt_path =
      cfg.generate.checkpoint.empty() ? out_path(cfg, "generator.json") : cfg.generate.checkpoint;
  auto gen = ckpt::load_generator(ckpt_path);

  // A non-estimated params source pins the polytope; generating from a
  // checkpoint trained against different constraints is refused.
  if (cfg.params.kind != ParamsSource::Kind::Estimate) {
    const auto p = resolve_params(cfg);
    const auto expected = qp::build_polytope(p.k1, p.k2, p.k3, p.L, p.U, cfg.model.m);
    const auto& got = gen.polytope;
    if (expected.window_len != got.window_len || !close_rel(expected.k1, got.k1) ||
        !close_rel(expected.k2, got.k2) || !close_rel(expected.k3, got.k3) ||
        !close_rel(expected.hist_min, got.hist_min) || !close_rel(expected.hist_max, got.hist_max))
      throw ConfigError("checkpoint '" + ckpt_path +
                        "' was trained with different constraint parameters than configured");
  }

  auto profile_matrix = gan::sample_profiles(gen, cfg.generate.n, cfg.seed);
  std::vector<Eigen::VectorXd> profiles;
  profiles.reserve(static_cast<std::size_t>(profile_matrix.rows()));
  for (Eigen::Index i = 0; i < profile_matrix.rows(); ++i)
    profiles.push_back(profile_matrix.row(i).transpose());

  ensure_out_dir(cfg);
  const auto profiles_path = out_path(cfg, "profiles.csv");
  write_profiles_csv(profiles_path, profiles);
  json meta;
  meta["checkpoint"] = ckpt_path;
  meta["checkpoint_hash"] = ckpt::file_hash_hex(ckpt_path);
  meta["seed"] = cfg.seed;
  meta["n"] = cfg.generate.n;
  meta["s"] = gen.s();
  meta["constrained"] = gen.constrained();
  meta["polytope"] = polytope_to_json(gen.polytope);
  write_json(meta, default_sidecar(profiles_path));
  std::cout << "generate: " << profiles.size() << " profiles x " << gen.profile_len()
            << " samples -> " << profiles_path << "\n";
  return 0;
}

int run_validate(const RunConfig& cfg) {
  const std::string profiles_path =
      cfg.validate.profiles_csv.empty() ? out_path(cfg, "profiles.csv") : cfg.validate.profiles_csv;
  auto profiles = read_profiles_csv(profiles_path);

  // Constraint source: the generation sidecar when present (it records what
  // the profiles were actually projected onto), else the configured params.
  const std::string sidecar = cfg.validate.metadata_json.empty()
                                  ? default_sidecar(profiles_path)
                                  : cfg.validate.metadata_json;
  qp::RampBoxPolytope polytope;
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar, std::ios::binary);
    json meta;
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw ParseError("metadata '" + sidecar + "': " + e.what());
    }
    if (!meta.contains("polytope")) throw ParseError("metadata '" + sidecar + "' lacks a polytope");
    polytope = polytope_from_json(meta.at("polytope"), sidecar);
  } else {
    polytope = resolve_polytope(cfg);
  }

  if (cfg.validate.real_slow_csv.empty())
    throw ConfigError("validate.real_slow_csv is required");
  auto real = data::load_meter_csv(cfg.validate.real_slow_csv);
  std::vector<double> real_slow;
  if (cfg.data.filter) {
    for (const auto& day : data::filter_window(real, *cfg.data.filter))
      for (Eigen::Index i = 0; i < day.size(); ++i) real_slow.push_back(day(i));
  } else {
    for (const auto& r : real.records) real_slow.push_back(r.load_kw);
  }

  std::vector<double> generated_slow;
  for (const auto& p : profiles) {
    ad::Matrix row = p.transpose();
    ad::Matrix agg = ad::aggregate(row, polytope.window_len);
    for (Eigen::Index i = 0; i < agg.cols(); ++i) generated_slow.push_back(agg(0, i));
  }

  std::vector<Eigen::VectorXd> gt_windows;
  if (!cfg.validate.ground_truth_fast_csv.empty()) {
    auto gt = data::load_meter_csv(cfg.validate.ground_truth_fast_csv);
    Eigen::VectorXd all(static_cast<Eigen::Index>(gt.size()));
    for (std::size_t i = 0; i < gt.size(); ++i)
      all(static_cast<Eigen::Index>(i)) = gt.records[i].load_kw;
    if (all.size() % polytope.window_len != 0)
      throw ValidationError("ground truth series length " + std::to_string(all.size()) +
                            " is not a whole number of " + std::to_string(polytope.window_len) +
                            "-sample windows");
    gt_windows = data::regroup({all}, polytope.window_len);
  }

  auto report = metrics::build_report(profiles, generated_slow, real_slow, polytope,
                                      gt_windows.empty() ? nullptr : &gt_windows,
                                      cfg.validate.thresholds);

  ensure_out_dir(cfg);
  json doc;
  doc["ks"] = report.ks;
  doc["ks_pass"] = report.ks_pass;
  doc["violations"] = {{"box_lower", report.violations.box_lower},
                       {"box_upper", report.violations.box_upper},
                       {"ramp_upper", report.violations.ramp_upper},
                       {"ramp_lower", report.violations.ramp_lower},
                       {"total", report.violations.total()}};
  doc["violations_pass"] = report.violations_pass;
  doc["pass"] = report.pass();
  doc["generated"] = {{"max_change_pct", report.generated.max_change_pct},
                      {"max_injection_kw", report.generated.max_injection_kw},
                      {"n_profiles", report.generated.n_profiles}};
  if (report.ground_truth)
    doc["ground_truth"] = {{"max_change_pct", report.ground_truth->max_change_pct},
                           {"max_injection_kw", report.ground_truth->max_injection_kw},
                           {"n_profiles", report.ground_truth->n_profiles}};
  doc["n_generated_slow"] = report.n_generated_slow;
  doc["n_real_slow"] = report.n_real_slow;
  doc["thresholds"] = {{"ks_max", report.thresholds.ks_max},
                       {"max_violations", report.thresholds.max_violations}};
  doc["polytope"] = polytope_to_json(polytope);
  doc["profiles_csv"] = profiles_path;
  doc["real_slow_csv"] = cfg.validate.real_slow_csv;
  write_json(doc, out_path(cfg, "report.json"));

  write_ecdf_csv(metrics::Ecdf(generated_slow), out_path(cfg, "ecdf_generated.csv"));
  write_ecdf_csv(metrics::Ecdf(real_slow), out_path(cfg, "ecdf_real.csv"));

  std::cout << "validate: ks=" << report.ks << " violations=" << report.violations.total()
            << " -> " << (report.pass() ? "PASS" : "FAIL") << " (" << out_path(cfg, "report.json")
            << ")\n";
  return report.pass() ? 0 : 1;
}

}  // namespace cgan::cli
