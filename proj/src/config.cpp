#include "cgan/config.hpp"

#include <climits>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "cgan/errors.hpp"

namespace cgan::cli {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

const json& expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  return j;
}

double get_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

long get_long(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + " must be an integer");
  return j.get<long>();
}

int get_int(const json& j, const std::string& where) {
  const long v = get_long(j, where);
  if (v < INT_MIN || v > INT_MAX) throw ConfigError(where + " is out of range");
  return static_cast<int>(v);
}

std::string get_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + " must be a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + " must be a boolean");
  return j.get<bool>();
}

std::uint64_t get_seed(const json& j, const std::string& where) {
  if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0))
    throw ConfigError(where + " must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

data::WindowFilter parse_filter(const json& j) {
  expect_object(j, "data.filter");
  expect_keys(j, "data.filter",
              {"date_start", "date_end", "hour_start", "hour_end", "utc_offset_min"});
  if (!j.contains("date_start") || !j.contains("date_end"))
    throw ConfigError("data.filter requires date_start and date_end");
  data::WindowFilter f;
  f.date_start = parse_date(get_string(j.at("date_start"), "data.filter.date_start"));
  f.date_end = parse_date(get_string(j.at("date_end"), "data.filter.date_end"));
  if (j.contains("hour_start")) f.hour_start = get_int(j.at("hour_start"), "data.filter.hour_start");
  if (j.contains("hour_end")) f.hour_end = get_int(j.at("hour_end"), "data.filter.hour_end");
  if (j.contains("utc_offset_min"))
    f.utc_offset_min = get_int(j.at("utc_offset_min"), "data.filter.utc_offset_min");
  return f;
}

void parse_data(const json& j, DataConfig& out) {
  expect_object(j, "data");
  expect_keys(j, "data", {"slow_csv", "fast_csv", "filter"});
  if (j.contains("slow_csv")) out.slow_csv = get_string(j.at("slow_csv"), "data.slow_csv");
  if (j.contains("fast_csv")) out.fast_csv = get_string(j.at("fast_csv"), "data.fast_csv");
  if (j.contains("filter")) out.filter = parse_filter(j.at("filter"));
}

void parse_params(const json& j, ParamsSource& out) {
  if (j.is_string()) {
    const std::string v = j.get<std::string>();
    if (v == "estimate") {
      out.kind = ParamsSource::Kind::Estimate;
    } else {
      out.kind = ParamsSource::Kind::File;
      out.path = v;
    }
    return;
  }
  expect_object(j, "params");
  expect_keys(j, "params", {"k1", "k2", "k3", "L", "U"});
  for (const char* k : {"k1", "k2", "k3", "L", "U"})
    if (!j.contains(k)) throw ConfigError(std::string("params.") + k + " is required inline");
  out.kind = ParamsSource::Kind::Inline;
  out.values.k1 = get_double(j.at("k1"), "params.k1");
  out.values.k2 = get_double(j.at("k2"), "params.k2");
  out.values.k3 = get_double(j.at("k3"), "params.k3");
  out.values.L = get_double(j.at("L"), "params.L");
  out.values.U = get_double(j.at("U"), "params.U");
}

void parse_synth(const json& j, data::SyntheticProcessConfig& out,
                 std::optional<std::uint64_t>& seed_out) {
  expect_object(j, "synth");
  expect_keys(j, "synth", {"l_true", "u_true", "k3_true", "n_days", "seed", "start_date"});
  if (j.contains("l_true")) out.l_true = get_double(j.at("l_true"), "synth.l_true");
  if (j.contains("u_true")) out.u_true = get_double(j.at("u_true"), "synth.u_true");
  if (j.contains("k3_true")) out.k3_true = get_double(j.at("k3_true"), "synth.k3_true");
  if (j.contains("n_days")) out.n_days = get_int(j.at("n_days"), "synth.n_days");
  if (j.contains("seed")) seed_out = get_seed(j.at("seed"), "synth.seed");
  if (j.contains("start_date"))
    out.start_date = parse_date(get_string(j.at("start_date"), "synth.start_date"));
}

void parse_estimate(const json& j, EstimateOverrides& out) {
  expect_object(j, "estimate");
  expect_keys(j, "estimate", {"k1", "k2", "k3"});
  if (j.contains("k1")) out.k1 = get_double(j.at("k1"), "estimate.k1");
  if (j.contains("k2")) out.k2 = get_double(j.at("k2"), "estimate.k2");
  if (j.contains("k3")) out.k3 = get_double(j.at("k3"), "estimate.k3");
}

void parse_model(const json& j, ModelConfig& out) {
  expect_object(j, "model");
  expect_keys(j, "model", {"noise_dim", "hidden", "m", "s"});
  if (j.contains("noise_dim")) out.noise_dim = get_int(j.at("noise_dim"), "model.noise_dim");
  if (j.contains("hidden")) out.hidden = get_int(j.at("hidden"), "model.hidden");
  if (j.contains("m")) out.m = get_int(j.at("m"), "model.m");
  if (j.contains("s")) out.s = get_int(j.at("s"), "model.s");
  if (out.noise_dim < 1) throw ConfigError("model.noise_dim must be positive");
  if (out.hidden < 1) throw ConfigError("model.hidden must be positive");
  if (out.m < 1) throw ConfigError("model.m must be positive");
  if (out.s < 1) throw ConfigError("model.s must be positive");
}

void parse_train(const json& j, TrainSection& out) {
  expect_object(j, "train");
  expect_keys(j, "train", {"batch_size", "total_steps", "d_steps_per_g_step", "loss",
                           "learning_rate", "baseline"});
  if (j.contains("batch_size")) out.batch_size = get_int(j.at("batch_size"), "train.batch_size");
  if (j.contains("total_steps"))
    out.total_steps = get_long(j.at("total_steps"), "train.total_steps");
  if (j.contains("d_steps_per_g_step"))
    out.d_steps_per_g_step = get_int(j.at("d_steps_per_g_step"), "train.d_steps_per_g_step");
  if (j.contains("loss")) {
    const std::string v = get_string(j.at("loss"), "train.loss");
    if (v == "minimax")
      out.loss = gan::GenLossVariant::Minimax;
    else if (v == "non-saturating")
      out.loss = gan::GenLossVariant::NonSaturating;
    else
      throw ConfigError("train.loss must be 'minimax' or 'non-saturating'");
  }
  if (j.contains("learning_rate"))
    out.learning_rate = get_double(j.at("learning_rate"), "train.learning_rate");
  if (j.contains("baseline")) out.baseline = get_bool(j.at("baseline"), "train.baseline");
  if (out.batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (out.total_steps < 0) throw ConfigError("train.total_steps must be nonnegative");
  if (out.d_steps_per_g_step < 1) throw ConfigError("train.d_steps_per_g_step must be positive");
  if (!(out.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
}

void parse_solver(const json& j, qp::SolverConfig& out) {
  expect_object(j, "solver");
  expect_keys(j, "solver", {"feas_tol", "stat_tol", "comp_tol", "active_tol", "max_iterations"});
  if (j.contains("feas_tol")) out.feas_tol = get_double(j.at("feas_tol"), "solver.feas_tol");
  if (j.contains("stat_tol")) out.stat_tol = get_double(j.at("stat_tol"), "solver.stat_tol");
  if (j.contains("comp_tol")) out.comp_tol = get_double(j.at("comp_tol"), "solver.comp_tol");
  if (j.contains("active_tol"))
    out.active_tol = get_double(j.at("active_tol"), "solver.active_tol");
  if (j.contains("max_iterations"))
    out.max_iterations = get_int(j.at("max_iterations"), "solver.max_iterations");
  if (!(out.feas_tol > 0.0) || !(out.stat_tol > 0.0) || !(out.comp_tol > 0.0) ||
      !(out.active_tol > 0.0))
    throw ConfigError("solver tolerances must be positive");
  if (out.max_iterations < 1) throw ConfigError("solver.max_iterations must be positive");
}

void parse_generate(const json& j, GenerateSection& out) {
  expect_object(j, "generate");
  expect_keys(j, "generate", {"n", "checkpoint"});
  if (j.contains("n")) out.n = get_long(j.at("n"), "generate.n");
  if (j.contains("checkpoint")) out.checkpoint = get_string(j.at("checkpoint"), "generate.checkpoint");
  if (out.n < 0) throw ConfigError("generate.n must be nonnegative");
}

void parse_validate(const json& j, ValidateSection& out) {
  expect_object(j, "validate");
  expect_keys(j, "validate", {"profiles_csv", "metadata_json", "real_slow_csv",
                              "ground_truth_fast_csv", "ks_max", "max_violations"});
  if (j.contains("profiles_csv"))
    out.profiles_csv = get_string(j.at("profiles_csv"), "validate.profiles_csv");
  if (j.contains("metadata_json"))
    out.metadata_json = get_string(j.at("metadata_json"), "validate.metadata_json");
  if (j.contains("real_slow_csv"))
    out.real_slow_csv = get_string(j.at("real_slow_csv"), "validate.real_slow_csv");
  if (j.contains("ground_truth_fast_csv"))
    out.ground_truth_fast_csv =
        get_string(j.at("ground_truth_fast_csv"), "validate.ground_truth_fast_csv");
  if (j.contains("ks_max")) out.thresholds.ks_max = get_double(j.at("ks_max"), "validate.ks_max");
  if (j.contains("max_violations"))
    out.thresholds.max_violations = get_long(j.at("max_violations"), "validate.max_violations");
  if (!(out.thresholds.ks_max > 0.0 && out.thresholds.ks_max <= 1.0))
    throw ConfigError("validate.ks_max must be in (0, 1]");
  if (out.thresholds.max_violations < 0)
    throw ConfigError("validate.max_violations must be nonnegative");
}

RunConfig parse_config(const json& doc, const std::string& origin) {
  expect_object(doc, origin);
  expect_keys(doc, origin, {"out_dir", "seed", "data", "params", "synth", "estimate", "model",
                            "train", "solver", "generate", "validate"});
  RunConfig cfg;
  if (doc.contains("out_dir")) cfg.out_dir = get_string(doc.at("out_dir"), "out_dir");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (doc.contains("seed")) cfg.seed = get_seed(doc.at("seed"), "seed");
  if (doc.contains("data")) parse_data(doc.at("data"), cfg.data);
  if (doc.contains("params")) parse_params(doc.at("params"), cfg.params);
  if (doc.contains("synth")) parse_synth(doc.at("synth"), cfg.synth, cfg.synth_seed);
  if (doc.contains("estimate")) parse_estimate(doc.at("estimate"), cfg.estimate);
  if (doc.contains("model")) parse_model(doc.at("model"), cfg.model);
  if (doc.contains("train")) parse_train(doc.at("train"), cfg.train);
  if (doc.contains("solver")) parse_solver(doc.at("solver"), cfg.solver);
  if (doc.contains("generate")) parse_generate(doc.at("generate"), cfg.generate);
  if (doc.contains("validate")) parse_validate(doc.at("validate"), cfg.validate);
  return cfg;
}

}  // namespace

std::chrono::year_month_day parse_date(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &mo, &d, &tail) != 3 || text.size() != 10)
    throw ConfigError("date '" + text + "' is not YYYY-MM-DD");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("date '" + text + "' is not a real calendar day");
  return ymd;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return parse_config(doc, path);
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return parse_config(doc, origin);
}

}  // namespace cgan::cli
