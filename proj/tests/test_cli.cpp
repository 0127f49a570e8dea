#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgan/checkpoint.hpp"
#include "cgan/commands.hpp"
#include "cgan/config.hpp"
#include "cgan/data.hpp"
#include "cgan/errors.hpp"
#include "cgan/gan.hpp"
#include "cgan/rng.hpp"

using namespace cgan;
namespace fs = std::filesystem;

namespace {

// Fresh per-case scratch directory under the system temp root.
fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "cgan_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

qp::RampBoxPolytope tiny_polytope(int m) { return qp::build_polytope(0.0, 1.39, 0.5, 1.0, 5.0, m); }

void mutate_json(const fs::path& src, const fs::path& dst,
                 const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json doc = nlohmann::json::parse(slurp(src));
  edit(doc);
  spit(dst, doc.dump(2));
}

// Small everything: the CLI layer is exercised with toy models.
cli::RunConfig small_config(const fs::path& out_dir) {
  cli::RunConfig cfg;
  cfg.out_dir = out_dir.string();
  cfg.seed = 11;
  cfg.model.noise_dim = 3;
  cfg.model.hidden = 8;
  cfg.model.m = 15;
  cfg.model.s = 1;
  cfg.train.batch_size = 4;
  cfg.train.total_steps = 0;
  cfg.params.kind = cli::ParamsSource::Kind::Inline;
  cfg.params.values = {0.0, 1.0, 0.5, 0.55, 10.26};
  cfg.data.slow_csv = (out_dir / "slow.csv").string();
  cfg.data.fast_csv = (out_dir / "fast.csv").string();
  cfg.validate.real_slow_csv = (out_dir / "slow.csv").string();
  return cfg;
}

}  // namespace

TEST_CASE("generator checkpoints round-trip tensors, stats and stream state") {
  auto dir = scratch("gen_roundtrip");
  auto poly = tiny_polytope(4);
  gan::GeneratorModel gen(poly, 3, 2, 8, 5, true, {});

  // Burn in some state: train-mode forwards move the batch-norm running
  // statistics and consume dropout draws.
  gen.set_mode(Mode::Train);
  Rng rng(77);
  for (int i = 0; i < 3; ++i) gen.forward(ad::make_leaf(rng.uniform_matrix(4, 3, -1.0, 1.0), "z"));

  const auto path = (dir / "gen.json").string();
  ckpt::save_generator(gen, path);
  auto loaded = ckpt::load_generator(path);

  CHECK(loaded.noise_dim() == 3);
  CHECK(loaded.s() == 2);
  CHECK(loaded.profile_len() == 8);
  CHECK(loaded.constrained());
  CHECK(loaded.polytope.k2 == poly.k2);
  CHECK(loaded.polytope.hist_max == poly.hist_max);
  CHECK(loaded.polytope.window_len == 4);

  auto orig_params = gen.parameters();
  auto load_params = loaded.parameters();
  REQUIRE(orig_params.size() == load_params.size());
  for (std::size_t i = 0; i < orig_params.size(); ++i)
    CHECK(same_matrix(orig_params[i]->data, load_params[i]->data));
  CHECK(same_matrix(gen.bn1.running_mean, loaded.bn1.running_mean));
  CHECK(same_matrix(gen.bn1.running_var, loaded.bn1.running_var));
  CHECK(same_matrix(gen.bn2.running_mean, loaded.bn2.running_mean));
  CHECK(same_matrix(gen.bn2.running_var, loaded.bn2.running_var));

  const ad::Matrix noise = rng.uniform_matrix(5, 3, -1.0, 1.0);

  gen.set_mode(Mode::Eval);
  loaded.set_mode(Mode::Eval);
  CHECK(same_matrix(gen.forward(ad::make_leaf(noise, "z")).fast->data,
                    loaded.forward(ad::make_leaf(noise, "z")).fast->data));

  // Train-mode equality needs the dropout stream position restored too.
  gen.set_mode(Mode::Train);
  loaded.set_mode(Mode::Train);
  CHECK(same_matrix(gen.forward(ad::make_leaf(noise, "z")).fast->data,
                    loaded.forward(ad::make_leaf(noise, "z")).fast->data));
}

TEST_CASE("baseline generator checkpoints keep the unconstrained head") {
  auto dir = scratch("gen_baseline_roundtrip");
  gan::GeneratorModel gen(tiny_polytope(4), 3, 1, 8, 6, false, {});
  const auto path = (dir / "gen.json").string();
  ckpt::save_generator(gen, path);
  auto loaded = ckpt::load_generator(path);
  CHECK_FALSE(loaded.constrained());

  Rng rng(3);
  const ad::Matrix noise = rng.uniform_matrix(4, 3, -1.0, 1.0);
  gen.set_mode(Mode::Eval);
  loaded.set_mode(Mode::Eval);
  auto a = gen.forward(ad::make_leaf(noise, "z"));
  auto b = loaded.forward(ad::make_leaf(noise, "z"));
  CHECK(same_matrix(a.fast->data, b.fast->data));
  CHECK(same_matrix(a.a->data, a.fast->data));
}

TEST_CASE("discriminator checkpoints round-trip") {
  auto dir = scratch("disc_roundtrip");
  gan::DiscriminatorModel disc(2, 8, 9);
  disc.set_mode(Mode::Train);
  Rng rng(13);
  for (int i = 0; i < 2; ++i) disc.forward(ad::make_leaf(rng.uniform_matrix(4, 2, 0.0, 5.0), "x"));

  const auto path = (dir / "disc.json").string();
  ckpt::save_discriminator(disc, path);
  auto loaded = ckpt::load_discriminator(path);

  auto orig_params = disc.parameters();
  auto load_params = loaded.parameters();
  REQUIRE(orig_params.size() == load_params.size());
  for (std::size_t i = 0; i < orig_params.size(); ++i)
    CHECK(same_matrix(orig_params[i]->data, load_params[i]->data));

  const ad::Matrix x = rng.uniform_matrix(6, 2, 0.0, 5.0);
  disc.set_mode(Mode::Eval);
  loaded.set_mode(Mode::Eval);
  CHECK(same_matrix(disc.forward(ad::make_leaf(x, "x"))->data,
                    loaded.forward(ad::make_leaf(x, "x"))->data));
  disc.set_mode(Mode::Train);
  loaded.set_mode(Mode::Train);
  CHECK(same_matrix(disc.forward(ad::make_leaf(x, "x"))->data,
                    loaded.forward(ad::make_leaf(x, "x"))->data));
}

TEST_CASE("checkpoint loading rejects mismatched documents") {
  auto dir = scratch("ckpt_reject");
  gan::GeneratorModel gen(tiny_polytope(3), 3, 1, 8, 5, true, {});
  gan::DiscriminatorModel disc(1, 8, 5);
  const auto gen_path = dir / "gen.json";
  const auto disc_path = dir / "disc.json";
  ckpt::save_generator(gen, gen_path.string());
  ckpt::save_discriminator(disc, disc_path.string());

  // A generator file is not a discriminator file and vice versa.
  CHECK_THROWS_AS(ckpt::load_discriminator(gen_path.string()), ParseError);
  CHECK_THROWS_AS(ckpt::load_generator(disc_path.string()), ParseError);

  auto bad = dir / "bad.json";
  mutate_json(gen_path, bad, [](nlohmann::json& j) { j["version"] = 2; });
  CHECK_THROWS_AS(ckpt::load_generator(bad.string()), ParseError);

  mutate_json(gen_path, bad, [](nlohmann::json& j) { j["format"] = "something-else"; });
  CHECK_THROWS_AS(ckpt::load_generator(bad.string()), ParseError);

  mutate_json(gen_path, bad, [](nlohmann::json& j) { j["tensors"].erase("head.weight"); });
  CHECK_THROWS_AS(ckpt::load_generator(bad.string()), ParseError);

  mutate_json(gen_path, bad, [](nlohmann::json& j) { j["tensors"]["head.bias"]["cols"] = 7; });
  CHECK_THROWS_AS(ckpt::load_generator(bad.string()), ParseError);

  spit(bad, "not json at all");
  CHECK_THROWS_AS(ckpt::load_generator(bad.string()), ParseError);
  CHECK_THROWS_AS(ckpt::load_generator((dir / "absent.json").string()), ParseError);
}

TEST_CASE("file hashes match the 64-bit FNV-1a reference values") {
  auto dir = scratch("hash");
  spit(dir / "empty", "");
  spit(dir / "a", "a");
  spit(dir / "foobar", "foobar");
  CHECK(ckpt::file_hash_hex((dir / "empty").string()) == "cbf29ce484222325");
  CHECK(ckpt::file_hash_hex((dir / "a").string()) == "af63dc4c8601ec8c");
  CHECK(ckpt::file_hash_hex((dir / "foobar").string()) == "85944171f73967e8");
}

TEST_CASE("an empty config document yields the documented defaults") {
  auto cfg = cli::parse_config_text("{}");
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.seed == 1);
  CHECK(cfg.model.noise_dim == 8);
  CHECK(cfg.model.hidden == 128);
  CHECK(cfg.model.m == 15);
  CHECK(cfg.model.s == 1);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.total_steps == 1000);
  CHECK(cfg.train.d_steps_per_g_step == 1);
  CHECK(cfg.train.loss == gan::GenLossVariant::NonSaturating);
  CHECK(cfg.train.learning_rate == doctest::Approx(1e-4));
  CHECK_FALSE(cfg.train.baseline);
  CHECK(cfg.generate.n == 500);
  CHECK(cfg.validate.thresholds.ks_max == doctest::Approx(0.15));
  CHECK(cfg.validate.thresholds.max_violations == 0);
  CHECK(cfg.params.kind == cli::ParamsSource::Kind::Estimate);
  CHECK_FALSE(cfg.data.filter.has_value());
  CHECK_FALSE(cfg.synth_seed.has_value());
  CHECK(cfg.synth.n_days == 1);
}

TEST_CASE("a full config document reaches every field") {
  const char* text = R"({
    "out_dir": "run1",
    "seed": 42,
    "data": {
      "slow_csv": "slow.csv",
      "fast_csv": "fast.csv",
      "filter": {
        "date_start": "2018-06-01",
        "date_end": "2018-07-15",
        "hour_start": 8,
        "hour_end": 20,
        "utc_offset_min": -300
      }
    },
    "params": {"k1": 0.1, "k2": 1.5, "k3": 0.4, "L": 0.5, "U": 9.0},
    "synth": {"l_true": 0.6, "u_true": 9.5, "k3_true": 0.3, "n_days": 7,
              "seed": 99, "start_date": "2019-01-31"},
    "estimate": {"k2": 1.39, "k3": 0.5},
    "model": {"noise_dim": 16, "hidden": 64, "m": 15, "s": 4},
    "train": {"batch_size": 32, "total_steps": 5000, "d_steps_per_g_step": 2,
              "loss": "minimax", "learning_rate": 0.0005, "baseline": true},
    "solver": {"max_iterations": 500, "feas_tol": 1e-9, "stat_tol": 1e-7},
    "generate": {"n": 250, "checkpoint": "gen.json"},
    "validate": {"profiles_csv": "p.csv", "metadata_json": "p.meta.json",
                 "real_slow_csv": "r.csv", "ground_truth_fast_csv": "g.csv",
                 "ks_max": 0.2, "max_violations": 3}
  })";
  auto cfg = cli::parse_config_text(text);
  CHECK(cfg.out_dir == "run1");
  CHECK(cfg.seed == 42);
  CHECK(cfg.data.slow_csv == "slow.csv");
  REQUIRE(cfg.data.filter.has_value());
  CHECK(cfg.data.filter->hour_start == 8);
  CHECK(cfg.data.filter->hour_end == 20);
  CHECK(cfg.data.filter->utc_offset_min == -300);
  CHECK(cfg.data.filter->date_start ==
        std::chrono::year_month_day(std::chrono::year{2018}, std::chrono::June, std::chrono::day{1}));
  CHECK(cfg.params.kind == cli::ParamsSource::Kind::Inline);
  CHECK(cfg.params.values.k2 == doctest::Approx(1.5));
  CHECK(cfg.params.values.U == doctest::Approx(9.0));
  CHECK(cfg.synth.n_days == 7);
  REQUIRE(cfg.synth_seed.has_value());
  CHECK(*cfg.synth_seed == 99);
  REQUIRE(cfg.estimate.k2.has_value());
  CHECK(*cfg.estimate.k2 == doctest::Approx(1.39));
  CHECK_FALSE(cfg.estimate.k1.has_value());
  CHECK(cfg.model.s == 4);
  CHECK(cfg.train.loss == gan::GenLossVariant::Minimax);
  CHECK(cfg.train.baseline);
  CHECK(cfg.solver.max_iterations == 500);
  CHECK(cfg.solver.feas_tol == doctest::Approx(1e-9));
  CHECK(cfg.solver.stat_tol == doctest::Approx(1e-7));
  CHECK(cfg.generate.n == 250);
  CHECK(cfg.generate.checkpoint == "gen.json");
  CHECK(cfg.validate.ground_truth_fast_csv == "g.csv");
  CHECK(cfg.validate.thresholds.ks_max == doctest::Approx(0.2));
  CHECK(cfg.validate.thresholds.max_violations == 3);
}

TEST_CASE("params source routing distinguishes estimate, file and inline") {
  CHECK(cli::parse_config_text(R"({"params": "estimate"})").params.kind ==
        cli::ParamsSource::Kind::Estimate);
  auto file_cfg = cli::parse_config_text(R"({"params": "some/params.json"})");
  CHECK(file_cfg.params.kind == cli::ParamsSource::Kind::File);
  CHECK(file_cfg.params.path == "some/params.json");
  auto inline_cfg =
      cli::parse_config_text(R"({"params": {"k1": 0, "k2": 1.39, "k3": 0.5, "L": 1, "U": 5}})");
  CHECK(inline_cfg.params.kind == cli::ParamsSource::Kind::Inline);
  CHECK(inline_cfg.params.values.k3 == doctest::Approx(0.5));
}

TEST_CASE("config parsing rejects unknown keys, bad types and bad values") {
  CHECK_THROWS_WITH_AS(cli::parse_config_text(R"({"stps": 3})"),
                       doctest::Contains("unknown key 'stps'"), ConfigError);
  CHECK_THROWS_WITH_AS(cli::parse_config_text(R"({"model": {"hidden_units": 4}})"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"train": {"extra": 1}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"validate": {"ks": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"data": {"filter": {"dates": "x"}}})"), ConfigError);

  CHECK_THROWS_WITH_AS(cli::parse_config_text(R"({"train": {"batch_size": 1}})"),
                       doctest::Contains("train.batch_size"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"train": {"learning_rate": 0}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"train": {"loss": "hinge"}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"train": {"total_steps": -1}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"model": {"m": 0}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"model": {"s": 0}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"solver": {"feas_tol": -1}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"seed": "abc"})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"seed": -4})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"params": 3})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"data": []})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"params": {"k1": 0}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text(R"({"validate": {"ks_max": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("{"), ParseError);
}

TEST_CASE("dates are parsed with calendar validation") {
  auto d = cli::parse_date("2018-06-01");
  CHECK(d == std::chrono::year_month_day(std::chrono::year{2018}, std::chrono::June,
                                         std::chrono::day{1}));
  CHECK_THROWS_AS(cli::parse_date("2018-02-30"), ConfigError);
  CHECK_THROWS_AS(cli::parse_date("2018-13-01"), ConfigError);
  CHECK_THROWS_AS(cli::parse_date("junk"), ConfigError);
  CHECK_THROWS_AS(cli::parse_date("2018-6-1x"), ConfigError);
}

TEST_CASE("config files load from disk with parse errors located") {
  auto dir = scratch("config_io");
  spit(dir / "good.json", R"({"seed": 7, "out_dir": "elsewhere"})");
  auto cfg = cli::load_config((dir / "good.json").string());
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "elsewhere");

  spit(dir / "broken.json", "{nope");
  CHECK_THROWS_AS(cli::load_config((dir / "broken.json").string()), ParseError);
  CHECK_THROWS_AS(cli::load_config((dir / "missing.json").string()), ParseError);
}

TEST_CASE("profile CSVs round-trip bit-exactly including negatives") {
  auto dir = scratch("profiles_io");
  std::vector<Eigen::VectorXd> profiles;
  Eigen::VectorXd p1(4), p2(4);
  p1 << 0.1, -2.5, 1e-300, 9.87654321012345678;
  p2 << 1e300, 0.0, -0.0, 3.0000000000000004;
  profiles.push_back(p1);
  profiles.push_back(p2);

  const auto path = (dir / "p.csv").string();
  cli::write_profiles_csv(path, profiles);
  auto back = cli::read_profiles_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(same_matrix(back[0], p1));
  CHECK(same_matrix(back[1], p2));

  spit(dir / "empty.csv", "");
  CHECK_THROWS_AS(cli::read_profiles_csv((dir / "empty.csv").string()), ParseError);
  spit(dir / "ragged.csv", "1,2,3\n4,5\n");
  CHECK_THROWS_AS(cli::read_profiles_csv((dir / "ragged.csv").string()), ParseError);
  spit(dir / "token.csv", "1,twelve,3\n");
  CHECK_THROWS_WITH_AS(cli::read_profiles_csv((dir / "token.csv").string()),
                       doctest::Contains("token.csv:1"), ParseError);
  spit(dir / "inf.csv", "1,inf,3\n");
  CHECK_THROWS_AS(cli::read_profiles_csv((dir / "inf.csv").string()), ParseError);
  CHECK_THROWS_AS(cli::read_profiles_csv((dir / "absent.csv").string()), ParseError);
}

TEST_CASE("synth writes a deterministic paired ground truth") {
  auto dir_a = scratch("synth_a");
  auto cfg = small_config(dir_a);
  cfg.synth.n_days = 2;
  CHECK(cli::run_synth(cfg) == 0);

  auto fast = data::load_meter_csv((dir_a / "fast.csv").string());
  auto slow = data::load_meter_csv((dir_a / "slow.csv").string());
  REQUIRE(fast.size() == 2880);
  REQUIRE(slow.size() == 192);
  CHECK(fast.resolution_s == 60);
  CHECK(slow.resolution_s == 900);

  // Each slow reading is the mean of its 15 fast samples; the files
  // round-trip bit-exactly so the identity survives the CSV hop.
  for (std::size_t w = 0; w < slow.size(); ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 15; ++i) sum += fast.records[15 * w + i].load_kw;
    CHECK(slow.records[w].load_kw == sum / 15.0);
  }

  auto dir_b = scratch("synth_b");
  auto cfg_b = small_config(dir_b);
  cfg_b.synth.n_days = 2;
  cli::run_synth(cfg_b);
  CHECK(slurp(dir_a / "fast.csv") == slurp(dir_b / "fast.csv"));
  CHECK(slurp(dir_a / "slow.csv") == slurp(dir_b / "slow.csv"));

  // A pinned synth seed overrides the top-level one.
  auto dir_c = scratch("synth_c");
  auto cfg_c = small_config(dir_c);
  cfg_c.synth.n_days = 2;
  cfg_c.synth_seed = 999;
  cli::run_synth(cfg_c);
  CHECK(slurp(dir_a / "fast.csv") != slurp(dir_c / "fast.csv"));
}

TEST_CASE("estimate writes params consumable as a file source") {
  auto dir = scratch("estimate_cmd");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 1;
  cli::run_synth(cfg);
  cfg.params.kind = cli::ParamsSource::Kind::Estimate;
  CHECK(cli::run_estimate(cfg) == 0);
  REQUIRE(fs::exists(dir / "params.json"));

  // The file source reproduces the direct estimate bit for bit.
  auto slow = data::load_meter_csv(cfg.data.slow_csv);
  auto fast = data::load_meter_csv(cfg.data.fast_csv);
  auto direct = data::estimate_params(slow, &fast);

  cli::RunConfig file_cfg = cfg;
  file_cfg.params.kind = cli::ParamsSource::Kind::File;
  file_cfg.params.path = (dir / "params.json").string();
  auto loaded = cli::resolve_params(file_cfg);
  CHECK(loaded.k1 == direct.k1);
  CHECK(loaded.k2 == direct.k2);
  CHECK(loaded.k3 == direct.k3);
  CHECK(loaded.L == direct.L);
  CHECK(loaded.U == direct.U);

  file_cfg.params.path = (dir / "nope.json").string();
  CHECK_THROWS_AS(cli::resolve_params(file_cfg), ParseError);
}

TEST_CASE("training with zero steps checkpoints the initialization") {
  auto dir = scratch("train_zero");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 1;
  cli::run_synth(cfg);
  CHECK(cli::run_train(cfg) == 0);
  REQUIRE(fs::exists(dir / "generator.json"));
  REQUIRE(fs::exists(dir / "discriminator.json"));
  REQUIRE(fs::exists(dir / "history.csv"));
  CHECK(slurp(dir / "history.csv") == "step,loss_d,loss_g,d_real_mean,d_fake_mean\n");

  auto loaded = ckpt::load_generator((dir / "generator.json").string());
  gan::GeneratorModel twin(qp::build_polytope(0.0, 1.0, 0.5, 0.55, 10.26, 15), 3, 1, 8, cfg.seed,
                           true, {});
  auto lp = loaded.parameters();
  auto tp = twin.parameters();
  REQUIRE(lp.size() == tp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) CHECK(same_matrix(lp[i]->data, tp[i]->data));
}

TEST_CASE("train runs a couple of steps and also trains the baseline twin") {
  auto dir = scratch("train_steps");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 1;
  cli::run_synth(cfg);
  cfg.train.total_steps = 2;
  cfg.train.baseline = true;
  CHECK(cli::run_train(cfg) == 0);
  for (const char* name : {"generator.json", "discriminator.json", "history.csv",
                           "baseline_generator.json", "baseline_discriminator.json",
                           "baseline_history.csv"})
    CHECK(fs::exists(dir / name));

  auto history = slurp(dir / "history.csv");
  CHECK(std::count(history.begin(), history.end(), '\n') == 3);  // header + 2 steps
  CHECK_FALSE(ckpt::load_generator((dir / "baseline_generator.json").string()).constrained());
}

TEST_CASE("generate samples deterministically and records provenance") {
  auto dir = scratch("generate_cmd");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 1;
  cli::run_synth(cfg);
  cli::run_train(cfg);

  cfg.generate.n = 7;
  CHECK(cli::run_generate(cfg) == 0);
  auto profiles = cli::read_profiles_csv((dir / "profiles.csv").string());
  REQUIRE(profiles.size() == 7);
  CHECK(profiles[0].size() == 15);

  REQUIRE(fs::exists(dir / "profiles.meta.json"));
  auto meta = nlohmann::json::parse(slurp(dir / "profiles.meta.json"));
  CHECK(meta.at("checkpoint_hash").get<std::string>() ==
        ckpt::file_hash_hex((dir / "generator.json").string()));
  CHECK(meta.at("n").get<long>() == 7);
  CHECK(meta.at("constrained").get<bool>());
  CHECK(meta.at("polytope").at("window_len").get<int>() == 15);

  const auto first = slurp(dir / "profiles.csv");
  cli::run_generate(cfg);
  CHECK(slurp(dir / "profiles.csv") == first);

  // The checkpoint's constraints must match a pinned params source.
  auto wrong = cfg;
  wrong.params.values.U = 20.0;
  CHECK_THROWS_AS(cli::run_generate(wrong), ConfigError);
  auto estimated = cfg;
  estimated.params.kind = cli::ParamsSource::Kind::Estimate;
  CHECK(cli::run_generate(estimated) == 0);  // estimate source defers to the checkpoint
}

TEST_CASE("validate passes on the ground truth and fails on shifted profiles") {
  auto dir = scratch("validate_cmd");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 2;
  cli::run_synth(cfg);

  // Repackage the true fast series as generated profiles: aggregates then
  // equal the real slow readings exactly, so KS is 0 and nothing violates.
  auto fast = data::load_meter_csv(cfg.data.fast_csv);
  std::vector<Eigen::VectorXd> profiles;
  for (std::size_t w = 0; w + 15 <= fast.size(); w += 15) {
    Eigen::VectorXd p(15);
    for (int i = 0; i < 15; ++i) p(i) = fast.records[w + static_cast<std::size_t>(i)].load_kw;
    profiles.push_back(p);
  }
  cli::write_profiles_csv((dir / "true_profiles.csv").string(), profiles);
  cfg.validate.profiles_csv = (dir / "true_profiles.csv").string();
  CHECK(cli::run_validate(cfg) == 0);

  REQUIRE(fs::exists(dir / "report.json"));
  auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report.at("ks").get<double>() == 0.0);
  CHECK(report.at("violations").at("total").get<long>() == 0);
  CHECK(report.at("pass").get<bool>());
  CHECK(report.at("n_generated_slow").get<long>() == 192);
  CHECK(report.at("n_real_slow").get<long>() == 192);
  CHECK(fs::exists(dir / "ecdf_generated.csv"));
  CHECK(fs::exists(dir / "ecdf_real.csv"));

  // Shift every profile up: the distribution moves and the box breaks.
  for (auto& p : profiles) p.array() += 5.0;
  cli::write_profiles_csv((dir / "shifted.csv").string(), profiles);
  cfg.validate.profiles_csv = (dir / "shifted.csv").string();
  CHECK(cli::run_validate(cfg) == 1);
  report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK_FALSE(report.at("pass").get<bool>());
  CHECK(report.at("violations").at("total").get<long>() > 0);

  auto no_real = cfg;
  no_real.validate.real_slow_csv = "";
  CHECK_THROWS_AS(cli::run_validate(no_real), ConfigError);
}

TEST_CASE("validate reads the generation sidecar for its constraints") {
  auto dir = scratch("validate_sidecar");
  auto cfg = small_config(dir);
  cfg.synth.n_days = 1;
  cli::run_synth(cfg);
  cli::run_train(cfg);
  cfg.generate.n = 4;
  cli::run_generate(cfg);

  // Give the config a polytope the profiles would violate on purpose; the
  // sidecar's recorded constraints must win over it.
  cfg.params.values = {1.0, 1.0, 0.5, 4.9, 5.0};
  CHECK_NOTHROW(cli::run_validate(cfg));
  auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report.at("violations").at("total").get<long>() == 0);
  CHECK(report.at("polytope").at("hist_max").get<double>() == doctest::Approx(10.26));
}
