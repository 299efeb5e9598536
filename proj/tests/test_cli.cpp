#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "rewirenet/cli.hpp"
#include "rewirenet/checkpoint.hpp"
#include "rewirenet/errors.hpp"
#include "rewirenet/trajectory_io.hpp"

using namespace rewirenet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rewirenet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::command_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rewirenet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_data(const fs::path& dir) {
  const auto path = (dir / "data.json").string();
  const auto r = run({"gen-synth", "--rows", "5", "--cols", "6", "--steps", "6", "--profile", "step", "--out", path});
  REQUIRE(r.code == 0);
  return path;
}

const std::vector<std::string> kTiny = {"--layers", "2", "--hidden-dim", "6", "--epochs", "2",
                                        "--step-size", "1e-3", "--batch", "2"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  auto r = run({"bogus"});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("unknown subcommand 'bogus'") != std::string::npos);
  CHECK(run({}).code == cli::kExitValidation);
  CHECK(run({"curvature", "--no-such-flag"}).code == cli::kExitValidation);
  CHECK(run({"gen-synth", "--advection", "0.9", "--diffusion", "0.1"}).code == cli::kExitValidation);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("gen-synth writes a loadable trajectory and is reproducible") {
  const auto dir = scratch_dir("gen");
  const auto path = small_data(dir);
  const auto traj = load_trajectory(path);
  CHECK(traj.graph.node_count() == 30);
  CHECK(traj.frames.size() == 7);
  const auto a = run({"gen-synth", "--steps", "3"});
  const auto b = run({"gen-synth", "--steps", "3"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("curvature and schedule CSV layouts") {
  const auto dir = scratch_dir("curv");
  const auto data = small_data(dir);
  const auto c = run({"curvature", "--in", data, "--alpha", "10"});
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("i,j,kappa\n", 0) == 0);
  CHECK(c.out.find("\nnode,gamma\n") != std::string::npos);
  CHECK(c.out.find("\nbottleneck,") != std::string::npos);

  const auto s = run({"schedule", "--in", data, "--frame", "2", "--alpha", "20", "--layers", "4"});
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("source,partner,hop_distance,velocity_gap,delay,activation_layer\n", 0) == 0);
  CHECK(run({"schedule", "--in", data, "--frame", "99"}).code == cli::kExitValidation);
  CHECK(run({"curvature", "--in", (dir / "missing.json").string()}).code == cli::kExitFailure);
}

TEST_CASE("config precedence: defaults, file, preset flag, explicit flags") {
  const auto dir = scratch_dir("config");
  const auto data = small_data(dir);
  const auto cfg = (dir / "run.json").string();
  write_text_file(cfg, R"({"preset": "turbulent", "beta": 7.5, "layers": 3})");

  const auto model = (dir / "m.json").string();
  auto r = run(with({"train", "--config", cfg, "--in", data, "--model", model}, {"--hidden-dim", "4", "--epochs", "1"}));
  REQUIRE(r.code == 0);
  auto ck = load_checkpoint(model);
  CHECK(ck.rewire.alpha_percent == 5.0);
  CHECK(ck.rewire.beta == 7.5);
  CHECK(ck.config.layers == 3);

  r = run({"train", "--config", cfg, "--preset", "laminar", "--beta", "0.25", "--in", data, "--model", model,
           "--hidden-dim", "4", "--epochs", "1"});
  REQUIRE(r.code == 0);
  ck = load_checkpoint(model);
  CHECK(ck.rewire.alpha_percent == 3.0);
  CHECK(ck.rewire.beta == 0.25);
  CHECK(ck.config.layers == 3);

  write_text_file(cfg, R"({"betta": 1})");
  r = run({"curvature", "--config", cfg, "--in", data});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("betta") != std::string::npos);
  write_text_file(cfg, R"({"alpha": "high"})");
  CHECK(run({"curvature", "--config", cfg, "--in", data}).code == cli::kExitValidation);
}

TEST_CASE("config json and preset helpers") {
  cli::RunConfig c;
  cli::apply_config_json(c, R"({"train": {"epochs": 7}, "eval": {"horizons": [5, 10]}, "synth": {"obstacle": [5, 5, 1.5]}})");
  CHECK(c.train.epochs == 7);
  CHECK(c.horizons == std::vector<int>{5, 10});
  REQUIRE(c.synth.obstacle.has_value());
  CHECK(c.synth.obstacle->radius == 1.5);
  CHECK_THROWS_AS(cli::apply_config_json(c, "{"), ParseError);
  CHECK_THROWS(cli::apply_preset(c, "viscous"));
  c.horizons = {0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("train, rollout and evaluate") {
  const auto dir = scratch_dir("train");
  const auto data = small_data(dir);
  const auto model = (dir / "m.json").string();
  const auto report = (dir / "loss.csv").string();

  auto t = run(with({"train", "--in", data, "--model", model, "--report", report}, kTiny));
  REQUIRE(t.code == 0);
  const auto loss = read_text_file(report);
  CHECK(loss.rfind("epoch,loss\n1,", 0) == 0);

  const auto first_model = read_text_file(model);
  REQUIRE(run(with({"train", "--in", data, "--model", model, "--report", report}, kTiny)).code == 0);
  CHECK(read_text_file(model) == first_model);
  CHECK(read_text_file(report) == loss);

  const auto roll = run({"rollout", "--model", model, "--in", data, "--steps", "3"});
  REQUIRE(roll.code == 0);
  CHECK(parse_trajectory(roll.out).frames.size() == 4);

  const auto ev = run({"evaluate", "--model", model, "--in", data, "--horizons", "2", "4"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.rfind("field,metric,value\nvelocity,one_step,", 0) == 0);
  CHECK(ev.out.find("velocity,rollout_2,") != std::string::npos);
  CHECK(ev.out.find("velocity,rollout_4,") != std::string::npos);
  CHECK(ev.out.find("velocity,rollout_all,") != std::string::npos);

  CHECK(run({"evaluate", "--model", model, "--in", data, "--field", "pressure"}).code == cli::kExitValidation);
  CHECK(run(with({"train", "--in", data}, kTiny)).code == cli::kExitValidation);
  CHECK(run(with({"train", "--in", data, "--model", model, "--epochs", "0"}, {})).code == cli::kExitValidation);
}

TEST_CASE("ablate reports every variant") {
  const auto dir = scratch_dir("ablate");
  const auto data = small_data(dir);
  const auto r = run(with({"ablate", "--in", data, "--horizons", "3"}, kTiny));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("variant,metric,value\n", 0) == 0);
  for (auto v : kAllVariants) {
    CHECK(r.out.find(std::string(to_string(v)) + ",one_step,") != std::string::npos);
    CHECK(r.out.find(std::string(to_string(v)) + ",rollout_3,") != std::string::npos);
  }
}

TEST_CASE("verify-lemma exit status") {
  const auto r = run({"verify-lemma", "--graphs", "2", "--max-nodes", "6"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("graph_id,kind,", 0) == 0);
  CHECK(r.err.find("0 failed") != std::string::npos);
}

TEST_CASE("ablate scores a diverging variant as infinite instead of aborting") {
  const auto dir = scratch_dir("ablate_diverge");
  const auto data = small_data(dir);
  const auto r = run({"ablate", "--in", data, "--layers", "2", "--hidden-dim", "6", "--epochs", "5", "--step-size", "1e3",
                      "--horizons", "3"});
  REQUIRE(r.code == 0);
  for (auto v : kAllVariants) CHECK(r.out.find(std::string(to_string(v)) + ",one_step,inf\n") != std::string::npos);
  CHECK(r.err.find("diverged") != std::string::npos);
}
