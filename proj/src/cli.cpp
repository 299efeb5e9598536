#include "rewirenet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "rewirenet/analysis.hpp"
#include "rewirenet/checkpoint.hpp"
#include "rewirenet/csv.hpp"
#include "rewirenet/curvature.hpp"
#include "rewirenet/errors.hpp"
#include "rewirenet/trajectory_io.hpp"
#include "rewirenet/training.hpp"

namespace rewirenet::cli {

void RunConfig::validate() const {
  rewirenet::validate(RewireParams{alpha_percent, beta, layers, variant});
  if (hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1");
  if (mlp_hidden_layers < 0) throw ValidationError("mlp_hidden_layers must be >= 0");
  for (int h : horizons) {
    if (h < 1) throw ValidationError("rollout horizons must be >= 1, got " + std::to_string(h));
  }
}

void apply_preset(RunConfig& config, std::string_view preset) {
  if (preset == "laminar") {
    config.alpha_percent = 3.0;
    config.beta = 1.0;
  } else if (preset == "turbulent") {
    config.alpha_percent = 5.0;
    config.beta = 2.0;
  } else {
    throw ValidationError("unknown preset '" + std::string(preset) + "' (expected laminar or turbulent)");
  }
}

namespace {

using json = nlohmann::json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ParseError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

template <class Parse>
void read_enum(const json& obj, const char* key, const std::string& where, Parse parse) {
  std::string s;
  if (!obj.contains(key)) return;
  read(obj, key, where, s);
  parse(s);
}

}  // namespace

void apply_config_json(RunConfig& config, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  check_keys(doc, "", {"preset", "alpha", "beta", "layers", "hidden_dim", "mlp_hidden_layers", "activation", "residual",
                       "variant", "train", "paths", "eval", "synth"});
  read_enum(doc, "preset", "", [&](const std::string& s) { apply_preset(config, s); });
  read(doc, "alpha", "", config.alpha_percent);
  read(doc, "beta", "", config.beta);
  read(doc, "layers", "", config.layers);
  read(doc, "hidden_dim", "", config.hidden_dim);
  read(doc, "mlp_hidden_layers", "", config.mlp_hidden_layers);
  read_enum(doc, "activation", "", [&](const std::string& s) { config.activation = activation_from_string(s); });
  read(doc, "residual", "", config.residual);
  read_enum(doc, "variant", "", [&](const std::string& s) { config.variant = variant_from_string(s); });

  if (doc.contains("train")) {
    const auto& t = doc["train"];
    check_keys(t, "train", {"step_size", "epochs", "batch", "seed"});
    read(t, "step_size", "train", config.train.step_size);
    read(t, "epochs", "train", config.train.epochs);
    read(t, "batch", "train", config.train.batch);
    read(t, "seed", "train", config.train.seed);
  }
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    check_keys(p, "paths", {"data", "eval", "model", "report"});
    read(p, "data", "paths", config.paths.data);
    read(p, "eval", "paths", config.paths.eval);
    read(p, "model", "paths", config.paths.model);
    read(p, "report", "paths", config.paths.report);
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    check_keys(e, "eval", {"horizons", "field"});
    read(e, "horizons", "eval", config.horizons);
    read_enum(e, "field", "eval", [&](const std::string& s) { config.field = field_from_string(s); });
  }
  if (doc.contains("synth")) {
    const auto& s = doc["synth"];
    auto& c = config.synth;
    check_keys(s, "synth", {"rows", "cols", "steps", "seed", "profile", "amplitude", "pulse_width", "sine_period",
                            "advection", "diffusion", "noise", "obstacle"});
    read(s, "rows", "synth", c.rows);
    read(s, "cols", "synth", c.cols);
    read(s, "steps", "synth", c.steps);
    read(s, "seed", "synth", c.seed);
    read_enum(s, "profile", "synth", [&](const std::string& v) { c.pattern = inflow_pattern_from_string(v); });
    read(s, "amplitude", "synth", c.amplitude);
    read(s, "pulse_width", "synth", c.pulse_width);
    read(s, "sine_period", "synth", c.sine_period);
    read(s, "advection", "synth", c.advection);
    read(s, "diffusion", "synth", c.diffusion);
    read(s, "noise", "synth", c.initial_noise);
    if (s.contains("obstacle")) {
      std::vector<double> disk;
      read(s, "obstacle", "synth", disk);
      if (disk.size() != 3) throw ParseError("config key 'synth.obstacle' must be [cx, cy, radius]");
      c.obstacle = Disk{{disk[0], disk[1]}, disk[2]};
    }
  }
}

namespace {

/// Flags are bound to scratch storage and applied after the config file, so
/// only flags the user actually passed override file values.
class Overrides {
 public:
  template <class T, class Set>
  void add(CLI::App* app, const std::string& name, const std::string& desc, Set set) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, desc);
    apply_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
  }

  void apply(RunConfig& config) const {
    for (const auto& f : apply_) f(config);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> apply_;
};

struct Command {
  CLI::App* app = nullptr;
  Overrides overrides;
  std::string config_path;
  std::string preset;
  std::string out_path;
};

void add_common(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "JSON run config; flags override its values");
  cmd.app->add_option("--preset", cmd.preset, "laminar (alpha 3, beta 1) or turbulent (alpha 5, beta 2)");
}

void add_rewire_flags(Command& cmd) {
  auto& o = cmd.overrides;
  o.add<double>(cmd.app, "--alpha", "bottleneck percentile a in (0, 100]", [](RunConfig& c, double v) { c.alpha_percent = v; });
  o.add<double>(cmd.app, "--beta", "delay scale", [](RunConfig& c, double v) { c.beta = v; });
  o.add<int>(cmd.app, "--layers", "message-passing layers L", [](RunConfig& c, int v) { c.layers = v; });
  o.add<std::string>(cmd.app, "--variant", "rewiring variant",
                     [](RunConfig& c, const std::string& v) { c.variant = variant_from_string(v); });
}

void add_model_flags(Command& cmd) {
  auto& o = cmd.overrides;
  o.add<int>(cmd.app, "--hidden-dim", "latent width", [](RunConfig& c, int v) { c.hidden_dim = v; });
  o.add<int>(cmd.app, "--mlp-hidden-layers", "hidden layers per MLP", [](RunConfig& c, int v) { c.mlp_hidden_layers = v; });
  o.add<std::string>(cmd.app, "--activation", "relu, tanh or identity",
                     [](RunConfig& c, const std::string& v) { c.activation = activation_from_string(v); });
  o.add<double>(cmd.app, "--step-size", "gradient descent step", [](RunConfig& c, double v) { c.train.step_size = v; });
  o.add<int>(cmd.app, "--epochs", "training epochs", [](RunConfig& c, int v) { c.train.epochs = v; });
  o.add<int>(cmd.app, "--batch", "minibatch size", [](RunConfig& c, int v) { c.train.batch = v; });
  o.add<std::uint64_t>(cmd.app, "--seed", "initialization and shuffling seed",
                       [](RunConfig& c, std::uint64_t v) { c.train.seed = v; });
}

void add_eval_flags(Command& cmd) {
  cmd.overrides.add<std::vector<int>>(cmd.app, "--horizons", "rollout horizons k",
                                      [](RunConfig& c, const std::vector<int>& v) { c.horizons = v; });
  cmd.overrides.add<std::string>(cmd.app, "--field", "velocity, pressure or density",
                                 [](RunConfig& c, const std::string& v) { c.field = field_from_string(v); });
}

void add_data_flag(Command& cmd, const std::string& name = "--in,--data") {
  cmd.overrides.add<std::string>(cmd.app, name, "trajectory file", [](RunConfig& c, const std::string& v) { c.paths.data = v; });
}

void add_model_path_flag(Command& cmd) {
  cmd.overrides.add<std::string>(cmd.app, "--model", "model checkpoint", [](RunConfig& c, const std::string& v) { c.paths.model = v; });
}

RunConfig resolve(const Command& cmd) {
  RunConfig config;
  if (!cmd.config_path.empty()) {
    const auto text = read_text_file(cmd.config_path);
    try {
      apply_config_json(config, text);
    } catch (const ParseError& e) {
      throw ValidationError(cmd.config_path + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(cmd.config_path + ": " + e.what());
    }
  }
  if (!cmd.preset.empty()) apply_preset(config, cmd.preset);
  cmd.overrides.apply(config);
  config.validate();
  return config;
}

RewireParams rewire_of(const RunConfig& c) { return RewireParams{c.alpha_percent, c.beta, c.layers, c.variant}; }

TrainConfig train_config_of(const RunConfig& c, const FeatureLayout& features) {
  TrainConfig t;
  t.model.layers = c.layers;
  t.model.hidden_dim = c.hidden_dim;
  t.model.mlp_hidden_layers = c.mlp_hidden_layers;
  t.model.activation = c.activation;
  t.model.residual = c.residual;
  t.model.features = features;
  t.rewire = rewire_of(c);
  t.step_size = c.train.step_size;
  t.epochs = c.train.epochs;
  t.batch = c.train.batch;
  t.seed = c.train.seed;
  return t;
}

const std::string& require_path(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("missing ") + what);
  return path;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

Trajectory load_data(const RunConfig& c) { return load_trajectory(require_path(c.paths.data, "input trajectory (--in)")); }

std::string breakdown_rows(const RmseBreakdown& b, const std::string& prefix) {
  std::string out;
  csv::row(out, prefix, "one_step", b.one_step);
  for (const auto& [k, v] : b.rollout_k) csv::row(out, prefix, "rollout_" + std::to_string(k), v);
  csv::row(out, prefix, "rollout_all", b.rollout_all);
  return out;
}

int run_gen_synth(const Command& cmd, std::ostream& out) {
  const auto config = resolve(cmd);
  emit(serialize_trajectory(gen_synthetic(config.synth)), cmd.out_path, out);
  return kExitOk;
}

int run_curvature(const Command& cmd, std::ostream& out) {
  const auto config = resolve(cmd);
  const auto traj = load_data(config);
  const auto report = curvature_report(traj.graph, config.alpha_percent);
  std::string text;
  csv::row(text, "i", "j", "kappa");
  for (const auto& [e, k] : report.edge_kappa) csv::row(text, e.first, e.second, k);
  csv::row(text, "node", "gamma");
  for (std::size_t i = 0; i < report.node_gamma.size(); ++i) csv::row(text, i, report.node_gamma[i]);
  for (auto b : report.bottleneck_set) csv::row(text, "bottleneck", b);
  emit(text, cmd.out_path, out);
  return kExitOk;
}

int run_schedule(const Command& cmd, int frame_index, std::ostream& out) {
  const auto config = resolve(cmd);
  const auto traj = load_data(config);
  if (frame_index < 0 || static_cast<std::size_t>(frame_index) >= traj.frames.size()) {
    throw ValidationError("--frame " + std::to_string(frame_index) + " outside trajectory of " +
                          std::to_string(traj.frames.size()) + " frames");
  }
  const auto schedule = build_schedule(traj.graph, traj.frames[static_cast<std::size_t>(frame_index)], rewire_of(config));
  std::string text;
  csv::row(text, "source", "partner", "hop_distance", "velocity_gap", "delay", "activation_layer");
  for (const auto& p : schedule.pairs) {
    csv::row(text, p.source, p.partner, p.hop_distance, p.velocity_gap, p.delay, p.activation_layer);
  }
  emit(text, cmd.out_path, out);
  return kExitOk;
}

int run_train(const Command& cmd, std::ostream& out, std::ostream& err) {
  const auto config = resolve(cmd);
  const auto model_path = require_path(config.paths.model, "model output path (--model)");
  const auto traj = load_data(config);
  const auto tc = train_config_of(config, layout_of(traj.frames.front()));
  const auto result = train(tc, {traj});
  save_checkpoint(ModelCheckpoint{tc.model, tc.rewire, result.params}, model_path);
  std::string text;
  csv::row(text, "epoch", "loss");
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) csv::row(text, e + 1, result.loss_curve[e]);
  emit(text, config.paths.report, out);
  err << "trained " << result.params.parameter_count() << " parameters for " << tc.epochs << " epochs\n";
  return kExitOk;
}

int run_rollout(const Command& cmd, int steps, std::ostream& out) {
  const auto config = resolve(cmd);
  const auto ckpt = load_checkpoint(require_path(config.paths.model, "model checkpoint (--model)"));
  const auto truth = load_data(config);
  const int n = steps > 0 ? steps : static_cast<int>(truth.frames.size()) - 1;
  if (n < 1) throw ValidationError("rollout needs --steps >= 1 or a trajectory with at least two frames");
  const auto predicted = rollout(ckpt.params, truth.graph, truth.frames.front(), n, ckpt.rewire, &truth);
  emit(serialize_trajectory(predicted), cmd.out_path, out);
  return kExitOk;
}

int run_evaluate(const Command& cmd, std::ostream& out) {
  const auto config = resolve(cmd);
  const auto ckpt = load_checkpoint(require_path(config.paths.model, "model checkpoint (--model)"));
  const auto truth = load_data(config);
  const auto b = evaluate(ckpt.params, truth, ckpt.rewire, config.horizons, config.field);
  std::string text;
  csv::row(text, "field", "metric", "value");
  text += breakdown_rows(b, std::string(to_string(b.field)));
  emit(text, cmd.out_path.empty() ? config.paths.report : cmd.out_path, out);
  return kExitOk;
}

int run_verify_lemma(const Command& cmd, const LemmaSweepConfig& sweep, const std::string& decay_path, std::ostream& out,
                     std::ostream& err) {
  const auto report = verify_lemma(sweep);
  emit(lemma_report_csv(report), cmd.out_path, out);
  if (!decay_path.empty()) {
    std::string text;
    csv::row(text, "map", "r", "rows", "mean_bound", "mean_ratio");
    for (const auto& d : report.decay) {
      csv::row(text, d.map == ScalarMapKind::affine ? "affine" : "tanh", d.r, d.rows, d.mean_bound, d.mean_ratio);
    }
    write_text_file(decay_path, text);
  }
  std::size_t failed = 0;
  for (const auto& r : report.rows) failed += r.pass ? 0 : 1;
  err << report.rows.size() << " rows, " << failed << " failed, equality witnessed: "
      << (report.tightness_witnessed ? "yes" : "no") << "\n";
  return report.all_pass ? kExitOk : kExitFailure;
}

int run_ablate(const Command& cmd, std::ostream& out, std::ostream& err) {
  const auto config = resolve(cmd);
  const auto train_traj = load_data(config);
  const auto eval_traj = config.paths.eval.empty() ? train_traj : load_trajectory(config.paths.eval);
  if (layout_of(eval_traj.frames.front()) != layout_of(train_traj.frames.front())) {
    throw ValidationError("evaluation trajectory fields do not match the training data");
  }
  std::string text;
  csv::row(text, "variant", "metric", "value");
  for (auto v : kAllVariants) {
    auto run = config;
    run.variant = v;
    const auto tc = train_config_of(run, layout_of(train_traj.frames.front()));
    RmseBreakdown b;
    try {
      const auto result = train(tc, {train_traj});
      b = evaluate(result.params, eval_traj, tc.rewire, run.horizons, run.field);
    } catch (const DivergenceError& e) {
      // One unstable variant should not hide the others; it scores +inf throughout.
      const double inf = std::numeric_limits<double>::infinity();
      b = RmseBreakdown{inf, {}, inf, run.field};
      for (int k : run.horizons) {
        if (static_cast<std::size_t>(k) < eval_traj.frames.size()) b.rollout_k[k] = inf;
      }
      err << to_string(v) << ": " << e.what() << "\n";
    }
    text += breakdown_rows(b, std::string(to_string(v)));
    err << to_string(v) << ": one_step " << b.one_step << ", rollout_all " << b.rollout_all << "\n";
  }
  emit(text, cmd.out_path.empty() ? config.paths.report : cmd.out_path, out);
  return kExitOk;
}

}  // namespace

int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Curvature-guided adaptive rewiring for mesh-based learned simulators", "rewirenet"};
  app.require_subcommand(1);

  Command gen, curv, sched, trn, roll, eval, lemma, abl;
  auto make = [&](Command& cmd, const char* name, const char* desc) {
    cmd.app = app.add_subcommand(name, desc);
    add_common(cmd);
  };

  make(gen, "gen-synth", "Generate a synthetic advection-diffusion trajectory");
  {
    auto& o = gen.overrides;
    auto* a = gen.app;
    o.add<int>(a, "--rows", "grid rows", [](RunConfig& c, int v) { c.synth.rows = v; });
    o.add<int>(a, "--cols", "grid columns", [](RunConfig& c, int v) { c.synth.cols = v; });
    o.add<int>(a, "--steps", "time steps", [](RunConfig& c, int v) { c.synth.steps = v; });
    o.add<std::uint64_t>(a, "--seed", "initial-noise seed", [](RunConfig& c, std::uint64_t v) { c.synth.seed = v; });
    o.add<std::string>(a, "--profile", "inflow pattern: step, pulse or sine",
                       [](RunConfig& c, const std::string& v) { c.synth.pattern = inflow_pattern_from_string(v); });
    o.add<double>(a, "--amplitude", "inflow amplitude", [](RunConfig& c, double v) { c.synth.amplitude = v; });
    o.add<int>(a, "--pulse-width", "pulse length in steps", [](RunConfig& c, int v) { c.synth.pulse_width = v; });
    o.add<int>(a, "--sine-period", "sine period in steps", [](RunConfig& c, int v) { c.synth.sine_period = v; });
    o.add<double>(a, "--advection", "upwind advection number", [](RunConfig& c, double v) { c.synth.advection = v; });
    o.add<double>(a, "--diffusion", "diffusion number", [](RunConfig& c, double v) { c.synth.diffusion = v; });
    o.add<double>(a, "--noise", "initial velocity noise amplitude", [](RunConfig& c, double v) { c.synth.initial_noise = v; });
    o.add<std::vector<double>>(a, "--obstacle", "disk obstacle: cx cy radius", [](RunConfig& c, const std::vector<double>& v) {
      if (v.size() != 3) throw ValidationError("--obstacle takes cx cy radius");
      c.synth.obstacle = Disk{{v[0], v[1]}, v[2]};
    });
    a->add_option("--out", gen.out_path, "output trajectory file (default: stdout)");
  }

  make(curv, "curvature", "Edge and node curvature plus the bottleneck set");
  add_data_flag(curv);
  curv.overrides.add<double>(curv.app, "--alpha", "bottleneck percentile a", [](RunConfig& c, double v) { c.alpha_percent = v; });
  curv.app->add_option("--out", curv.out_path, "output CSV (default: stdout)");

  int frame_index = 0;
  make(sched, "schedule", "Rewiring pairs and activation layers for one frame");
  add_data_flag(sched);
  add_rewire_flags(sched);
  sched.app->add_option("--frame", frame_index, "frame index");
  sched.app->add_option("--out", sched.out_path, "output CSV (default: stdout)");

  make(trn, "train", "Train a model and write a checkpoint");
  add_data_flag(trn);
  add_rewire_flags(trn);
  add_model_flags(trn);
  add_model_path_flag(trn);
  trn.overrides.add<std::string>(trn.app, "--report", "loss-curve CSV (default: stdout)",
                                 [](RunConfig& c, const std::string& v) { c.paths.report = v; });

  int rollout_steps = 0;
  make(roll, "rollout", "Autoregressive prediction from the first frame");
  add_data_flag(roll);
  add_model_path_flag(roll);
  roll.app->add_option("--steps", rollout_steps, "frames to predict (default: trajectory length)");
  roll.app->add_option("--out", roll.out_path, "output trajectory file (default: stdout)");

  make(eval, "evaluate", "RMSE of a checkpoint on a trajectory");
  add_data_flag(eval);
  add_model_path_flag(eval);
  add_eval_flags(eval);
  eval.app->add_option("--out", eval.out_path, "output CSV (default: stdout)");

  LemmaSweepConfig sweep;
  std::string decay_path;
  make(lemma, "verify-lemma", "Check the Jacobian locality bound on random graphs");
  lemma.app->add_option("--seed", sweep.seed, "ensemble seed");
  lemma.app->add_option("--graphs", sweep.graphs, "number of random graphs");
  lemma.app->add_option("--min-nodes", sweep.min_nodes, "smallest graph");
  lemma.app->add_option("--max-nodes", sweep.max_nodes, "largest graph");
  lemma.app->add_option("--max-radius", sweep.max_radius, "largest depth r");
  lemma.app->add_option("--decay", decay_path, "per-radius decay summary CSV");
  lemma.app->add_option("--out", lemma.out_path, "output CSV (default: stdout)");

  make(abl, "ablate", "Train and evaluate every rewiring variant");
  add_data_flag(abl);
  add_rewire_flags(abl);
  add_model_flags(abl);
  add_eval_flags(abl);
  abl.overrides.add<std::string>(abl.app, "--eval", "evaluation trajectory (default: training data)",
                                 [](RunConfig& c, const std::string& v) { c.paths.eval = v; });
  abl.app->add_option("--out", abl.out_path, "output CSV (default: stdout)");

  if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
    err << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
    return kExitValidation;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen.app->parsed()) return run_gen_synth(gen, out);
    if (curv.app->parsed()) return run_curvature(curv, out);
    if (sched.app->parsed()) return run_schedule(sched, frame_index, out);
    if (trn.app->parsed()) return run_train(trn, out, err);
    if (roll.app->parsed()) return run_rollout(roll, rollout_steps, out);
    if (eval.app->parsed()) return run_evaluate(eval, out);
    if (lemma.app->parsed()) return run_verify_lemma(lemma, sweep, decay_path, out, err);
    if (abl.app->parsed()) return run_ablate(abl, out, err);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitValidation;
}

}  // namespace rewirenet::cli
