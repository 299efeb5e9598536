#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rewirenet/mlp.hpp"
#include "rewirenet/rewiring.hpp"
#include "rewirenet/synth.hpp"

namespace rewirenet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;

struct TrainSettings {
  double step_size = 1e-3;
  int epochs = 100;
  int batch = 4;
  std::uint64_t seed = 0;
};

struct Paths {
  std::string data;
  std::string eval;  // evaluation data for `ablate`; empty means `data`
  std::string model;
  std::string report;
};

/// Everything one experiment needs. Built from defaults, then an optional
/// JSON config file, then command-line flags.
struct RunConfig {
  double alpha_percent = 3.0;
  double beta = 1.0;
  int layers = 6;
  int hidden_dim = 32;
  int mlp_hidden_layers = 1;
  Activation activation = Activation::relu;
  bool residual = true;
  RewireVariant variant = RewireVariant::adaptive;
  TrainSettings train;
  Paths paths;
  std::vector<int> horizons{20};
  Field field = Field::velocity;
  SynthConfig synth;

  void validate() const;
};

/// Applies a named hyperparameter preset: "laminar" (alpha 3, beta 1) or
/// "turbulent" (alpha 5, beta 2).
void apply_preset(RunConfig& config, std::string_view preset);

/// Overlays the keys present in a JSON config document on `config`. Unknown
/// keys and wrong types throw ParseError naming the key.
void apply_config_json(RunConfig& config, std::string_view text);

/// Runs one subcommand. argv[0] is the program name. Primary output goes to
/// `out` unless redirected to a file by a flag; diagnostics go to `err`.
/// Returns 0 on success, 2 on a usage or validation error, 1 otherwise.
int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rewirenet::cli
