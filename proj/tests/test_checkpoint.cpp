#include <doctest.h>

#include <random>

#include "rewirenet/checkpoint.hpp"
#include "rewirenet/errors.hpp"

using namespace rewirenet;

namespace {

ModelCheckpoint random_checkpoint(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelCheckpoint c;
  c.config.layers = 1 + static_cast<int>(rng() % 4);
  c.config.hidden_dim = 2 + static_cast<int>(rng() % 5);
  c.config.mlp_hidden_layers = static_cast<int>(rng() % 3);
  c.config.activation = rng() % 2 ? Activation::tanh : Activation::relu;
  c.config.features.pressure = rng() % 2;
  c.config.features.density = rng() % 2;
  c.rewire.alpha_percent = 1.0 + static_cast<double>(rng() % 99);
  c.rewire.beta = 0.5 + static_cast<double>(rng() % 7) / 3.0;
  c.rewire.layers = c.config.layers;
  c.rewire.variant = kAllVariants[rng() % 6];
  c.params = init_params(c.config, seed);
  std::normal_distribution<double> n(0.0, 1e3);
  c.params.for_each_tensor([&](std::span<double> t) {
    for (auto& v : t) v *= n(rng);
  });
  return c;
}

}  // namespace

TEST_CASE("checkpoint save, load, save is byte-identical") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto c = random_checkpoint(s);
    const auto text = serialize_checkpoint(c);
    const auto back = parse_checkpoint(text);
    CHECK(serialize_checkpoint(back) == text);
    CHECK(back.params.flatten() == c.params.flatten());
    CHECK(back.rewire.variant == c.rewire.variant);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto text = serialize_checkpoint(random_checkpoint(1));
  CHECK_THROWS_AS(parse_checkpoint("[]"), ParseError);
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), ParseError);
  auto wrong_version = text;
  wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":9");
  CHECK_THROWS_AS(parse_checkpoint(wrong_version), ParseError);
}
