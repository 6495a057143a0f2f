#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxogate/discriminators.hpp"
#include "taxogate/generator.hpp"
#include "taxogate/trainer.hpp"

namespace taxogate {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NoiseKind { shuffled, uniform };

/// Every tunable of an experiment. The text form is flat `key = value`
/// lines with `#` comments; each field below has a key of the same name.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path work_dir = "run";
  // Input dataset; empty means the synthetic one written by synth-data.
  std::filesystem::path concepts_file;
  std::filesystem::path edges_file;

  // Synthetic taxonomy.
  int branching = 3;
  int depth = 5;
  int modifier_vocab_size = 8;

  // Benchmark split.
  double mask_fraction = 0.2;
  double noise_ratio = 0.6;
  NoiseKind noise_kind = NoiseKind::shuffled;  // noise injected into the query stream
  NoiseKind train_noise_kind = NoiseKind::uniform;  // noise the discriminators learn from

  // Models.
  int gen_width = 64;
  int gen_blocks = 2;
  int gen_heads = 2;
  int gen_context = 32;
  bool gen_feed_forward = true;
  int gen_ff_width = 128;
  int rollout_embed = 32;
  int rollout_hidden = 32;
  int hyper_dim = 32;
  HyperCombine hyper_combine = HyperCombine::sum;
  double init_range = 0.08;

  TrainerConfig trainer;

  // Evaluation.
  std::size_t k = 10;
  std::optional<double> gamma;  // unset: tuned on the validation split
  std::size_t augment_samples = 200;
  std::size_t generate_count = 10;
  bool record_wall_time = false;
};

/// Registered keys in canonical order.
const std::vector<std::string>& config_keys();

/// Sets one key from its text value; throws ConfigError on unknown keys and
/// malformed values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& config, const std::string& key);

/// Range and consistency checks across keys.
void validate(const ExperimentConfig& config);

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies `--key=value` overrides in order, then validates.
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);
/// Canonical text form; parsing it yields an equal configuration.
std::string format_config(const ExperimentConfig& config);

GeneratorConfig generator_config(const ExperimentConfig& c, std::size_t vocab_size);
RolloutDiscConfig rollout_config(const ExperimentConfig& c, std::size_t vocab_size);
HyperDiscConfig hyper_config(const ExperimentConfig& c, std::size_t vocab_size, int max_depth);

}  // namespace taxogate
