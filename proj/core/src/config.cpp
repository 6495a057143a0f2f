#include "taxogate/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "taxogate/checkpoint.hpp"

namespace taxogate {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* want) {
  T v{};
  const char* b = value.data();
  const char* e = b + value.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (value.empty() || ec != std::errc() || ptr != e) bad_value(key, value, want);
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a number");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "true or false");
}

template <typename E>
E parse_enum(const std::string& key, const std::string& value, const std::map<std::string, E>& names) {
  const auto it = names.find(value);
  if (it == names.end()) {
    std::string want;
    for (const auto& [n, _] : names) want += (want.empty() ? "" : "|") + n;
    bad_value(key, value, want);
  }
  return it->second;
}

template <typename E>
std::string enum_name(E v, const std::map<std::string, E>& names) {
  for (const auto& [n, e] : names) {
    if (e == v) return n;
  }
  return "?";
}

const std::map<std::string, NoiseKind> kNoiseKinds{{"shuffled", NoiseKind::shuffled}, {"uniform", NoiseKind::uniform}};
const std::map<std::string, HyperCombine> kCombine{{"sum", HyperCombine::sum}, {"concat", HyperCombine::concat}};
const std::map<std::string, RewardBaseline> kBaselines{{"none", RewardBaseline::none}, {"mean", RewardBaseline::mean}};
const std::map<std::string, RolloutPolicy> kPolicies{{"current", RolloutPolicy::current},
                                                     {"frozen_copy", RolloutPolicy::frozen_copy}};
const std::map<std::string, RolloutInput> kInputs{{"query", RolloutInput::query}, {"context", RolloutInput::context}};
const std::map<std::string, Ablation> kAblations{{"none", Ablation::none},
                                                 {"no_hyper", Ablation::no_hyper},
                                                 {"no_rollout", Ablation::no_rollout},
                                                 {"no_adversarial", Ablation::no_adversarial}};

struct Entry {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define TG_INT(name, field)                                                                              \
  Entry {                                                                                                \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_number<int>(name, v, "an integer"); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                                \
  }
#define TG_SIZE(name, field)                                                                      \
  Entry {                                                                                         \
    name,                                                                                         \
        [](ExperimentConfig& c, const std::string& v) {                                           \
          c.field = parse_number<std::size_t>(name, v, "a non-negative integer");                 \
        },                                                                                        \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                         \
  }
#define TG_REAL(name, field)                                                                    \
  Entry {                                                                                       \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_real(name, v); },    \
        [](const ExperimentConfig& c) { return format_double_exact(c.field); }                  \
  }
#define TG_BOOL(name, field)                                                                    \
  Entry {                                                                                       \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(name, v); },    \
        [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }       \
  }
#define TG_ENUM(name, field, table)                                                                  \
  Entry {                                                                                            \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_enum(name, v, table); },  \
        [](const ExperimentConfig& c) { return enum_name(c.field, table); }                          \
  }
#define TG_PATH(name, field)                                                              \
  Entry {                                                                                 \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = v; },                \
        [](const ExperimentConfig& c) { return c.field.string(); }                        \
  }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      Entry{"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v, "a non-negative integer"); },
            [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      TG_PATH("work_dir", work_dir),
      TG_PATH("concepts_file", concepts_file),
      TG_PATH("edges_file", edges_file),
      TG_INT("branching", branching),
      TG_INT("depth", depth),
      TG_INT("modifier_vocab_size", modifier_vocab_size),
      TG_REAL("mask_fraction", mask_fraction),
      TG_REAL("noise_ratio", noise_ratio),
      TG_ENUM("noise_kind", noise_kind, kNoiseKinds),
      TG_ENUM("train_noise_kind", train_noise_kind, kNoiseKinds),
      TG_INT("gen_width", gen_width),
      TG_INT("gen_blocks", gen_blocks),
      TG_INT("gen_heads", gen_heads),
      TG_INT("gen_context", gen_context),
      TG_BOOL("gen_feed_forward", gen_feed_forward),
      TG_INT("gen_ff_width", gen_ff_width),
      TG_INT("rollout_embed", rollout_embed),
      TG_INT("rollout_hidden", rollout_hidden),
      TG_INT("hyper_dim", hyper_dim),
      TG_ENUM("hyper_combine", hyper_combine, kCombine),
      TG_REAL("init_range", init_range),
      TG_SIZE("n_rollouts", trainer.n_rollouts),
      TG_SIZE("g_steps", trainer.g_steps),
      TG_SIZE("d_steps", trainer.d_steps),
      TG_SIZE("adversarial_epochs", trainer.adversarial_epochs),
      TG_SIZE("batch_size", trainer.batch_size),
      TG_SIZE("negative_sample_size", trainer.negative_sample_size),
      TG_REAL("noise_mix_ratio", trainer.noise_mix_ratio),
      TG_SIZE("patience", trainer.patience),
      TG_SIZE("pretrain_epochs", trainer.pretrain_epochs),
      TG_SIZE("pretrain_generator_steps", trainer.pretrain_generator_steps),
      TG_SIZE("pretrain_disc_rounds", trainer.pretrain_disc_rounds),
      TG_REAL("negative_triple_fraction", trainer.negative_triple_fraction),
      TG_REAL("generator_lr", trainer.generator_lr),
      TG_REAL("policy_lr", trainer.policy_lr),
      TG_REAL("disc_lr", trainer.disc_lr),
      TG_REAL("clip_norm", trainer.clip_norm),
      TG_REAL("accept_threshold", trainer.accept_threshold),
      TG_ENUM("reward_baseline", trainer.reward_baseline, kBaselines),
      TG_ENUM("rollout_policy", trainer.rollout_policy, kPolicies),
      TG_ENUM("rollout_input", trainer.rollout_input, kInputs),
      TG_BOOL("q_literal", trainer.q_literal),
      TG_ENUM("ablation", trainer.ablation, kAblations),
      Entry{"max_len", [](ExperimentConfig& c, const std::string& v) { c.trainer.sampling.max_len = parse_number<int>("max_len", v, "an integer"); },
            [](const ExperimentConfig& c) { return std::to_string(c.trainer.sampling.max_len); }},
      Entry{"temperature", [](ExperimentConfig& c, const std::string& v) { c.trainer.sampling.temperature = parse_real("temperature", v); },
            [](const ExperimentConfig& c) { return format_double_exact(c.trainer.sampling.temperature); }},
      TG_SIZE("threads", trainer.threads),
      TG_SIZE("k", k),
      Entry{"gamma",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "auto") {
                c.gamma.reset();
              } else {
                c.gamma = parse_real("gamma", v);
              }
            },
            [](const ExperimentConfig& c) { return c.gamma ? format_double_exact(*c.gamma) : std::string("auto"); }},
      TG_SIZE("augment_samples", augment_samples),
      TG_SIZE("generate_count", generate_count),
      TG_BOOL("record_wall_time", record_wall_time),
  };
  return entries;
}

#undef TG_INT
#undef TG_SIZE
#undef TG_REAL
#undef TG_BOOL
#undef TG_ENUM
#undef TG_PATH

const Entry& entry(const std::string& key) {
  for (const Entry& e : registry()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const Entry& e : registry()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  entry(key).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, const std::string& key) { return entry(key).get(config); }

void validate(const ExperimentConfig& c) {
  check(c.branching >= 1, "branching must be >= 1");
  check(c.depth >= 1, "depth must be >= 1");
  check(c.modifier_vocab_size >= c.branching, "modifier_vocab_size must be >= branching");
  // Validation and test leaves are disjoint draws from one leaf set.
  check(c.mask_fraction >= 0.0 && c.mask_fraction <= 0.5, "mask_fraction must lie in [0, 0.5]");
  check(c.noise_ratio >= 0.0, "noise_ratio must be >= 0");
  check(c.gen_width >= 1 && c.gen_heads >= 1 && c.gen_width % c.gen_heads == 0,
        "gen_width must be a positive multiple of gen_heads");
  check(c.gen_blocks >= 1, "gen_blocks must be >= 1");
  check(c.gen_context >= 4, "gen_context must be >= 4");
  check(c.gen_ff_width >= 1, "gen_ff_width must be >= 1");
  check(c.rollout_embed >= 1 && c.rollout_hidden >= 1 && c.hyper_dim >= 1, "discriminator widths must be >= 1");
  check(c.init_range > 0.0, "init_range must be positive");
  check(c.k >= 1, "k must be >= 1");
  check(!c.gamma || (*c.gamma >= 0.0 && *c.gamma <= 1.0), "gamma must be auto or lie in [0, 1]");
  check(!c.work_dir.empty(), "work_dir must be set");
  check(c.concepts_file.empty() == c.edges_file.empty(), "concepts_file and edges_file must be set together");
  try {
    validate(c.trainer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  // s_0 plus the longest generated query has to fit the generator window.
  check(c.depth + 3 + c.trainer.sampling.max_len <= c.gen_context + 1 || !c.concepts_file.empty(),
        "gen_context too small for the synthetic depth plus max_len");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path.string());
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
  for (const std::string& raw : overrides) {
    if (raw.rfind("--", 0) != 0 || raw.find('=') == std::string::npos) {
      throw ConfigError("override '" + raw + "' is not of the form --key=value");
    }
    const auto eq = raw.find('=');
    set_config_value(config, raw.substr(2, eq - 2), raw.substr(eq + 1));
  }
  validate(config);
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const Entry& e : registry()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

GeneratorConfig generator_config(const ExperimentConfig& c, std::size_t vocab_size) {
  GeneratorConfig g;
  g.vocab_size = vocab_size;
  g.width = c.gen_width;
  g.blocks = c.gen_blocks;
  g.heads = c.gen_heads;
  g.context = c.gen_context;
  g.feed_forward = c.gen_feed_forward;
  g.ff_width = c.gen_ff_width;
  g.seed = derive_seed(c.seed, "init/generator");
  g.init_range = c.init_range;
  return g;
}

RolloutDiscConfig rollout_config(const ExperimentConfig& c, std::size_t vocab_size) {
  RolloutDiscConfig r;
  r.vocab_size = vocab_size;
  r.embed = c.rollout_embed;
  r.hidden = c.rollout_hidden;
  r.seed = derive_seed(c.seed, "init/rollout");
  r.init_range = c.init_range;
  return r;
}

HyperDiscConfig hyper_config(const ExperimentConfig& c, std::size_t vocab_size, int max_depth) {
  HyperDiscConfig h;
  h.vocab_size = vocab_size;
  h.dim = c.hyper_dim;
  h.max_depth = max_depth;
  h.combine = c.hyper_combine;
  h.seed = derive_seed(c.seed, "init/hyper");
  h.init_range = c.init_range;
  return h;
}

}  // namespace taxogate
