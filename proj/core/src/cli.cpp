#include "taxogate/cli.hpp"

#include <functional>
#include <ostream>

#include <CLI11.hpp>

#include "taxogate/experiment.hpp"

namespace taxogate {

namespace {

using Stage = std::function<void(const ExperimentConfig&, std::ostream&)>;

struct Subcommand {
  std::string name;
  std::string help;
  Stage run;
};

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> table{
      {"synth-data", "write the synthetic compositional taxonomy", stage_synth_data},
      {"split", "mask leaves and inject noise into validation and test queries", stage_split},
      {"pretrain", "pretrain the generator and both discriminators", stage_pretrain},
      {"adv-train", "run adversarial epochs from the pretrained checkpoints", stage_adv_train},
      {"augment", "generate and filter an augmented triple set", stage_augment},
      {"eval-tee", "evaluate entry decisions against the baselines", stage_eval_tee},
      {"eval-expansion", "run the filtered and unfiltered expansion pipeline", stage_eval_expansion},
      {"pipeline", "run every stage and write metrics.json", stage_pipeline},
      {"generate", "print sampled triples for inspection", stage_generate},
  };
  return table;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : subcommands()) out.push_back(s.name);
    return out;
  }();
  return names;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Taxonomy entry evaluation and expansion experiments", "taxogate"};
  app.require_subcommand(1);
  std::string config_path;
  const Subcommand* chosen = nullptr;
  for (const Subcommand& s : subcommands()) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("config", config_path, "config file of `key = value` lines");
    sub->allow_extras();
    sub->callback([&chosen, &s] { chosen = &s; });
  }

  // CLI11 consumes arguments from the back.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "; subcommands:";
    for (const auto& name : subcommand_names()) err << ' ' << name;
    err << '\n';
    return 2;
  }

  try {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    std::vector<std::string> overrides;
    for (const CLI::App* sub : app.get_subcommands()) {
      for (const std::string& extra : sub->remaining()) overrides.push_back(extra);
    }
    apply_overrides(config, overrides);
    chosen->run(config, out);
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace taxogate
