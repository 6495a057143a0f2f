#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "taxogate/config.hpp"
#include "taxogate/evaluation.hpp"
#include "taxogate/noise.hpp"
#include "taxogate/report_io.hpp"
#include "taxogate/taxonomy.hpp"
#include "taxogate/trainer.hpp"
#include "taxogate/vocab.hpp"

namespace taxogate {

/// Where every stage reads and writes, relative to work_dir.
struct WorkLayout {
  std::filesystem::path root;
  std::filesystem::path concepts, edges;                 // full dataset
  std::filesystem::path train_concepts, train_edges;     // taxonomy after masking
  std::filesystem::path val_queries, test_queries;
  std::filesystem::path pretrained_dir, trained_dir;     // generator/rollout/hyper checkpoints
  std::filesystem::path pretrain_report, epoch_log;
  std::filesystem::path augmented, augment_report;
  std::filesystem::path tee_report, expansion_report;
  std::filesystem::path metrics;
};

WorkLayout work_layout(const ExperimentConfig& config);

/// The train taxonomy, both query splits and the vocabulary they share.
struct LoadedSplit {
  Vocab vocab;
  Taxonomy full;
  BenchmarkSplit split;
};

LoadedSplit load_split(const ExperimentConfig& config);

/// The noise the discriminators train against.
std::unique_ptr<NoiseSource> make_noise(NoiseKind kind, const Taxonomy& t, const Vocab& vocab);

/// Fresh models sized for the vocabulary and the train taxonomy.
ModelSet make_models(const ExperimentConfig& config, std::size_t vocab_size, int max_depth);
void save_models(const ModelSet& models, const std::filesystem::path& dir);
ModelSet load_models(const ExperimentConfig& config, std::size_t vocab_size, int max_depth,
                     const std::filesystem::path& dir);

/// The trainer settings an experiment actually runs with: the seed comes
/// from the top-level seed and the no_adversarial ablation trains no epochs.
TrainerConfig effective_trainer_config(const ExperimentConfig& config);

// One function per CLI subcommand. Each reads its inputs from, and writes
// its outputs to, the work layout; progress text goes to `log`.
void stage_synth_data(const ExperimentConfig& config, std::ostream& log);
void stage_split(const ExperimentConfig& config, std::ostream& log);
void stage_pretrain(const ExperimentConfig& config, std::ostream& log);
void stage_adv_train(const ExperimentConfig& config, std::ostream& log);
void stage_augment(const ExperimentConfig& config, std::ostream& log);
void stage_eval_tee(const ExperimentConfig& config, std::ostream& log);
void stage_eval_expansion(const ExperimentConfig& config, std::ostream& log);
/// Every stage in order, then metrics.json combining their reports.
void stage_pipeline(const ExperimentConfig& config, std::ostream& log);
/// Prints generate_count sampled triples, one per line.
void stage_generate(const ExperimentConfig& config, std::ostream& out);

/// Tab-separated augmented triples: label, anchor id, anchor tokens, query tokens.
void write_triples(const std::filesystem::path& path, const std::vector<TrainingTriple>& triples, const Vocab& vocab);

}  // namespace taxogate
