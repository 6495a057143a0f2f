#include "taxogate/experiment.hpp"

#include <algorithm>
#include <ostream>

#include "taxogate/checkpoint.hpp"
#include "taxogate/dataset.hpp"
#include "taxogate/metrics.hpp"

namespace taxogate {

WorkLayout work_layout(const ExperimentConfig& c) {
  WorkLayout l;
  l.root = c.work_dir;
  l.concepts = c.concepts_file.empty() ? l.root / "data" / "concepts.tsv" : c.concepts_file;
  l.edges = c.edges_file.empty() ? l.root / "data" / "edges.tsv" : c.edges_file;
  l.train_concepts = l.root / "split" / "train_concepts.tsv";
  l.train_edges = l.root / "split" / "train_edges.tsv";
  l.val_queries = l.root / "split" / "val_queries.tsv";
  l.test_queries = l.root / "split" / "test_queries.tsv";
  l.pretrained_dir = l.root / "checkpoints" / "pretrained";
  l.trained_dir = l.root / "checkpoints" / "trained";
  l.pretrain_report = l.root / "pretrain.json";
  l.epoch_log = l.root / "epochs.jsonl";
  l.augmented = l.root / "augmented.tsv";
  l.augment_report = l.root / "augment.json";
  l.tee_report = l.root / "tee.json";
  l.expansion_report = l.root / "expansion.json";
  l.metrics = l.root / "metrics.json";
  return l;
}

LoadedSplit load_split(const ExperimentConfig& c) {
  const WorkLayout l = work_layout(c);
  ParsedTaxonomy full = parse_taxonomy_files(l.concepts, l.edges);
  LoadedSplit out{std::move(full.vocab), std::move(full.taxonomy), {}};
  out.split.train_taxonomy =
      assemble_taxonomy(read_concepts(l.train_concepts), read_edges(l.train_edges), out.vocab);
  out.split.val_queries = encode_queries(read_queries(l.val_queries), out.vocab);
  out.split.test_queries = encode_queries(read_queries(l.test_queries), out.vocab);
  out.split.seed = c.seed;
  return out;
}

std::unique_ptr<NoiseSource> make_noise(NoiseKind kind, const Taxonomy& t, const Vocab& vocab) {
  if (kind == NoiseKind::shuffled) {
    std::vector<TokenSeq> real;
    real.reserve(t.size());
    for (const Concept& concept_entry : t.concepts()) real.push_back(concept_entry.tokens);
    return std::make_unique<ShuffledConceptNoise>(real);
  }
  std::size_t longest = 1;
  for (const Concept& concept_entry : t.concepts()) longest = std::max(longest, concept_entry.tokens.size());
  return std::make_unique<UniformNoise>(tokens::kFirstSurfaceToken, static_cast<TokenId>(vocab.size()), 1, longest);
}

ModelSet make_models(const ExperimentConfig& c, std::size_t vocab_size, int max_depth) {
  return {Generator(generator_config(c, vocab_size)), RolloutDisc(rollout_config(c, vocab_size)),
          HyperDisc(hyper_config(c, vocab_size, max_depth))};
}

void save_models(const ModelSet& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(m.generator.params(), dir / "generator.ckpt");
  save_checkpoint(m.rollout.params(), dir / "rollout.ckpt");
  save_checkpoint(m.hyper.params(), dir / "hyper.ckpt");
}

ModelSet load_models(const ExperimentConfig& c, std::size_t vocab_size, int max_depth,
                     const std::filesystem::path& dir) {
  return {Generator(generator_config(c, vocab_size), load_checkpoint(dir / "generator.ckpt")),
          RolloutDisc(rollout_config(c, vocab_size), load_checkpoint(dir / "rollout.ckpt")),
          HyperDisc(hyper_config(c, vocab_size, max_depth), load_checkpoint(dir / "hyper.ckpt"))};
}

TrainerConfig effective_trainer_config(const ExperimentConfig& c) {
  TrainerConfig t = c.trainer;
  t.seed = derive_seed(c.seed, "trainer");
  return t;
}

void write_triples(const std::filesystem::path& path, const std::vector<TrainingTriple>& triples,
                   const Vocab& vocab) {
  std::string text;
  for (const TrainingTriple& tr : triples) {
    text += std::string(label_name(tr.label)) + '\t' + std::to_string(tr.anchor_id) + '\t' + vocab.decode(tr.anchor) +
            '\t' + vocab.decode(tr.query) + '\n';
  }
  write_text_file(path, text);
}

namespace {

JsonObject tee_json(const TeeMetrics& m) {
  JsonObject o;
  o.add("acc", m.acc).add("f1", m.f1).add("precision", m.precision).add("recall", m.recall);
  o.add("noise_recall", m.noise_recall);
  return o;
}

JsonObject tee_json(const TeeResult& r) {
  JsonObject o = tee_json(r.metrics);
  o.add("gamma", r.gamma);
  return o;
}

/// Everything the evaluation stages need, loaded once.
struct TrainedRun {
  LoadedSplit data;
  TrainerConfig trainer;
  ModelSet models;
  ModelSet pretrained;  // the supervised baseline uses the pretrained hyper discriminator
};

TrainedRun load_trained(const ExperimentConfig& c) {
  const WorkLayout l = work_layout(c);
  LoadedSplit data = load_split(c);
  const std::size_t v = data.vocab.size();
  const int depth = data.split.train_taxonomy.max_depth();
  ModelSet trained = load_models(c, v, depth, l.trained_dir);
  ModelSet pre = load_models(c, v, depth, l.pretrained_dir);
  return {std::move(data), effective_trainer_config(c), std::move(trained), std::move(pre)};
}

using Confidence = std::function<double(const TokenSeq&)>;

/// Tuned or fixed gamma, depending on the config.
TeeResult run_tee(const ExperimentConfig& c, const BenchmarkSplit& s, const Confidence& conf) {
  if (!c.gamma) return evaluate_tee(s.val_queries, s.test_queries, conf);
  TeeResult r;
  r.gamma = *c.gamma;
  for (const auto& q : s.test_queries) r.confidences.push_back(conf(q.query.tokens));
  r.decisions = tee_decisions(r.confidences, r.gamma);
  r.metrics = tee_metrics(r.decisions, noise_flags(s.test_queries));
  return r;
}

ConceptEmbeddings baseline_embeddings(const TrainedRun& run) {
  const HyperDisc& h = run.models.hyper;
  return embed_concepts(run.data.split.train_taxonomy, [&h](const TokenSeq& q) { return h.mean_token_embedding(q); });
}

using Ranker = std::function<RankedCandidates(const QueryRecord&)>;

/// A ranking baseline accepts a query by how well its best anchor scores.
Confidence top_score_confidence(const Ranker& rank) {
  return [rank](const TokenSeq& q) {
    const RankedCandidates r = rank(QueryRecord{{0, q}, {}, true});
    return r.scores.empty() ? 0.0 : r.scores.front();
  };
}

JsonObject ranking_json(const std::vector<RankedCandidates>& ranked, std::size_t k) {
  JsonObject o;
  if (ranked.empty()) return o.add("queries", std::size_t{0});
  o.add("queries", ranked.size())
      .add("mr", mean_rank(ranked))
      .add("mrr_at_k", mrr_at_k(ranked, k))
      .add("mrr", mrr(ranked))
      .add("hit_at_k", hit_at_k(ranked, k));
  return o;
}

struct Baselines {
  Ranker closest_position, closest_neighbor, supervised;
};

Baselines make_baselines(const TrainedRun& run, std::shared_ptr<const ConceptEmbeddings> emb) {
  const Taxonomy* t = &run.data.split.train_taxonomy;
  const HyperDisc* h = &run.models.hyper;
  const HyperDisc* sup = &run.pretrained.hyper;
  Baselines b;
  b.closest_position = [t, h, emb](const QueryRecord& q) {
    return baseline_closest_position(q, h->mean_token_embedding(q.query.tokens), *t, *emb);
  };
  b.closest_neighbor = [t, h, emb](const QueryRecord& q) {
    return baseline_closest_neighbor(q, h->mean_token_embedding(q.query.tokens), *t, *emb);
  };
  const PairScorer sup_scorer = hyper_pair_scorer(*sup, *t);
  b.supervised = [t, sup_scorer](const QueryRecord& q) { return rank_parents(q, *t, sup_scorer); };
  return b;
}

JsonObject eval_tee_impl(const ExperimentConfig& c, std::ostream& log) {
  const TrainedRun run = load_trained(c);
  const BenchmarkSplit& s = run.data.split;
  const Taxonomy& t = s.train_taxonomy;

  const TeeResult system = run_tee(c, s, system_confidence(run.models, t, run.trainer));
  log << "tee: gamma=" << format_fixed6(system.gamma) << " acc=" << format_fixed6(system.metrics.acc)
      << " f1=" << format_fixed6(system.metrics.f1) << " noise_recall=" << format_fixed6(system.metrics.noise_recall)
      << '\n';

  const auto random_decisions = baseline_random(s.test_queries.size(), derive_seed(c.seed, "baselines"));
  const TeeMetrics random = tee_metrics(random_decisions, noise_flags(s.test_queries));

  const auto emb = std::make_shared<const ConceptEmbeddings>(baseline_embeddings(run));
  const Baselines b = make_baselines(run, emb);
  const TeeResult position = run_tee(c, s, top_score_confidence(b.closest_position));
  const TeeResult neighbor = run_tee(c, s, top_score_confidence(b.closest_neighbor));
  const HyperDisc* sup = &run.pretrained.hyper;
  const TeeResult supervised = run_tee(c, s, [sup, &t](const TokenSeq& q) {
    return q.empty() ? 0.0 : hyper_score(Label::positive, t.root(), q, t, *sup);
  });

  JsonObject baselines;
  baselines.add("random", tee_json(random))
      .add("closest_position", tee_json(position))
      .add("closest_neighbor", tee_json(neighbor))
      .add("supervised", tee_json(supervised));
  JsonObject o;
  o.add("ablation", std::string(ablation_name(run.trainer.ablation)))
      .add("test_queries", s.test_queries.size())
      .add("system", tee_json(system))
      .add("baselines", std::move(baselines));
  write_text_file(work_layout(c).tee_report, o.render() + "\n");
  return o;
}

struct ExpansionOutcome {
  JsonObject json;
  PipelineReport report;
};

ExpansionOutcome eval_expansion_impl(const ExperimentConfig& c, std::ostream& log) {
  const TrainedRun run = load_trained(c);
  const BenchmarkSplit& s = run.data.split;
  const Taxonomy& t = s.train_taxonomy;
  const TeeResult tee = run_tee(c, s, system_confidence(run.models, t, run.trainer));
  PipelineReport p =
      pipeline_expand(s.test_queries, tee.confidences, tee.gamma, t, hyper_pair_scorer(run.models.hyper, t), c.k);
  if (!c.record_wall_time) {
    p.seconds_filtered = 0.0;
    p.seconds_unfiltered = 0.0;
  }
  log << "expansion: surviving=" << p.surviving << "/" << p.queries << " mr=" << format_fixed6(p.mr)
      << " mrr_at_k=" << format_fixed6(p.mrr_at_k) << " hit_at_k=" << format_fixed6(p.hit_at_k) << '\n';

  const auto emb = std::make_shared<const ConceptEmbeddings>(baseline_embeddings(run));
  const Baselines b = make_baselines(run, emb);
  std::vector<RankedCandidates> pos, nb, sup;
  for (const QueryRecord& q : s.test_queries) {
    if (q.is_noise) continue;
    pos.push_back(b.closest_position(q));
    nb.push_back(b.closest_neighbor(q));
    sup.push_back(b.supervised(q));
  }

  JsonObject filtered;
  filtered.add("queries", p.surviving_clean)
      .add("mr", p.mr)
      .add("mrr_at_k", p.mrr_at_k)
      .add("mrr", p.mrr)
      .add("hit_at_k", p.hit_at_k);
  JsonObject unfiltered;
  unfiltered.add("mr", p.mr_unfiltered).add("mrr_at_k", p.mrr_at_k_unfiltered).add("hit_at_k", p.hit_at_k_unfiltered);
  JsonObject phase2;
  phase2.add("queries", p.queries)
      .add("surviving", p.surviving)
      .add("invocations_filtered", p.invocations_filtered)
      .add("invocations_unfiltered", p.invocations_unfiltered)
      .add("seconds_filtered", p.seconds_filtered)
      .add("seconds_unfiltered", p.seconds_unfiltered);
  JsonObject baselines;
  baselines.add("closest_position", ranking_json(pos, c.k))
      .add("closest_neighbor", ranking_json(nb, c.k))
      .add("supervised", ranking_json(sup, c.k));
  JsonObject o;
  o.add("k", c.k)
      .add("tee", tee_json(p.tee))
      .add("filtered", std::move(filtered))
      .add("unfiltered", std::move(unfiltered))
      .add("phase2", std::move(phase2))
      .add("baselines", std::move(baselines));
  write_text_file(work_layout(c).expansion_report, o.render() + "\n");
  return {std::move(o), p};
}

JsonObject augment_impl(const ExperimentConfig& c, std::ostream& log) {
  const TrainedRun run = load_trained(c);
  const Taxonomy& t = run.data.split.train_taxonomy;
  const auto triples = augment_training_set(run.models.generator, run.models.hyper, t, c.augment_samples,
                                            run.trainer.accept_threshold, derive_seed(c.seed, "augment"),
                                            run.trainer.sampling);
  write_triples(work_layout(c).augmented, triples, run.data.vocab);
  std::size_t positive = 0;
  std::size_t compositional = 0;
  for (const auto& tr : triples) {
    if (tr.label != Label::positive) continue;
    ++positive;
    if (is_compositional_child(tr.anchor, tr.query)) ++compositional;
  }
  log << "augment: kept " << triples.size() << " triples, " << positive << " positive, " << compositional
      << " compositional\n";
  JsonObject o;
  o.add("attempts", c.augment_samples)
      .add("kept", triples.size())
      .add("positive", positive)
      .add("positive_compositional", compositional)
      .add("compositional_share", positive ? static_cast<double>(compositional) / static_cast<double>(positive) : 0.0);
  write_text_file(work_layout(c).augment_report, o.render() + "\n");
  return o;
}

std::vector<EpochReport> adv_train_impl(const ExperimentConfig& c, std::ostream& log) {
  const WorkLayout l = work_layout(c);
  const LoadedSplit data = load_split(c);
  const Taxonomy& t = data.split.train_taxonomy;
  ModelSet models = load_models(c, data.vocab.size(), t.max_depth(), l.pretrained_dir);
  const TrainerConfig tc = effective_trainer_config(c);
  std::vector<EpochReport> epochs;
  if (tc.ablation != Ablation::no_adversarial) {
    const auto noise = make_noise(c.train_noise_kind, t, data.vocab);
    epochs = adversarial_train(models, t, tc, *noise, [&log](const EpochReport& e) {
      log << "adv-train: epoch " << e.epoch << " reward=" << format_fixed6(e.mean_reward)
          << " rollout_loss=" << format_fixed6(e.rollout_loss) << " hyper_loss=" << format_fixed6(e.hyper_loss)
          << '\n';
    });
  } else {
    log << "adv-train: skipped (ablation no_adversarial)\n";
  }
  if (!c.record_wall_time) {
    for (auto& e : epochs) e.wall_seconds = 0.0;
  }
  write_epoch_log(epochs, l.epoch_log);
  save_models(models, l.trained_dir);
  return epochs;
}

}  // namespace

void stage_synth_data(const ExperimentConfig& c, std::ostream& log) {
  if (!c.concepts_file.empty()) throw ConfigError("synth-data writes its own dataset; leave concepts_file unset");
  const WorkLayout l = work_layout(c);
  const SynthResult synth = synth_taxonomy(c.branching, c.depth, c.modifier_vocab_size, derive_seed(c.seed, "synth"));
  write_concepts(l.concepts, synth.taxonomy, synth.vocab);
  write_edges(l.edges, synth.taxonomy);
  log << "synth-data: " << synth.taxonomy.size() << " concepts, " << synth.taxonomy.edges().size() << " edges\n";
}

void stage_split(const ExperimentConfig& c, std::ostream& log) {
  const WorkLayout l = work_layout(c);
  const ParsedTaxonomy full = parse_taxonomy_files(l.concepts, l.edges);
  const auto noise = make_noise(c.noise_kind, full.taxonomy, full.vocab);
  const BenchmarkSplit s =
      make_benchmark_split(full.taxonomy, c.mask_fraction, c.noise_ratio, *noise, derive_seed(c.seed, "split"));
  validate_taxonomy(s.train_taxonomy, full.vocab.size());
  write_concepts(l.train_concepts, s.train_taxonomy, full.vocab);
  write_edges(l.train_edges, s.train_taxonomy);
  write_queries(l.val_queries, s.val_queries, full.vocab);
  write_queries(l.test_queries, s.test_queries, full.vocab);
  const auto count_noise = [](const std::vector<QueryRecord>& qs) {
    return static_cast<std::size_t>(std::count_if(qs.begin(), qs.end(), [](const auto& q) { return q.is_noise; }));
  };
  log << "split: train " << s.train_taxonomy.size() << " concepts; val " << s.val_queries.size() << " queries ("
      << count_noise(s.val_queries) << " noise); test " << s.test_queries.size() << " queries ("
      << count_noise(s.test_queries) << " noise)\n";
}

void stage_pretrain(const ExperimentConfig& c, std::ostream& log) {
  const WorkLayout l = work_layout(c);
  const LoadedSplit data = load_split(c);
  const Taxonomy& t = data.split.train_taxonomy;
  ModelSet models = make_models(c, data.vocab.size(), t.max_depth());
  const auto noise = make_noise(c.train_noise_kind, t, data.vocab);
  const PretrainReport r = pretrain(models, t, effective_trainer_config(c), *noise,
                                    [&log](std::size_t epoch) { log << "pretrain: epoch " << epoch << " done\n"; });
  save_models(models, l.pretrained_dir);
  JsonObject o;
  o.add_exact("generator_nll", r.generator_nll).add_exact("rollout_loss", r.rollout_loss);
  o.add_exact("hyper_loss", r.hyper_loss);
  write_text_file(l.pretrain_report, o.render() + "\n");
  log << "pretrain: generator_nll=" << format_fixed6(r.generator_nll) << " rollout_loss="
      << format_fixed6(r.rollout_loss) << " hyper_loss=" << format_fixed6(r.hyper_loss) << '\n';
}

void stage_adv_train(const ExperimentConfig& c, std::ostream& log) { adv_train_impl(c, log); }
void stage_augment(const ExperimentConfig& c, std::ostream& log) { augment_impl(c, log); }
void stage_eval_tee(const ExperimentConfig& c, std::ostream& log) { eval_tee_impl(c, log); }
void stage_eval_expansion(const ExperimentConfig& c, std::ostream& log) { eval_expansion_impl(c, log); }

void stage_pipeline(const ExperimentConfig& c, std::ostream& log) {
  if (c.concepts_file.empty()) stage_synth_data(c, log);
  stage_split(c, log);
  stage_pretrain(c, log);
  const auto epochs = adv_train_impl(c, log);
  JsonObject augmentation = augment_impl(c, log);
  JsonObject tee = eval_tee_impl(c, log);
  ExpansionOutcome expansion = eval_expansion_impl(c, log);

  const PipelineReport& p = expansion.report;
  MetricReport m;
  m.mr = p.mr;
  m.mrr_at_k = p.mrr_at_k;
  m.hit_at_k = p.hit_at_k;
  m.k = p.k;
  m.acc = p.tee.acc;
  m.f1 = p.tee.f1;
  m.predict_seconds = p.seconds_filtered;

  JsonObject details;
  details.add("seed", static_cast<std::size_t>(c.seed))
      .add("adversarial_epochs_run", epochs.size())
      .add("tee", std::move(tee))
      .add("expansion", std::move(expansion.json))
      .add("augmentation", std::move(augmentation));
  write_metrics(m, work_layout(c).metrics, details);
  log << "pipeline: wrote " << work_layout(c).metrics.string() << '\n';
}

void stage_generate(const ExperimentConfig& c, std::ostream& out) {
  const WorkLayout l = work_layout(c);
  const LoadedSplit data = load_split(c);
  const Taxonomy& t = data.split.train_taxonomy;
  const ModelSet m = load_models(c, data.vocab.size(), t.max_depth(), l.trained_dir);
  const TrainerConfig tc = effective_trainer_config(c);
  CounterRng rng(derive_seed(c.seed, "generate/anchors"));
  for (std::size_t i = 0; i < c.generate_count; ++i) {
    const Label label = i % 2 == 0 ? Label::positive : Label::negative;
    const ConceptId anchor = t.ids()[rng.below(t.size())];
    const GenerationContext ctx = encode_context(label, t.concept_of(anchor).tokens);
    const Trajectory traj = m.generator.sample_query(ctx, tc.sampling, derive_seed(derive_seed(c.seed, "generate"), i), anchor);
    const TokenSeq q = traj.query();
    const double score = q.empty() ? 0.0 : hyper_score(label, anchor, q, t, m.hyper);
    out << label_name(label) << '\t' << data.vocab.decode(t.concept_of(anchor).tokens) << '\t' << data.vocab.decode(q)
        << '\t' << format_fixed6(score) << '\n';
  }
}

}  // namespace taxogate
