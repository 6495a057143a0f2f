#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "taxogate/cli.hpp"
#include "taxogate/config.hpp"
#include "taxogate/dataset.hpp"
#include "taxogate/report_io.hpp"

namespace taxogate {
namespace {

using testing::TempDir;

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

TEST(Parse, MalformedLineNamesFileAndLine) {
  TempDir dir;
  const auto p = dir.path() / "concepts.tsv";
  write(p, "0\tfood\n1\n");
  try {
    read_concepts(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 2u);
    EXPECT_NE(e.reason.find("expected 2 fields"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("concepts.tsv:2"), std::string::npos);
  }
  write(p, "x\tfood\n");
  EXPECT_THROW(read_concepts(p), ParseError);
  write(p, "0\tfood\n0\tdrink\n");
  EXPECT_THROW(read_concepts(p), ParseError);
  EXPECT_THROW(read_concepts(dir.path() / "missing.tsv"), IoError);
}

TEST(Parse, TwoConceptTaxonomy) {
  TempDir dir;
  write(dir.path() / "c.tsv", "0\tfood\n1\tgreen food\n");
  write(dir.path() / "e.tsv", "0\t1\n");
  const ParsedTaxonomy p = parse_taxonomy_files(dir.path() / "c.tsv", dir.path() / "e.tsv");
  EXPECT_EQ(p.taxonomy.size(), 2u);
  EXPECT_EQ(p.taxonomy.root(), 0);
  EXPECT_EQ(p.vocab.surface_size(), 2u);
  EXPECT_EQ(p.vocab.decode(p.taxonomy.concept_of(1).tokens), "green food");
  EXPECT_EQ(p.taxonomy.children(0), (std::vector<ConceptId>{1}));
}

TEST(Parse, QueriesWithGoldAndNoise) {
  TempDir dir;
  write(dir.path() / "q.tsv", "5\tred food\t0,1\n6\tblue\tNOISE\n");
  const auto qs = read_queries(dir.path() / "q.tsv");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].gold_parents, (std::vector<ConceptId>{0, 1}));
  EXPECT_FALSE(qs[0].is_noise);
  EXPECT_TRUE(qs[1].is_noise);
  EXPECT_TRUE(qs[1].gold_parents.empty());
}

TEST(Serialize, RoundTrip) {
  const SynthResult s = synth_taxonomy(2, 3, 4, 1);
  TempDir dir;
  write_concepts(dir.path() / "c.tsv", s.taxonomy, s.vocab);
  write_edges(dir.path() / "e.tsv", s.taxonomy);
  const ParsedTaxonomy back = parse_taxonomy_files(dir.path() / "c.tsv", dir.path() / "e.tsv");
  ASSERT_EQ(back.taxonomy.size(), s.taxonomy.size());
  for (ConceptId id : s.taxonomy.ids()) {
    EXPECT_EQ(back.vocab.decode(back.taxonomy.concept_of(id).tokens), s.vocab.decode(s.taxonomy.concept_of(id).tokens));
    EXPECT_EQ(back.taxonomy.children(id), s.taxonomy.children(id));
  }

  std::vector<QueryRecord> qs{{Concept{40, s.taxonomy.concept_of(3).tokens}, {1}, false},
                              {Concept{41, s.taxonomy.concept_of(0).tokens}, {}, true}};
  write_queries(dir.path() / "q.tsv", qs, s.vocab);
  const auto raw = read_queries(dir.path() / "q.tsv");
  const auto enc = encode_queries(raw, s.vocab);
  ASSERT_EQ(enc.size(), 2u);
  EXPECT_EQ(enc[0].query.tokens, qs[0].query.tokens);
  EXPECT_EQ(enc[0].gold_parents, qs[0].gold_parents);
  EXPECT_TRUE(enc[1].is_noise);
}

TEST(Dataset, InferRootAndVocab) {
  const std::vector<Concept> cs{{0, {7}}, {1, {8}}, {2, {9}}, {3, {10}}};
  // 2 reaches {2, 0, 1}; 3 reaches only itself.
  EXPECT_EQ(infer_root(cs, {{2, 0}, {0, 1}}), 2);
  const Vocab v = build_vocab({{0, {"b", "a"}}}, {{1, {"c"}, {}, true}});
  EXPECT_EQ(v.names().back(), "c");
  EXPECT_EQ(v.id("a"), tokens::kFirstSurfaceToken);
  EXPECT_EQ(v.id("zzz"), tokens::kUnknown);
}

TEST(Dataset, AssembleDropsUnreachable) {
  const Vocab v({"a", "b", "c"});
  const std::vector<RawConcept> raw{{0, {"a"}}, {1, {"a", "b"}}, {2, {"c"}}, {3, {"c", "b"}}};
  const std::vector<Edge> edges{{0, 1}, {2, 3}, {0, 2}};
  EXPECT_EQ(assemble_taxonomy(raw, edges, v).size(), 4u);
  const Taxonomy pruned = assemble_taxonomy(raw, {{0, 1}, {2, 3}}, v);
  EXPECT_EQ(pruned.size(), 2u);
}

TEST(Synth, SizesAndCompositionalNames) {
  const SynthResult a = synth_taxonomy(3, 3, 8, 5);
  EXPECT_EQ(a.taxonomy.size(), 1u + 3u + 9u + 27u);
  const SynthResult chain = synth_taxonomy(1, 4, 2, 5);
  EXPECT_EQ(chain.taxonomy.size(), 5u);
  for (ConceptId id = 1; id < 5; ++id) EXPECT_EQ(chain.taxonomy.children(id - 1), (std::vector<ConceptId>{id}));

  EXPECT_EQ(a.vocab.decode(a.taxonomy.concept_of(0).tokens), "r");
  for (ConceptId id : a.taxonomy.ids()) {
    const auto& kids = a.taxonomy.children(id);
    std::set<TokenId> last;
    for (ConceptId c : kids) {
      const TokenSeq& p = a.taxonomy.concept_of(id).tokens;
      const TokenSeq& q = a.taxonomy.concept_of(c).tokens;
      ASSERT_EQ(q.size(), p.size() + 1);
      EXPECT_TRUE(std::equal(p.begin(), p.end(), q.begin()));
      EXPECT_TRUE(last.insert(q.back()).second) << "siblings share a modifier";
    }
  }
  EXPECT_EQ(synth_taxonomy(3, 3, 8, 5).vocab.names(), a.vocab.names());
  EXPECT_THROW(synth_taxonomy(4, 2, 3, 1), std::invalid_argument);
}

TEST(Config, RoundTripAndErrors) {
  ExperimentConfig c;
  apply_overrides(c, {"--seed=7", "--noise_ratio=0.25", "--ablation=no_hyper", "--gamma=0.4"});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.trainer.ablation, Ablation::no_hyper);
  ASSERT_TRUE(c.gamma.has_value());
  const ExperimentConfig back = parse_config_text(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  for (const auto& key : config_keys()) EXPECT_EQ(get_config_value(back, key), get_config_value(c, key)) << key;

  EXPECT_THROW(apply_overrides(c, {"--no_such_key=1"}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {"--seed=abc"}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {"seed=1"}), ConfigError);
  EXPECT_THROW(parse_config_text("seed 1\n"), ConfigError);
  EXPECT_NO_THROW(parse_config_text("# comment\n\nseed = 3  # trailing\n"));
}

TEST(Config, FileLoad) {
  TempDir dir;
  write(dir.path() / "x.cfg", "branching = 2\ndepth = 3\n");
  const ExperimentConfig c = load_config(dir.path() / "x.cfg");
  EXPECT_EQ(c.branching, 2);
  EXPECT_EQ(c.depth, 3);
  EXPECT_THROW(load_config(dir.path() / "nope.cfg"), std::runtime_error);
}

TEST(Metrics, SixDecimalBytes) {
  MetricReport r;
  r.mr = 3.0;
  r.f1 = 1.0 / 3.0;
  const std::string text = format_metrics(r);
  EXPECT_NE(text.find("\"mr\": 3.000000"), std::string::npos);
  EXPECT_NE(text.find("0.333333"), std::string::npos);
  EXPECT_EQ(text, format_metrics(r));
  EXPECT_EQ(format_fixed6(0.1234567), "0.123457");
  EXPECT_THROW(format_fixed6(std::nan("")), std::domain_error);

  TempDir dir;
  write_metrics(r, dir.path() / "m.json");
  const MetricReport back = read_metrics(dir.path() / "m.json");
  EXPECT_EQ(back.mr, 3.0);
  EXPECT_EQ(back.f1, 0.333333);
  EXPECT_EQ(back.k, r.k);
}

TEST(Metrics, EpochLogIsBitExact) {
  std::vector<EpochReport> epochs(2);
  epochs[0] = {1, 0.1, 1.0 / 3.0, 2.0 / 7.0, 5, 0.0};
  epochs[1] = {2, 0.7, 0.25, 1e-17, 0, 0.0};
  TempDir dir;
  write_epoch_log(epochs, dir.path() / "e.jsonl");
  const auto back = read_epoch_log(dir.path() / "e.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].epoch, epochs[i].epoch);
    EXPECT_EQ(back[i].mean_reward, epochs[i].mean_reward);
    EXPECT_EQ(back[i].rollout_loss, epochs[i].rollout_loss);
    EXPECT_EQ(back[i].hyper_loss, epochs[i].hyper_loss);
    EXPECT_EQ(back[i].accepted_generated, epochs[i].accepted_generated);
  }
}

TEST(Cli, UnknownSubcommandFails) {
  std::ostringstream out, err;
  EXPECT_NE(run_command({"frobnicate"}, out, err), 0);
  EXPECT_FALSE(err.str().empty());
  std::ostringstream out2, err2;
  EXPECT_NE(run_command({}, out2, err2), 0);
  for (const char* name : {"synth-data", "split", "pretrain", "adv-train", "augment", "eval-tee", "eval-expansion", "pipeline"}) {
    EXPECT_NE(std::find(subcommand_names().begin(), subcommand_names().end(), name), subcommand_names().end())
        << name;
  }
}

TEST(Cli, SynthThenSplit) {
  TempDir dir;
  const std::string wd = "--work_dir=" + (dir.path() / "run").string();
  std::ostringstream out, err;
  ASSERT_EQ(run_command({"synth-data", wd}, out, err), 0) << err.str();
  ASSERT_EQ(run_command({"split", wd}, out, err), 0) << err.str();
  const auto val = read_queries(dir.path() / "run" / "split" / "val_queries.tsv");
  std::size_t clean = 0, noise = 0;
  for (const auto& q : val) (q.is_noise ? noise : clean)++;
  EXPECT_EQ(clean, 48u);
  EXPECT_EQ(noise, 28u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "run" / "split" / "train_edges.tsv"));

  // A bad override names the key and fails without touching the split.
  std::ostringstream out2, err2;
  EXPECT_NE(run_command({"split", wd, "--mask_fraction=0.9"}, out2, err2), 0);
  EXPECT_NE(err2.str().find("mask_fraction"), std::string::npos);
}

}  // namespace
}  // namespace taxogate
