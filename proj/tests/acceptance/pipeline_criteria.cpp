#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "criteria.hpp"
#include "taxogate/cli.hpp"
#include "taxogate/report_io.hpp"

namespace taxogate::acceptance {

namespace {

using nlohmann::json;

struct Run {
  std::filesystem::path dir;
  double seconds = 0.0;
  json metrics;
};

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Runs `pipeline` into scratch/name, once per process per name.
const Run& pipeline_run(const std::filesystem::path& scratch, const std::string& name,
                        const std::vector<std::string>& overrides) {
  static std::map<std::string, Run> cache;
  const std::string key = (scratch / name).string();
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  Run run;
  run.dir = scratch / name;
  std::filesystem::remove_all(run.dir);
  std::vector<std::string> args{"pipeline", "--work_dir=" + run.dir.string()};
  args.insert(args.end(), overrides.begin(), overrides.end());
  std::ostringstream log, err;
  const auto start = std::chrono::steady_clock::now();
  if (run_command(args, log, err) != 0) throw std::runtime_error("pipeline " + name + " failed: " + err.str());
  run.seconds = elapsed_since(start);
  run.metrics = json::parse(read_text_file(run.dir / "metrics.json"));
  return cache.emplace(key, std::move(run)).first->second;
}

std::string seed_flag(int seed) { return "--seed=" + std::to_string(seed); }

const Run& ablation_run(const std::filesystem::path& scratch, const std::string& ablation, int seed) {
  return pipeline_run(scratch, ablation + "_s" + std::to_string(seed), {seed_flag(seed), "--ablation=" + ablation});
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double system_f1(const Run& r) { return r.metrics.at("f1").get<double>(); }

double baseline_f1(const Run& r, const std::string& name) {
  return r.metrics.at("details").at("tee").at("baselines").at(name).at("f1").get<double>();
}

}  // namespace

Outcome end_to_end_quality(const std::filesystem::path& scratch) {
  const std::vector<std::string> baselines{"random", "closest_position", "closest_neighbor"};
  std::map<std::string, std::vector<double>> margins;
  double seconds = 0.0;
  bool enough_epochs = true;
  std::vector<double> f1s;
  for (int seed = 1; seed <= 3; ++seed) {
    const Run& r = ablation_run(scratch, "none", seed);
    seconds += r.seconds;
    enough_epochs = enough_epochs && r.metrics.at("details").at("adversarial_epochs_run").get<int>() >= 2;
    f1s.push_back(system_f1(r));
    for (const auto& b : baselines) margins[b].push_back(system_f1(r) - baseline_f1(r, b));
  }
  bool ok = enough_epochs && seconds < 15 * 60;
  std::ostringstream detail;
  detail << fmt("median F1 %.3f; median margin", median(f1s));
  for (const auto& b : baselines) {
    const double m = median(margins[b]);
    ok = ok && m >= 0.15;
    detail << " " << b << fmt(" %+.3f", m);
  }
  detail << fmt("; %.0f s", seconds) << (enough_epochs ? "" : "; fewer than 2 adversarial epochs");
  return {ok, detail.str()};
}

Outcome ablation_ordering(const std::filesystem::path& scratch) {
  const std::vector<std::string> arms{"none", "no_rollout", "no_hyper", "no_adversarial"};
  std::map<std::string, double> med;
  double seconds = 0.0;
  for (const auto& arm : arms) {
    std::vector<double> f1;
    for (int seed = 1; seed <= 5; ++seed) {
      const Run& r = ablation_run(scratch, arm, seed);
      seconds += r.seconds;
      f1.push_back(system_f1(r));
    }
    med[arm] = median(f1);
  }
  const bool ordered = med["none"] >= med["no_rollout"] && med["no_rollout"] >= med["no_adversarial"] &&
                       med["none"] >= med["no_hyper"] && med["no_hyper"] >= med["no_adversarial"];
  std::ostringstream detail;
  detail << fmt("median F1 full %.3f, w/o rd %.3f, w/o hd %.3f", med["none"], med["no_rollout"], med["no_hyper"])
         << fmt(", w/o D_phi %.3f; %.0f s", med["no_adversarial"], seconds);
  return {ordered && seconds < 45 * 60, detail.str()};
}

Outcome pipeline_efficiency(const std::filesystem::path& scratch) {
  const Run& r = pipeline_run(scratch, "efficiency", {"--seed=1", "--noise_ratio=1.0", "--record_wall_time=true"});
  const json& ex = r.metrics.at("details").at("expansion");
  const json& p2 = ex.at("phase2");
  const double noise_recall = ex.at("tee").at("noise_recall").get<double>();
  const double inv_f = p2.at("invocations_filtered").get<double>();
  const double inv_u = p2.at("invocations_unfiltered").get<double>();
  const double sec_f = p2.at("seconds_filtered").get<double>();
  const double sec_u = p2.at("seconds_unfiltered").get<double>();
  const double inv_drop = 1.0 - inv_f / inv_u;
  const double time_drop = sec_u > 0 ? 1.0 - sec_f / sec_u : 0.0;
  const bool ok = noise_recall >= 0.8 && inv_drop >= 0.4 && time_drop >= 0.3 && r.seconds < 5 * 60;
  return {ok, fmt("noise recall %.3f; invocations -%.1f%%; phase-2 time -%.1f%%", noise_recall, 100 * inv_drop,
                  100 * time_drop) +
                  fmt(" (%.3f s vs %.3f s)", sec_f, sec_u)};
}

Outcome determinism(const std::filesystem::path& scratch) {
  const Run& a = ablation_run(scratch, "none", 1);
  const Run& b = pipeline_run(scratch, "none_s1_repeat", {seed_flag(1), "--ablation=none"});
  bool ok = true;
  std::string detail;
  for (const char* file : {"metrics.json", "epochs.jsonl"}) {
    const bool same = read_text_file(a.dir / file) == read_text_file(b.dir / file);
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : "; ") + file + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

Outcome augmentation_quality(const std::filesystem::path& scratch) {
  const Run& r = ablation_run(scratch, "none", 1);
  std::ostringstream log, err;
  const auto start = std::chrono::steady_clock::now();
  if (run_command({"augment", "--work_dir=" + r.dir.string(), "--seed=1", "--accept_threshold=0.7"}, log, err) != 0) {
    return {false, "augment failed: " + err.str()};
  }
  const double seconds = elapsed_since(start);

  // String oracle over the written file: the query's words are the anchor's
  // words followed by exactly one word the anchor lacks.
  std::ifstream in(r.dir / "augmented.tsv");
  std::string line;
  std::size_t positive = 0, compositional = 0, total = 0;
  auto words = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string w; is >> w;) out.push_back(w);
    return out;
  };
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::size_t from = 0;
    for (std::size_t tab; (tab = line.find('\t', from)) != std::string::npos; from = tab + 1) {
      fields.push_back(line.substr(from, tab - from));
    }
    fields.push_back(line.substr(from));
    if (fields.size() != 4) return {false, "malformed augmented line: " + line};
    ++total;
    if (fields[0] != "positive") continue;
    ++positive;
    const auto anchor = words(fields[2]);
    const auto query = words(fields[3]);
    if (query.size() == anchor.size() + 1 && std::equal(anchor.begin(), anchor.end(), query.begin()) &&
        std::find(anchor.begin(), anchor.end(), query.back()) == anchor.end()) {
      ++compositional;
    }
  }
  const double share = positive ? static_cast<double>(compositional) / static_cast<double>(positive) : 0.0;
  const bool ok = positive >= 1 && share >= 0.5 && seconds < 120;
  return {ok, std::to_string(compositional) + "/" + std::to_string(positive) + " positive triples compositional" +
                  fmt(" (%.1f%%) of %.0f kept; %.1f s", 100 * share, static_cast<double>(total), seconds)};
}

}  // namespace taxogate::acceptance
