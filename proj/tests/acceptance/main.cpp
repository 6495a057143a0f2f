// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "criteria.hpp"

namespace fs = std::filesystem;
using taxogate::acceptance::Outcome;

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  const fs::path scratch = fs::temp_directory_path() / ("taxogate_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);

  namespace a = taxogate::acceptance;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", a::metric_oracle_equivalence},
      {"MRR spot values", a::mrr_spot_values},
      {"gradient integrity", a::gradient_integrity},
      {"REINFORCE correctness", a::reinforce_correctness},
      {"action-value contract", a::action_value_contract},
      {"protocol exactness", [&] { return a::protocol_exactness(scratch); }},
      {"end-to-end entry quality", [&] { return a::end_to_end_quality(scratch); }},
      {"ablation ordering", [&] { return a::ablation_ordering(scratch); }},
      {"pipeline efficiency", [&] { return a::pipeline_efficiency(scratch); }},
      {"determinism", [&] { return a::determinism(scratch); }},
      {"augmentation quality", [&] { return a::augmentation_quality(scratch); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %2d  %-26s %s [%.1f s]\n", outcome.passed ? "PASS" : "FAIL", number,
                criteria[i].first.c_str(), outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!outcome.passed) ++failures;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::printf("%d of %zu criteria failed\n", failures, only.empty() ? criteria.size() : only.size());
  return failures == 0 ? 0 : 1;
}
