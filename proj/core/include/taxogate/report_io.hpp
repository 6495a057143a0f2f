#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "taxogate/trainer.hpp"

namespace taxogate {

/// Headline numbers of one run.
struct MetricReport {
  double mr = 0.0;
  double mrr_at_k = 0.0;
  double hit_at_k = 0.0;
  std::size_t k = 10;
  double acc = 0.0;
  double f1 = 0.0;
  double predict_seconds = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Insertion-ordered JSON object. Reals print with exactly six fractional
/// digits, so equal reports always serialize to equal bytes.
class JsonObject {
 public:
  JsonObject& add(const std::string& key, double value);
  JsonObject& add(const std::string& key, std::size_t value);
  JsonObject& add(const std::string& key, std::int64_t value);
  JsonObject& add(const std::string& key, bool value);
  JsonObject& add(const std::string& key, const std::string& value);
  JsonObject& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
  JsonObject& add(const std::string& key, JsonObject value);
  /// Shortest round-trip form instead of six digits.
  JsonObject& add_exact(const std::string& key, double value);

  bool empty() const noexcept { return fields_.empty(); }
  /// Multi-line rendering with two-space indentation, no trailing newline.
  std::string render(int indent = 0) const;
  /// Single-line rendering, used for JSON-lines logs.
  std::string render_line() const;

 private:
  struct Raw {
    std::string text;
  };
  using Value = std::variant<Raw, JsonObject>;
  std::vector<std::pair<std::string, Value>> fields_;
};

/// "%.6f"; non-finite values are rejected with std::domain_error.
std::string format_fixed6(double v);

/// The report's keys come first in declaration order, followed by `extra`.
std::string format_metrics(const MetricReport& report, const JsonObject& extra = {});
void write_metrics(const MetricReport& report, const std::filesystem::path& path, const JsonObject& extra = {});
MetricReport parse_metrics(const std::string& text);
MetricReport read_metrics(const std::filesystem::path& path);

JsonObject epoch_record(const EpochReport& r);
EpochReport parse_epoch_record(const std::string& line);

/// One JSON object per line, one line per adversarial epoch. Reals use the
/// round-trip form so the log reads back bit-exactly.
void write_epoch_log(const std::vector<EpochReport>& epochs, const std::filesystem::path& path);
std::vector<EpochReport> read_epoch_log(const std::filesystem::path& path);

/// Writes text exactly, creating parent directories; throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace taxogate
