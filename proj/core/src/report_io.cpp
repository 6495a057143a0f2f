#include "taxogate/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "taxogate/checkpoint.hpp"
#include "taxogate/dataset.hpp"

namespace taxogate {

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", static_cast<unsigned>(static_cast<unsigned char>(ch)));
          out += buf;
        } else {
          out.push_back(ch);
        }
    }
  }
  return out + "\"";
}

void require_finite(double v) {
  if (!std::isfinite(v)) throw std::domain_error("cannot serialize a non-finite real");
}

double as_real(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw ParseError("<metrics>", 0, std::string("missing numeric key ") + key);
  return it->get<double>();
}

std::size_t as_count(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned()) {
    throw ParseError("<metrics>", 0, std::string("missing count key ") + key);
  }
  return it->get<std::size_t>();
}

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(origin, 0, e.what());
  }
}

}  // namespace

std::string format_fixed6(double v) {
  require_finite(v);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

JsonObject& JsonObject::add(const std::string& key, double value) {
  fields_.emplace_back(key, Raw{format_fixed6(value)});
  return *this;
}

JsonObject& JsonObject::add_exact(const std::string& key, double value) {
  require_finite(value);
  fields_.emplace_back(key, Raw{format_double_exact(value)});
  return *this;
}

JsonObject& JsonObject::add(const std::string& key, std::size_t value) {
  fields_.emplace_back(key, Raw{std::to_string(value)});
  return *this;
}

JsonObject& JsonObject::add(const std::string& key, std::int64_t value) {
  fields_.emplace_back(key, Raw{std::to_string(value)});
  return *this;
}

JsonObject& JsonObject::add(const std::string& key, bool value) {
  fields_.emplace_back(key, Raw{value ? "true" : "false"});
  return *this;
}

JsonObject& JsonObject::add(const std::string& key, const std::string& value) {
  fields_.emplace_back(key, Raw{quote(value)});
  return *this;
}

JsonObject& JsonObject::add(const std::string& key, JsonObject value) {
  fields_.emplace_back(key, std::move(value));
  return *this;
}

std::string JsonObject::render(int indent) const {
  if (fields_.empty()) return "{}";
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' ');
  std::string out = "{\n";
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto& [key, value] = fields_[i];
    out += pad + quote(key) + ": ";
    if (const auto* raw = std::get_if<Raw>(&value)) {
      out += raw->text;
    } else {
      out += std::get<JsonObject>(value).render(indent + 2);
    }
    out += i + 1 < fields_.size() ? ",\n" : "\n";
  }
  return out + std::string(static_cast<std::size_t>(indent), ' ') + "}";
}

std::string JsonObject::render_line() const {
  std::string out = "{";
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const auto& [key, value] = fields_[i];
    out += (i ? ", " : "") + quote(key) + ": ";
    if (const auto* raw = std::get_if<Raw>(&value)) {
      out += raw->text;
    } else {
      out += std::get<JsonObject>(value).render_line();
    }
  }
  return out + "}";
}

std::string format_metrics(const MetricReport& r, const JsonObject& extra) {
  JsonObject o;
  o.add("mr", r.mr)
      .add("mrr_at_k", r.mrr_at_k)
      .add("hit_at_k", r.hit_at_k)
      .add("k", r.k)
      .add("acc", r.acc)
      .add("f1", r.f1)
      .add("predict_seconds", r.predict_seconds);
  if (!extra.empty()) o.add("details", extra);
  return o.render() + "\n";
}

void write_metrics(const MetricReport& report, const std::filesystem::path& path, const JsonObject& extra) {
  write_text_file(path, format_metrics(report, extra));
}

MetricReport parse_metrics(const std::string& text) {
  const nlohmann::json j = parse_json(text, "<metrics>");
  MetricReport r;
  r.mr = as_real(j, "mr");
  r.mrr_at_k = as_real(j, "mrr_at_k");
  r.hit_at_k = as_real(j, "hit_at_k");
  r.k = as_count(j, "k");
  r.acc = as_real(j, "acc");
  r.f1 = as_real(j, "f1");
  r.predict_seconds = as_real(j, "predict_seconds");
  return r;
}

MetricReport read_metrics(const std::filesystem::path& path) { return parse_metrics(read_text_file(path)); }

JsonObject epoch_record(const EpochReport& r) {
  JsonObject o;
  o.add("epoch", r.epoch)
      .add_exact("mean_reward", r.mean_reward)
      .add_exact("rollout_loss", r.rollout_loss)
      .add_exact("hyper_loss", r.hyper_loss)
      .add("accepted_generated", r.accepted_generated)
      .add_exact("wall_seconds", r.wall_seconds);
  return o;
}

EpochReport parse_epoch_record(const std::string& line) {
  const nlohmann::json j = parse_json(line, "<epoch log>");
  EpochReport r;
  r.epoch = as_count(j, "epoch");
  r.mean_reward = as_real(j, "mean_reward");
  r.rollout_loss = as_real(j, "rollout_loss");
  r.hyper_loss = as_real(j, "hyper_loss");
  r.accepted_generated = as_count(j, "accepted_generated");
  r.wall_seconds = as_real(j, "wall_seconds");
  return r;
}

void write_epoch_log(const std::vector<EpochReport>& epochs, const std::filesystem::path& path) {
  std::string text;
  for (const EpochReport& e : epochs) text += epoch_record(e).render_line() + "\n";
  write_text_file(path, text);
}

std::vector<EpochReport> read_epoch_log(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<EpochReport> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(parse_epoch_record(line));
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace taxogate
