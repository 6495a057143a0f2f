#include "taxogate/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace taxogate {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : s) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw CheckpointError("checkpoint: cannot parse " + what + " '" + s + "'");
  }
  return value;
}

}  // namespace

std::string format_double_exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_checkpoint(const ParamStore& store) {
  std::ostringstream os;
  os << "#checkpoint v1 seed=" << store.seed() << " init=uniform:" << format_double_exact(store.init().range)
     << '\n';
  for (const auto& [name, t] : store.tensors()) {
    os << name << '\t';
    for (std::size_t i = 0; i < t.shape.size(); ++i) os << (i ? "," : "") << t.shape[i];
    os << '\t';
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << format_double_exact(t.values[i]);
    os << '\n';
  }
  return os.str();
}

ParamStore parse_checkpoint(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("#checkpoint v1 ", 0) != 0) {
    throw CheckpointError("checkpoint: missing or unsupported version header");
  }
  std::uint64_t seed = 0;
  InitSpec init;
  for (const std::string& field : split(line.substr(15), ' ')) {
    if (field.rfind("seed=", 0) == 0) seed = parse_number<std::uint64_t>(field.substr(5), "seed");
    else if (field.rfind("init=uniform:", 0) == 0) init.range = parse_number<double>(field.substr(13), "init range");
  }
  ParamStore store(seed, init);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw CheckpointError("checkpoint line " + std::to_string(line_no) + ": expected 3 fields");
    }
    std::vector<std::size_t> shape;
    for (const std::string& d : split(fields[1], ',')) shape.push_back(parse_number<std::size_t>(d, "shape"));
    ParamTensor& t = store.add_zeros(fields[0], shape);
    const auto values = fields[2].empty() ? std::vector<std::string>{} : split(fields[2], ' ');
    if (values.size() != t.size()) {
      throw CheckpointError("checkpoint line " + std::to_string(line_no) + ": tensor " + fields[0] +
                            " has " + std::to_string(values.size()) + " values, shape needs " +
                            std::to_string(t.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) t.values[i] = parse_number<double>(values[i], "value");
  }
  return store;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << format_checkpoint(store);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

void load_checkpoint_into(ParamStore& store, const std::filesystem::path& path) {
  ParamStore loaded = load_checkpoint(path);
  if (loaded.tensors().size() != store.tensors().size()) {
    throw CheckpointError("checkpoint " + path.string() + " has a different tensor set");
  }
  for (auto& [name, t] : store.tensors()) {
    if (!loaded.contains(name)) throw CheckpointError("checkpoint lacks tensor " + name);
    const ParamTensor& src = loaded.at(name);
    if (src.shape != t.shape) throw CheckpointError("checkpoint tensor " + name + " has a different shape");
    t.values = src.values;
  }
}

}  // namespace taxogate
