#include "mcvqa/config.hpp"

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <class Int>
void read_int(const KeyValueConfig& cfg, const std::string* v, std::string_view key, Int& out) {
  if (!v) return;
  Int parsed{};
  if (!io::parse_int(*v, parsed)) {
    throw ConfigError(cfg.source() + ": key '" + std::string(key) + "' expects a non-negative integer, got '" + *v +
                      "'");
  }
  out = parsed;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string source) {
  KeyValueConfig cfg;
  cfg.source_ = std::move(source);
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": empty key");
    if (!cfg.values_.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const LoadError&) {
    throw ConfigError("cannot open config " + path.string());
  }
  return parse(text, path.string());
}

const std::string* KeyValueConfig::find(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(std::string(key));
  return &it->second;
}

void KeyValueConfig::read(std::string_view key, std::string& out) const {
  if (auto v = find(key)) out = *v;
}

void KeyValueConfig::read(std::string_view key, double& out) const {
  auto v = find(key);
  if (!v) return;
  double parsed = 0.0;
  if (!io::parse_double(*v, parsed)) {
    throw ConfigError(source_ + ": key '" + std::string(key) + "' expects a number, got '" + *v + "'");
  }
  out = parsed;
}

void KeyValueConfig::read(std::string_view key, unsigned long& out) const { read_int(*this, find(key), key, out); }

void KeyValueConfig::read(std::string_view key, unsigned long long& out) const {
  read_int(*this, find(key), key, out);
}

void KeyValueConfig::reject_unknown() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (used_.count(k)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += k;
  }
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown key(s): " + unknown);
}

}  // namespace mcvqa
