#include "settings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace qparisi::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("--" + key + ": expected a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw UsageError("--" + key + ": expected an integer, got '" + v + "'");
  return out;
}

constexpr int kRankDefault = 0;
constexpr int kRankFile = 1;
constexpr int kRankEnv = 2;
constexpr int kRankFlag = 3;

}  // namespace

Settings::Settings(std::vector<OptionSpec> specs) : specs_(std::move(specs)) {
  for (const auto& s : specs_)
    if (!s.fallback.empty()) assign(s.key, s.fallback, "default", kRankDefault);
}

bool Settings::known(const std::string& key) const {
  return std::any_of(specs_.begin(), specs_.end(), [&](const OptionSpec& s) { return s.key == key; });
}

void Settings::assign(const std::string& key, const std::string& value, const std::string& source, int rank) {
  auto it = rank_.find(key);
  if (it != rank_.end() && it->second > rank) return;
  values_[key] = value;
  sources_[key] = source;
  rank_[key] = rank;
}

void Settings::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (!known(key)) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    assign(key, trim(line.substr(eq + 1)), "file", kRankFile);
  }
}

std::string Settings::env_name(const std::string& key) {
  std::string name = kEnvPrefix;
  for (char ch : key) name += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

void Settings::load_env() {
  for (const auto& s : specs_)
    if (const char* v = std::getenv(env_name(s.key).c_str())) assign(s.key, v, "env", kRankEnv);
}

void Settings::set_flag(const std::string& key, const std::string& value) {
  if (!known(key)) throw UsageError("unknown option --" + key);
  assign(key, value, "flag", kRankFlag);
}

bool Settings::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Settings::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("missing required option --" + key);
  return it->second;
}

double Settings::number(const std::string& key) const { return parse_double(key, text(key)); }

int Settings::integer(const std::string& key) const {
  const auto v = parse_int(key, text(key));
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw UsageError("--" + key + ": out of range");
  return static_cast<int>(v);
}

std::uint64_t Settings::seed(const std::string& key) const {
  const auto v = parse_int(key, text(key));
  if (v < 0) throw UsageError("--" + key + ": seeds must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> Settings::numbers(const std::string& key) const {
  std::vector<double> out;
  if (!has(key)) return out;
  for (const auto& item : split_list(text(key))) out.push_back(parse_double(key, item));
  return out;
}

std::vector<int> Settings::integers(const std::string& key) const {
  std::vector<int> out;
  if (!has(key)) return out;
  for (const auto& item : split_list(text(key))) out.push_back(static_cast<int>(parse_int(key, item)));
  return out;
}

}  // namespace qparisi::cli
