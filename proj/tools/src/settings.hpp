#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qparisi::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kEnvPrefix = "QPARISI_";

struct OptionSpec {
  std::string key;  // flag name without the leading dashes
  std::string fallback;
  std::string help;
};

// Resolved key/value settings for one command.
// Precedence: command-line flag > QPARISI_<KEY> environment variable > config file > default.
class Settings {
 public:
  explicit Settings(std::vector<OptionSpec> specs);

  const std::vector<OptionSpec>& specs() const { return specs_; }
  void load_file(const std::string& path);
  void load_env();
  void set_flag(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string text(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::map<std::string, std::string>& sources() const { return sources_; }

  static std::string env_name(const std::string& key);

 private:
  bool known(const std::string& key) const;
  void assign(const std::string& key, const std::string& value, const std::string& source, int rank);

  std::vector<OptionSpec> specs_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> sources_;
  std::map<std::string, int> rank_;
};

}  // namespace qparisi::cli
