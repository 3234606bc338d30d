#include "output.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <ctime>

#include "settings.hpp"

namespace qparisi::cli {

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw UsageError("--format must be csv or json, got '" + name + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

namespace {

std::string cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_number(v.get<double>());
  if (v.is_number_integer() || v.is_number_unsigned() || v.is_boolean()) return v.dump();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return v.dump();
}

// nlohmann cannot hold inf/nan as numbers; keep them readable as strings
Json sanitise(const Json& v) {
  if (v.is_number_float() && !std::isfinite(v.get<double>())) return format_number(v.get<double>());
  if (v.is_object() || v.is_array()) {
    Json out = v;
    for (auto& item : out) item = sanitise(item);
    return out;
  }
  return v;
}

}  // namespace

void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      out << (c ? "," : "");
      if (row.contains(table.columns[c])) out << cell(row.at(table.columns[c]));
    }
    out << '\n';
  }
}

void write_json(const Json& doc, std::ostream& out) { out << sanitise(doc).dump(2) << '\n'; }

void write_table(const Table& table, Format format, std::ostream& out) {
  if (format == Format::Csv) {
    write_csv(table, out);
    return;
  }
  Json arr = Json::array();
  for (const auto& row : table.rows) arr.push_back(row);
  write_json(arr, out);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
}

}  // namespace qparisi::cli
