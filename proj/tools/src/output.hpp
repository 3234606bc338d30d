#pragma once

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace qparisi::cli {

using Json = nlohmann::ordered_json;

// Rows of flat records; every numeric row carries its seed column.
struct Table {
  std::vector<std::string> columns;
  std::vector<Json> rows;

  void add(Json row) { rows.push_back(std::move(row)); }
};

enum class Format { Csv, Json };

Format parse_format(const std::string& name);
std::string format_number(double v);

void write_csv(const Table& table, std::ostream& out);
void write_table(const Table& table, Format format, std::ostream& out);
// A single JSON document (records are written as-is, tables as arrays).
void write_json(const Json& doc, std::ostream& out);

std::string utc_timestamp();

}  // namespace qparisi::cli
