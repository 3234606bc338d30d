#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "output.hpp"
#include "settings.hpp"

namespace qparisi::cli {

using CommandOutput = std::variant<Table, Json>;

struct Command {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  std::function<CommandOutput(const Settings&)> run;
};

const std::vector<Command>& all_commands();

}  // namespace qparisi::cli
