#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "output.hpp"
#include "qparisi/stochastics.hpp"
#include "settings.hpp"

namespace {

using namespace qparisi::cli;

constexpr int kExitUsage = 2;
constexpr int kExitEstimator = 3;
constexpr int kExitOther = 1;

std::string manifest_path(const Settings& s, const std::string& command) {
  if (s.has("manifest") && !s.text("manifest").empty()) return s.text("manifest");
  if (s.has("out") && !s.text("out").empty()) return s.text("out") + ".manifest.json";
  return "./" + command + ".manifest.json";
}

void write_manifest(const std::string& path, const Json& manifest) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "warning: cannot write manifest " << path << "\n";
    return;
  }
  write_json(manifest, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qparisi: quantum Parisi functional, Trotter and interpolation checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", QPARISI_VERSION);
  app.footer(std::string("Settings precedence: flags > ") + kEnvPrefix +
             "<KEY> environment variables > --config key=value file > defaults.");

  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : all_commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& store = flag_values[cmd.name];
    for (const auto& opt : cmd.options) {
      const auto help = opt.fallback.empty() ? opt.help : opt.help + " [" + opt.fallback + "]";
      sub->add_option("--" + opt.key, store[opt.key], help);
    }
    sub->add_option("--config", config_paths[cmd.name], "key=value settings file");
    subs[cmd.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const Command* chosen = nullptr;
  for (const auto& cmd : all_commands())
    if (subs[cmd.name]->parsed()) chosen = &cmd;
  if (chosen == nullptr) return kExitUsage;
  CLI::App* sub = subs[chosen->name];

  Settings settings(chosen->options);
  std::ostringstream argv_line;
  for (int i = 0; i < argc; ++i) argv_line << (i ? " " : "") << argv[i];
  Json manifest{{"command", chosen->name},
                {"version", QPARISI_VERSION},
                {"argv", argv_line.str()},
                {"started", utc_timestamp()}};

  int code = 0;
  std::string status = "ok";
  try {
    if (!config_paths[chosen->name].empty()) settings.load_file(config_paths[chosen->name]);
    settings.load_env();
    for (const auto& opt : chosen->options)
      if (sub->get_option("--" + opt.key)->count() > 0) settings.set_flag(opt.key, flag_values[chosen->name][opt.key]);

    const auto format = parse_format(settings.text("format"));
    const auto result = chosen->run(settings);

    const bool to_file = settings.has("out") && !settings.text("out").empty();
    std::ofstream file;
    if (to_file) {
      file.open(settings.text("out"));
      if (!file) throw UsageError("cannot open output file " + settings.text("out"));
    }
    std::ostream& out = to_file ? static_cast<std::ostream&>(file) : std::cout;
    if (const auto* table = std::get_if<Table>(&result)) {
      write_table(*table, format, out);
    } else {
      const auto& doc = std::get<Json>(result);
      if (format == Format::Json) {
        write_json(doc, out);
      } else {
        Table t;
        for (auto it = doc.begin(); it != doc.end(); ++it) t.columns.push_back(it.key());
        t.add(doc);
        write_csv(t, out);
      }
    }
    manifest["output"] = to_file ? settings.text("out") : "stdout";
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    status = "usage_error";
    manifest["error"] = e.what();
    code = kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    status = "usage_error";
    manifest["error"] = e.what();
    code = kExitUsage;
  } catch (const qparisi::EstimatorFailure& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    status = "estimator_failure";
    manifest["error"] = e.what();
    code = kExitEstimator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = "error";
    manifest["error"] = e.what();
    code = kExitOther;
  }

  Json params = Json::object();
  for (const auto& [key, value] : settings.values())
    params[key] = Json{{"value", value}, {"source", settings.sources().at(key)}};
  manifest["parameters"] = params;
  manifest["seed"] = settings.has("seed") ? settings.text("seed") : "";
  manifest["finished"] = utc_timestamp();
  manifest["status"] = status;
  write_manifest(manifest_path(settings, chosen->name), manifest);
  return code;
}
