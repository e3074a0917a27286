#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "optochain/dataset.hpp"
#include "optochain/errors.hpp"
#include "optochain/scenario.hpp"
#include "optochain/scenario_config.hpp"

namespace fs = std::filesystem;
using namespace optochain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Flags {
  std::string config;
  std::string preset;
  std::string out;
  std::string format = "csv";
  std::string scenario;  // validate-config only
  int workers = 1;
  bool no_resume = false;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

ScenarioConfig resolve(const Flags& f, std::optional<ScenarioKind> kind) {
  if (!f.config.empty() && !f.preset.empty()) throw ConfigError("--config and --preset are mutually exclusive");
  if (f.config.empty() && f.preset.empty()) throw ConfigError("one of --config or --preset is required");
  if (!f.config.empty()) return load_config(f.config, kind);
  ScenarioConfig c = preset_config(f.preset, kind.value_or(ScenarioKind::EquilibriumBranch));
  validate(c);
  return c;
}

int run(const Flags& f, ScenarioKind kind) {
  ScenarioConfig config;
  OutputFormat format;
  fs::path out;
  try {
    config = resolve(f, kind);
    if (f.format != "csv" && f.format != "json") throw ConfigError("--format must be csv or json");
    format = f.format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
    if (f.workers < 1) throw ConfigError("--workers must be at least 1");
    out = f.out.empty() ? fs::path("out") / to_string(kind) : fs::path(f.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ConfigError("output directory '" + out.string() + "' is not writable: " + ec.message());
    std::ofstream probe(out / "run.log", std::ios::app);
    if (!probe) throw ConfigError("output directory '" + out.string() + "' is not writable");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::ofstream log(out / "run.log", std::ios::app);
  const std::string hash = config_hash(config);
  log << timestamp() << " start scenario=" << to_string(kind) << " hash=" << hash << " workers=" << f.workers
      << " version=" << code_version() << "\n";
  RunOptions options;
  options.workers = f.workers;
  if (!f.no_resume) options.cache_dir = out / ".cache";
  options.log = [&](const std::string& line) {
    log << timestamp() << " " << line << "\n";
    log.flush();
  };

  const auto t0 = std::chrono::steady_clock::now();
  SweepDataset ds;
  try {
    ds = run_scenario(config, options);
    export_dataset(ds, out, format);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    log << timestamp() << " error " << e.what() << "\n";
    return 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto counts = ds.status_counts();
  std::cout << to_string(kind) << ": " << ds.statuses.size() << " points in " << secs << " s -> " << out.string()
            << "\n";
  for (int i = 0; i < 5; ++i) {
    if (counts[i]) std::cout << "  " << to_string(static_cast<PointStatus>(i)) << ": " << counts[i] << "\n";
  }
  log << timestamp() << " done points=" << ds.statuses.size() << " cached_tasks=" << ds.cached_tasks
      << " seconds=" << secs << "\n";
  for (const auto& n : ds.notes) log << timestamp() << " note " << n << "\n";
  return ds.partial_failure() ? kExitPartial : kExitOk;
}

int validate_config(const Flags& f) {
  try {
    std::optional<ScenarioKind> kind;
    if (!f.scenario.empty()) kind = scenario_from_string(f.scenario);
    const ScenarioConfig c = resolve(f, kind);
    std::cout << canonical_json(c) << "\n" << "hash " << config_hash(c) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

void common_flags(CLI::App* sub, Flags& f, bool runs) {
  sub->add_option("--config", f.config, "YAML configuration file");
  sub->add_option("--preset", f.preset, "bundled parameter set")->check(CLI::IsMember({"sec3c", "sec4"}));
  if (runs) {
    sub->add_option("--out", f.out, "output directory (default out/<scenario>)");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--no-resume", f.no_resume, "ignore the task cache in <out>/.cache");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ion chain in a lossy cavity: equilibria, cooling and spectra"};
  app.set_version_flag("--version", std::string(code_version()));
  app.require_subcommand(1);
  Flags flags;

  const std::map<std::string, std::pair<ScenarioKind, std::string>> commands = {
      {"equilibrium", {ScenarioKind::EquilibriumBranch, "equilibrium branch over eta, mode shapes, spectra"}},
      {"map", {ScenarioKind::CoolingMap, "mean occupation over (delta_c, eta)"}},
      {"resonance", {ScenarioKind::ResonanceAnalysis, "steady state, rates and entanglement along eta"}},
      {"scaling", {ScenarioKind::ScalingStudy, "cooling versus chain size"}},
      {"kink", {ScenarioKind::KinkSpectroscopy, "kink mode cooling and cavity spectroscopy"}},
  };
  std::map<CLI::App*, ScenarioKind> kinds;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    common_flags(sub, flags, true);
    kinds[sub] = entry.first;
  }
  CLI::App* check = app.add_subcommand("validate-config", "print the resolved configuration and its hash");
  common_flags(check, flags, false);
  check->add_option("--scenario", flags.scenario, "scenario used to resolve presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (check->parsed()) return validate_config(flags);
  for (const auto& [sub, kind] : kinds) {
    if (sub->parsed()) return run(flags, kind);
  }
  return kExitConfig;
}
