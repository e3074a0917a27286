#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "optochain/scenario.hpp"

using namespace optochain;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_map() {
  ScenarioConfig c = preset_config("sec3c", ScenarioKind::CoolingMap);
  c.physical.n_ions = 5;
  c.eta = Axis{5.0, 300.0, 24, true};
  c.delta_c = Axis{-10.0, -2.0, 5, false};
  return c;
}

ScenarioConfig small_kink() {
  ScenarioConfig c = preset_config("sec4", ScenarioKind::KinkSpectroscopy);
  c.eta = Axis{5.0, 300.0, 30, true};
  c.delta_c = Axis{-4.0, -1.0, 12, false};
  c.nu = Axis{-20.0, 20.0, 81, false};
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("optochain_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_tables(const SweepDataset& a, const SweepDataset& b) {
  if (a.tables.size() != b.tables.size()) return false;
  for (std::size_t i = 0; i < a.tables.size(); ++i) {
    if (a.tables[i].name != b.tables[i].name || a.tables[i].rows != b.tables[i].rows) return false;
  }
  return a.statuses == b.statuses;
}

}  // namespace

TEST_CASE("trap frequency scaling keeps the reference point") {
  CHECK(scaled_trap_frequency(0.5, 11, 11) == 0.5);
  CHECK(scaled_trap_frequency(0.5, 11, 51) ==
        doctest::Approx(0.5 * std::sqrt(std::log(51.0) / std::log(11.0)) * 11 / 51));
  CHECK(scaled_trap_frequency(0.5, 11, 81) < scaled_trap_frequency(0.5, 11, 51));
  CHECK_THROWS_AS(scaled_trap_frequency(0.5, 11, 1), DomainError);

  // the estimated central spacing is what the scaling holds fixed
  ScenarioConfig c = preset_config("sec3c", ScenarioKind::ScalingStudy);
  const double d11 = chain_scales(scaled_physical(c, 11)).d0;
  for (int n : {21, 51, 81}) CHECK(chain_scales(scaled_physical(c, n)).d0 == doctest::Approx(d11).epsilon(1e-12));
}

TEST_CASE("generalized mode assignment is a greedy matching") {
  GeneralizedModes g;
  g.character.resize(3, 3);
  g.character << 0.9, 0.1, 0.0,
                 0.05, 0.5, 0.45,
                 0.05, 0.4, 0.55;
  CHECK(assign_generalized_modes(g) == std::vector<Eigen::Index>{0, 1, 2});
  g.character << 0.1, 0.8, 0.1,
                 0.8, 0.1, 0.1,
                 0.1, 0.1, 0.8;
  CHECK(assign_generalized_modes(g) == std::vector<Eigen::Index>{1, 0, 2});
}

TEST_CASE("task plan") {
  CHECK(plan_tasks(small_map()).size() == 5);
  ScenarioConfig s = preset_config("sec3c", ScenarioKind::ScalingStudy);
  CHECK(plan_tasks(s).size() == 3);
  ScenarioConfig e = preset_config("sec3c", ScenarioKind::EquilibriumBranch);
  CHECK(plan_tasks(e).size() == 1 + e.snapshots.size());
}

TEST_CASE("cooling map is independent of the worker count") {
  const ScenarioConfig c = small_map();
  const SweepDataset a = run_scenario(c, {1, std::nullopt, {}});
  const SweepDataset b = run_scenario(c, {3, std::nullopt, {}});
  CHECK(same_tables(a, b));
  CHECK_FALSE(a.partial_failure());

  const Table* map = a.find("cooling_map");
  REQUIRE(map != nullptr);
  CHECK(map->rows.size() == 5 * 24);
  std::vector<std::string> names;
  for (const auto& col : map->columns) names.push_back(col.name);
  CHECK(names == std::vector<std::string>{"delta_c", "eta", "mean_n", "n_coupled_modes", "phase",
                                          "eta_critical_row", "status"});
  const Table* curve = a.find("transition_curve");
  REQUIRE(curve != nullptr);
  CHECK(curve->rows.size() == 5);
  // rows come out in task order, delta_c ascending
  CHECK(std::stod(map->rows.front()[0]) == doctest::Approx(-10.0));
  CHECK(std::stod(map->rows.back()[0]) == doctest::Approx(-2.0));
}

TEST_CASE("resumed runs match fresh runs") {
  const ScenarioConfig c = small_map();
  const fs::path cache = scratch("cache");
  const SweepDataset fresh = run_scenario(c, {2, cache, {}});
  CHECK(fresh.cached_tasks == 0);

  // drop two entries as if the run had been interrupted
  const fs::path dir = cache / (config_hash(c) + "-" + code_version());
  REQUIRE(fs::exists(dir / "task_1.json"));
  fs::remove(dir / "task_1.json");
  fs::remove(dir / "task_3.json");
  const SweepDataset resumed = run_scenario(c, {2, cache, {}});
  CHECK(resumed.cached_tasks == 3);
  CHECK(same_tables(fresh, resumed));

  const fs::path out_a = scratch("out_a"), out_b = scratch("out_b");
  export_dataset(fresh, out_a, OutputFormat::Csv);
  export_dataset(resumed, out_b, OutputFormat::Csv);
  CHECK(slurp(out_a / "cooling_map.csv") == slurp(out_b / "cooling_map.csv"));
  fs::remove_all(cache);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("kink scenario tables") {
  const SweepDataset d = run_scenario(small_kink(), {2, std::nullopt, {}});
  for (const char* name : {"kink_branch", "kink_scan", "resonance", "spectrum"}) {
    CAPTURE(name);
    CHECK(d.find(name) != nullptr);
  }
  const Table* spectrum = d.find("spectrum");
  REQUIRE(spectrum != nullptr);
  REQUIRE(spectrum->columns.size() == 4);
  CHECK(spectrum->columns[2].name == "nu");
  CHECK(spectrum->columns[3].name == "S_nu");
  CHECK(spectrum->rows.size() == 81);
  for (const auto& row : spectrum->rows) CHECK(std::stod(row[3]) >= 0.0);
  CHECK(d.find("kink_scan")->rows.size() == 12);
}

TEST_CASE("task results survive a serialization round trip") {
  TaskResult r;
  r.table("t", {{"x"}, {"label", false}}).append({fmt(1.5), "a,b"});
  r.table("t", {{"x"}, {"label", false}}).append({fmt(std::nan("")), "q\"uote"});
  r.statuses = {PointStatus::Ok, PointStatus::BranchJump};
  r.files.push_back({"f.txt", "1 2\n3 4\n"});
  r.notes.push_back("note");
  const TaskResult back = deserialize(serialize(r));
  REQUIRE(back.tables.size() == 1);
  CHECK(back.tables[0].rows == r.tables[0].rows);
  CHECK(back.statuses == r.statuses);
  CHECK(back.files[0].content == r.files[0].content);
  CHECK(back.notes == r.notes);
  CHECK_THROWS(r.table("t", {{"x"}}).append({"1", "2", "3"}));
}

TEST_CASE("export formats") {
  TaskResult r;
  auto& t = r.table("demo", {{"x"}, {"y"}, {"label", false}});
  t.append({fmt(1.0), fmt(std::nan("")), "plain"});
  t.append({fmt(2.0), fmt(-INFINITY), "with,comma"});
  r.statuses = {PointStatus::Ok, PointStatus::Unstable};
  const SweepDataset d = assemble(preset_config("sec3c", ScenarioKind::EquilibriumBranch), {r});
  CHECK(d.partial_failure());
  CHECK(d.status_counts()[1] == 1);

  const fs::path dir = scratch("export");
  export_dataset(d, dir, OutputFormat::Json);
  const auto j = nlohmann::json::parse(slurp(dir / "demo.json"));
  CHECK(j["columns"] == nlohmann::json::array({"x", "y", "label"}));
  CHECK(j["rows"][0][0] == 1.0);
  CHECK(j["rows"][0][1].is_null());
  CHECK(j["rows"][1][2] == "with,comma");
  const auto meta = nlohmann::json::parse(slurp(dir / "metadata.json"));
  CHECK(meta["config_hash"] == config_hash(d.config));
  CHECK(meta["partial_failure"] == true);

  export_dataset(d, dir, OutputFormat::Csv);
  std::istringstream csv(slurp(dir / "demo.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "x,y,label");
  std::getline(csv, line);
  CHECK(line == "1,nan,plain");
  std::getline(csv, line);
  CHECK(line == "2,-inf,\"with,comma\"");
  fs::remove_all(dir);

  CHECK_THROWS_AS(export_dataset(d, "/proc/definitely/not/writable", OutputFormat::Csv), std::runtime_error);
}

TEST_CASE("status names round trip") {
  for (PointStatus s : {PointStatus::Ok, PointStatus::Unstable, PointStatus::DecoupledExcluded,
                        PointStatus::BranchJump, PointStatus::Failed}) {
    CHECK(status_from_string(to_string(s)) == s);
  }
  CHECK(std::string(to_string(PointStatus::DecoupledExcluded)) == "decoupled-modes-excluded");
}
