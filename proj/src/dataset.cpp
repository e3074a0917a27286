#include "optochain/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#ifndef OPTOCHAIN_VERSION
#define OPTOCHAIN_VERSION "0.0.0"
#endif

namespace optochain {

namespace {

using nlohmann::ordered_json;

constexpr const char* kStatusNames[] = {"ok", "unstable", "decoupled-modes-excluded", "branch-jump-flagged",
                                        "failed"};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string json_cell(const std::string& cell, bool numeric) {
  if (numeric) {
    if (cell == "nan" || cell == "inf" || cell == "-inf") return "null";
    return cell;
  }
  return ordered_json(cell).dump();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string table_csv(const Table& t) {
  std::string s;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) s += ',';
    s += t.columns[c].name;
  }
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) s += ',';
      s += csv_escape(row[c]);
    }
    s += '\n';
  }
  return s;
}

std::string table_json(const Table& t) {
  std::string s = "{\n  \"columns\": [";
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) s += ", ";
    s += ordered_json(t.columns[c].name).dump();
  }
  s += "],\n  \"rows\": [";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s += r ? ",\n    [" : "\n    [";
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      if (c) s += ", ";
      s += json_cell(t.rows[r][c], t.columns[c].numeric);
    }
    s += ']';
  }
  s += t.rows.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return s;
}

}  // namespace

const char* code_version() { return OPTOCHAIN_VERSION; }

const char* to_string(PointStatus status) { return kStatusNames[static_cast<int>(status)]; }

PointStatus status_from_string(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kStatusNames[i]) return static_cast<PointStatus>(i);
  }
  throw std::runtime_error("unknown point status '" + name + "'");
}

std::string fmt(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string fmt(long long value) { return std::to_string(value); }

void Table::append(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw std::logic_error("table '" + name + "': row has " + std::to_string(row.size()) + " cells, expected " +
                           std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

Table& TaskResult::table(const std::string& name, const std::vector<Column>& columns) {
  for (auto& t : tables) {
    if (t.name == name) return t;
  }
  tables.push_back(Table{name, columns, {}});
  return tables.back();
}

std::string serialize(const TaskResult& r) {
  ordered_json j;
  j["tables"] = ordered_json::array();
  for (const auto& t : r.tables) {
    ordered_json cols = ordered_json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"numeric", c.numeric}});
    j["tables"].push_back({{"name", t.name}, {"columns", cols}, {"rows", t.rows}});
  }
  j["files"] = ordered_json::array();
  for (const auto& f : r.files) j["files"].push_back({{"name", f.name}, {"content", f.content}});
  j["statuses"] = ordered_json::array();
  for (auto s : r.statuses) j["statuses"].push_back(to_string(s));
  j["notes"] = r.notes;
  return j.dump();
}

TaskResult deserialize(const std::string& text) {
  const auto j = ordered_json::parse(text);
  TaskResult r;
  for (const auto& t : j.at("tables")) {
    Table table;
    table.name = t.at("name").get<std::string>();
    for (const auto& c : t.at("columns")) table.columns.push_back({c.at("name"), c.at("numeric")});
    table.rows = t.at("rows").get<std::vector<std::vector<std::string>>>();
    r.tables.push_back(std::move(table));
  }
  for (const auto& f : j.at("files")) r.files.push_back({f.at("name"), f.at("content")});
  for (const auto& s : j.at("statuses")) r.statuses.push_back(status_from_string(s.get<std::string>()));
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

std::array<int, 5> SweepDataset::status_counts() const {
  std::array<int, 5> counts{};
  for (auto s : statuses) ++counts[static_cast<int>(s)];
  return counts;
}

bool SweepDataset::partial_failure() const {
  const auto c = status_counts();
  return c[static_cast<int>(PointStatus::Unstable)] > 0 || c[static_cast<int>(PointStatus::Failed)] > 0;
}

const Table* SweepDataset::find(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

SweepDataset assemble(const ScenarioConfig& config, const std::vector<TaskResult>& results) {
  SweepDataset ds;
  ds.config = config;
  ds.tasks = static_cast<int>(results.size());
  std::map<std::string, std::size_t> index;
  for (const auto& r : results) {
    for (const auto& t : r.tables) {
      auto it = index.find(t.name);
      if (it == index.end()) {
        index[t.name] = ds.tables.size();
        ds.tables.push_back(t);
      } else {
        auto& rows = ds.tables[it->second].rows;
        rows.insert(rows.end(), t.rows.begin(), t.rows.end());
      }
    }
    ds.files.insert(ds.files.end(), r.files.begin(), r.files.end());
    ds.statuses.insert(ds.statuses.end(), r.statuses.begin(), r.statuses.end());
    ds.notes.insert(ds.notes.end(), r.notes.begin(), r.notes.end());
  }
  return ds;
}

std::string metadata_json(const SweepDataset& ds, OutputFormat format) {
  ordered_json j;
  j["config_hash"] = config_hash(ds.config);
  j["code_version"] = code_version();
  j["scenario"] = to_string(ds.config.scenario);
  j["format"] = format == OutputFormat::Csv ? "csv" : "json";
  j["chi_threshold_kappa"] = ds.config.chi_threshold;
  j["rate_floor_kappa"] = DriftOptions{}.rate_floor;
  j["seed"] = ds.config.seed;
  j["numeric_format"] = "%.17g";
  j["units"] = "frequencies and rates in kappa, positions as phases k x unless suffixed _m";
  ordered_json counts;
  const auto c = ds.status_counts();
  for (int i = 0; i < 5; ++i) counts[kStatusNames[i]] = c[i];
  j["points"] = ds.statuses.size();
  j["status_counts"] = counts;
  j["partial_failure"] = ds.partial_failure();
  j["tasks"] = ds.tasks;
  ordered_json tables = ordered_json::array();
  for (const auto& t : ds.tables) {
    ordered_json cols = ordered_json::array();
    for (const auto& col : t.columns) cols.push_back(col.name);
    tables.push_back({{"name", t.name}, {"rows", t.rows.size()}, {"columns", cols}});
  }
  j["tables"] = tables;
  ordered_json files = ordered_json::array();
  for (const auto& f : ds.files) files.push_back(f.name);
  j["files"] = files;
  j["notes"] = ds.notes;
  j["config"] = ordered_json::parse(canonical_json(ds.config));
  return j.dump(2) + "\n";
}

void export_dataset(const SweepDataset& ds, const std::filesystem::path& dir, OutputFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& t : ds.tables) {
    if (format == OutputFormat::Csv) {
      write_file(dir / (t.name + ".csv"), table_csv(t));
    } else {
      write_file(dir / (t.name + ".json"), table_json(t));
    }
  }
  for (const auto& f : ds.files) write_file(dir / f.name, f.content);
  write_file(dir / "metadata.json", metadata_json(ds, format));
}

}  // namespace optochain
