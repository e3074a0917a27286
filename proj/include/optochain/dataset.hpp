#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "optochain/scenario_config.hpp"

namespace optochain {

enum class PointStatus { Ok, Unstable, DecoupledExcluded, BranchJump, Failed };

const char* to_string(PointStatus status);
PointStatus status_from_string(const std::string& name);

/// %.17g; non-finite values print as nan / inf / -inf.
std::string fmt(double value);
std::string fmt(long long value);
inline std::string fmt(int value) { return fmt(static_cast<long long>(value)); }
inline std::string fmt(long value) { return fmt(static_cast<long long>(value)); }

struct Column {
  std::string name;
  bool numeric = true;
};

/// Cells are stored pre-formatted so that cached and fresh results are
/// byte-identical on export.
struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;

  void append(std::vector<std::string> row);
};

/// Extra text output written verbatim (covariance dumps).
struct TextFile {
  std::string name;
  std::string content;
};

/// Output of one independent unit of work (a continuation chain or a
/// single snapshot).
struct TaskResult {
  std::vector<Table> tables;
  std::vector<TextFile> files;
  std::vector<PointStatus> statuses;
  std::vector<std::string> notes;

  Table& table(const std::string& name, const std::vector<Column>& columns);
};

std::string serialize(const TaskResult& result);
TaskResult deserialize(const std::string& text);

struct SweepDataset {
  ScenarioConfig config;
  std::vector<Table> tables;
  std::vector<TextFile> files;
  std::vector<PointStatus> statuses;
  std::vector<std::string> notes;
  int tasks = 0;
  int cached_tasks = 0;

  std::array<int, 5> status_counts() const;
  // unstable or failed points
  bool partial_failure() const;
  const Table* find(const std::string& name) const;
};

/// Concatenates task tables in task order; tables sharing a name are merged.
SweepDataset assemble(const ScenarioConfig& config, const std::vector<TaskResult>& results);

/// One file per table plus metadata.json. Throws std::runtime_error with the
/// offending path on I/O failure.
void export_dataset(const SweepDataset& dataset, const std::filesystem::path& dir, OutputFormat format);

std::string metadata_json(const SweepDataset& dataset, OutputFormat format);

const char* code_version();

}  // namespace optochain
