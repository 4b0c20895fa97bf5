#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "datko/family.hpp"

namespace datko {

using Json = nlohmann::ordered_json;

/// Invalid or unreadable run configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed and validated run configuration. Tasks keep their JSON blocks;
/// every block has been checked against its module's parameter rules.
struct RunConfig {
  Json raw;
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::vector<Json> tasks;
};

RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// The family described by a config "family" block.
EvolutionFamily build_family(const Json& block, const std::filesystem::path& base_dir);

enum class SeriesKind { kPhiVsT, kMVsS, kNormVsCertificate };
std::string_view to_string(SeriesKind kind);

struct Series {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

enum class TaskStatus { kOk, kFailed, kError };
std::string_view to_string(TaskStatus status);

struct TaskFragment {
  std::string name;
  std::string kind;
  TaskStatus status = TaskStatus::kOk;
  Json result = Json::object();
  std::map<SeriesKind, Series> series;
  double wall_seconds = 0.0;
};

/// Writes one series of a fragment as CSV with a header row. Throws
/// std::invalid_argument when the fragment has no such series.
void emit_plot_series(const TaskFragment& fragment, SeriesKind kind,
                      const std::filesystem::path& file);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  bool props_only = false;  // run only verify-props tasks
};

struct RunResult {
  int exit_code = 0;  // 0 all passed, 2 property failures, 1 runtime errors
  Json report;
  std::vector<TaskFragment> fragments;
  std::filesystem::path output_dir;
};

/// Executes every task in declaration order, then writes report.json,
/// timings.json and the CSV series into the output directory.
RunResult run(const RunConfig& config, const RunOptions& options = {});

/// Runs one task block against a family.
TaskFragment run_task(const EvolutionFamily& family, const Json& task, std::uint64_t seed,
                      std::size_t index);

}  // namespace datko
