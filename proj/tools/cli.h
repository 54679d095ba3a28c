#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rqi/model/rqi.h"
#include "rqi/tables.h"

namespace rqi::cli {

// Shared state of one invocation. Subcommand callbacks run after parsing, so
// they read the resolved values from here.
struct Context {
  int jobs = 0;  // 0: RQI_EVAL_JOBS, then hardware concurrency
  int resolved_jobs() const;
};

// Registrars, one per top-level subcommand.
void add_metrics_command(CLI::App& app, Context& ctx);
void add_niqe_command(CLI::App& app, Context& ctx);
void add_synth_command(CLI::App& app, Context& ctx);
void add_rqi_command(CLI::App& app, Context& ctx);
void add_sweep_command(CLI::App& app, Context& ctx);
void add_consistency_command(CLI::App& app, Context& ctx);
void add_study_command(CLI::App& app, Context& ctx);
void add_demo_command(CLI::App& app, Context& ctx);

// Scores every manifest row (content_id,model_id,image_path,reference_path)
// and writes metric rows; shared by `metrics` and `rqi batch`.
struct MetricsOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::vector<std::string> metrics{"psnr", "ssim"};
  std::filesystem::path niqe_model;
  std::filesystem::path rqi_model;
  InferenceProtocol protocol;
};
void run_metrics(const MetricsOptions& options, const Context& ctx);

// --scales, --crops and the crop-position seed (named by `seed_flags`) bound to `p`.
void add_protocol_options(CLI::App& cmd, InferenceProtocol& p, const std::string& seed_flags = "--protocol-seed");

// Repeatable --direction name=higher|lower, applied on top of the defaults.
void add_direction_option(CLI::App& cmd, std::vector<std::string>& specs);
MetricDirections directions_from(const std::vector<std::string>& specs);

// Writes to the file, or to stdout when the path is empty or "-".
void emit_text(const std::filesystem::path& out, const std::string& text);

void progress(const std::string& message);

// Entry point: exit code 0 on success, 1 on a domain error, 2 on usage errors.
int run(int argc, char** argv);

}  // namespace rqi::cli
