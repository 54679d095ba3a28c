// demo: the sharp-vs-blurry super-resolution benchmark end to end.

#include <memory>

#include "cli.h"
#include "rqi/demo/demo.h"
#include "rqi/util/csv.h"
#include "rqi/util/file.h"

#ifndef RQI_DATA_DIR
#define RQI_DATA_DIR "data"
#endif

namespace rqi::cli {

void add_demo_command(CLI::App& app, Context& ctx) {
  auto cfg = std::make_shared<DemoConfig>();
  cfg->corpus = std::filesystem::path(RQI_DATA_DIR) / "corpus";
  auto* d = app.add_subcommand("demo", "Build the sharp/blurry benchmark, score it and run the GT-quality sweep");
  d->add_option("--corpus", cfg->corpus, "Pristine corpus directory")->capture_default_str()->check(
      CLI::ExistingDirectory);
  d->add_option("--out,-o", cfg->out, "Output directory")->required();
  d->add_option("--seed", cfg->seed, "Master seed")->capture_default_str();
  d->add_option("--epochs", cfg->epochs, "RQI training epochs")->capture_default_str()->check(CLI::Range(1, 1000));
  d->add_option("--train-contents", cfg->train_contents, "Contents used for RQI training")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  d->add_option("--model", cfg->model_path, "Use this RQI model instead of training")->check(CLI::ExistingFile);
  d->add_option("--trials", cfg->control_trials, "Random-discard control trials")->capture_default_str()->check(
      CLI::Range(2, 100000));
  add_protocol_options(*d, cfg->protocol);
  d->callback([cfg, &ctx] {
    cfg->jobs = ctx.resolved_jobs();
    cfg->log = progress;
    run_demo(*cfg);
    emit_text("", read_text_file(cfg->out / "summary.csv"));
  });
}

}  // namespace rqi::cli
