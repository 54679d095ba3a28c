// Table-level subcommands: metrics, sweep, consistency.

#include <fmt/format.h>

#include <map>
#include <memory>

#include "cli.h"
#include "rqi/error.h"
#include "rqi/gt/gt_quality.h"
#include "rqi/gt/sweep.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/fr.h"
#include "rqi/metrics/niqe.h"
#include "rqi/model/rqi.h"
#include "rqi/stats/consistency.h"
#include "rqi/util/csv.h"
#include "rqi/util/parallel.h"

namespace rqi::cli {

void run_metrics(const MetricsOptions& o, const Context& ctx) {
  for (const auto& m : o.metrics) {
    if (m != "psnr" && m != "ssim" && m != "niqe" && m != "rqi") {
      throw CLI::ValidationError("--metrics", "unknown metric '" + m + "' (psnr, ssim, niqe, rqi)");
    }
  }
  const auto wants = [&](const char* m) { return std::find(o.metrics.begin(), o.metrics.end(), m) != o.metrics.end(); };
  if (wants("niqe") && o.niqe_model.empty()) throw CLI::RequiredError("--niqe-model (needed for niqe)");
  if (wants("rqi") && o.rqi_model.empty()) throw CLI::RequiredError("--rqi-model (needed for rqi)");
  std::unique_ptr<PristineModel> niqe;
  std::unique_ptr<RqiModel> rqi;
  if (wants("niqe")) niqe = std::make_unique<PristineModel>(load_pristine_model(o.niqe_model));
  if (wants("rqi")) rqi = std::make_unique<RqiModel>(load_rqi_model(o.rqi_model));

  auto entries = read_image_manifest(o.manifest);
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.content_id, a.model_id) < std::tie(b.content_id, b.model_id);
  });
  const auto rows = parallel_map(entries.size(), ctx.resolved_jobs(), [&](std::size_t i) {
    const auto& e = entries[i];
    const ImagePlane img = to_luma(load_image(e.image_path));
    ImagePlane ref;
    const bool needs_ref = wants("psnr") || wants("ssim") || wants("rqi");
    if (needs_ref) {
      ref = to_luma(load_image(e.reference_path));
      if (ref.width() != img.width() || ref.height() != img.height()) {
        throw DimensionError(fmt::format("{}/{}: image {}x{} vs. reference {}x{}", e.content_id, e.model_id,
                                         img.width(), img.height(), ref.width(), ref.height()));
      }
    }
    std::vector<MetricRow> out;
    for (const auto& m : o.metrics) {
      double v = 0.0;
      if (m == "psnr") v = psnr(img, ref);
      if (m == "ssim") v = ssim_score(img, ref);
      if (m == "niqe") v = niqe_score(img, *niqe);
      if (m == "rqi") v = rqi_score(*rqi, img, ref, o.protocol);
      out.push_back(MetricRow{e.content_id, e.model_id, m, v});
    }
    return out;
  });
  std::vector<MetricRow> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  emit_text(o.out, format_metric_csv(flat));
}

namespace {

struct SweepOptions {
  std::filesystem::path metrics;
  std::filesystem::path gt_quality;
  std::filesystem::path references;
  std::filesystem::path niqe_model;
  std::filesystem::path out;
  std::vector<double> fractions = default_fractions();
  int trials = 200;
  std::uint64_t seed = 0;
  std::vector<std::string> directions;
};

void run_sweep(const SweepOptions& o, const Context& ctx) {
  MetricScoreTable table = read_metric_csv(o.metrics);
  std::string source = "csv";
  if (!o.gt_quality.empty()) {
    table.gt_quality = read_gt_quality_csv(o.gt_quality);
  } else {
    if (o.references.empty() || o.niqe_model.empty()) {
      throw CLI::RequiredError("--gt-quality, or --references with --niqe-model");
    }
    std::map<std::string, std::filesystem::path> refs;
    for (const auto& e : read_image_manifest(o.references)) {
      auto [it, fresh] = refs.emplace(e.content_id, e.reference_path);
      if (!fresh && it->second != e.reference_path) {
        throw SchemaError("content " + e.content_id + " lists more than one reference image");
      }
    }
    table.gt_quality = niqe_gt_quality(refs, load_pristine_model(o.niqe_model), ctx.resolved_jobs());
    source = "niqe";
  }
  SweepResult sweep = discard_sweep(table, o.fractions, directions_from(o.directions));
  sweep.gt_source = source;
  const ControlResult control = random_discard_control(table, o.fractions, o.trials, o.seed, ctx.resolved_jobs());
  emit_sweep_artifacts(sweep, control, o.out);
  if (source == "niqe") write_gt_quality_csv(table.gt_quality, o.out / "gt_quality.csv");
}

struct ConsistencyOptionsCli {
  std::filesystem::path metrics;
  std::filesystem::path users;
  std::filesystem::path out;
  bool include_reference = false;
  std::string reference_id = "GT";
  std::vector<std::string> directions;
};

}  // namespace

void add_metrics_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<MetricsOptions>();
  auto* cmd = app.add_subcommand("metrics", "Score images listed in a manifest (content_id,model_id,image_path,"
                                            "reference_path)");
  cmd->add_option("--manifest", o->manifest, "Image manifest CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out,-o", o->out, "Output metric CSV (default: stdout)");
  cmd->add_option("--metrics", o->metrics, "Metrics to compute: psnr ssim niqe rqi")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--niqe-model", o->niqe_model, "NIQE pristine model (for niqe)")->check(CLI::ExistingFile);
  cmd->add_option("--rqi-model", o->rqi_model, "RQI model (for rqi; scores image vs. reference)")
      ->check(CLI::ExistingFile);
  add_protocol_options(*cmd, o->protocol);
  cmd->callback([o, &ctx] { run_metrics(*o, ctx); });
}

void add_sweep_command(CLI::App& app, Context& ctx) {
  auto o = std::make_shared<SweepOptions>();
  auto* cmd = app.add_subcommand("sweep", "GT-quality discard sweep with a random-discard control");
  cmd->add_option("--metrics", o->metrics, "Metric CSV (content_id,model_id,metric,score)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* gt = cmd->add_option("--gt-quality", o->gt_quality, "GT quality CSV (content_id,gt_quality)")
                 ->check(CLI::ExistingFile);
  auto* refs = cmd->add_option("--references", o->references, "Image manifest whose reference_path are the GTs; "
                                                               "quality = -NIQE")
                   ->check(CLI::ExistingFile);
  cmd->add_option("--niqe-model", o->niqe_model, "NIQE pristine model (with --references)")
      ->check(CLI::ExistingFile);
  gt->excludes(refs);
  cmd->add_option("--out,-o", o->out, "Output directory")->required();
  cmd->add_option("--fractions", o->fractions, "Discard fractions")->delimiter(',');
  cmd->add_option("--trials", o->trials, "Random-control trials")->capture_default_str()->check(CLI::Range(2, 100000));
  cmd->add_option("--seed", o->seed, "Random-control seed")->capture_default_str();
  add_direction_option(*cmd, o->directions);
  cmd->callback([o, &ctx] { run_sweep(*o, ctx); });
}

void add_consistency_command(CLI::App& app, Context&) {
  auto o = std::make_shared<ConsistencyOptionsCli>();
  auto* cmd = app.add_subcommand("consistency", "Per-content SRCC, PLCC and winning rate against user scales");
  cmd->add_option("--metrics", o->metrics, "Metric CSV (content_id,model_id,metric,score)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--users", o->users, "User scales CSV (content_id,model_id,thurstone_score)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out,-o", o->out, "Report CSV (default: stdout)");
  cmd->add_flag("--include-reference", o->include_reference, "Correlate over the reference item too");
  cmd->add_option("--reference-id", o->reference_id, "Model id of the reference item")->capture_default_str();
  add_direction_option(*cmd, o->directions);
  cmd->callback([o] {
    ConsistencyOptions opts;
    opts.include_reference = o->include_reference;
    opts.reference_id = o->reference_id;
    const auto rows = per_content_consistency(read_metric_csv(o->metrics), read_user_scales_csv(o->users),
                                              directions_from(o->directions), opts);
    emit_text(o->out, format_consistency_csv(rows));
  });
}

}  // namespace rqi::cli
