// study serve / create / status / export.

#include <fmt/format.h>

#include <memory>

#include "cli.h"
#include "rqi/stats/thurstone.h"
#include "rqi/study/server.h"
#include "rqi/study/study.h"
#include "rqi/util/file.h"

namespace rqi::cli {
namespace {

struct StudyArgs {
  std::filesystem::path root = "studies";
  std::string study;
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::filesystem::path scales;
  std::filesystem::path base_dir = ".";
  std::string host = "127.0.0.1";
  int port = 8080;
};

}  // namespace

void add_study_command(CLI::App& app, Context&) {
  auto* study = app.add_subcommand("study", "Pairwise (2AFC) preference studies");
  study->require_subcommand(1);
  auto args = std::make_shared<StudyArgs>();
  const auto root_option = [&](CLI::App* c) {
    c->add_option("--root", args->root, "Directory holding every study")->capture_default_str();
  };

  auto* serve = study->add_subcommand("serve", "Serve the HTTP API until killed");
  root_option(serve);
  serve->add_option("--host", args->host, "Bind address")->capture_default_str();
  serve->add_option("--port", args->port, "Port (0 picks a free one)")->capture_default_str()->check(
      CLI::Range(0, 65535));
  serve->add_option("--base-dir", args->base_dir, "Directory for relative image paths of posted manifests")
      ->capture_default_str();
  serve->callback([args] {
    StudyService service(args->root);
    StudyServer server(service, std::filesystem::absolute(args->base_dir));
    const int port = server.bind(args->host, args->port);
    progress(fmt::format("listening on http://{}:{}", args->host, port));
    server.listen();
  });

  auto* create = study->add_subcommand("create", "Create a study from a JSON manifest");
  root_option(create);
  create->add_option("--manifest", args->manifest, "Study manifest; image paths resolve against its directory")
      ->required()
      ->check(CLI::ExistingFile);
  create->callback([args] {
    const auto text = read_text_file(args->manifest);
    const StudyManifest m = parse_study_manifest(text, std::filesystem::absolute(args->manifest).parent_path());
    StudyService service(args->root);
    service.create_study(m);
    std::size_t pairs = 0;
    for (const auto& c : m.contents) pairs += c.items.size() * (c.items.size() - 1) / 2;
    emit_text("", fmt::format("{} {}\n", m.study_id, pairs));
  });

  auto* status = study->add_subcommand("status", "Print coverage and completion as JSON");
  root_option(status);
  status->add_option("--study", args->study, "Study id")->required();
  status->callback([args] {
    const StudyService service(args->root);
    emit_text("", status_json(service.status(args->study)) + "\n");
  });

  auto* exp = study->add_subcommand("export", "Write per-content count matrices; optionally Thurstone scales");
  root_option(exp);
  exp->add_option("--study", args->study, "Study id")->required();
  exp->add_option("--out,-o", args->out, "Counts JSON (default: stdout)");
  exp->add_option("--scales", args->scales, "User-scale CSV (content_id,model_id,thurstone_score)");
  exp->callback([args] {
    const StudyService service(args->root);
    const auto counts = service.export_counts(args->study);
    emit_text(args->out, counts_json(args->study, counts) + "\n");
    if (!args->scales.empty()) {
      UserScales scales;
      for (const auto& c : counts) {
        const QualityScale q = thurstone_scale(c.counts);
        for (std::size_t i = 0; i < q.items.size(); ++i) scales[c.content_id][q.items[i]] = q.scores[i];
      }
      write_user_scales_csv(scales, args->scales);
    }
  });
}

}  // namespace rqi::cli
