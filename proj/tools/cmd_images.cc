// Image-level subcommands: niqe fit/score and synth make/corpus.

#include <memory>

#include "cli.h"
#include "rqi/error.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/metrics/niqe.h"
#include "rqi/synth/corpus.h"
#include "rqi/synth/distortion.h"
#include "rqi/util/csv.h"
#include "rqi/util/parallel.h"

namespace rqi::cli {
namespace {

struct NiqeFit {
  std::filesystem::path corpus;
  std::filesystem::path out;
  int patch = 96;
  double quantile = 0.75;
};

struct NiqeScore {
  std::filesystem::path model;
  std::vector<std::filesystem::path> images;
  std::filesystem::path out;
};

struct SynthMake {
  std::filesystem::path corpus;
  std::filesystem::path out;
  std::vector<std::string> families;
  std::uint64_t seed = 7;
};

struct SynthCorpus {
  std::filesystem::path out;
  int count = 30;
  int size = 192;
  std::uint64_t seed = 2024;
};

}  // namespace

void add_niqe_command(CLI::App& app, Context& ctx) {
  auto* niqe = app.add_subcommand("niqe", "NIQE pristine-model fitting and scoring");
  niqe->require_subcommand(1);

  auto fit = std::make_shared<NiqeFit>();
  auto* f = niqe->add_subcommand("fit", "Fit a pristine MVG model on a directory of images");
  f->add_option("--corpus", fit->corpus, "Directory of pristine images")->required()->check(CLI::ExistingDirectory);
  f->add_option("--out,-o", fit->out, "Model file")->required();
  f->add_option("--patch", fit->patch, "Tile size in pixels")->capture_default_str()->check(CLI::Range(16, 4096));
  f->add_option("--quantile", fit->quantile, "Sharpness quantile of kept tiles")->capture_default_str();
  f->callback([fit] {
    std::vector<ImagePlane> planes;
    for (const auto& [id, path] : list_corpus(fit->corpus)) planes.push_back(to_luma(load_image(path)));
    save_pristine_model(fit_pristine_model(planes, fit->patch, fit->quantile), fit->out);
  });

  auto score = std::make_shared<NiqeScore>();
  auto* s = niqe->add_subcommand("score", "Score images; one image prints a number, several print CSV");
  s->add_option("--model", score->model, "Pristine model file")->required()->check(CLI::ExistingFile);
  s->add_option("images", score->images, "Image files")->required()->check(CLI::ExistingFile);
  s->add_option("--out,-o", score->out, "Output CSV (image,niqe; default: stdout)");
  s->callback([score, &ctx] {
    const PristineModel model = load_pristine_model(score->model);
    const auto values = parallel_map(score->images.size(), ctx.resolved_jobs(), [&](std::size_t i) {
      return niqe_score(to_luma(load_image(score->images[i])), model);
    });
    if (score->images.size() == 1 && score->out.empty()) {
      emit_text("", format_number(values[0]) + "\n");
      return;
    }
    CsvTable csv{{"image", "niqe"}, {}};
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv.rows.push_back({score->images[i].string(), format_number(values[i])});
    }
    emit_text(score->out, format_csv(csv));
  });
}

void add_synth_command(CLI::App& app, Context& ctx) {
  auto* synth = app.add_subcommand("synth", "Distortion datasets and procedural corpora");
  synth->require_subcommand(1);

  auto make = std::make_shared<SynthMake>();
  auto* m = synth->add_subcommand("make", "Distort every corpus image at 5 severities per family");
  m->add_option("--corpus", make->corpus, "Directory of pristine images")->required()->check(CLI::ExistingDirectory);
  m->add_option("--out,-o", make->out, "Output directory (images and manifest.csv)")->required();
  m->add_option("--families", make->families, "Families (default: all five)")->delimiter(',');
  m->add_option("--seed", make->seed, "Noise seed")->capture_default_str();
  m->callback([make, &ctx] {
    std::vector<DistortionFamily> families;
    for (const auto& f : make->families) families.push_back(parse_family(f));
    if (families.empty()) families.assign(kAllFamilies.begin(), kAllFamilies.end());
    write_dataset(make_dataset(make->corpus, families, make->seed, ctx.resolved_jobs()), make->out);
  });

  auto corpus = std::make_shared<SynthCorpus>();
  auto* c = synth->add_subcommand("corpus", "Write a procedural pristine corpus");
  c->add_option("--out,-o", corpus->out, "Output directory")->required();
  c->add_option("--count", corpus->count, "Number of images")->capture_default_str()->check(CLI::Range(1, 100000));
  c->add_option("--size", corpus->size, "Side length in pixels")->capture_default_str()->check(CLI::Range(32, 8192));
  c->add_option("--seed", corpus->seed, "Content seed")->capture_default_str();
  c->callback([corpus] { write_synthetic_corpus(corpus->out, corpus->count, corpus->seed, corpus->size, corpus->size); });
}

}  // namespace rqi::cli
