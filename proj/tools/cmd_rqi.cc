// rqi train / score / batch / eval.

#include <fmt/format.h>

#include <memory>

#include "cli.h"
#include "rqi/image/io.h"
#include "rqi/model/train.h"
#include "rqi/util/csv.h"

namespace rqi::cli {
namespace {

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path history;
  std::string mode = "arbitrary";
  std::string head = "antisymmetric";
  TrainConfig config;
};

struct ScoreArgs {
  std::filesystem::path model;
  std::filesystem::path target;
  std::filesystem::path reference;
  InferenceProtocol protocol;
};

struct EvalArgs {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path out;
  double min_gap = 5.0;
  InferenceProtocol protocol;
};

}  // namespace

void add_rqi_command(CLI::App& app, Context& ctx) {
  auto* rqi = app.add_subcommand("rqi", "Relative quality index: train, score, evaluate");
  rqi->require_subcommand(1);

  auto train = std::make_shared<TrainArgs>();
  auto* t = rqi->add_subcommand("train", "Train an RQI model on a synth manifest");
  t->add_option("--manifest,--data", train->data, "manifest.csv written by 'synth make'")->required()->check(CLI::ExistingFile);
  t->add_option("--out,-o", train->out, "Model file")->required();
  t->add_option("--mode", train->mode, "Pair scheme")->capture_default_str()->check(
      CLI::IsMember({"arbitrary", "fr", "single"}));
  t->add_option("--head", train->head, "Head wrapping")->capture_default_str()->check(
      CLI::IsMember({"antisymmetric", "raw"}));
  t->add_option("--epochs", train->config.epochs, "Epochs")->capture_default_str()->check(CLI::Range(1, 10000));
  t->add_option("--batch", train->config.batch_size, "Pairs per batch")->capture_default_str()->check(
      CLI::Range(1, 100000));
  t->add_option("--lr", train->config.learning_rate, "Adam learning rate")->capture_default_str()->check(
      CLI::PositiveNumber);
  t->add_option("--val-fraction", train->config.validation_fraction, "Share of contents held for validation")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.9));
  t->add_option("--seed", train->config.seed, "Training seed")->capture_default_str();
  t->add_option("--history", train->history, "Per-epoch loss CSV");
  t->callback([train] {
    train->config.head = train->head == "raw" ? HeadMode::kRaw : HeadMode::kAntisymmetric;
    const auto data = load_labeled_manifest(train->data);
    const TrainResult result = train_rqi(data, parse_pair_mode(train->mode), train->config, [](const EpochStats& e) {
      progress(fmt::format("epoch {}: train {:.5f} validation {:.5f}", e.epoch, e.train_loss, e.validation_loss));
    });
    save_rqi_model(result.model, train->out);
    if (!train->history.empty()) {
      CsvTable csv{{"epoch", "train_loss", "validation_loss", "batches"}, {}};
      for (const auto& e : result.history) {
        csv.rows.push_back({std::to_string(e.epoch), format_number(e.train_loss), format_number(e.validation_loss),
                            std::to_string(e.batches)});
      }
      write_csv(csv, train->history);
    }
    progress(fmt::format("best epoch {}", result.best_epoch));
  });

  auto score = std::make_shared<ScoreArgs>();
  auto* s = rqi->add_subcommand("score", "Print RQI(target, reference); positive means target is better");
  s->add_option("--model", score->model, "Model file")->required()->check(CLI::ExistingFile);
  s->add_option("--target", score->target, "Image under test")->required()->check(CLI::ExistingFile);
  s->add_option("--reference", score->reference, "Reference image")->required()->check(CLI::ExistingFile);
  add_protocol_options(*s, score->protocol, "--seed,--protocol-seed");
  s->callback([score] {
    const RqiModel model = load_rqi_model(score->model);
    const double v = rqi_score(model, load_image(score->target), load_image(score->reference), score->protocol);
    emit_text("", format_number(v) + "\n");
  });

  auto batch = std::make_shared<MetricsOptions>();
  batch->metrics = {"rqi"};
  auto* b = rqi->add_subcommand("batch", "Score a metrics manifest; writes metric rows named rqi");
  b->add_option("--model", batch->rqi_model, "Model file")->required()->check(CLI::ExistingFile);
  b->add_option("--manifest", batch->manifest, "Image manifest (content_id,model_id,image_path,reference_path)")
      ->required()
      ->check(CLI::ExistingFile);
  b->add_option("--out,-o", batch->out, "Output metric CSV (default: stdout)");
  add_protocol_options(*b, batch->protocol, "--seed,--protocol-seed");
  b->callback([batch, &ctx] { run_metrics(*batch, ctx); });

  auto eval = std::make_shared<EvalArgs>();
  auto* e = rqi->add_subcommand("eval", "Mean per-content SRCC and sign accuracy on a synth manifest");
  e->add_option("--model", eval->model, "Model file")->required()->check(CLI::ExistingFile);
  e->add_option("--manifest,--data", eval->data, "manifest.csv written by 'synth make'")->required()->check(CLI::ExistingFile);
  e->add_option("--out,-o", eval->out, "Output CSV (default: stdout)");
  e->add_option("--min-gap", eval->min_gap, "Quality gap below which pairs are ignored for sign accuracy")
      ->capture_default_str();
  add_protocol_options(*e, eval->protocol);
  e->callback([eval, &ctx] {
    const RqiModel model = load_rqi_model(eval->model);
    const auto data = load_labeled_manifest(eval->data);
    const HeldoutReport r = evaluate_heldout(model, data, eval->protocol, eval->min_gap, ctx.resolved_jobs());
    CsvTable csv{{"key", "value"}, {}};
    csv.rows.push_back({"contents", std::to_string(data.size())});
    csv.rows.push_back({"contents_scored", std::to_string(r.content_srcc.size())});
    csv.rows.push_back({"mean_srcc", format_number(r.mean_srcc)});
    csv.rows.push_back({"sign_pairs", std::to_string(r.sign_pairs)});
    csv.rows.push_back({"sign_accuracy", format_number(r.sign_accuracy)});
    emit_text(eval->out, format_csv(csv));
  });
}

}  // namespace rqi::cli
