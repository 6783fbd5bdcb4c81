// biomass: command-line front end for label imputation, splitting, training,
// prediction, evaluation and augmentation previews.
//
// Exit codes: 0 success, 2 input or configuration error, 3 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "biomass/errors.hpp"
#include "biomass/imputation.hpp"
#include "biomass/labels.hpp"
#include "biomass/metrics.hpp"
#include "biomass/pipeline.hpp"
#include "biomass/rng.hpp"
#include "biomass/run_config.hpp"

namespace fs = std::filesystem;
using namespace biomass;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct ImputeArgs {
  std::string labels, method = "mean", fit_scope = "all", out;
  int iterations = 5;
  std::uint64_t seed = 0;
};

int cmd_impute(const ImputeArgs& a) {
  ImputationMethod m;
  m.variant = parse_imputation_variant(a.method);
  m.regression_iterations = a.iterations;
  m.fit_scope = parse_fit_scope(a.fit_scope);
  m.seed = derive_seed({a.seed, fnv1a("imputation")});
  if (m.regression_iterations < 1) throw InputError("--iterations must be >= 1");
  const auto samples = load_labels(a.labels);

  std::vector<Sample> out;
  std::cout << std::setprecision(10);
  if (m.variant == ImputationVariant::Regression) {
    auto r = impute_regression_detailed(samples, m.regression_iterations, m.seed, m.fit_scope);
    std::cout << "white fraction regression (" << to_string(m.fit_scope) << ", "
              << m.regression_iterations << " iterations)\n";
    const auto& names = RegressionFit::names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::cout << "  " << std::left << std::setw(12) << names[i] << ' ' << r.fit.coefficients[i] << '\n';
    }
    out = std::move(r.samples);
  } else {
    const auto f = m.variant == ImputationVariant::Mean ? mean_fractions(samples) : median_fractions(samples);
    std::cout << to_string(m.variant) << " fractions: white " << f.white_frac << ", red " << f.red_frac << '\n';
    out = impute(samples, m);
  }
  ensure_parent(a.out);
  save_labels(a.out, out);
  std::cout << "wrote " << out.size() << " rows to " << a.out << '\n';
  return 0;
}

struct SplitArgs {
  std::string labels, out;
  std::size_t val_count = 52;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a) {
  const auto samples = load_labels(a.labels);
  const auto m = split_dataset(samples, a.val_count, a.seed);
  ensure_parent(a.out);
  save_manifest(a.out, m);
  std::cout << "train " << m.train_ids.size() << ", val " << m.val_ids.size() << " -> " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, out_dir;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = RunConfig::load(a.config);
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (!fs::is_regular_file(cfg.labels_csv)) throw InputError("labels_csv not found: " + cfg.labels_csv.string());
  if (!fs::is_directory(cfg.image_dir)) throw InputError("image_dir not found: " + cfg.image_dir.string());
  if (cfg.split_manifest && !fs::is_regular_file(*cfg.split_manifest)) {
    throw InputError("split.manifest not found: " + cfg.split_manifest->string());
  }
  if (const auto* f = std::get_if<WeightFile>(&cfg.train.extractor.weights_source)) {
    if (!fs::is_regular_file(f->path)) throw InputError("extractor weight file not found: " + f->path.string());
  }

  auto samples = load_labels(cfg.labels_csv);
  if (needs_imputation(samples)) {
    std::cout << "labels incomplete; imputing with " << to_string(cfg.train.imputation.variant) << '\n';
    samples = impute(samples, cfg.train.imputation);
  }
  const auto split = cfg.split_manifest ? load_manifest(*cfg.split_manifest)
                                        : split_dataset(samples, cfg.val_count, cfg.train.seed);
  attach_images(samples, cfg.image_dir);  // missing files are runtime errors (exit 3)

  fs::create_directories(cfg.out_dir);
  if (!cfg.split_manifest) save_manifest(cfg.out_dir / "split.txt", split);

  TrainHooks hooks;
  hooks.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "  train_loss " << format_number(r.train_loss) << "  val_loss "
              << format_number(r.val_loss) << "  lr " << format_number(r.lr) << '\n';
  };
  const auto result = train(samples, split, cfg.train, hooks);
  result.best.save(cfg.out_dir / "checkpoint.biom");
  save_history(cfg.out_dir / "history.csv", result.history);
  std::cout << "best epoch " << result.best.epoch << ", best val loss "
            << format_number(result.best.val_loss) << '\n'
            << "wrote " << (cfg.out_dir / "checkpoint.biom").string() << " and "
            << (cfg.out_dir / "history.csv").string() << '\n';
  return 0;
}

struct PredictArgs {
  std::string checkpoint, images, out;
};

int cmd_predict(const PredictArgs& a) {
  const auto ckpt = Checkpoint::load(a.checkpoint);
  const auto rows = predict_directory(ckpt, a.images);
  ensure_parent(a.out);
  save_predictions(a.out, rows);
  std::cout << "wrote " << rows.size() << " predictions to " << a.out << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string predictions, truth, out, overall = "pooled";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto preds = load_predictions(a.predictions);
  const auto truth = truth_rows(load_labels(a.truth));
  const auto report = evaluate(preds, truth, parse_overall_mode(a.overall));
  write_report_table(std::cout, report);
  if (!a.out.empty()) {
    ensure_parent(a.out);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw InputError("cannot write report: " + a.out);
    write_report_csv(out, report);
  }
  return 0;
}

struct PreviewArgs {
  std::string image, config, out_dir;
  int n = 8;
};

int cmd_augment_preview(const PreviewArgs& a) {
  const auto cfg = RunConfig::load(a.config, false);
  if (a.n < 1) throw InputError("--n must be >= 1");
  const Image source = read_image(a.image);
  Sample s;
  s.image_id = fs::path(a.image).stem().string();
  s.labels = {100, 0, 0, 0, 0};
  auto aug = cfg.train.augment;
  aug.variants_per_image = a.n;
  const AugmentStream stream({s}, aug, 0, derive_seed({cfg.train.seed, fnv1a("augment")}));
  fs::create_directories(a.out_dir);
  for (int v = 0; v < a.n; ++v) {
    const auto item = stream.item(0, v, source);
    std::ostringstream name;
    name << s.image_id << "_aug" << std::setw(3) << std::setfill('0') << v << ".png";
    write_png(fs::path(a.out_dir) / name.str(), item.image);
  }
  std::cout << "wrote " << a.n << " previews to " << a.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grass/clover biomass composition: imputation, training, prediction, evaluation"};
  app.require_subcommand(1);

  ImputeArgs impute_args;
  auto* impute = app.add_subcommand("impute", "Fill missing white/red clover labels");
  impute->add_option("--labels", impute_args.labels, "Input labels CSV")->required();
  impute->add_option("--method", impute_args.method, "mean | median | regression")->capture_default_str();
  impute->add_option("--iterations", impute_args.iterations, "Regression rounds")->capture_default_str();
  impute->add_option("--fit-scope", impute_args.fit_scope, "Regression fit rows: all | complete_only")
      ->capture_default_str();
  impute->add_option("--seed", impute_args.seed, "Seed for the regression initialization")->capture_default_str();
  impute->add_option("--out", impute_args.out, "Output labels CSV")->required();

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Write a seeded train/validation manifest");
  split->add_option("--labels", split_args.labels, "Labels CSV")->required();
  split->add_option("--val-count", split_args.val_count, "Validation samples")->capture_default_str();
  split->add_option("--seed", split_args.seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out", split_args.out, "Manifest path")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the head and keep the best checkpoint");
  train_cmd->add_option("--config", train_args.config, "key=value run config")->required();
  train_cmd->add_option("--out-dir", train_args.out_dir, "Overrides out_dir from the config");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Predict percentages for a directory of images");
  predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--images", predict_args.images, "Image directory")->required();
  predict_cmd->add_option("--out", predict_args.out, "Prediction CSV")->required();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-component RMSE/MAE of predictions against labels");
  eval_cmd->add_option("--predictions", eval_args.predictions, "Prediction CSV")->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Complete labels CSV")->required();
  eval_cmd->add_option("--out", eval_args.out, "Optional report CSV");
  eval_cmd->add_option("--overall", eval_args.overall, "Overall metric: pooled | mean")->capture_default_str();

  PreviewArgs preview_args;
  bool preview = false;
  auto* aug_cmd = app.add_subcommand("augment", "Augmentation tools");
  aug_cmd->add_flag("--preview", preview, "Write augmented copies of one image")->required();
  aug_cmd->add_option("--image", preview_args.image, "Source image")->required();
  aug_cmd->add_option("--config", preview_args.config, "Run config providing augment.* and seed")->required();
  aug_cmd->add_option("--n", preview_args.n, "Number of previews")->capture_default_str();
  aug_cmd->add_option("--out-dir", preview_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*impute) return cmd_impute(impute_args);
    if (*split) return cmd_split(split_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*predict_cmd) return cmd_predict(predict_args);
    if (*eval_cmd) return cmd_evaluate(eval_args);
    if (*aug_cmd) return cmd_augment_preview(preview_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
