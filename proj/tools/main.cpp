#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfpu/errors.hpp"
#include "mfpu/pipeline.hpp"

using namespace mfpu;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arch;
  std::optional<std::string> out;
};

RunConfig resolve(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (c.arch) config.architecture = parse_architecture(*c.arch);
  if (c.out) config.output_dir = *c.out;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "RunConfig JSON file");
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
  cmd->add_option("--arch", c.arch, "unet | dilated-unet | mfp-unet (overrides the config)")
      ->check(CLI::IsMember({"unet", "dilated-unet", "mfp-unet"}));
  cmd->add_option("--out", c.out, "Output directory (overrides the config)");
}

void print_summary(const std::vector<ImageMetrics>& rows) {
  const auto summary = metrics_summary(rows);
  for (std::size_t r = 0; r < summary.size(); ++r)
    std::cout << summary.at(r, "metric") << ": " << summary.at(r, "formatted") << " (n=" << summary.at(r, "n") << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MFP-Unet segmentation and left-ventricle measurement toolkit"};
  app.require_subcommand(1);

  Common synth_opts, train_opts, eval_opts, measure_opts, report_opts;

  std::size_t synth_count = 20, synth_size = 128;
  auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset");
  add_common(synth, synth_opts);
  synth->add_option("--count", synth_count, "Number of images (ED and ES alternate per subject)");
  synth->add_option("--size", synth_size, "Canvas size N");

  std::optional<std::string> train_data;
  std::optional<std::size_t> train_epochs;
  auto* train = app.add_subcommand("train", "Cross-validated training");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "Dataset directory or synthetic:<count> (overrides the config)");
  train->add_option("--epochs", train_epochs, "Maximum epochs (overrides the config)");

  std::string eval_checkpoint, eval_data, eval_truth, eval_pred, eval_folds;
  std::optional<std::size_t> eval_fold;
  auto* eval = app.add_subcommand("eval", "Segment and score a dataset, or score one mask set against another");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_checkpoint, "Model checkpoint (.mfpu)");
  eval->add_option("--data", eval_data, "Dataset directory or synthetic:<count>");
  eval->add_option("--folds", eval_folds, "folds.csv from a training run");
  eval->add_option("--fold", eval_fold, "Restrict to this fold index");
  eval->add_option("--truth", eval_truth, "Reference dataset directory (mask comparison mode)");
  eval->add_option("--pred", eval_pred, "Predicted dataset directory (mask comparison mode)");

  std::string measure_data;
  std::size_t measure_size = 128;
  auto* measure = app.add_subcommand("measure", "Length, area, volume and ejection fraction from masks");
  add_common(measure, measure_opts);
  measure->add_option("--data", measure_data, "Dataset directory or synthetic:<count>")->required();
  measure->add_option("--size", measure_size, "Canvas size for synthetic sources");

  std::string report_auto, report_manual, report_metric = "dice", report_cv = "sum";
  std::vector<std::string> report_groups;
  auto* report = app.add_subcommand("report", "Agreement statistics, box plots and ANOVA");
  add_common(report, report_opts);
  report->add_option("--auto", report_auto, "measure output directory for the automatic masks");
  report->add_option("--manual", report_manual, "measure output directory for the manual masks");
  report->add_option("--group", report_groups, "name=metrics.csv, repeat for each method");
  report->add_option("--metric", report_metric, "metrics.csv column used for ANOVA");
  report->add_option("--cv", report_cv, "Coefficient of variation denominator")->check(CLI::IsMember({"sum", "average"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto config = resolve(synth_opts);
      synth_command(synth_count, synth_size, config.seed, config.output_dir);
      std::cout << "wrote " << synth_count << " images to " << config.output_dir << "\n";
    } else if (*train) {
      auto config = resolve(train_opts);
      if (train_data) config.data_dir = *train_data;
      if (train_epochs) config.max_epochs = *train_epochs;
      config.validate();
      const auto start = std::chrono::steady_clock::now();
      const auto summary = train_command(config, [](const EpochRecord& r) {
        std::printf("fold %zu epoch %zu lr %.6g loss %.5f train_dice %.4f", r.fold, r.epoch, r.learning_rate, r.loss, r.train_dice);
        if (r.val_dice) std::printf(" val_dice %.4f", *r.val_dice);
        std::printf("\n");
        std::fflush(stdout);
      });
      for (std::size_t k = 0; k < summary.checkpoints.size(); ++k)
        std::cout << summary.checkpoints[k].string() << " (epoch " << summary.results[k].best_epoch << ")\n";
      std::cout << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
    } else if (*eval) {
      const auto config = resolve(eval_opts);
      if (!eval_truth.empty() || !eval_pred.empty()) {
        require(!eval_truth.empty() && !eval_pred.empty(), "mask comparison needs both --truth and --pred");
        print_summary(eval_masks_command(eval_truth, eval_pred, config.output_dir));
      } else {
        require(!eval_checkpoint.empty(), "eval needs --checkpoint (or --truth and --pred)");
        EvalSelection selection;
        if (!eval_folds.empty()) selection.folds_csv = eval_folds;
        selection.fold = eval_fold;
        const auto start = std::chrono::steady_clock::now();
        const auto rows = eval_command(eval_checkpoint, eval_data.empty() ? config.data_dir : eval_data, config.output_dir,
                                       selection, config.seed, config.niblack_k);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        print_summary(rows);
        std::cout << "inference " << (rows.empty() ? 0.0 : seconds / rows.size()) << " s per image\n";
      }
    } else if (*measure) {
      const auto config = resolve(measure_opts);
      const auto summary = measure_command(measure_data, config.output_dir, config.seed, measure_size);
      std::size_t failed = 0;
      for (const auto& r : summary.images) failed += r.status != "ok";
      std::cout << "measured " << summary.images.size() << " images (" << failed << " with errors), "
                << summary.subjects.size() << " subjects\n";
    } else if (*report) {
      const auto config = resolve(report_opts);
      ReportInputs inputs;
      if (!report_auto.empty()) inputs.automatic_dir = report_auto;
      if (!report_manual.empty()) inputs.manual_dir = report_manual;
      for (const auto& g : report_groups) {
        const auto eq = g.find('=');
        require(eq != std::string::npos && eq > 0, "--group expects name=path, got '" + g + "'");
        inputs.groups.emplace_back(g.substr(0, eq), g.substr(eq + 1));
      }
      inputs.metric = report_metric;
      inputs.cv = report_cv == "average" ? CvDenominator::Average : CvDenominator::Sum;
      report_command(inputs, config.output_dir);
      std::cout << "report written to " << config.output_dir << "\n";
    }
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
