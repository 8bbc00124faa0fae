#pragma once

// Dataset I/O, training with cross-validation, evaluation, measurement and
// agreement reporting. Every command writes CSV files readable by CsvTable.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfpu/checkpoint.hpp"
#include "mfpu/config.hpp"
#include "mfpu/csv.hpp"
#include "mfpu/data.hpp"
#include "mfpu/model.hpp"
#include "mfpu/stats.hpp"

namespace mfpu {

// Datasets
//
// A dataset directory holds manifest.csv with columns
//   id,subject,phase,calibration_mm,image,mask
// where image and mask are PGM paths relative to the directory. Masks are
// stored for display (0 / 255). The source "synthetic:<count>" instead
// generates <count> phantom images, ED and ES alternating per subject.

std::optional<std::size_t> synthetic_count(std::string_view source);

std::vector<ImageSample> synthesize_samples(std::size_t count, std::size_t n, std::uint64_t seed);
std::vector<ImageSample> read_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const std::vector<ImageSample>& samples);

// Synthetic or on-disk samples, resized to n x n.
std::vector<ImageSample> load_dataset(std::string_view source, std::size_t n, std::uint64_t seed);

// Writes the dataset plus phantoms.csv with the analytic area, long-axis
// length and volume of every phantom.
void synth_command(std::size_t count, std::size_t n, std::uint64_t seed, const std::filesystem::path& out);

// Training

struct EpochRecord {
  std::size_t fold = 0;
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0;
  double loss = 0;        // mean per-image loss over the epoch
  double train_dice = 0;  // on the unaugmented training images
  std::optional<double> val_dice;
};

struct FitResult {
  Model<float> model;       // best validation Dice, or the last epoch without validation
  std::size_t best_epoch = 0;  // 0 = initial weights
  std::optional<double> best_val_dice;
  std::vector<EpochRecord> log;
};

// Augments `train` to augmentation_factor copies per image (the original plus
// elastic deformations), then runs max_epochs of shuffled mini-batch SGD.
FitResult fit_model(Model<float> model, const std::vector<ImageSample>& train, const std::vector<ImageSample>& validation,
                    const RunConfig& config, std::size_t fold = 0,
                    const std::function<void(const EpochRecord&)>& on_epoch = {});

GrayImage predict_mask(const Model<float>& model, const GrayImage& image, double niblack_k = 2.0);
double mean_dice(const Model<float>& model, const std::vector<ImageSample>& samples, double niblack_k = 2.0);

struct TrainSummary {
  std::vector<std::size_t> folds;  // per sample, in dataset order
  std::vector<std::filesystem::path> checkpoints;
  std::vector<FitResult> results;
};

// Writes config.json, folds.csv, train_log.csv and fold<k>.mfpu into
// config.output_dir. With folds == 1 every sample is used for training.
TrainSummary train_command(const RunConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});

CsvTable train_log_table(const std::vector<EpochRecord>& log);

// Throws ContractViolation when a subject appears in more than one fold of a
// folds.csv table.
void audit_folds(const CsvTable& folds);

// Evaluation

struct ImageMetrics {
  std::string id;
  std::string subject;
  Phase phase = Phase::Other;
  double dice = 0;
  double jaccard = 0;
  std::optional<double> hausdorff_mm;  // absent when either mask is empty
  std::optional<double> mad_mm;        // predicted contour to reference contour
};

ImageMetrics compare_masks(const ImageSample& truth, const GrayImage& predicted);
CsvTable metrics_table(const std::vector<ImageMetrics>& rows);
// metric,n,mean,sd,formatted
CsvTable metrics_summary(const std::vector<ImageMetrics>& rows);

struct EvalSelection {
  std::optional<std::filesystem::path> folds_csv;
  std::optional<std::size_t> fold;
};

// Segments every selected sample, writes metrics.csv, metrics_summary.csv and
// the predicted masks as a dataset under predictions/.
std::vector<ImageMetrics> eval_command(const std::filesystem::path& checkpoint, std::string_view data_source,
                                       const std::filesystem::path& out, const EvalSelection& selection = {},
                                       std::uint64_t seed = 0, double niblack_k = 2.0);

// Scores the masks of one dataset against another, matched by id.
std::vector<ImageMetrics> eval_masks_command(const std::filesystem::path& truth_dir, const std::filesystem::path& predicted_dir,
                                             const std::filesystem::path& out);

// Measurement

struct MeasurementRow {
  std::string id;
  std::string subject;
  Phase phase = Phase::Other;
  double calibration_mm = 0;
  double area_cm2 = 0;
  std::optional<double> length_cm;
  std::optional<double> volume_ml;
  bool multiple_components = false;
  std::string status = "ok";
};

struct EjectionFractionRow {
  std::string subject;
  std::string ed_id;
  std::string es_id;
  std::optional<double> ef_percent;
  std::string status = "ok";
};

MeasurementRow measure_sample(const ImageSample& sample);
std::vector<EjectionFractionRow> pair_ejection_fractions(const std::vector<MeasurementRow>& rows);

CsvTable measurements_table(const std::vector<MeasurementRow>& rows);
CsvTable ejection_fraction_table(const std::vector<EjectionFractionRow>& rows);
std::vector<MeasurementRow> parse_measurements(const CsvTable& table);
std::vector<EjectionFractionRow> parse_ejection_fractions(const CsvTable& table);

struct MeasureSummary {
  std::vector<MeasurementRow> images;
  std::vector<EjectionFractionRow> subjects;
};

MeasureSummary measure_samples(const std::vector<ImageSample>& samples);
MeasureSummary read_measurements(const std::filesystem::path& dir);

// Measures masks at their stored resolution (synthetic sources are drawn at
// synthetic_size) and writes measurements.csv and ejection_fraction.csv.
MeasureSummary measure_command(std::string_view data_source, const std::filesystem::path& out, std::uint64_t seed = 0,
                               std::size_t synthetic_size = 128);

// Reporting

struct AgreementRow {
  std::string parameter;  // volume, area, length, ef
  std::size_t n = 0;
  std::optional<LinearFit> fit;  // absent when either series is constant
  BlandAltman agreement;
  PairedTTest t_test;            // approximate, see README
  BoxPlot automatic_box;
  BoxPlot manual_box;
};

// Joins automatic and manual measurements by id (EF by subject). Rows whose
// value is missing on either side are skipped; ids present on one side only
// raise ContractViolation listing them.
std::vector<AgreementRow> agreement_report(const MeasureSummary& automatic, const MeasureSummary& manual,
                                           CvDenominator cv = CvDenominator::Sum);

CsvTable agreement_table(const std::vector<AgreementRow>& rows);
CsvTable boxplot_table(const std::vector<AgreementRow>& rows);

struct ReportInputs {
  std::optional<std::filesystem::path> automatic_dir;  // measure_command outputs
  std::optional<std::filesystem::path> manual_dir;
  std::vector<std::pair<std::string, std::filesystem::path>> groups;  // method name, metrics.csv
  std::string metric = "dice";
  CvDenominator cv = CvDenominator::Sum;
};

// Writes agreement.csv and boxplot.csv when both measurement directories are
// given, and anova.txt plus anova.csv when at least two method groups are.
void report_command(const ReportInputs& inputs, const std::filesystem::path& out);

}  // namespace mfpu
