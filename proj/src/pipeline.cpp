#include "mfpu/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mfpu/errors.hpp"
#include "mfpu/geometry.hpp"
#include "mfpu/image.hpp"
#include "mfpu/layers.hpp"
#include "mfpu/measure.hpp"
#include "mfpu/metrics.hpp"
#include "mfpu/optim.hpp"

namespace mfpu {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix(seed);
  for (std::uint64_t p : parts) h = splitmix(h ^ p);
  return h;
}

constexpr std::uint64_t kStreamPhantom = 1;
constexpr std::uint64_t kStreamAugment = 2;
constexpr std::uint64_t kStreamShuffle = 3;

std::string sanitize(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '"' || c == '\n' || c == '\r') c = ';';
  return text;
}

std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%03zu", i);
  return buf;
}

std::vector<PhantomPair> synthesize_pairs(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::vector<PhantomPair> pairs;
  for (std::size_t i = 0; 2 * i < count; ++i)
    pairs.push_back(generate_phantom(n, derive_seed(seed, {kStreamPhantom, i}), subject_name(i)));
  return pairs;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::size_t parse_count(const std::string& text, std::string_view what) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw FormatError(std::string(what) + ": '" + text + "' is not a non-negative integer");
  return v;
}

std::string list_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? " " : "") + ids[i];
  return out;
}

std::vector<double> present(const std::vector<std::optional<double>>& values) {
  std::vector<double> out;
  for (const auto& v : values)
    if (v) out.push_back(*v);
  return out;
}

}  // namespace

std::optional<std::size_t> synthetic_count(std::string_view source) {
  constexpr std::string_view prefix = "synthetic:";
  if (source.substr(0, prefix.size()) != prefix) return std::nullopt;
  const std::string digits(source.substr(prefix.size()));
  const std::size_t count = parse_count(digits, "synthetic source count");
  require(count > 0, "synthetic source needs at least one image");
  return count;
}

std::vector<ImageSample> synthesize_samples(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::vector<ImageSample> samples;
  for (auto& p : synthesize_pairs(count, n, seed)) {
    samples.push_back(std::move(p.ed));
    if (samples.size() < count) samples.push_back(std::move(p.es));
  }
  return samples;
}

std::vector<ImageSample> read_dataset(const fs::path& dir) {
  const auto manifest = CsvTable::read(dir / "manifest.csv");
  std::vector<ImageSample> samples;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < manifest.size(); ++r) {
    ImageSample s;
    s.id = manifest.at(r, "id");
    s.subject = manifest.at(r, "subject");
    if (!seen.insert(s.id).second) throw FormatError("manifest " + (dir / "manifest.csv").string() + " repeats id " + s.id);
    try {
      s.phase = parse_phase(manifest.at(r, "phase"));
    } catch (const ContractViolation& e) {
      throw FormatError("manifest row " + std::to_string(r + 1) + ": " + e.what());
    }
    s.calibration_mm = manifest.number(r, "calibration_mm");
    s.image = pgm_read(dir / manifest.at(r, "image"));
    s.mask = display_to_mask(pgm_read(dir / manifest.at(r, "mask")));
    try {
      s.validate();
    } catch (const ContractViolation& e) {
      throw FormatError("manifest row " + std::to_string(r + 1) + " (" + s.id + "): " + e.what());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_dataset(const fs::path& dir, const std::vector<ImageSample>& samples) {
  ensure_directory(dir / "images");
  ensure_directory(dir / "masks");
  CsvTable manifest({"id", "subject", "phase", "calibration_mm", "image", "mask"});
  for (const auto& s : samples) {
    s.validate();
    require(!s.id.empty() && s.id.find_first_of("/\\") == std::string::npos && s.id != "." && s.id != "..",
            "sample id '" + s.id + "' is not usable as a file name");
    const std::string image = "images/" + s.id + ".pgm";
    const std::string mask = "masks/" + s.id + ".pgm";
    pgm_write(dir / image, s.image);
    pgm_write(dir / mask, mask_to_display(s.mask));
    manifest.add_row({s.id, s.subject, std::string(phase_name(s.phase)), format_number(s.calibration_mm), image, mask});
  }
  manifest.write(dir / "manifest.csv");
}

std::vector<ImageSample> load_dataset(std::string_view source, std::size_t n, std::uint64_t seed) {
  if (const auto count = synthetic_count(source)) return synthesize_samples(*count, n, seed);
  auto samples = read_dataset(fs::path(source));
  for (auto& s : samples) s = resize_sample(s, n);
  return samples;
}

void synth_command(std::size_t count, std::size_t n, std::uint64_t seed, const fs::path& out) {
  require(count > 0, "synth needs a positive count");
  const auto pairs = synthesize_pairs(count, n, seed);
  std::vector<ImageSample> samples;
  CsvTable analytic({"id", "subject", "phase", "area_cm2", "length_cm", "volume_ml"});
  for (const auto& p : pairs) {
    for (const auto* entry : {&p.ed, &p.es}) {
      if (samples.size() == count) break;
      const TruncatedEllipse& shape = entry == &p.ed ? p.ed_shape : p.es_shape;
      const double cal = entry->calibration_mm;
      const double area = units::mm2_to_cm2(shape.area() * cal * cal);
      const double length = units::mm_to_cm(shape.long_axis() * cal);
      analytic.add_row({entry->id, entry->subject, std::string(phase_name(entry->phase)), format_number(area),
                        format_number(length), format_number(lv_volume(area, length))});
      samples.push_back(*entry);
    }
  }
  write_dataset(out, samples);
  analytic.write(out / "phantoms.csv");
}

GrayImage predict_mask(const Model<float>& model, const GrayImage& image, double niblack_k) {
  NoGradGuard no_grad;
  GrayImage mask(image.width, image.height);
  mask.pixels = model.segment(make_input<float>(image, niblack_k));
  return mask;
}

double mean_dice(const Model<float>& model, const std::vector<ImageSample>& samples, double niblack_k) {
  require(!samples.empty(), "mean_dice needs at least one sample");
  double total = 0;
  for (const auto& s : samples) total += dice(predict_mask(model, s.image, niblack_k), s.mask);
  return total / static_cast<double>(samples.size());
}

FitResult fit_model(Model<float> model, const std::vector<ImageSample>& train, const std::vector<ImageSample>& validation,
                    const RunConfig& config, std::size_t fold, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  require(!train.empty(), "training needs at least one sample");
  const std::size_t n = model.config().input_size;
  for (const auto* set : {&train, &validation})
    for (const auto& s : *set)
      require(s.image.width == n && s.image.height == n,
              "sample " + s.id + " is not " + std::to_string(n) + "x" + std::to_string(n));

  std::vector<ImageSample> augmented;
  augmented.reserve(train.size() * config.augmentation_factor);
  for (std::size_t i = 0; i < train.size(); ++i) {
    augmented.push_back(train[i]);
    for (std::size_t c = 1; c < config.augmentation_factor; ++c)
      augmented.push_back(elastic_deform(train[i], config.elastic(), derive_seed(config.seed, {kStreamAugment, fold, i, c})));
  }
  std::vector<Tensor<float>> inputs;
  inputs.reserve(augmented.size());
  for (const auto& s : augmented) inputs.push_back(make_input<float>(s.image, config.niblack_k));

  SgdOptimizer<float> optimizer(model.parameter_tensors(), config.sgd());
  std::mt19937_64 rng(derive_seed(config.seed, {kStreamShuffle, fold}));
  std::vector<std::size_t> order(augmented.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FitResult result{model, 0, std::nullopt, {}};
  if (!validation.empty()) result.best_val_dice = mean_dice(model, validation, config.niblack_k);
  std::vector<std::uint8_t> best = checkpoint_encode(model);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    optimizer.set_epoch(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const float weight = 1.0f / static_cast<float>(end - start);
      for (std::size_t j = start; j < end; ++j) {
        const auto& s = augmented[order[j]];
        auto loss = softmax_cross_entropy(model.forward(inputs[order[j]]), std::span<const std::uint8_t>(s.mask.pixels));
        const double value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss " << value << " at fold " << fold << ", epoch " << epoch + 1 << ", batch " << batch
              << " (image " << s.id << "), learning rate " << optimizer.current_learning_rate();
          throw NumericalError(msg.str());
        }
        total += value;
        backward(scale(loss, weight));
      }
      optimizer.step();
    }

    EpochRecord rec;
    rec.fold = fold;
    rec.epoch = epoch + 1;
    rec.learning_rate = optimizer.current_learning_rate();
    rec.loss = total / static_cast<double>(order.size());
    rec.train_dice = mean_dice(model, train, config.niblack_k);
    if (!validation.empty()) rec.val_dice = mean_dice(model, validation, config.niblack_k);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (validation.empty() || *rec.val_dice > *result.best_val_dice) {
      result.best_epoch = epoch + 1;
      result.best_val_dice = rec.val_dice;
      best = checkpoint_encode(model);
    }
  }
  result.model = checkpoint_decode(best);
  return result;
}

CsvTable train_log_table(const std::vector<EpochRecord>& log) {
  CsvTable t({"fold", "epoch", "learning_rate", "loss", "train_dice", "val_dice"});
  for (const auto& r : log)
    t.add_row({std::to_string(r.fold), std::to_string(r.epoch), format_number(r.learning_rate), format_number(r.loss),
               format_number(r.train_dice), format_optional(r.val_dice)});
  return t;
}

void audit_folds(const CsvTable& folds) {
  std::map<std::string, std::string> fold_of;
  std::vector<std::string> leaked;
  for (std::size_t r = 0; r < folds.size(); ++r) {
    const auto& subject = folds.at(r, "subject");
    const auto& fold = folds.at(r, "fold");
    const auto [it, inserted] = fold_of.emplace(subject, fold);
    if (!inserted && it->second != fold) leaked.push_back(subject);
  }
  require(leaked.empty(), "subjects assigned to more than one fold: " + list_ids(leaked));
}

TrainSummary train_command(const RunConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const ModelConfig model_config = config.model_config();
  model_config.validate();
  const auto samples = load_dataset(config.data_dir, config.input_size, config.seed);
  require(!samples.empty(), "dataset " + config.data_dir + " is empty");

  TrainSummary summary;
  if (config.folds == 1) {
    summary.folds.assign(samples.size(), 0);
  } else {
    std::vector<FoldKey> keys;
    for (const auto& s : samples) keys.push_back({s.subject, s.phase});
    summary.folds = make_folds(keys, config.folds, config.seed);
  }

  const fs::path out(config.output_dir);
  ensure_directory(out);
  save_run_config(out / "config.json", config);
  CsvTable fold_table({"id", "subject", "phase", "fold"});
  for (std::size_t i = 0; i < samples.size(); ++i)
    fold_table.add_row({samples[i].id, samples[i].subject, std::string(phase_name(samples[i].phase)), std::to_string(summary.folds[i])});
  audit_folds(fold_table);
  fold_table.write(out / "folds.csv");

  std::vector<EpochRecord> log;
  train_log_table(log).write(out / "train_log.csv");
  for (std::size_t k = 0; k < config.folds; ++k) {
    std::vector<ImageSample> train, validation;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (config.folds > 1 && summary.folds[i] == k) validation.push_back(samples[i]);
      else train.push_back(samples[i]);
    }
    require(!train.empty(), "fold " + std::to_string(k) + " leaves no training samples");
    auto result = fit_model(Model<float>::build(model_config, config.seed), train, validation, config, k, on_epoch);
    log.insert(log.end(), result.log.begin(), result.log.end());
    train_log_table(log).write(out / "train_log.csv");
    const fs::path path = out / ("fold" + std::to_string(k) + ".mfpu");
    checkpoint_write(result.model, path);
    summary.checkpoints.push_back(path);
    summary.results.push_back(std::move(result));
  }
  return summary;
}

ImageMetrics compare_masks(const ImageSample& truth, const GrayImage& predicted) {
  require(truth.mask.width == predicted.width && truth.mask.height == predicted.height,
          "prediction for " + truth.id + " has a different shape than its reference mask");
  ImageMetrics m;
  m.id = truth.id;
  m.subject = truth.subject;
  m.phase = truth.phase;
  m.dice = dice(predicted, truth.mask);
  m.jaccard = jaccard(predicted, truth.mask);
  const bool truth_empty = std::none_of(truth.mask.pixels.begin(), truth.mask.pixels.end(), [](auto v) { return v != 0; });
  const bool pred_empty = std::none_of(predicted.pixels.begin(), predicted.pixels.end(), [](auto v) { return v != 0; });
  if (truth_empty && pred_empty) {
    m.hausdorff_mm = 0.0;
    m.mad_mm = 0.0;
  } else if (!truth_empty && !pred_empty) {
    const auto reference = extract_contour(truth.mask).points;
    const auto automatic = extract_contour(predicted).points;
    m.hausdorff_mm = hausdorff(automatic, reference) * truth.calibration_mm;
    m.mad_mm = mad(automatic, reference) * truth.calibration_mm;
  }
  return m;
}

CsvTable metrics_table(const std::vector<ImageMetrics>& rows) {
  CsvTable t({"id", "subject", "phase", "dice", "jaccard", "hausdorff_mm", "mad_mm"});
  for (const auto& r : rows)
    t.add_row({r.id, r.subject, std::string(phase_name(r.phase)), format_number(r.dice), format_number(r.jaccard),
               format_optional(r.hausdorff_mm), format_optional(r.mad_mm)});
  return t;
}

CsvTable metrics_summary(const std::vector<ImageMetrics>& rows) {
  CsvTable t({"metric", "n", "mean", "sd", "formatted"});
  const auto add = [&t](const std::string& name, const std::vector<double>& values) {
    if (values.empty()) {
      t.add_row({name, "0", "", "", ""});
      return;
    }
    const double m = mean(values);
    const std::optional<double> sd = values.size() > 1 ? std::optional<double>(sample_sd(values)) : std::nullopt;
    t.add_row({name, std::to_string(values.size()), format_number(m), format_optional(sd),
               sd ? format_mean_sd(m, *sd) : std::string()});
  };
  std::vector<double> d, j;
  std::vector<std::optional<double>> h, a;
  for (const auto& r : rows) {
    d.push_back(r.dice);
    j.push_back(r.jaccard);
    h.push_back(r.hausdorff_mm);
    a.push_back(r.mad_mm);
  }
  add("dice", d);
  add("jaccard", j);
  add("hausdorff_mm", present(h));
  add("mad_mm", present(a));
  return t;
}

namespace {

void write_metrics(const fs::path& out, const std::vector<ImageMetrics>& rows) {
  ensure_directory(out);
  metrics_table(rows).write(out / "metrics.csv");
  metrics_summary(rows).write(out / "metrics_summary.csv");
}

}  // namespace

std::vector<ImageMetrics> eval_command(const fs::path& checkpoint, std::string_view data_source, const fs::path& out,
                                       const EvalSelection& selection, std::uint64_t seed, double niblack_k) {
  const auto model = checkpoint_read(checkpoint);
  auto samples = load_dataset(data_source, model.config().input_size, seed);
  require(selection.folds_csv.has_value() == selection.fold.has_value(), "fold selection needs both a folds table and a fold index");
  if (selection.folds_csv) {
    const auto folds = CsvTable::read(*selection.folds_csv);
    audit_folds(folds);
    std::set<std::string> keep;
    for (std::size_t r = 0; r < folds.size(); ++r)
      if (parse_count(folds.at(r, "fold"), "fold") == *selection.fold) keep.insert(folds.at(r, "id"));
    std::erase_if(samples, [&keep](const ImageSample& s) { return !keep.count(s.id); });
    require(!samples.empty(), "fold " + std::to_string(*selection.fold) + " selects no samples");
  }
  std::vector<ImageMetrics> rows;
  std::vector<ImageSample> predictions;
  for (const auto& s : samples) {
    ImageSample p = s;
    p.mask = predict_mask(model, s.image, niblack_k);
    rows.push_back(compare_masks(s, p.mask));
    predictions.push_back(std::move(p));
  }
  write_metrics(out, rows);
  write_dataset(out / "predictions", predictions);
  return rows;
}

std::vector<ImageMetrics> eval_masks_command(const fs::path& truth_dir, const fs::path& predicted_dir, const fs::path& out) {
  const auto truth = read_dataset(truth_dir);
  const auto predicted = read_dataset(predicted_dir);
  std::map<std::string, const ImageSample*> by_id;
  for (const auto& p : predicted) by_id[p.id] = &p;
  std::vector<std::string> missing;
  for (const auto& t : truth)
    if (!by_id.count(t.id)) missing.push_back(t.id);
  std::set<std::string> truth_ids;
  for (const auto& t : truth) truth_ids.insert(t.id);
  for (const auto& p : predicted)
    if (!truth_ids.count(p.id)) missing.push_back(p.id);
  require(missing.empty(), "ids present in only one dataset: " + list_ids(missing));
  std::vector<ImageMetrics> rows;
  for (const auto& t : truth) rows.push_back(compare_masks(t, by_id.at(t.id)->mask));
  write_metrics(out, rows);
  return rows;
}

MeasurementRow measure_sample(const ImageSample& sample) {
  sample.validate();
  MeasurementRow row;
  row.id = sample.id;
  row.subject = sample.subject;
  row.phase = sample.phase;
  row.calibration_mm = sample.calibration_mm;
  row.area_cm2 = lv_area(sample.mask, sample.calibration_mm);
  try {
    const auto m = measure_lv(sample.mask, sample.calibration_mm);
    row.length_cm = m.length_cm;
    row.volume_ml = m.volume_ml;
    row.multiple_components = m.multiple_components;
  } catch (const MeasurementError& e) {
    row.status = sanitize(std::string("error: ") + e.what());
  } catch (const ContractViolation& e) {
    row.status = sanitize(std::string("error: ") + e.what());
  }
  return row;
}

std::vector<EjectionFractionRow> pair_ejection_fractions(const std::vector<MeasurementRow>& rows) {
  std::map<std::string, std::pair<std::vector<const MeasurementRow*>, std::vector<const MeasurementRow*>>> by_subject;
  for (const auto& r : rows) {
    if (r.phase == Phase::ED) by_subject[r.subject].first.push_back(&r);
    else if (r.phase == Phase::ES) by_subject[r.subject].second.push_back(&r);
  }
  std::vector<EjectionFractionRow> out;
  for (const auto& [subject, phases] : by_subject) {
    const auto& [ed, es] = phases;
    EjectionFractionRow row;
    row.subject = subject;
    if (ed.size() == 1) row.ed_id = ed[0]->id;
    if (es.size() == 1) row.es_id = es[0]->id;
    if (ed.empty() || es.empty()) {
      row.status = "unmatched";
    } else if (ed.size() > 1 || es.size() > 1) {
      row.status = "ambiguous";
    } else if (!ed[0]->volume_ml || !es[0]->volume_ml) {
      row.status = "measurement error";
    } else {
      try {
        row.ef_percent = ejection_fraction(*ed[0]->volume_ml, *es[0]->volume_ml);
        if (ejection_fraction_warning(*ed[0]->volume_ml, *es[0]->volume_ml)) row.status = "warning: ES volume outside [0; ED]";
      } catch (const ContractViolation& e) {
        row.status = sanitize(std::string("error: ") + e.what());
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

CsvTable measurements_table(const std::vector<MeasurementRow>& rows) {
  CsvTable t({"id", "subject", "phase", "calibration_mm", "length_cm", "area_cm2", "volume_ml", "multiple_components", "status"});
  for (const auto& r : rows)
    t.add_row({r.id, r.subject, std::string(phase_name(r.phase)), format_number(r.calibration_mm), format_optional(r.length_cm),
               format_number(r.area_cm2), format_optional(r.volume_ml), r.multiple_components ? "1" : "0", r.status});
  return t;
}

CsvTable ejection_fraction_table(const std::vector<EjectionFractionRow>& rows) {
  CsvTable t({"subject", "ed_id", "es_id", "ef_percent", "status"});
  for (const auto& r : rows) t.add_row({r.subject, r.ed_id, r.es_id, format_optional(r.ef_percent), r.status});
  return t;
}

std::vector<MeasurementRow> parse_measurements(const CsvTable& t) {
  std::vector<MeasurementRow> rows;
  for (std::size_t i = 0; i < t.size(); ++i) {
    MeasurementRow r;
    r.id = t.at(i, "id");
    r.subject = t.at(i, "subject");
    try {
      r.phase = parse_phase(t.at(i, "phase"));
    } catch (const ContractViolation& e) {
      throw FormatError("measurements row " + std::to_string(i + 1) + ": " + e.what());
    }
    r.calibration_mm = t.number(i, "calibration_mm");
    r.length_cm = t.optional_number(i, "length_cm");
    r.area_cm2 = t.number(i, "area_cm2");
    r.volume_ml = t.optional_number(i, "volume_ml");
    r.multiple_components = t.at(i, "multiple_components") == "1";
    r.status = t.at(i, "status");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<EjectionFractionRow> parse_ejection_fractions(const CsvTable& t) {
  std::vector<EjectionFractionRow> rows;
  for (std::size_t i = 0; i < t.size(); ++i)
    rows.push_back({t.at(i, "subject"), t.at(i, "ed_id"), t.at(i, "es_id"), t.optional_number(i, "ef_percent"), t.at(i, "status")});
  return rows;
}

MeasureSummary measure_samples(const std::vector<ImageSample>& samples) {
  MeasureSummary s;
  for (const auto& sample : samples) s.images.push_back(measure_sample(sample));
  s.subjects = pair_ejection_fractions(s.images);
  return s;
}

MeasureSummary read_measurements(const fs::path& dir) {
  return {parse_measurements(CsvTable::read(dir / "measurements.csv")),
          parse_ejection_fractions(CsvTable::read(dir / "ejection_fraction.csv"))};
}

MeasureSummary measure_command(std::string_view data_source, const fs::path& out, std::uint64_t seed, std::size_t synthetic_size) {
  const auto count = synthetic_count(data_source);
  const auto samples = count ? synthesize_samples(*count, synthetic_size, seed) : read_dataset(fs::path(data_source));
  auto summary = measure_samples(samples);
  ensure_directory(out);
  measurements_table(summary.images).write(out / "measurements.csv");
  ejection_fraction_table(summary.subjects).write(out / "ejection_fraction.csv");
  return summary;
}

namespace {

using Pairs = std::map<std::string, std::pair<std::optional<double>, std::optional<double>>>;

void check_keys(const std::set<std::string>& a, const std::set<std::string>& b, std::string_view what) {
  std::vector<std::string> odd;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(odd));
  require(odd.empty(), std::string(what) + " present in only one of the automatic and manual inputs: " + list_ids(odd));
}

std::optional<AgreementRow> agree(const std::string& parameter, const Pairs& pairs, CvDenominator cv) {
  std::vector<double> a, m;
  for (const auto& [key, values] : pairs)
    if (values.first && values.second) {
      a.push_back(*values.first);
      m.push_back(*values.second);
    }
  if (a.size() < 2) return std::nullopt;
  AgreementRow row;
  row.parameter = parameter;
  row.n = a.size();
  try {
    row.fit = pearson_fit(a, m);
  } catch (const ContractViolation&) {
    row.fit.reset();
  }
  row.agreement = bland_altman(a, m, cv);
  row.t_test = paired_t_test(a, m);
  row.automatic_box = box_plot(a);
  row.manual_box = box_plot(m);
  return row;
}

}  // namespace

std::vector<AgreementRow> agreement_report(const MeasureSummary& automatic, const MeasureSummary& manual, CvDenominator cv) {
  std::set<std::string> ids_a, ids_m, subj_a, subj_m;
  for (const auto& r : automatic.images) ids_a.insert(r.id);
  for (const auto& r : manual.images) ids_m.insert(r.id);
  for (const auto& r : automatic.subjects) subj_a.insert(r.subject);
  for (const auto& r : manual.subjects) subj_m.insert(r.subject);
  check_keys(ids_a, ids_m, "image ids");
  check_keys(subj_a, subj_m, "subjects");

  Pairs volume, area, length, ef;
  for (const auto& r : automatic.images) {
    volume[r.id].first = r.volume_ml;
    area[r.id].first = r.area_cm2;
    length[r.id].first = r.length_cm;
  }
  for (const auto& r : manual.images) {
    volume[r.id].second = r.volume_ml;
    area[r.id].second = r.area_cm2;
    length[r.id].second = r.length_cm;
  }
  for (const auto& r : automatic.subjects) ef[r.subject].first = r.ef_percent;
  for (const auto& r : manual.subjects) ef[r.subject].second = r.ef_percent;

  std::vector<AgreementRow> rows;
  for (auto row : {agree("volume", volume, cv), agree("area", area, cv), agree("length", length, cv), agree("ef", ef, cv)})
    if (row) rows.push_back(std::move(*row));
  return rows;
}

CsvTable agreement_table(const std::vector<AgreementRow>& rows) {
  CsvTable t({"parameter", "n", "slope", "intercept", "r", "bias", "sd", "loa_low", "loa_high", "rpc", "cv_percent", "t",
              "df", "p_paired_t_approx"});
  for (const auto& r : rows) {
    const auto fit = [&r](double LinearFit::*field) { return r.fit ? format_number((*r.fit).*field) : std::string(); };
    const auto& b = r.agreement;
    t.add_row({r.parameter, std::to_string(r.n), fit(&LinearFit::slope), fit(&LinearFit::intercept), fit(&LinearFit::r),
               format_number(b.bias), format_number(b.sd), format_number(b.loa_low), format_number(b.loa_high),
               format_number(b.rpc), format_optional(b.cv_percent), format_number(r.t_test.t), format_number(r.t_test.df),
               format_number(r.t_test.p)});
  }
  return t;
}

CsvTable boxplot_table(const std::vector<AgreementRow>& rows) {
  CsvTable t({"parameter", "source", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers"});
  for (const auto& r : rows) {
    for (const auto& [source, box] : {std::pair{"automatic", &r.automatic_box}, std::pair{"manual", &r.manual_box}}) {
      std::string outliers;
      for (std::size_t i = 0; i < box->outliers.size(); ++i) outliers += (i ? ";" : "") + format_number(box->outliers[i]);
      t.add_row({r.parameter, source, format_number(box->q1), format_number(box->median), format_number(box->q3),
                 format_number(box->whisker_low), format_number(box->whisker_high), outliers});
    }
  }
  return t;
}

void report_command(const ReportInputs& inputs, const fs::path& out) {
  require(inputs.automatic_dir.has_value() == inputs.manual_dir.has_value(),
          "agreement needs both automatic and manual measurement directories");
  require(inputs.groups.size() != 1, "ANOVA needs at least two method groups");
  require(inputs.automatic_dir || !inputs.groups.empty(), "report has nothing to compare");
  ensure_directory(out);

  if (inputs.automatic_dir) {
    const auto rows = agreement_report(read_measurements(*inputs.automatic_dir), read_measurements(*inputs.manual_dir), inputs.cv);
    agreement_table(rows).write(out / "agreement.csv");
    boxplot_table(rows).write(out / "boxplot.csv");
  }

  if (inputs.groups.size() >= 2) {
    std::vector<std::vector<double>> groups;
    for (const auto& [name, path] : inputs.groups) {
      const auto table = CsvTable::read(path);
      std::vector<double> values;
      for (std::size_t r = 0; r < table.size(); ++r)
        if (const auto v = table.optional_number(r, inputs.metric)) values.push_back(*v);
      std::sort(values.begin(), values.end());
      groups.push_back(std::move(values));
    }
    const auto anova = anova_oneway(groups);
    std::string text = "One-way ANOVA of " + inputs.metric + " across";
    for (const auto& g : inputs.groups) text += " " + g.first;
    text += "\n\n" + format_anova(anova);
    write_text(out / "anova.txt", text);
    CsvTable t({"source", "ss", "df", "ms", "f", "p"});
    t.add_row({"between", format_number(anova.ss_between), format_number(anova.df_between), format_number(anova.ms_between),
               format_number(anova.f), format_number(anova.p)});
    t.add_row({"within", format_number(anova.ss_within), format_number(anova.df_within), format_number(anova.ms_within), "", ""});
    t.add_row({"total", format_number(anova.ss_total), format_number(anova.df_total), "", "", ""});
    t.write(out / "anova.csv");
  }
}

}  // namespace mfpu
