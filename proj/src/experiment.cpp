#include "mdn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mdn/dcor.hpp"
#include "mdn/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mdn {

namespace {

using nlohmann::json;

Matrix design_for(const MdnConfig& mdn_cfg, const SyntheticDataset& ds) {
  if (!mdn_cfg.control_labels) return assemble_design(ds.sigma_b, nullptr, mdn_cfg.include_intercept);
  Matrix labels(ds.size(), 1);
  for (std::size_t i = 0; i < ds.size(); ++i) labels(i, 0) = ds.labels[i];
  return assemble_design(ds.sigma_b, &labels, mdn_cfg.include_intercept);
}

std::string format_g6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

json range_json(const Range& r) { return json::array({r.low, r.high}); }

Range range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range must be [low, high]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Applies `fn(key, value)` to every entry, rejecting keys not in `allowed`.
template <typename Fn>
void for_each_known(const json& obj, std::initializer_list<std::string_view> allowed,
                    const char* section, Fn fn) {
  if (!obj.is_object()) throw std::invalid_argument(std::string(section) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument(std::string("unknown config key '") + section + "." + key + "'");
    }
    fn(key, value);
  }
}

// Activation buffers are hundreds of megabytes and are reallocated every
// batch; keep them on the heap instead of mapping fresh pages each time.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

double final_metric_sd(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

void ExperimentConfig::validate(std::size_t dataset_size) const {
  if (runs < 1) throw std::invalid_argument("experiment: runs must be >= 1");
  if (epochs < 1) throw std::invalid_argument("experiment: epochs must be >= 1");
  if (variants.empty()) throw std::invalid_argument("experiment: no variants configured");
  if (batch_sizes.empty()) throw std::invalid_argument("experiment: no batch sizes configured");
  for (std::size_t b : batch_sizes) {
    if (b == 0 || b > dataset_size) {
      throw std::invalid_argument("experiment: batch size " + std::to_string(b) +
                                  " must be in [1, " + std::to_string(dataset_size) + "]");
    }
  }
  if (!(optimizer.learning_rate >= 0.0)) throw std::invalid_argument("experiment: bad learning rate");
  if (!(mdn_eta > 0.0 && mdn_eta <= 1.0)) throw std::invalid_argument("experiment: mdn eta must be in (0, 1]");
}

json to_json(const ExperimentConfig& cfg) {
  json variants = json::array();
  for (Variant v : cfg.variants) variants.push_back(to_string(v));
  const auto& s = cfg.synth;
  const auto& o = cfg.optimizer;
  const auto& a = cfg.arch;
  return json{
      {"synth",
       {{"n_per_group", s.n_per_group},
        {"image_size", s.image_size},
        {"sigma_a_g1", range_json(s.sigma_a_g1)},
        {"sigma_a_g2", range_json(s.sigma_a_g2)},
        {"sigma_b_g1", range_json(s.sigma_b_g1)},
        {"sigma_b_g2", range_json(s.sigma_b_g2)},
        {"blob_spatial_std", s.blob_spatial_std},
        {"quadrant1_magnitude", s.quadrant1_magnitude},
        {"pixel_noise_std", s.pixel_noise_std},
        {"seed", s.seed}}},
      {"dataset", cfg.dataset_path ? json(cfg.dataset_path->string()) : json(nullptr)},
      {"variants", variants},
      {"batch_sizes", cfg.batch_sizes},
      {"runs", cfg.runs},
      {"epochs", cfg.epochs},
      {"optimizer",
       {{"kind", o.kind == nn::OptimizerKind::Sgd ? "sgd" : "adam"},
        {"learning_rate", o.learning_rate},
        {"momentum", o.momentum},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"eps", o.eps}}},
      {"arch",
       {{"image_size", a.image_size},
        {"conv1_channels", a.conv1_channels},
        {"conv2_channels", a.conv2_channels},
        {"kernel", a.kernel},
        {"fc1_units", a.fc1_units},
        {"gn_groups", a.gn_groups},
        {"gemm_precision", a.gemm_precision == nn::GemmPrecision::F32 ? "f32" : "f64"}}},
      {"mdn",
       {{"intercept", cfg.mdn_intercept},
        {"eta", cfg.mdn_eta},
        {"control_labels", cfg.mdn_control_labels}}},
      {"holdout", cfg.holdout},
      {"output_dir", cfg.output_dir.string()},
      {"seed", cfg.base_seed},
      {"jobs", cfg.jobs}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig cfg) {
  for_each_known(
      j,
      {"synth", "dataset", "variants", "batch_sizes", "runs", "epochs", "optimizer", "arch", "mdn",
       "holdout", "output_dir", "seed", "jobs"},
      "config", [&](const std::string& key, const json& v) {
        if (key == "synth") {
          auto& s = cfg.synth;
          for_each_known(v,
                         {"n_per_group", "image_size", "sigma_a_g1", "sigma_a_g2", "sigma_b_g1",
                          "sigma_b_g2", "blob_spatial_std", "quadrant1_magnitude",
                          "pixel_noise_std", "seed"},
                         "synth", [&](const std::string& k, const json& x) {
                           if (k == "n_per_group") s.n_per_group = x.get<std::uint32_t>();
                           else if (k == "image_size") s.image_size = x.get<std::uint32_t>();
                           else if (k == "sigma_a_g1") s.sigma_a_g1 = range_from(x);
                           else if (k == "sigma_a_g2") s.sigma_a_g2 = range_from(x);
                           else if (k == "sigma_b_g1") s.sigma_b_g1 = range_from(x);
                           else if (k == "sigma_b_g2") s.sigma_b_g2 = range_from(x);
                           else if (k == "blob_spatial_std") s.blob_spatial_std = x.get<double>();
                           else if (k == "quadrant1_magnitude") s.quadrant1_magnitude = x.get<double>();
                           else if (k == "pixel_noise_std") s.pixel_noise_std = x.get<double>();
                           else s.seed = x.get<std::uint64_t>();
                         });
        } else if (key == "dataset") {
          if (v.is_null()) cfg.dataset_path.reset();
          else cfg.dataset_path = v.get<std::string>();
        } else if (key == "variants") {
          cfg.variants.clear();
          for (const auto& name : v) cfg.variants.push_back(parse_variant(name.get<std::string>()));
        } else if (key == "batch_sizes") {
          cfg.batch_sizes = v.get<std::vector<std::size_t>>();
        } else if (key == "runs") {
          cfg.runs = v.get<std::size_t>();
        } else if (key == "epochs") {
          cfg.epochs = v.get<std::size_t>();
        } else if (key == "optimizer") {
          auto& o = cfg.optimizer;
          for_each_known(v, {"kind", "learning_rate", "momentum", "beta1", "beta2", "eps"},
                         "optimizer", [&](const std::string& k, const json& x) {
                           if (k == "kind") {
                             const auto name = x.get<std::string>();
                             if (name == "sgd") o.kind = nn::OptimizerKind::Sgd;
                             else if (name == "adam") o.kind = nn::OptimizerKind::Adam;
                             else throw std::invalid_argument("optimizer.kind must be sgd or adam");
                           } else if (k == "learning_rate") o.learning_rate = x.get<double>();
                           else if (k == "momentum") o.momentum = x.get<double>();
                           else if (k == "beta1") o.beta1 = x.get<double>();
                           else if (k == "beta2") o.beta2 = x.get<double>();
                           else o.eps = x.get<double>();
                         });
        } else if (key == "arch") {
          auto& a = cfg.arch;
          for_each_known(v,
                         {"image_size", "conv1_channels", "conv2_channels", "kernel", "fc1_units",
                          "gn_groups", "gemm_precision"},
                         "arch", [&](const std::string& k, const json& x) {
                           if (k == "gemm_precision") {
                             const auto p = x.get<std::string>();
                             if (p != "f32" && p != "f64") {
                               throw std::invalid_argument("arch.gemm_precision must be \"f32\" or \"f64\", got '" + p + "'");
                             }
                             a.gemm_precision = p == "f32" ? nn::GemmPrecision::F32 : nn::GemmPrecision::F64;
                             return;
                           }
                           const auto n = x.get<std::uint32_t>();
                           if (k == "image_size") a.image_size = n;
                           else if (k == "conv1_channels") a.conv1_channels = n;
                           else if (k == "conv2_channels") a.conv2_channels = n;
                           else if (k == "kernel") a.kernel = n;
                           else if (k == "fc1_units") a.fc1_units = n;
                           else a.gn_groups = n;
                         });
        } else if (key == "mdn") {
          for_each_known(v, {"intercept", "eta", "control_labels"}, "mdn",
                         [&](const std::string& k, const json& x) {
                           if (k == "intercept") cfg.mdn_intercept = x.get<bool>();
                           else if (k == "eta") cfg.mdn_eta = x.get<double>();
                           else cfg.mdn_control_labels = x.get<bool>();
                         });
        } else if (key == "holdout") {
          cfg.holdout = v.get<bool>();
        } else if (key == "output_dir") {
          cfg.output_dir = v.get<std::string>();
        } else if (key == "seed") {
          cfg.base_seed = v.get<std::uint64_t>();
        } else {
          cfg.jobs = v.get<std::size_t>();
        }
      });
  return cfg;
}

double balanced_accuracy(std::span<const double> probabilities,
                         std::span<const std::uint8_t> labels) {
  if (probabilities.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("balanced_accuracy: need equal, nonempty prediction and label lists");
  }
  std::array<std::size_t, 2> total{};
  std::array<std::size_t, 2> hit{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i] ? 1 : 0;
    const std::size_t pred = probabilities[i] >= 0.5 ? 1 : 0;
    ++total[y];
    if (pred == y) ++hit[y];
  }
  if (total[0] == 0 || total[1] == 0) {
    throw std::invalid_argument("balanced_accuracy: both classes must be present");
  }
  return 0.5 * (static_cast<double>(hit[0]) / static_cast<double>(total[0]) +
                static_cast<double>(hit[1]) / static_cast<double>(total[1]));
}

std::uint64_t cell_seed(std::uint64_t base_seed, Variant variant, std::size_t batch_size,
                        std::size_t run_index) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(variant) + 1);
  h = mix64(h ^ static_cast<std::uint64_t>(batch_size));
  h = mix64(h ^ static_cast<std::uint64_t>(run_index));
  return base_seed ^ h;
}

std::uint64_t dataset_seed(std::uint64_t base_seed, std::size_t run_index) {
  return base_seed ^ mix64(0xda7a5e7ULL ^ mix64(static_cast<std::uint64_t>(run_index)));
}

SyntheticDataset dataset_for_run(const ExperimentConfig& cfg, std::size_t run_index) {
  if (cfg.dataset_path) {
    SyntheticDataset ds = load(*cfg.dataset_path);
    // Ranges are not stored in the file; take them from the config.
    const auto seed = ds.config.seed;
    const auto n = ds.config.n_per_group;
    const auto side = ds.config.image_size;
    ds.config = cfg.synth;
    ds.config.seed = seed;
    ds.config.n_per_group = n;
    ds.config.image_size = side;
    return ds;
  }
  SynthConfig s = cfg.synth;
  s.seed = dataset_seed(cfg.base_seed, run_index);
  return generate(s);
}

MdnConfig experiment_mdn_config(const ExperimentConfig& cfg, std::size_t n_total) {
  MdnConfig m;
  m.n_total = n_total;
  m.include_intercept = cfg.mdn_intercept;
  m.control_labels = cfg.mdn_control_labels;
  m.momentum_eta = cfg.mdn_eta;
  return m;
}

Matrix experiment_design(const ExperimentConfig& cfg, const SyntheticDataset& ds) {
  return design_for(experiment_mdn_config(cfg, ds.size()), ds);
}

Inference infer(Model& model, const SyntheticDataset& ds, std::size_t batch_size) {
  const std::size_t n = ds.size();
  const Matrix design = design_for(model.mdn, ds);
  Inference result;
  result.features = Matrix(n, model.arch.fc1_units);
  result.probabilities.resize(n);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix xb = select_rows(ds.images, idx);
    const Matrix db = select_rows(design, idx);
    const nn::BatchContext ctx{nn::Mode::Eval, &db};
    const Matrix probs = model.stack.forward(xb, ctx);
    const Matrix& feats = model.fc1_features();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      result.probabilities[start + i] = probs(i, 0);
      std::copy(feats.row(i).begin(), feats.row(i).end(), result.features.row(start + i).begin());
    }
  }
  return result;
}

CellResult run_cell(const ExperimentConfig& cfg, Variant variant, std::size_t batch_size,
                    std::size_t run_index, bool keep_model) {
  return run_cell(cfg, dataset_for_run(cfg, run_index), variant, batch_size, run_index, keep_model);
}

CellResult run_cell(const ExperimentConfig& cfg, const SyntheticDataset& data, Variant variant,
                    std::size_t batch_size, std::size_t run_index, bool keep_model) {
  const std::size_t n = data.size();
  cfg.validate(n);
  keep_large_blocks_on_heap();
  if (batch_size == 0 || batch_size > n) {
    throw std::invalid_argument("run_cell: batch size " + std::to_string(batch_size) +
                                " exceeds dataset size " + std::to_string(n));
  }

  Rng rng(cell_seed(cfg.base_seed, variant, batch_size, run_index));
  const MdnConfig mdn_cfg = experiment_mdn_config(cfg, n);
  const Matrix design = design_for(mdn_cfg, data);

  std::optional<MdnState> tmpl;
  if (uses_mdn(variant)) {
    Matrix labels(n, 1);
    for (std::size_t i = 0; i < n; ++i) labels(i, 0) = data.labels[i];
    tmpl = precompute_sigma_inv(data.sigma_b, mdn_cfg.control_labels ? &labels : nullptr, mdn_cfg);
  }
  Model model = build_model(variant, cfg.arch, mdn_cfg, tmpl ? &*tmpl : nullptr, rng);
  nn::TrainState train(cfg.optimizer);

  std::optional<SyntheticDataset> holdout;
  if (cfg.holdout) {
    SynthConfig s = data.config;
    s.seed = mix64(data.config.seed ^ 0x401d07ULL);
    holdout = generate(s);
  }

  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) targets[i] = data.labels[i];
  const auto groups = data.groups();

  CellResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> epoch_probs(n);
  Matrix epoch_features(n, cfg.arch.fc1_units);
  std::vector<double> batch_targets;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = select_rows(data.images, idx);
      const Matrix db = select_rows(design, idx);
      batch_targets.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) batch_targets[i] = targets[idx[i]];

      model.stack.zero_grad();
      const nn::BatchContext ctx{nn::Mode::Train, &db};
      const Matrix probs = model.stack.forward(xb, ctx);
      nn::LossResult loss = nn::bce_loss(probs, batch_targets);
      loss_sum += loss.loss * static_cast<double>(idx.size());
      if (!std::isfinite(loss.loss)) break;
      model.stack.backward(loss.grad);
      auto params = model.stack.params();
      train.step(params);

      const Matrix& feats = model.fc1_features();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        epoch_probs[idx[i]] = probs(i, 0);
        std::copy(feats.row(i).begin(), feats.row(i).end(), epoch_features.row(idx[i]).begin());
      }
    }
    train.epoch = epoch;

    MetricRow row;
    row.run = run_index;
    row.epoch = epoch;
    row.variant = variant;
    row.batch_size = batch_size;
    row.loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(row.loss)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.train_bacc = row.dcor2_g1 = row.dcor2_g2 = row.dcor2_avg = nan;
      row.loss = nan;
      result.rows.push_back(row);
      result.diverged = true;
      break;
    }

    DcorReport report;
    if (holdout) {
      const Inference inf = infer(model, *holdout);
      row.train_bacc = balanced_accuracy(inf.probabilities, holdout->labels);
      const auto hg = holdout->groups();
      report = dcor2_by_group(inf.features, holdout->sigma_b, hg);
    } else {
      row.train_bacc = balanced_accuracy(epoch_probs, data.labels);
      report = dcor2_by_group(epoch_features, data.sigma_b, groups);
    }
    row.dcor2_g1 = report.per_group.at(0).second;
    row.dcor2_g2 = report.per_group.at(1).second;
    row.dcor2_avg = (row.dcor2_g1 + row.dcor2_g2) / 2.0;
    result.rows.push_back(row);
  }
  if (keep_model) result.model = std::move(model);
  return result;
}

std::vector<MetricRow> run_grid(const ExperimentConfig& cfg, const ModelSink& sink) {
  struct Cell {
    Variant variant;
    std::size_t batch;
    std::size_t run;
  };
  std::vector<Cell> cells;
  for (Variant v : cfg.variants)
    for (std::size_t b : cfg.batch_sizes)
      for (std::size_t r = 0; r < cfg.runs; ++r) cells.push_back({v, b, r});

  std::vector<std::vector<MetricRow>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const Cell& c = cells[i];
        CellResult r = run_cell(cfg, c.variant, c.batch, c.run, static_cast<bool>(sink));
        if (sink && r.model) sink(c.variant, c.batch, c.run, *r.model);
        results[i] = std::move(r.rows);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<MetricRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

std::vector<CellSummary> aggregate(std::span<const MetricRow> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no metric rows");
  using Key = std::pair<std::uint32_t, std::size_t>;
  std::vector<Key> order;
  // cell -> run -> final row
  std::map<Key, std::map<std::size_t, const MetricRow*>> finals;
  for (const auto& row : rows) {
    const Key key{static_cast<std::uint32_t>(row.variant), row.batch_size};
    if (!finals.contains(key)) order.push_back(key);
    auto& slot = finals[key][row.run];
    if (slot == nullptr || row.epoch >= slot->epoch) slot = &row;
  }

  std::vector<CellSummary> out;
  for (const auto& key : order) {
    const auto& runs = finals[key];
    std::vector<double> bacc;
    std::vector<double> dcor;
    for (const auto& [run, row] : runs) {
      bacc.push_back(row->train_bacc);
      dcor.push_back(row->dcor2_avg);
    }
    CellSummary s;
    s.variant = static_cast<Variant>(key.first);
    s.batch_size = key.second;
    s.runs = runs.size();
    const double count = static_cast<double>(s.runs);
    s.bacc_mean = std::accumulate(bacc.begin(), bacc.end(), 0.0) / count;
    s.dcor2_mean = std::accumulate(dcor.begin(), dcor.end(), 0.0) / count;
    if (s.runs < 2) {
      s.point_estimate = true;
      s.bacc_half_width = std::numeric_limits<double>::infinity();
      s.dcor2_half_width = std::numeric_limits<double>::infinity();
    } else {
      s.bacc_half_width = 1.96 * final_metric_sd(bacc, s.bacc_mean) / std::sqrt(count);
      s.dcor2_half_width = 1.96 * final_metric_sd(dcor, s.dcor2_mean) / std::sqrt(count);
    }
    out.push_back(s);
  }
  return out;
}

std::string metrics_csv_header() {
  return "run,epoch,variant,batch_size,train_bacc,dcor2_g1,dcor2_g2,dcor2_avg,loss";
}

std::string to_csv_line(const MetricRow& row) {
  std::string line = std::to_string(row.run) + "," + std::to_string(row.epoch) + "," +
                     to_string(row.variant) + "," + std::to_string(row.batch_size);
  for (double v : {row.train_bacc, row.dcor2_g1, row.dcor2_g2, row.dcor2_avg, row.loss}) {
    line += ",";
    line += format_g6(v);
  }
  return line;
}

std::string to_csv(std::span<const MetricRow> rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& row : rows) out += to_csv_line(row) + "\n";
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw std::invalid_argument("metrics CSV: missing or unexpected header");
  }
  std::vector<MetricRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) +
                                  ": expected 9 fields");
    }
    MetricRow row;
    row.run = std::stoul(fields[0]);
    row.epoch = std::stoul(fields[1]);
    row.variant = parse_variant(fields[2]);
    row.batch_size = std::stoul(fields[3]);
    row.train_bacc = std::stod(fields[4]);
    row.dcor2_g1 = std::stod(fields[5]);
    row.dcor2_g2 = std::stod(fields[6]);
    row.dcor2_avg = std::stod(fields[7]);
    row.loss = std::stod(fields[8]);
    rows.push_back(row);
  }
  return rows;
}

json summary_json(std::span<const CellSummary> cells, const ExperimentConfig& cfg) {
  json out;
  out["prng"] = std::string(kRngAlgorithm);
  out["seed"] = cfg.base_seed;
  out["metric_source"] = cfg.holdout ? "eval_mode_holdout" : "training_pass";
  out["mdn_fc_attachment"] = "fc1_output_after_relu";
  out["theoretical_max_accuracy"] = theoretical_max_accuracy(cfg.synth);
  out["config"] = to_json(cfg);
  json list = json::array();
  for (const auto& c : cells) {
    auto half = [&](double v) { return c.point_estimate ? json(nullptr) : json(v); };
    list.push_back({{"variant", to_string(c.variant)},
                    {"batch_size", c.batch_size},
                    {"runs", c.runs},
                    {"bacc_mean", c.bacc_mean},
                    {"bacc_ci95", half(c.bacc_half_width)},
                    {"dcor2_mean", c.dcor2_mean},
                    {"dcor2_ci95", half(c.dcor2_half_width)},
                    {"point_estimate", c.point_estimate}});
  }
  out["cells"] = list;
  return out;
}

void dump_features(Model& model, const SyntheticDataset& ds, const std::filesystem::path& path) {
  const Inference inf = infer(model, ds);
  const auto tags = overlap_partition(ds);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t c = 0; c < inf.features.cols(); ++c) out << "f" << c << ",";
  out << "sigma_a,sigma_b,group,overlap\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : inf.features.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.9g", ds.sigma_a(i, 0));
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.9g", ds.sigma_b(i, 0));
    out << buf << "," << static_cast<int>(ds.labels[i]) << "," << to_string(tags[i]) << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace mdn
