#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "mdn/model.hpp"
#include "mdn/synth.hpp"

namespace mdn {

struct ExperimentConfig {
  SynthConfig synth;
  std::optional<std::filesystem::path> dataset_path;
  std::vector<Variant> variants = {Variant::Baseline, Variant::Bn, Variant::Gn, Variant::MdnFc,
                                   Variant::MdnConv};
  std::vector<std::size_t> batch_sizes = {200, 1000, 2000};
  std::size_t runs = 5;
  std::size_t epochs = 100;
  nn::OptimizerConfig optimizer;
  ArchConfig arch;
  bool mdn_intercept = true;
  double mdn_eta = 0.1;
  bool mdn_control_labels = true;
  /// Measure metrics in eval mode on a freshly drawn held-out set instead of
  /// on the training pass.
  bool holdout = false;
  std::filesystem::path output_dir = "run";
  std::uint64_t base_seed = 0;
  std::size_t jobs = 1;

  void validate(std::size_t dataset_size) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Reads the keys present in `j` on top of `base`; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct MetricRow {
  std::size_t run = 0;
  std::size_t epoch = 0;
  Variant variant = Variant::Baseline;
  std::size_t batch_size = 0;
  double train_bacc = 0.0;
  double dcor2_g1 = 0.0;
  double dcor2_g2 = 0.0;
  double dcor2_avg = 0.0;
  double loss = 0.0;
};

struct CellSummary {
  Variant variant = Variant::Baseline;
  std::size_t batch_size = 0;
  std::size_t runs = 0;
  double bacc_mean = 0.0;
  double bacc_half_width = 0.0;
  double dcor2_mean = 0.0;
  double dcor2_half_width = 0.0;
  /// Only one run: the means are point estimates and the half-widths are +inf.
  bool point_estimate = false;
};

/// Mean of the per-class recalls with a 0.5 threshold on the probabilities.
double balanced_accuracy(std::span<const double> probabilities, std::span<const std::uint8_t> labels);

/// Seed for one (variant, batch size, run) cell: base ⊕ hash of the triple.
std::uint64_t cell_seed(std::uint64_t base_seed, Variant variant, std::size_t batch_size,
                        std::size_t run_index);
/// Seed of the dataset drawn for a run when no dataset file is configured.
/// Shared by every variant and batch size of that run.
std::uint64_t dataset_seed(std::uint64_t base_seed, std::size_t run_index);

/// Dataset for a run: loaded from cfg.dataset_path or generated.
SyntheticDataset dataset_for_run(const ExperimentConfig& cfg, std::size_t run_index);

/// MDN design for a dataset: [1 | σ_B | label] according to the config.
Matrix experiment_design(const ExperimentConfig& cfg, const SyntheticDataset& ds);
MdnConfig experiment_mdn_config(const ExperimentConfig& cfg, std::size_t n_total);

struct CellResult {
  std::vector<MetricRow> rows;
  bool diverged = false;
  std::optional<Model> model;  ///< filled when requested
};

/// Trains one model and returns one row per epoch.
CellResult run_cell(const ExperimentConfig& cfg, Variant variant, std::size_t batch_size,
                    std::size_t run_index, bool keep_model = false);
CellResult run_cell(const ExperimentConfig& cfg, const SyntheticDataset& data, Variant variant,
                    std::size_t batch_size, std::size_t run_index, bool keep_model = false);

/// Receives each trained model; may be called from worker threads.
using ModelSink = std::function<void(Variant, std::size_t batch_size, std::size_t run, Model&)>;

/// Runs every configured cell (up to cfg.jobs concurrently) and returns rows
/// in cell order: variant, then batch size, then run.
std::vector<MetricRow> run_grid(const ExperimentConfig& cfg, const ModelSink& sink = {});

/// Final-epoch mean ± 1.96·sd/√runs per (variant, batch size).
std::vector<CellSummary> aggregate(std::span<const MetricRow> rows);

std::string metrics_csv_header();
std::string to_csv_line(const MetricRow& row);
std::string to_csv(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

nlohmann::json summary_json(std::span<const CellSummary> cells, const ExperimentConfig& cfg);

/// Eval-mode forward pass over the whole dataset; returns fc1 features and
/// probabilities.
struct Inference {
  Matrix features;
  std::vector<double> probabilities;
};
Inference infer(Model& model, const SyntheticDataset& ds, std::size_t batch_size = 500);

/// CSV of fc1 features followed by sigma_a, sigma_b, group and overlap tag.
void dump_features(Model& model, const SyntheticDataset& ds, const std::filesystem::path& path);

}  // namespace mdn
