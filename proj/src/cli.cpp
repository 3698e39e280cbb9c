#include "mdn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mdn/dcor.hpp"
#include "mdn/experiment.hpp"

namespace mdn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::vector<std::string> variants;
  std::vector<std::size_t> batches;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> epochs;
  std::string data;
  std::string checkpoint;
  bool save_checkpoints = false;
  bool verbose = false;
  std::string features;
  std::vector<std::string> meta_cols;
  std::string group_col;
  std::vector<std::string> feature_cols;
  std::vector<std::string> exclude_cols;
  std::string runs_dir;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json parse_override_value(const std::string& text) {
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) return json(text);
  return value;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw UsageError("empty component in key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parse_override_value(assignment.substr(eq + 1));
}

/// Config file, then --set overrides, then the dedicated flags.
ExperimentConfig resolve_config(const Options& o) {
  json j = json::object();
  if (!o.config.empty()) {
    j = json::parse(read_text(o.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw std::runtime_error("malformed JSON config: " + o.config);
    }
  }
  for (const auto& s : o.sets) apply_override(j, s);
  ExperimentConfig cfg = experiment_config_from_json(j);
  if (o.seed) cfg.base_seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.variants.empty()) {
    cfg.variants.clear();
    for (const auto& v : o.variants) cfg.variants.push_back(parse_variant(v));
  }
  if (!o.batches.empty()) cfg.batch_sizes = o.batches;
  if (o.runs) cfg.runs = *o.runs;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (!o.data.empty()) cfg.dataset_path = o.data;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void add_config_flags(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON experiment config file")->check(CLI::ExistingFile);
  app->add_option("--set", o.sets, "Dotted-key override, e.g. --set optimizer.learning_rate=0.002 (repeatable; wins over the file)");
  app->add_option("--seed", o.seed, "Base seed driving all randomness");
}

std::unique_ptr<CLI::App> build_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Metadata normalization experiments on synthetic images", "mdn");
  app->require_subcommand(1, 1);
  app->set_help_all_flag("--help-all", "Print help for every subcommand");

  auto* gen = app->add_subcommand("gen", "Generate a synthetic dataset file");
  add_config_flags(gen, o);
  gen->add_option("--out", o.out, "Output dataset path (.mdns)")->required();

  auto* train = app->add_subcommand("train", "Train the configured grid of cells and write metrics");
  add_config_flags(train, o);
  train->add_option("--variant", o.variants, "Variant(s): baseline, bn, gn, mdn_fc, mdn_conv (comma separated)")
      ->delimiter(',');
  train->add_option("--batch", o.batches, "Batch size(s) (comma separated)")->delimiter(',');
  train->add_option("--runs", o.runs, "Runs per cell");
  train->add_option("--epochs", o.epochs, "Epochs per run");
  train->add_option("--data", o.data, "Train on this dataset file instead of generating one per run")
      ->check(CLI::ExistingFile);
  train->add_option("--jobs", o.jobs, "Cells trained concurrently");
  train->add_option("--out", o.out, "Output directory for metrics.csv, config.json and checkpoints");
  train->add_flag("--save-checkpoints", o.save_checkpoints, "Write one .mdnc checkpoint per cell and run");
  train->add_flag("--verbose", o.verbose, "Print each cell's final metrics as it finishes");

  auto* eval = app->add_subcommand("eval", "Evaluate a checkpoint on a dataset in eval mode");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file (.mdnc)")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", o.data, "Dataset file (.mdns)")->required()->check(CLI::ExistingFile);

  auto* dcor = app->add_subcommand("dcor", "Squared distance correlation between CSV feature columns and metadata");
  dcor->add_option("--features", o.features, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  dcor->add_option("--meta-cols", o.meta_cols, "Metadata column name(s) (comma separated)")
      ->required()
      ->delimiter(',');
  dcor->add_option("--group-col", o.group_col, "Column holding integer group ids; omit for one pooled value");
  dcor->add_option("--feature-cols", o.feature_cols,
                   "Feature columns (comma separated); default is every numeric column not used otherwise")
      ->delimiter(',');
  dcor->add_option("--exclude-cols", o.exclude_cols, "Columns left out of the default feature set (comma separated)")
      ->delimiter(',');

  auto* report = app->add_subcommand("report", "Aggregate metrics.csv files into a summary JSON");
  report->add_option("--runs", o.runs_dir, "Directory searched recursively for metrics.csv files")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--out", o.out, "Summary JSON path")->required();
  report->add_option("--config", o.config,
                     "Config to echo in the summary; default is config.json next to the metrics")
      ->check(CLI::ExistingFile);

  auto* dump = app->add_subcommand("dump-features", "Export fc1 features with annotations as CSV");
  dump->add_option("--checkpoint", o.checkpoint, "Checkpoint file (.mdnc)")->required()->check(CLI::ExistingFile);
  dump->add_option("--data", o.data, "Dataset file (.mdns)")->required()->check(CLI::ExistingFile);
  dump->add_option("--out", o.out, "Output CSV path")->required();
  return app;
}

int cmd_gen(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  SynthConfig s = cfg.synth;
  if (o.seed) s.seed = *o.seed;
  const SyntheticDataset ds = generate(s);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  save(ds, o.out);
  out << "wrote " << ds.size() << " samples to " << o.out << "\n";
  return 0;
}

std::string checkpoint_name(Variant v, std::size_t batch, std::size_t run) {
  return std::string(to_string(v)) + "_b" + std::to_string(batch) + "_r" + std::to_string(run) + ".mdnc";
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  ModelSink sink;
  if (o.save_checkpoints) {
    sink = [&](Variant v, std::size_t batch, std::size_t run, Model& m) {
      save_checkpoint(m, dir / checkpoint_name(v, batch, run));
    };
  }
  const auto rows = run_grid(cfg, sink);
  write_text(dir / "metrics.csv", to_csv(rows));
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool last = i + 1 == rows.size() || rows[i + 1].run != rows[i].run ||
                      rows[i + 1].variant != rows[i].variant ||
                      rows[i + 1].batch_size != rows[i].batch_size;
    if (!last) continue;
    const auto& r = rows[i];
    if (std::isnan(r.loss)) err << "warning: " << to_string(r.variant) << " batch " << r.batch_size
                                << " run " << r.run << " diverged at epoch " << r.epoch << "\n";
    if (o.verbose) {
      out << to_string(r.variant) << " batch " << r.batch_size << " run " << r.run << ": bacc "
          << fixed6(r.train_bacc) << " dcor2 " << fixed6(r.dcor2_avg) << "\n";
    }
  }
  out << "wrote " << rows.size() << " rows to " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  Model model = load_checkpoint(o.checkpoint);
  const SyntheticDataset ds = load(o.data);
  const Inference inf = infer(model, ds);
  const DcorReport report = dcor2_by_group(inf.features, ds.sigma_b, ds.groups());
  out << "variant " << to_string(model.variant) << "\n";
  out << "balanced_accuracy " << fixed6(balanced_accuracy(inf.probabilities, ds.labels)) << "\n";
  for (const auto& [group, value] : report.per_group) {
    out << "dcor2_g" << group + 1 << " " << fixed6(value) << "\n";
  }
  out << "dcor2_avg " << fixed6(report.average) << "\n";
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

int cmd_dcor(const Options& o, std::ostream& out) {
  std::istringstream in(read_text(o.features));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(o.features + ": empty file");
  const auto header = split_csv_line(line);
  std::vector<std::vector<std::string>> cells;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw std::runtime_error(o.features + ": row " + std::to_string(cells.size() + 2) + " has " +
                               std::to_string(f.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    cells.push_back(std::move(f));
  }
  if (cells.empty()) throw std::runtime_error(o.features + ": no data rows");

  auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("column '" + name + "' not found");
    return static_cast<std::size_t>(it - header.begin());
  };
  auto numeric_column = [&](std::size_t c) {
    return std::all_of(cells.begin(), cells.end(), [&](const auto& row) { return parse_number(row[c]).has_value(); });
  };
  auto to_matrix = [&](const std::vector<std::size_t>& cols) {
    Matrix m(cells.size(), cols.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto v = parse_number(cells[r][cols[j]]);
        if (!v) throw std::runtime_error("non-numeric value in column '" + header[cols[j]] + "'");
        m(r, j) = *v;
      }
    }
    return m;
  };

  std::vector<std::size_t> meta;
  for (const auto& name : o.meta_cols) meta.push_back(column_index(name));
  std::vector<std::size_t> used = meta;
  std::optional<std::size_t> group;
  if (!o.group_col.empty()) {
    group = column_index(o.group_col);
    used.push_back(*group);
  }
  std::vector<std::size_t> feats;
  if (!o.feature_cols.empty()) {
    for (const auto& name : o.feature_cols) feats.push_back(column_index(name));
  } else {
    for (const auto& name : o.exclude_cols) used.push_back(column_index(name));
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (std::find(used.begin(), used.end(), c) == used.end() && numeric_column(c)) feats.push_back(c);
    }
  }
  if (feats.empty()) throw std::runtime_error("no feature columns selected");

  const Matrix x = to_matrix(feats);
  const Matrix y = to_matrix(meta);
  if (!group) {
    out << "dcor2 " << fixed6(dcor2(x, y)) << "\n";
    return 0;
  }
  std::vector<int> ids(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto v = parse_number(cells[r][*group]);
    if (!v || *v != static_cast<int>(*v)) throw std::runtime_error("group column must hold integers");
    ids[r] = static_cast<int>(*v);
  }
  const DcorReport report = dcor2_by_group(x, y, ids);
  for (const auto& [id, value] : report.per_group) out << "group " << id << " " << fixed6(value) << "\n";
  out << "average " << fixed6(report.average) << "\n";
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(o.runs_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") files.push_back(entry.path());
  }
  if (files.empty()) throw std::runtime_error("no metrics.csv under " + o.runs_dir);
  std::sort(files.begin(), files.end());

  std::vector<MetricRow> rows;
  for (const auto& f : files) {
    auto part = parse_metrics_csv(read_text(f));
    rows.insert(rows.end(), part.begin(), part.end());
  }

  ExperimentConfig cfg;
  fs::path config_path = o.config;
  if (config_path.empty() && fs::exists(files.front().parent_path() / "config.json")) {
    config_path = files.front().parent_path() / "config.json";
  }
  if (!config_path.empty()) {
    const json j = json::parse(read_text(config_path), nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("malformed JSON config: " + config_path.string());
    cfg = experiment_config_from_json(j);
  }

  const auto cells = aggregate(rows);
  write_text(o.out, summary_json(cells, cfg).dump(2) + "\n");
  for (const auto& c : cells) {
    out << to_string(c.variant) << " batch " << c.batch_size << ": bacc " << fixed6(c.bacc_mean);
    if (!c.point_estimate) out << " ± " << fixed6(c.bacc_half_width);
    out << "  dcor2 " << fixed6(c.dcor2_mean);
    if (!c.point_estimate) out << " ± " << fixed6(c.dcor2_half_width);
    out << "  (" << c.runs << " runs)\n";
  }
  return 0;
}

int cmd_dump(const Options& o, std::ostream& out) {
  Model model = load_checkpoint(o.checkpoint);
  const SyntheticDataset ds = load(o.data);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  dump_features(model, ds, o.out);
  out << "wrote " << ds.size() << " rows to " << o.out << "\n";
  return 0;
}

}  // namespace

int parse_and_dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  auto app = build_app(o);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app->parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app->exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = app->get_subcommands().empty() ? app.get() : app->get_subcommands().front();
    err << sub->help("", CLI::AppFormatMode::Normal);
    return 1;
  }

  const std::string name = app->get_subcommands().front()->get_name();
  try {
    if (name == "gen") return cmd_gen(o, out);
    if (name == "train") return cmd_train(o, out, err);
    if (name == "eval") return cmd_eval(o, out);
    if (name == "dcor") return cmd_dcor(o, out);
    if (name == "report") return cmd_report(o, out);
    return cmd_dump(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

std::vector<FlagDoc> documented_flags() {
  Options o;
  auto app = build_app(o);
  std::vector<FlagDoc> docs;
  for (const CLI::App* sub : app->get_subcommands({})) {
    for (const CLI::Option* opt : sub->get_options()) {
      const auto& names = opt->get_lnames();
      if (names.empty()) continue;
      docs.push_back({sub->get_name(), "--" + names.front(), opt->get_description()});
    }
  }
  return docs;
}

}  // namespace mdn
