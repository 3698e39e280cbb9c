// Acceptance checks, one line per criterion:
//   mdn_acceptance [criterion...]   (no arguments runs all of them)

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "oracle.hpp"

#include "mdn/dcor.hpp"
#include "mdn/experiment.hpp"
#include "mdn/metadata_norm.hpp"
#include "mdn/model.hpp"
#include "mdn/synth.hpp"

using mdn::Matrix;
namespace nn = mdn::nn;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double cpu_seconds() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_utime.tv_sec + u.ru_stime.tv_sec) +
         1e-6 * static_cast<double>(u.ru_utime.tv_usec + u.ru_stime.tv_usec);
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome glm_exactness() {
  Outcome o;
  mdn::Rng rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  double worst_oracle = 0, worst_ortho = 0, worst_idem = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.below(4);
    const std::size_t n = 8 + rng.below(57);
    const std::size_t c = 1 + rng.below(6);
    const Matrix x = mdn::assemble_design(oracle::random_matrix(n, k, rng), nullptr, true);
    const Matrix f = oracle::random_matrix(n, c, rng);
    const Matrix r = mdn::residualize_full(x, f);
    worst_oracle = std::max(worst_oracle, oracle::max_rel_diff(r, oracle::normal_equation_residual(x, f)));
    const double scale = mdn::max_abs(x) * mdn::max_abs(f);
    worst_ortho = std::max(worst_ortho, mdn::max_abs(mdn::matmul_tn(x, r)) / scale);
    worst_idem = std::max(worst_idem, oracle::max_rel_diff(mdn::residualize_full(x, r), r));
  }
  const double secs = wall_since(t0);
  o.require(worst_oracle <= 1e-9, "oracle rel err " + fmt("%.2e", worst_oracle));
  o.require(worst_ortho <= 1e-8, "scaled |X'r|max " + fmt("%.2e", worst_ortho));
  o.require(worst_idem <= 1e-9, "idempotence " + fmt("%.2e", worst_idem));
  o.require(secs < 10.0, "time " + fmt("%.2f", secs) + " s");
  return o;
}

Outcome batch_convergence() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  mdn::Rng rng(2002);
  const std::size_t n = 1000, c = 8;
  const Matrix meta = oracle::random_matrix(n, 2, rng);
  mdn::MdnConfig cfg;
  cfg.n_total = n;
  const Matrix x = mdn::assemble_design(meta, nullptr, true);
  // Features with a metadata component plus independent noise.
  Matrix f = mdn::matmul(x, oracle::random_matrix(3, c, rng));
  for (double& v : f.values()) v += 0.5 * rng.normal();

  auto full_state = mdn::precompute_sigma_inv(meta, nullptr, cfg);
  const Matrix full_out = mdn::forward_train(full_state, x, f, cfg);
  const double full_err = oracle::max_rel_diff(full_out, mdn::residualize_full(x, f));
  o.require(full_err <= 1e-9, "M=N vs full " + fmt("%.2e", full_err));

  // 200 batches of M = N/2: each shuffle yields two disjoint halves.
  auto state = mdn::precompute_sigma_inv(meta, nullptr, cfg);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int batch = 0; batch < 200; ++batch) {
    if (batch % 2 == 0) rng.shuffle(std::span<std::size_t>(order));
    const std::span<const std::size_t> half(order.data() + (batch % 2) * (n / 2), n / 2);
    (void)mdn::forward_train(state, mdn::select_rows(x, half), mdn::select_rows(f, half), cfg);
  }
  const Matrix beta = mdn::fit_beta_full(x, f);
  const double beta_err = oracle::max_rel_diff(state.beta, beta);
  o.require(beta_err <= 1e-3, "momentum beta rel err " + fmt("%.2e", beta_err));
  const double secs = wall_since(t0);
  o.require(secs < 10.0, "time " + fmt("%.2f", secs) + " s");
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  mdn::Rng rng(3003);
  const nn::BatchContext train{nn::Mode::Train, nullptr};
  const nn::BatchContext eval{nn::Mode::Eval, nullptr};
  auto check = [&](const std::string& name, nn::Layer& layer, const Matrix& x, const nn::BatchContext& ctx,
                   double tol) {
    const Matrix w = oracle::random_matrix(x.rows(), layer.output_shape().size(), rng);
    const double err = gradcheck::check_layer(layer, x, ctx, w).worst();
    o.require(err <= tol, name + " " + fmt("%.1e", err));
  };
  auto signed_away_from_zero = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
    return m;
  };

  nn::Conv2d conv({2, 8, 8}, 3, 3, rng);
  check("conv2d", conv, oracle::random_matrix(4, 128, rng), train, 1e-6);
  nn::Dense dense(12, 5, rng);
  check("dense", dense, oracle::random_matrix(4, 12, rng), train, 1e-6);
  nn::Relu relu({12, 1, 1});
  check("relu", relu, signed_away_from_zero(4, 12), train, 1e-4);
  nn::Sigmoid sigmoid({12, 1, 1});
  check("sigmoid", sigmoid, oracle::random_matrix(4, 12, rng), train, 1e-4);
  nn::BatchNorm bn({3, 2, 2});
  for (double& v : bn.gamma.values()) v = rng.uniform(0.5, 1.5);
  check("batchnorm(train)", bn, oracle::random_matrix(5, 12, rng), train, 1e-4);
  check("batchnorm(eval)", bn, oracle::random_matrix(5, 12, rng), eval, 1e-4);
  nn::GroupNorm gn({4, 2, 2}, 2);
  for (double& v : gn.gamma.values()) v = rng.uniform(0.5, 1.5);
  check("groupnorm", gn, oracle::random_matrix(3, 16, rng), train, 1e-4);

  const std::size_t m = 32;
  const Matrix meta = oracle::random_matrix(m, 2, rng);
  Matrix labels(m, 1);
  for (std::size_t i = 0; i < m; ++i) labels(i, 0) = static_cast<double>(i % 2);
  for (bool control : {false, true}) {
    mdn::MdnConfig cfg;
    cfg.n_total = m;
    cfg.control_labels = control;
    const auto state = mdn::precompute_sigma_inv(meta, control ? &labels : nullptr, cfg);
    const Matrix design = mdn::assemble_design(meta, control ? &labels : nullptr, true);
    nn::MdnLayer layer({5, 1, 1}, cfg, state);
    const nn::BatchContext mtrain{nn::Mode::Train, &design};
    const nn::BatchContext meval{nn::Mode::Eval, &design};
    const std::string tag = control ? "mdn+labels" : "mdn";
    check(tag + "(train)", layer, oracle::random_matrix(m, 5, rng), mtrain, 1e-6);
    check(tag + "(eval)", layer, oracle::random_matrix(m, 5, rng), meval, 1e-6);
  }

  // Whole networks, small geometry.
  mdn::ArchConfig arch;
  arch.image_size = 8;
  arch.conv1_channels = 2;
  arch.conv2_channels = 2;
  arch.kernel = 3;
  arch.fc1_units = 4;
  arch.gn_groups = 2;
  const std::size_t batch = 6;
  const Matrix images = oracle::random_matrix(batch, 64, rng);
  const Matrix bmeta = oracle::random_matrix(batch, 1, rng);
  const std::vector<double> targets{0, 1, 1, 0, 1, 0};
  mdn::MdnConfig mcfg;
  mcfg.n_total = batch;
  const auto tmpl = mdn::precompute_sigma_inv(bmeta, nullptr, mcfg);
  const Matrix design = mdn::assemble_design(bmeta, nullptr, true);
  const nn::BatchContext ctx{nn::Mode::Train, &design};
  for (auto v : {mdn::Variant::Baseline, mdn::Variant::Bn, mdn::Variant::Gn, mdn::Variant::MdnFc,
                 mdn::Variant::MdnConv}) {
    auto model = mdn::build_model(v, arch, mcfg, &tmpl, rng);
    auto loss = [&] { return nn::bce_loss(model.stack.forward(images, ctx), targets).loss; };
    model.stack.zero_grad();
    const auto r = nn::bce_loss(model.stack.forward(images, ctx), targets);
    model.stack.backward(r.grad);
    double worst = 0;
    for (auto& p : model.stack.params()) {
      auto values = p.value->values();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + 1e-5;
        const double up = loss();
        values[i] = saved - 1e-5;
        const double down = loss();
        values[i] = saved;
        worst = std::max(worst, gradcheck::rel_err(p.grad->values()[i], (up - down) / 2e-5));
      }
    }
    o.require(worst <= 1e-4, std::string("net:") + mdn::to_string(v) + " " + fmt("%.1e", worst));
  }
  const double secs = wall_since(t0);
  o.require(secs < 60.0, "time " + fmt("%.2f", secs) + " s");
  return o;
}

Outcome dcor_oracle() {
  Outcome o;
  mdn::Rng rng(4004);
  double worst = 0, worst_self = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    const Matrix a = oracle::random_matrix(n, 1 + rng.below(5), rng);
    const Matrix b = oracle::random_matrix(n, 1 + rng.below(3), rng);
    worst = std::max(worst, std::abs(mdn::dcor2(a, b) - oracle::naive_dcor2(a, b)));
    worst_self = std::max(worst_self, std::abs(mdn::dcor2(a, a) - 1.0));
  }
  o.require(worst <= 1e-10, "oracle abs err " + fmt("%.1e", worst));
  o.require(worst_self <= 1e-10, "dcor2(x,x) err " + fmt("%.1e", worst_self));
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    mdn::Rng r(50 + seed);
    Matrix a(2000, 1), b(2000, 1);
    for (double& v : a.values()) v = r.uniform();
    for (double& v : b.values()) v = r.uniform();
    mean += mdn::dcor2(a, b) / 10.0;
  }
  o.require(mean < 0.01, "independent n=2000 mean " + fmt("%.4f", mean));
  return o;
}

std::filesystem::path output_dir() {
  const auto dir = std::filesystem::path(MDN_BINARY_DIR) / "acceptance_out";
  std::filesystem::create_directories(dir);
  return dir;
}

mdn::ExperimentConfig grid_config() {
  std::ifstream in(std::filesystem::path(MDN_SOURCE_DIR) / "configs" / "grid.json");
  return mdn::experiment_config_from_json(nlohmann::json::parse(in));
}

Outcome variant_grid() {
  Outcome o;
  const mdn::ExperimentConfig cfg = grid_config();
  const double cpu0 = cpu_seconds();
  const auto rows = mdn::run_grid(cfg);
  const double cpu = cpu_seconds() - cpu0;
  const auto cells = mdn::aggregate(rows);
  const auto dir = output_dir();
  std::ofstream(dir / "grid_metrics.csv") << mdn::to_csv(rows);
  std::ofstream(dir / "grid_summary.json") << mdn::summary_json(cells, cfg).dump(2) << "\n";

  std::map<std::pair<mdn::Variant, std::size_t>, mdn::CellSummary> by;
  for (const auto& c : cells) {
    by[{c.variant, c.batch_size}] = c;
    std::printf("  %-9s batch %4zu  bAcc %.4f ± %.4f  dcor2 %.4f ± %.4f\n", mdn::to_string(c.variant), c.batch_size,
                c.bacc_mean, c.bacc_half_width, c.dcor2_mean, c.dcor2_half_width);
  }
  using V = mdn::Variant;
  const auto& base = by[{V::Baseline, 2000}];
  const auto& conv = by[{V::MdnConv, 2000}];
  const auto& fc = by[{V::MdnFc, 2000}];
  o.require(base.bacc_mean >= 0.90 && base.dcor2_mean >= 0.30,
            "baseline@2000 bAcc " + fmt("%.3f", base.bacc_mean) + " dcor2 " + fmt("%.3f", base.dcor2_mean));
  o.require(conv.bacc_mean >= 0.80 && conv.bacc_mean <= 0.87 && conv.dcor2_mean <= 0.05,
            "mdn_conv@2000 bAcc " + fmt("%.3f", conv.bacc_mean) + " dcor2 " + fmt("%.3f", conv.dcor2_mean));
  o.require(fc.bacc_mean >= 0.79 && fc.bacc_mean <= 0.87, "mdn_fc@2000 bAcc " + fmt("%.3f", fc.bacc_mean));
  o.require(conv.dcor2_mean <= fc.dcor2_mean && fc.dcor2_mean < base.dcor2_mean, "dcor2 ordering conv<=fc<baseline");
  for (V v : {V::MdnFc, V::MdnConv}) {
    const double d200 = by[{v, 200}].dcor2_mean, d1000 = by[{v, 1000}].dcor2_mean, d2000 = by[{v, 2000}].dcor2_mean;
    o.require(d200 >= d1000 && d1000 >= d2000, std::string(mdn::to_string(v)) + " dcor2 by batch " +
                                                   fmt("%.3f", d200) + "/" + fmt("%.3f", d1000) + "/" +
                                                   fmt("%.3f", d2000));
  }
  const double bound = mdn::theoretical_max_accuracy(cfg.synth);
  o.require(std::abs(conv.bacc_mean - bound) < std::abs(base.bacc_mean - bound) &&
                std::abs(fc.bacc_mean - bound) < std::abs(base.bacc_mean - bound),
            "mdn bAcc closer to " + fmt("%.4f", bound) + " than baseline");
  o.require(cpu <= 1800.0, "cpu " + fmt("%.0f", cpu) + " s");
  return o;
}

Outcome max_accuracy() {
  Outcome o;
  const mdn::SynthConfig cfg;
  const double exact = mdn::theoretical_max_accuracy(cfg);
  o.require(std::abs(exact - 5.0 / 6.0) <= 1e-6, "exact " + fmt("%.8f", exact));
  mdn::Rng rng(6006);
  std::size_t correct = 0;
  const std::size_t draws = 1000000;
  for (std::size_t i = 0; i < draws; ++i) {
    const bool g2 = rng.below(2) == 1;
    const auto& r = g2 ? cfg.sigma_a_g2 : cfg.sigma_a_g1;
    const double a = rng.uniform(r.low, r.high);
    // Optimal rule: group 2 above the overlap midpoint (any point in [3,4] is optimal).
    correct += ((a > 3.5) == g2) ? 1 : 0;
  }
  const double mc = static_cast<double>(correct) / static_cast<double>(draws);
  o.require(std::abs(mc - exact) <= 0.002, "monte carlo " + fmt("%.4f", mc));
  return o;
}

Outcome determinism() {
  Outcome o;
  mdn::ExperimentConfig cfg = grid_config();
  cfg.variants = {mdn::Variant::Baseline};
  cfg.batch_sizes = {200};
  cfg.runs = 1;
  const std::string a = mdn::to_csv(mdn::run_grid(cfg));
  const std::string b = mdn::to_csv(mdn::run_grid(cfg));
  o.require(a == b, "baseline/200/1 run CSV bytes identical (" + std::to_string(a.size()) + " bytes)");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"glm_exactness", glm_exactness}, {"batch_convergence", batch_convergence},
      {"gradient_checks", gradient_checks}, {"dcor_oracle", dcor_oracle},
      {"variant_grid", variant_grid}, {"max_accuracy", max_accuracy},
      {"determinism", determinism}};
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
