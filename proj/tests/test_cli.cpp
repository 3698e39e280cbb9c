#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mdn/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mdn::parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mdn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyConfig = R"({
  "synth": {"n_per_group": 12, "image_size": 12},
  "arch": {"image_size": 12, "conv1_channels": 2, "conv2_channels": 2, "kernel": 3, "gn_groups": 2},
  "variants": ["baseline", "mdn_conv"],
  "batch_sizes": [8],
  "runs": 2,
  "epochs": 2
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("every flag is documented in its subcommand help") {
    const auto flags = mdn::documented_flags();
    std::set<std::string> subs;
    for (const auto& f : flags) {
      CAPTURE(f.subcommand);
      CAPTURE(f.flag);
      subs.insert(f.subcommand);
      CHECK_FALSE(f.description.empty());
      const auto help = run({f.subcommand, "--help"});
      CHECK(help.code == 0);
      CHECK(help.out.find(f.flag) != std::string::npos);
      CHECK(help.out.find(f.description.substr(0, 20)) != std::string::npos);
    }
    CHECK(subs == std::set<std::string>{"gen", "train", "eval", "dcor", "report", "dump-features"});
    // Flags the pipeline relies on are among them.
    auto has = [&](const std::string& sub, const std::string& flag) {
      return std::any_of(flags.begin(), flags.end(),
                         [&](const auto& f) { return f.subcommand == sub && f.flag == flag; });
    };
    CHECK(has("train", "--seed"));
    CHECK(has("train", "--jobs"));
    CHECK(has("train", "--variant"));
    CHECK(has("dcor", "--meta-cols"));
    CHECK(has("report", "--runs"));
  }

  TEST_CASE("usage errors exit with 1") {
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({}).code == 1);
    const auto unknown = run({"gen", "--out", "x.mdns", "--bogus"});
    CHECK(unknown.code == 1);
    CHECK_FALSE(unknown.err.empty());
    CHECK(run({"gen"}).code == 1);
    CHECK(run({"eval", "--checkpoint", "/nonexistent/m.mdnc", "--data", "/nonexistent/d.mdns"}).code == 1);
    CHECK(run({"gen", "--out", "x", "--set", "novalue"}).code == 1);
  }

  TEST_CASE("runtime errors exit with 2") {
    const auto dir = scratch("bad");
    std::ofstream(dir / "bad.json") << "{ not json";
    const auto r = run({"gen", "--config", (dir / "bad.json").string(), "--out", (dir / "d.mdns").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("malformed JSON") != std::string::npos);

    std::ofstream(dir / "unknown.json") << R"({"synthh": {}})";
    CHECK(run({"gen", "--config", (dir / "unknown.json").string(), "--out", (dir / "d.mdns").string()}).code == 2);

    std::ofstream(dir / "garbage.mdns") << "garbage";
    std::ofstream(dir / "garbage.mdnc") << "garbage";
    const auto e = run({"eval", "--checkpoint", (dir / "garbage.mdnc").string(), "--data",
                        (dir / "garbage.mdns").string()});
    CHECK(e.code == 2);
    fs::remove_all(dir);
  }

  TEST_CASE("dcor on a duplicated metadata column prints one") {
    const auto dir = scratch("dcor");
    {
      std::ofstream f(dir / "f.csv");
      f << "f0,sigma_b,group\n";
      for (int i = 0; i < 20; ++i) f << (0.5 * i + 1) << "," << (0.5 * i + 1) << "," << (i % 2) << "\n";
    }
    const auto r = run({"dcor", "--features", (dir / "f.csv").string(), "--meta-cols", "sigma_b",
                        "--group-col", "group"});
    CHECK(r.code == 0);
    CHECK(r.out.find("group 0 1.000000") != std::string::npos);
    CHECK(r.out.find("average 1.000000") != std::string::npos);
    const auto pooled = run({"dcor", "--features", (dir / "f.csv").string(), "--meta-cols", "sigma_b",
                             "--feature-cols", "f0"});
    CHECK(pooled.out == "dcor2 1.000000\n");
    const auto missing = run({"dcor", "--features", (dir / "f.csv").string(), "--meta-cols", "nope"});
    CHECK(missing.code == 2);
    fs::remove_all(dir);
  }

  TEST_CASE("gen, train, report, eval and dump-features pipeline") {
    const auto dir = scratch("pipeline");
    const auto cfg = dir / "c.json";
    std::ofstream(cfg) << kTinyConfig;
    const std::string data = (dir / "d.mdns").string();

    CHECK(run({"gen", "--config", cfg.string(), "--out", data, "--seed", "5"}).code == 0);
    REQUIRE(fs::exists(data));

    const auto train = run({"train", "--config", cfg.string(), "--out", (dir / "run").string(), "--seed", "7",
                            "--save-checkpoints", "--verbose"});
    INFO(train.err);
    REQUIRE(train.code == 0);
    const std::string csv = slurp(dir / "run" / "metrics.csv");
    CHECK(csv.rfind("run,epoch,variant,batch_size,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 2);
    CHECK(fs::exists(dir / "run" / "config.json"));
    CHECK(fs::exists(dir / "run" / "mdn_conv_b8_r1.mdnc"));

    // Same seed, same bytes; a different seed changes them.
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "again").string(), "--seed", "7"}).code == 0);
    CHECK(slurp(dir / "again" / "metrics.csv") == csv);
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "other").string(), "--seed", "8"}).code == 0);
    CHECK(slurp(dir / "other" / "metrics.csv") != csv);

    const auto report = run({"report", "--runs", (dir / "run").string(), "--out", (dir / "summary.json").string()});
    CHECK(report.code == 0);
    const std::string summary = slurp(dir / "summary.json");
    CHECK(summary.find("\"prng\"") != std::string::npos);
    CHECK(summary.find("mdn_conv") != std::string::npos);
    CHECK(summary.find("\"seed\": 7") != std::string::npos);

    const std::string ckpt = (dir / "run" / "mdn_conv_b8_r0.mdnc").string();
    // The checkpoint was trained on generated data; evaluate it on a dataset
    // of the same geometry.
    const auto eval = run({"eval", "--checkpoint", ckpt, "--data", data});
    CHECK(eval.code == 0);
    CHECK(eval.out.find("balanced_accuracy") != std::string::npos);
    CHECK(eval.out.find("dcor2_avg") != std::string::npos);

    const auto feats = dir / "feats.csv";
    CHECK(run({"dump-features", "--checkpoint", ckpt, "--data", data, "--out", feats.string()}).code == 0);
    const auto dc = run({"dcor", "--features", feats.string(), "--meta-cols", "sigma_b", "--group-col", "group",
                         "--exclude-cols", "sigma_a"});
    CHECK(dc.code == 0);
    CHECK(dc.out.find("average") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("overrides win over the config file") {
    const auto dir = scratch("override");
    const auto cfg = dir / "c.json";
    std::ofstream(cfg) << kTinyConfig;
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "run").string(), "--set", "epochs=1", "--set",
               "variants=[\"gn\"]", "--set", "runs=1"})
              .code == 0);
    const std::string csv = slurp(dir / "run" / "metrics.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find(",gn,") != std::string::npos);
    CHECK(slurp(dir / "run" / "config.json").find("\"epochs\": 1") != std::string::npos);

    // The dedicated flags are overrides too.
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "run2").string(), "--set", "epochs=1", "--runs",
               "1", "--variant", "bn", "--batch", "24"})
              .code == 0);
    const std::string csv2 = slurp(dir / "run2" / "metrics.csv");
    CHECK(csv2.find(",bn,24,") != std::string::npos);
    fs::remove_all(dir);
  }
}
