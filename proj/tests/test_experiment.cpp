#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "crl/experiment.hpp"

using namespace crl;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& mode) {
  auto cfg = RunConfig::desk();
  cfg.latent = "uniform";
  cfg.d = 2;
  cfg.p = 2;
  cfg.n = 8;
  cfg.mode = mode;
  cfg.sizes = {200, 50, 100};
  cfg.train.epochs = 3;
  cfg.lr_grid = {1e-3};
  cfg.ios.epochs = 2;
  cfg.ios.batch_size = 64;
  cfg.seeds = {0, 1};
  return cfg;
}

SeedResult row(const std::string& latent, std::uint64_t seed, double r2) {
  SeedResult r;
  r.latent = latent;
  r.d = 6;
  r.p = 2;
  r.mode = "il";
  r.seed = seed;
  r.report.r2 = r2;
  r.report.mcc_il = 90.0 + r2;
  return r;
}

}  // namespace

TEST_CASE("profiles") {
  const auto paper = RunConfig::paper();
  CHECK(paper.n == 200);
  CHECK(paper.sizes.train == 10000);
  CHECK(paper.sizes.val == 2500);
  CHECK(paper.sizes.test == 20000);
  CHECK(paper.train.batch_size == 16);
  CHECK(paper.train.weight_decay == 5e-4);
  CHECK(paper.train.epochs == 200);
  CHECK(paper.train.patience == 10);
  CHECK(paper.ios.lambda == 10.0);
  CHECK(paper.do_value == 2.0);
  const auto desk = RunConfig::desk();
  CHECK(desk.sizes.train == paper.sizes.train / 2);
  CHECK(desk.train.epochs == paper.train.epochs / 2);
  CHECK_THROWS(RunConfig::for_profile("huge"));
}

TEST_CASE("config round trip through text") {
  auto cfg = RunConfig::desk();
  cfg.latent = "scm-s";
  cfg.d = 10;
  cfg.p = 3;
  cfg.mode = "ios";
  cfg.lr_grid = {0.003, 1e-4};
  cfg.ios.lambda = 2.5;
  cfg.seeds = {3, 9};
  cfg.do_grid = true;
  cfg.regressor.hidden = {64, 32};
  const auto text = cfg.to_doc().emit();
  CHECK(RunConfig::from_doc(io::KeyValueDoc::parse(text)) == cfg);
  CHECK(RunConfig::from_doc(io::KeyValueDoc::parse(text)).to_doc().emit() == text);
}

TEST_CASE("invalid configs are rejected") {
  auto cfg = RunConfig::desk();
  cfg.mode = "magic";
  CHECK_THROWS(cfg.validate());
  cfg = RunConfig::desk();
  cfg.latent = "uniform-c";
  cfg.d = 5;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("seed csv rows round trip") {
  SeedResult r = row("gmm", 4, 0.5);
  r.report.mcc_raw = 70.25;
  r.lr = 1e-4;
  r.epochs = 37;
  r.ios_det = 0.9;
  const auto back = parse_csv_row(to_csv_row(r));
  CHECK(to_csv_row(back) == to_csv_row(r));
  CHECK(back.report.mcc_raw == 70.25);
  CHECK(std::isnan(back.report.mcc_ios));
  CHECK_THROWS(parse_csv_row("a,b"));
}

TEST_CASE("aggregate: SE is sd / sqrt(5)") {
  std::vector<SeedResult> rows;
  for (int s = 0; s < 5; ++s) rows.push_back(row("uniform", static_cast<std::uint64_t>(s), 0.9 + 0.01 * s));
  const auto t = aggregate(rows, 5);
  CHECK(t.warnings.empty());
  // r2 values 0.90..0.94: mean 0.92, sd 0.0158, se 0.00707
  CHECK(t.markdown.find("0.92 ± 0.01") != std::string::npos);
  CHECK(t.csv.find("0.92") != std::string::npos);
  CHECK(t.markdown.find("| -") != std::string::npos);  // empty MCC (IOS) column
}

TEST_CASE("aggregate: single seed has no SE and warns") {
  const auto t = aggregate({row("uniform", 0, 0.9)}, 5);
  CHECK(t.markdown.find("±") == std::string::npos);
  CHECK(t.warnings.size() == 2);
}

TEST_CASE("aggregate groups mixed configurations") {
  std::vector<SeedResult> rows{row("uniform", 0, 1.0), row("gmm", 0, 0.5), row("uniform", 1, 1.0)};
  const auto t = aggregate(rows, 2);
  int lines = 0;
  for (char ch : t.csv) lines += ch == '\n';
  CHECK(lines == 3);  // header + two groups
}

TEST_CASE("emit_tables reads seed files from a directory tree") {
  const auto dir = fs::temp_directory_path() / "crl_test_tables";
  fs::remove_all(dir);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  for (int s = 0; s < 3; ++s)
    io::write_file(dir / "a" / ("seed-" + std::to_string(s) + ".csv"),
                   seed_csv_header() + "\n" + to_csv_row(row("uniform", static_cast<std::uint64_t>(s), 0.9)) + "\n");
  io::write_file(dir / "b" / "seed-0.csv", seed_csv_header() + "\n" + to_csv_row(row("gmm", 0, 0.7)) + "\n");
  const auto t = emit_tables(dir, 3);
  CHECK(t.markdown.find("uniform") != std::string::npos);
  CHECK(t.markdown.find("gmm") != std::string::npos);
  CHECK(t.warnings.size() == 2);  // gmm: one of three seeds, single seed
  fs::remove_all(dir);
}

TEST_CASE("worker pool respects CRL_LAB_THREADS") {
  setenv("CRL_LAB_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  setenv("CRL_LAB_THREADS", "junk", 1);
  CHECK(worker_threads() >= 1);
  unsetenv("CRL_LAB_THREADS");
}

TEST_CASE("parallel_for runs every job and reports the first failure") {
  std::vector<int> hit(20, 0);
  parallel_for(hit.size(), [&](std::size_t j) { hit[j] = 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 20);
  CHECK_THROWS_WITH(parallel_for(5, [](std::size_t j) {
                      if (j >= 2) throw std::runtime_error("job " + std::to_string(j));
                    }),
                    "job 2");
}

TEST_CASE("pipeline is deterministic and writes its run directory") {
  const auto cfg = tiny("il");
  const auto dir = fs::temp_directory_path() / "crl_test_run";
  fs::remove_all(dir);
  const auto a = run_experiment(cfg, dir);
  const auto b = run_experiment(cfg);
  REQUIRE(a.size() == 2);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(to_csv_row(a[k]) == to_csv_row(b[k]));
  CHECK(fs::exists(dir / "config.txt"));
  CHECK(fs::exists(dir / "seed-1.csv"));
  const auto table = io::read_file(dir / "table.md");
  CHECK(emit_tables(dir, 2).markdown == table);
  fs::remove_all(dir);
}

TEST_CASE("mode gating of the report columns") {
  auto cfg = tiny("obs");
  cfg.seeds = {0};
  const auto r = run_experiment(cfg).front().report;
  CHECK(std::isfinite(r.r2));
  CHECK(std::isfinite(r.mcc_raw));
  CHECK(std::isnan(r.mcc_il));
  CHECK(std::isnan(r.mcc_ios));
  cfg.mode = "ios";
  const auto s = run_experiment(cfg).front().report;
  CHECK(std::isfinite(s.mcc_ios));
  CHECK(std::isnan(s.mcc_il));
}

TEST_CASE("stage failures carry a stage tag") {
  auto cfg = tiny("obs");
  cfg.decoder = "mlp";
  cfg.decoder_hidden = 50;  // wider than n: the generator refuses
  cfg.seeds = {0};
  CHECK_THROWS_WITH(run_experiment(cfg), doctest::Contains("[gen]"));
}
