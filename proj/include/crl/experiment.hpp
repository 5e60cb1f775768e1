#pragma once

// End-to-end runs: generate data, train Step 1, fit Step 2, score on the
// observational test split, and aggregate per-seed rows into tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crl/datagen.hpp"
#include "crl/identify.hpp"
#include "crl/io.hpp"
#include "crl/metrics.hpp"
#include "crl/nets.hpp"

namespace crl {

struct RunConfig {
  std::string latent = "uniform";  // uniform | uniform-c | gmm | scm-s | scm-d
  int d = 6;
  int p = 2;
  int n = 200;
  std::string decoder = "poly";  // ground truth g: poly | mlp
  int decoder_hidden = 200;      // width of the mlp ground truth
  std::string head = "poly";     // learned decoder: poly | mlp
  std::string mode = "il";       // obs | il | il-mlp | ios
  int interventions = 1;         // do-values per latent
  double do_value = 2.0;         // used when interventions == 1 and !do_grid
  bool do_grid = false;          // spread values over the latent range even for a single value
  std::string profile = "paper";
  SplitSizes sizes;              // per source
  nets::TrainHyper train;
  std::vector<double> lr_grid = {1e-3, 5e-4, 1e-4};
  int restarts = 1;  // fresh initializations per grid learning rate
  // Poly head only: while the best relative val MSE stays at or above
  // retry_above, run the grid again with fresh inits, at most `retries` times.
  int retries = 3;
  double retry_above = 0.01;
  IosHyper ios;
  nets::RegressorHyper regressor;
  std::uint64_t targets_seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  static RunConfig paper();
  /// Half the rows and half the epoch budget.
  static RunConfig desk();
  static RunConfig for_profile(const std::string& name);

  bool uses_interventions() const { return mode == "il" || mode == "il-mlp"; }
  std::string label() const;  // latent/d/p/mode, used for grouping

  io::KeyValueDoc to_doc() const;
  static RunConfig from_doc(const io::KeyValueDoc& doc);
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// One row of the per-seed results.
struct SeedResult {
  std::string latent;
  int d = 0;
  int p = 0;
  std::string mode;
  std::uint64_t seed = 0;
  EvalReport report;
  double lr = 0.0;
  int epochs = 0;
  double ios_det = NAN;
  double seconds = 0.0;
};

std::string seed_csv_header();
std::string to_csv_row(const SeedResult& r);
SeedResult parse_csv_row(const std::string& line);

/// Everything produced by one seed; the heavy parts stay in memory.
struct SeedArtifacts {
  Dataset data;
  GroundTruthDecoder truth;
  nets::Autoencoder model;
  SeedResult result;
  Matrix representation;  // Step-2 output on the observational test rows (empty for obs)
};

/// The stages of run_seed, exposed so the CLI can run them one at a time.
Dataset make_dataset(const RunConfig& cfg, std::uint64_t seed, GroundTruthDecoder* truth = nullptr);
nets::LrSelection train_step1(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed);
/// Scores `model` (and Step 2 per cfg.mode) on the observational test rows.
SeedArtifacts evaluate(const RunConfig& cfg, const Dataset& ds, const nets::Autoencoder& model, std::uint64_t seed);

/// Rows of `split` grouped by intervened latent and value.
EncodedInterventions encode_interventions(const nets::Autoencoder& model, const Dataset& ds, Split split, int d);

SeedArtifacts run_seed(const RunConfig& cfg, std::uint64_t seed);

/// Worker count: CRL_LAB_THREADS when set, else the hardware concurrency.
unsigned worker_threads();

/// fn(0) ... fn(jobs - 1) on at most worker_threads() threads. The first
/// exception (lowest job index) is rethrown after all jobs finish.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Runs every seed on a bounded pool. With a non-empty out_dir writes
/// config.txt, one seed-<s>.csv per seed and the aggregate tables.
std::vector<SeedResult> run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir = {});

struct Tables {
  std::string markdown;
  std::string csv;
  std::vector<std::string> warnings;
};

/// Mean +- S.E. rows grouped by (latent, d, p, mode).
Tables aggregate(const std::vector<SeedResult>& rows, int expected_seeds = 5);
/// Reads every seed-*.csv below dir.
Tables emit_tables(const std::filesystem::path& dir, int expected_seeds = 5);

}  // namespace crl
