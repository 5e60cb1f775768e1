#pragma once

// Small-scale executable versions of the identification results. Every case
// runs a fixed configuration, reduces it to one statistic and compares that
// with a threshold.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crl/experiment.hpp"
#include "crl/latent_models.hpp"

namespace crl {

enum class Cmp { AtLeast, Above, Below, AtMost };

struct CheckResult {
  std::string id;  // T1, T2, T3, T4, Tdo-multi, L1, L4, DegSel
  std::string name;
  std::string statistic;
  double value = NAN;
  double threshold = NAN;
  Cmp cmp = Cmp::AtLeast;
  // A negative control passes when the statistic misses its threshold.
  bool control = false;
  bool passed = false;
  std::vector<double> per_seed;
  std::string detail;
};

bool compare(double value, Cmp cmp, double threshold);
const char* cmp_symbol(Cmp cmp);

/// Fills value/passed from per_seed (mean; NaN fails).
CheckResult finish_check(CheckResult c);

enum class Statistic { R2, MccRaw, MccIl, MccIos, IosGain };
double statistic_of(const SeedResult& r, Statistic s);
const char* statistic_name(Statistic s);

/// Mean of a statistic over already computed seed rows.
CheckResult check_rows(const std::string& id, const std::string& name, const std::vector<SeedResult>& rows,
                       Statistic stat, Cmp cmp, double threshold, bool control = false);

CheckResult check_affine(const std::string& name, RunConfig cfg, double threshold);
CheckResult check_do_identification(const std::string& name, RunConfig cfg, double threshold);
CheckResult check_independent_support(const std::string& name, RunConfig cfg, double threshold);
/// Negative control: MCC(IOS) - raw MCC stays under max_gain.
CheckResult check_support_gain_control(const std::string& name, RunConfig cfg, double max_gain);

// ------------------------------------------------------------ block affine

/// Chain DAG 0 -> 1 -> ... -> d-1 with an imperfect intervention on the sink.
/// Step 1 trains on observational and interventional rows, then IOS with the
/// pairs (0, m), m = 1..d-1, runs on the interventional encodings only.
struct BlockConfig {
  int d = 4;
  int p = 2;
  int n = 50;
  double edge_weight = 1.0;
  Mechanism mechanism = Mechanism::Bounded;
  double mechanism_strength = 0.5;
  bool intervene = true;  // false: IOS on observational rows (control)
  double low = -2.0;
  double high = 2.0;
  double strength = 0.5;  // parent influence on the sink; 0 is a perfect intervention
  SplitSizes sizes{5000, 1250, 5000};
  nets::TrainHyper train;
  std::vector<double> lr_grid = {1e-3, 5e-4, 1e-4};
  IosHyper ios;

  BlockConfig();
  LatentModel latent_model() const;
};

struct BlockSeedResult {
  double overlap = NAN;      // row 0 against rows 1..d-1 of the fitted mixing
  double match_corr = NAN;   // max_j |corr(rep_0, z_j)|
  int matched_latent = -1;
  double r2 = NAN;           // Step 1, on the evaluation rows
  double det = NAN;
  Matrix mixing;             // rep ~ mixing * z + c
};

BlockSeedResult run_block_seed(const BlockConfig& cfg, std::uint64_t seed);

/// Two results: mean overlap < max_overlap and mean match |corr| >= min_corr.
std::vector<CheckResult> check_block_affine(const std::string& name, const BlockConfig& cfg,
                                            const std::vector<std::uint64_t>& seeds, bool control = false,
                                            double max_overlap = 0.1, double min_corr = 0.95);

// --------------------------------------------------------- multi-do trend

struct TrendReport {
  std::vector<int> t;
  std::vector<double> median;                 // median MCC(IL) over seeds, per t
  std::vector<std::vector<double>> per_seed;  // per t
  bool monotone = false;                      // non-decreasing up to the tolerance
  double gain = NAN;                          // median(last t) - median(first t)
};

/// base.interventions is replaced by every entry of ts.
TrendReport multi_do_trend(const RunConfig& base, const std::vector<int>& ts, double tolerance = 2.0);
/// Monotonicity and the first-to-last gain as two results.
std::vector<CheckResult> check_multi_do_trend(const std::string& name, const RunConfig& base,
                                              const std::vector<int>& ts, double tolerance = 2.0,
                                              double min_gain = 10.0);
/// The desk trend configuration: neural g, MLP head, nonlinear Step 2.
RunConfig trend_config();

// -------------------------------------------------------- degree selection

struct DegreeSelConfig {
  int d = 3;
  int n = 20;
  int s_max = 4;
  double threshold = 0.01;
  int restarts = 4;
  Eigen::Index train_rows = 2000;
  Eigen::Index val_rows = 500;
  nets::TrainHyper train;

  DegreeSelConfig();
};

/// Selected degree for a random degree-p decoder on uniform latents.
DegreeSelection run_degree_selection(const DegreeSelConfig& cfg, int p, std::uint64_t seed);
CheckResult check_degree_selection(const DegreeSelConfig& cfg, const std::vector<int>& degrees,
                                   const std::vector<std::uint64_t>& seeds);

// ------------------------------------------------------------------ lemmas

/// Degree of a product of random nonzero sparse polynomials equals the sum of
/// the degrees, on `pairs` random pairs.
CheckResult check_product_degree(int pairs = 200, std::uint64_t seed = 0);
/// Random dense decoders with n >= number of monomials have full column rank
/// and map distinct latents to distinct observations; the underdetermined
/// control (n below the monomial count) must be rank deficient.
CheckResult check_injectivity(int decoders = 20, std::uint64_t seed = 0);

// ------------------------------------------------------------------- suite

struct SuiteOptions {
  std::string profile = "desk";
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
};

struct TheoremCase {
  std::string id;
  std::string name;
  bool heavy = true;  // trains networks
  std::function<std::vector<CheckResult>(const SuiteOptions&)> run;
};

const std::vector<TheoremCase>& theorem_cases();

/// suite: "all", "fast" (cases without training) or a comma list of ids.
std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& opt);
std::string suite_report(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace crl
