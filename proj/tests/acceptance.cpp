// Acceptance suite: one PASS/FAIL line per criterion, details above it.
// With arguments (e.g. `acceptance C7 C8`) only those criteria run.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "crl/experiment.hpp"
#include "crl/identify.hpp"
#include "crl/metrics.hpp"
#include "crl/nets.hpp"
#include "crl/poly_core.hpp"
#include "crl/theory_checks.hpp"
#include "oracles.hpp"

using namespace crl;

namespace {

const std::vector<std::uint64_t> kSeeds = {0, 1, 2, 3, 4};

RunConfig desk(const std::string& latent, int d, int p, const std::string& mode) {
  auto cfg = RunConfig::desk();
  cfg.latent = latent;
  cfg.d = d;
  cfg.p = p;
  cfg.mode = mode;
  cfg.seeds = kSeeds;
  return cfg;
}

// Seed rows shared between criteria, computed on first use.
const std::vector<SeedResult>& uniform_ios() {
  static const auto rows = run_experiment(desk("uniform", 6, 2, "ios"));
  return rows;
}

CheckResult oracle_check(const std::string& name, int agree, int total) {
  CheckResult c;
  c.id = "oracle";
  c.name = name;
  c.statistic = "agreeing cases";
  c.cmp = Cmp::AtLeast;
  c.threshold = total;
  c.per_seed = {static_cast<double>(agree)};
  return finish_check(c);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

std::vector<CheckResult> oracles() {
  std::vector<CheckResult> out;
  out.push_back(check_product_degree(200, 7));

  {
    Rng rng(11);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> grid(-2, 2);
    int agree = 0, total = 0;
    for (int m = 2; m <= 64; ++m)
      for (int d : {2, 3, 4}) {
        const bool ties = m % 3 == 0;
        const Matrix pts = Matrix::NullaryExpr(m, d, [&] { return ties ? double(grid(rng)) : nd(rng); });
        const auto pairs = unordered_pairs(d);
        agree += hausdorff_support_loss(pts, pairs).value == oracle::hausdorff_brute(pts, pairs);
        ++total;
      }
    out.push_back(oracle_check("hausdorff batch loss == double loop, m in 2..64", agree, total));
  }

  {
    Rng rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    int agree = 0, total = 0;
    for (int d = 1; d <= 7; ++d)
      for (int t = 0; t < 30; ++t) {
        Matrix cost = Matrix::NullaryExpr(d, d, [&] { return u(rng); });
        if (t % 3 == 0) cost = (cost * 3.0).array().round();
        agree += std::abs(assignment_cost(cost, assignment_solve(cost)) - oracle::assignment_brute(cost)) <= 1e-12;
        ++total;
      }
    out.push_back(oracle_check("assignment == permutation brute force, d <= 7", agree, total));
  }

  {
    Rng rng(13);
    std::normal_distribution<double> nd;
    nets::Mlp net({5, 8, 6, 3}, rng);
    const Matrix x = Matrix::NullaryExpr(7, 5, [&] { return nd(rng); });
    const Matrix w = Matrix::NullaryExpr(7, 3, [&] { return nd(rng); });
    net.forward(x);
    net.backward(w);
    auto loss = [&] { return net.predict(x).cwiseProduct(w).sum(); };
    int agree = 0, total = 0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const Matrix gw = net.weight_grad(l);
      const RowVector gb = net.bias_grad(l);
      for (Eigen::Index i = 0; i < gw.rows(); ++i)
        for (Eigen::Index j = 0; j < gw.cols(); ++j, ++total)
          agree += rel_err(gw(i, j), oracle::central_difference(net.weight(l)(i, j), loss)) < 1e-4;
      for (Eigen::Index j = 0; j < gb.size(); ++j, ++total)
        agree += rel_err(gb(j), oracle::central_difference(net.bias(l)(j), loss)) < 1e-4;
    }
    out.push_back(oracle_check("mlp gradients vs central differences (1e-4 relative)", agree, total));
  }
  return out;
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<std::vector<CheckResult>()> run;
};

std::vector<Criterion> criteria() {
  return {
      {"C1", "affine identification, uniform d6 p2",
       [] { return std::vector{check_rows("C1", "uniform d6 p2", uniform_ios(), Statistic::R2, Cmp::AtLeast, 0.98)}; }},
      {"C2", "do identification, uniform d6 p2",
       [] {
         const auto rows = run_experiment(desk("uniform", 6, 2, "il"));
         return std::vector{check_rows("C2", "uniform d6 p2", rows, Statistic::MccIl, Cmp::AtLeast, 97.0),
                            check_rows("C2", "uniform d6 p2, Step 1 alone", rows, Statistic::MccRaw, Cmp::AtMost, 85.0)};
       }},
      {"C3", "independent support",
       [] {
         return std::vector{
             check_rows("C3", "uniform d6 p2", uniform_ios(), Statistic::MccIos, Cmp::AtLeast, 97.0),
             check_independent_support("uniform-c d6 p2", desk("uniform-c", 6, 2, "ios"), 93.0),
             check_support_gain_control("gmm d6 p2", desk("gmm", 6, 2, "ios"), 10.0)};
       }},
      {"C4", "hard regime, scm-s d10 p3",
       [] {
         const auto rows = run_experiment(desk("scm-s", 10, 3, "il"));
         return std::vector{check_rows("C4", "scm-s d10 p3", rows, Statistic::R2, Cmp::AtLeast, 0.8),
                            check_rows("C4", "scm-s d10 p3", rows, Statistic::MccIl, Cmp::AtLeast, 95.0)};
       }},
      {"C5", "block affine, chain with imperfect sink intervention",
       [] { return check_block_affine("bounded chain d4, imperfect sink", BlockConfig{}, kSeeds); }},
      {"C6", "multi-intervention trend",
       [] {
         auto cfg = trend_config();
         cfg.seeds = kSeeds;
         return check_multi_do_trend("neural g d4", cfg, {1, 3, 5}, 2.0, 10.0);
       }},
      {"C7", "oracle equivalences", oracles},
      {"C8", "degree selection",
       [] { return std::vector{check_degree_selection(DegreeSelConfig{}, {1, 2, 3}, {0, 1, 2})}; }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only(argv + 1, argv + argc);
  std::vector<std::pair<std::string, bool>> verdicts;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string line;
    try {
      const auto results = c.run();
      std::cout << "\n## " << c.id << " " << c.title << "\n\n" << suite_report(results) << std::flush;
      ok = all_passed(results);
    } catch (const std::exception& e) {
      std::cout << "\n## " << c.id << " " << c.title << "\nerror: " << e.what() << "\n";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.0f s)", secs);
    line = (ok ? "PASS " : "FAIL ") + c.id + " " + c.title + buf;
    std::cout << line << "\n" << std::flush;
    verdicts.emplace_back(line, ok);
  }
  std::cout << "\n# Summary\n";
  bool all = !verdicts.empty();
  for (const auto& [line, ok] : verdicts) {
    std::cout << line << "\n";
    all = all && ok;
  }
  return all ? 0 : 1;
}
