// crl-lab: data generation, two-step training, evaluation, the verification
// suite and seed sweeps from the command line.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "crl/experiment.hpp"
#include "crl/theory_checks.hpp"

namespace fs = std::filesystem;
using namespace crl;

namespace {

// Options shared by gen and run. Unset options keep the profile defaults.
struct DataOptions {
  std::string profile = "desk";
  std::string config;
  std::string latent;
  int d = 0;
  int p = 0;
  int n = 0;
  std::string decoder;
  std::string head;
  std::string mode;
  int interventions = 0;

  void add(CLI::App* app) {
    app->add_option("--profile", profile, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--config", config, "key = value config file; flags override it");
    app->add_option("--latent", latent, "uniform, uniform-c, gmm, scm-s, scm-d");
    app->add_option("--d", d, "latent dimension");
    app->add_option("--p", p, "decoder degree");
    app->add_option("--n", n, "observation dimension");
    app->add_option("--decoder", decoder, "ground truth decoder: poly or mlp");
    app->add_option("--head", head, "learned decoder: poly or mlp");
    app->add_option("--mode", mode, "obs, il, il-mlp or ios");
    app->add_option("--interventions", interventions, "do values per latent");
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config.empty()) {
      auto doc = io::KeyValueDoc::parse(io::read_file(config));
      if (!doc.contains("profile")) doc.set("profile", profile);
      cfg = RunConfig::from_doc(doc);
    } else {
      cfg = RunConfig::for_profile(profile);
    }
    if (!latent.empty()) cfg.latent = latent;
    if (d > 0) cfg.d = d;
    if (p > 0) cfg.p = p;
    if (n > 0) cfg.n = n;
    if (!decoder.empty()) cfg.decoder = decoder;
    if (!head.empty()) cfg.head = head;
    if (!mode.empty()) cfg.mode = mode;
    if (interventions > 0) cfg.interventions = interventions;
    if (cfg.decoder == "mlp") cfg.decoder_hidden = std::min(cfg.decoder_hidden, cfg.n);
    return cfg;
  }
};

// A run directory written by gen and filled in by train / identify / eval.
struct RunDir {
  fs::path root;
  fs::path config() const { return root / "config.txt"; }
  fs::path data() const { return root / "data.bin"; }
  fs::path model() const { return root / "model.ckpt"; }
  fs::path identify() const { return root / "identify.txt"; }

  RunConfig load_config() const { return RunConfig::from_doc(io::KeyValueDoc::parse(io::read_file(config()))); }
  std::uint64_t seed() const { return load_config().seeds.at(0); }
};

std::string matrix_csv(const Matrix& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << io::format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

void print_report(const SeedResult& r) {
  std::cout << seed_csv_header() << '\n' << to_csv_row(r) << '\n';
}

// Applies identify.txt (written by `identify`) on top of the stored config.
RunConfig with_identify(const RunDir& dir) {
  auto cfg = dir.load_config();
  if (!fs::exists(dir.identify())) return cfg;
  const auto doc = io::KeyValueDoc::parse(io::read_file(dir.identify()));
  cfg.mode = doc.require("mode");
  cfg.ios.lambda = doc.get_double("lambda");
  cfg.targets_seed = static_cast<std::uint64_t>(doc.get_int("targets_seed"));
  return cfg;
}

SeedArtifacts evaluate_run(const RunDir& dir, const RunConfig& cfg) {
  nets::TrainHyper hp;
  const auto model = nets::load_checkpoint(dir.model(), &hp);
  auto art = evaluate(cfg, load(dir.data()), model, dir.seed());
  art.result.lr = hp.lr;
  return art;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crl-lab: identifiable representations from interventional and observational data"};
  app.require_subcommand(1);
  int status = 0;

  // gen
  DataOptions gen_opts;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "generate a dataset into a run directory");
  gen_opts.add(gen);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "run directory")->required();
  gen->callback([&] {
    auto cfg = gen_opts.build();
    cfg.seeds = {gen_seed};
    cfg.validate();
    const RunDir dir{gen_out};
    fs::create_directories(dir.root);
    GroundTruthDecoder truth;
    const auto ds = make_dataset(cfg, gen_seed, &truth);
    save(ds, dir.data());
    io::write_file(dir.config(), cfg.to_doc().emit());
    io::write_file(dir.root / "decoder.txt", std::visit([](const auto& g) { return g.serialize(); }, truth));
    std::cout << "wrote " << ds.rows() << " rows (" << ds.x.cols() << " columns) to " << dir.data().string() << '\n';
  });

  // train
  std::string train_dir;
  auto* train = app.add_subcommand("train", "Step 1: fit the autoencoder over the learning-rate grid");
  train->add_option("--run", train_dir, "run directory from gen")->required();
  train->callback([&] {
    const RunDir dir{train_dir};
    const auto cfg = dir.load_config();
    const auto ds = load(dir.data());
    const auto sel = train_step1(cfg, ds, dir.seed());
    nets::TrainHyper hp = cfg.train;
    hp.lr = sel.lr;
    save_checkpoint(dir.model(), sel.best.model, hp, Rng(derive_seed(dir.seed(), 22)));
    std::cout << "lr " << sel.lr << ", best val loss " << sel.best.best_val << " after "
              << sel.best.val_loss.size() << " epochs\n";
  });

  // identify
  std::string id_dir, id_mode = "il-linear";
  double id_lambda = 10.0;
  std::uint64_t id_targets = 0;
  auto* identify = app.add_subcommand("identify", "Step 2: map the encoding to the final representation");
  identify->add_option("--run", id_dir, "run directory with a trained model")->required();
  identify->add_option("--mode", id_mode)->check(CLI::IsMember({"il-linear", "il-mlp", "ios"}));
  identify->add_option("--lambda", id_lambda, "support penalty weight (ios)");
  identify->add_option("--targets-seed", id_targets, "seed of the regression targets (il modes)");
  identify->callback([&] {
    const RunDir dir{id_dir};
    io::KeyValueDoc doc;
    doc.set("mode", std::string(id_mode == "il-linear" ? "il" : id_mode));
    doc.set("lambda", id_lambda);
    doc.set("targets_seed", static_cast<std::int64_t>(id_targets));
    io::write_file(dir.identify(), doc.emit());
    const auto cfg = with_identify(dir);
    const auto art = evaluate_run(dir, cfg);
    io::write_file(dir.root / "representation.csv", matrix_csv(art.representation));
    print_report(art.result);
  });

  // eval
  std::string eval_dir;
  auto* eval = app.add_subcommand("eval", "score the run on the observational test rows");
  eval->add_option("--run", eval_dir, "run directory with a trained model")->required();
  eval->callback([&] {
    const RunDir dir{eval_dir};
    const auto cfg = with_identify(dir);
    const auto art = evaluate_run(dir, cfg);
    io::write_file(dir.root / ("seed-" + std::to_string(dir.seed()) + ".csv"),
                   seed_csv_header() + "\n" + to_csv_row(art.result) + "\n");
    print_report(art.result);
  });

  // verify
  std::string suite = "all", verify_profile = "desk", verify_out;
  int verify_seeds = 5;
  auto* verify = app.add_subcommand("verify", "run the identification checks");
  verify->add_option("--suite", suite, "all, fast or a comma list of ids (T1,T2,T3,T4,Tdo-multi,L1,L4,DegSel)");
  verify->add_option("--seeds", verify_seeds)->check(CLI::Range(1, 1000));
  verify->add_option("--profile", verify_profile)->check(CLI::IsMember({"paper", "desk"}));
  verify->add_option("--out", verify_out, "markdown report path");
  verify->callback([&] {
    SuiteOptions opt;
    opt.profile = verify_profile;
    opt.seeds.clear();
    for (int s = 0; s < verify_seeds; ++s) opt.seeds.push_back(static_cast<std::uint64_t>(s));
    const auto results = run_suite(suite, opt);
    const auto report = suite_report(results);
    std::cout << report;
    if (!verify_out.empty()) io::write_file(verify_out, report);
    if (!all_passed(results)) status = 1;
  });

  // run
  DataOptions run_opts;
  int run_seeds = 5;
  std::string run_out;
  auto* run = app.add_subcommand("run", "full pipeline over seeds, with aggregate tables");
  run_opts.add(run);
  run->add_option("--seeds", run_seeds, "seeds 0..N-1")->check(CLI::Range(1, 1000));
  run->add_option("--out", run_out, "output directory");
  run->callback([&] {
    auto cfg = run_opts.build();
    cfg.seeds.clear();
    for (int s = 0; s < run_seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    if (!run_out.empty()) fs::create_directories(run_out);
    const auto rows = run_experiment(cfg, run_out);
    const auto t = aggregate(rows, run_seeds);
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << t.markdown;
  });

  // tables
  std::string tables_dir;
  int tables_seeds = 5;
  auto* tables = app.add_subcommand("tables", "aggregate seed-*.csv files below a directory");
  tables->add_option("--dir", tables_dir)->required();
  tables->add_option("--expected-seeds", tables_seeds);
  tables->callback([&] {
    const auto t = emit_tables(tables_dir, tables_seeds);
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
    io::write_file(fs::path(tables_dir) / "table.md", t.markdown);
    io::write_file(fs::path(tables_dir) / "table.csv", t.csv);
    std::cout << t.markdown;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
