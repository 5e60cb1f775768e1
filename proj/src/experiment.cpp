#include "crl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace crl {

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + io::format_double(v[i]);
  return out;
}

template <typename T, typename Parse>
std::vector<T> split_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const auto b = item.find_last_not_of(" \t");
    out.push_back(parse(item.substr(a, b - a + 1)));
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

}  // namespace

RunConfig RunConfig::paper() {
  RunConfig c;
  c.profile = "paper";
  return c;
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.profile = "desk";
  c.sizes = {5000, 1250, 10000};
  c.train.epochs = 100;
  c.ios.epochs = 60;
  return c;
}

RunConfig RunConfig::for_profile(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw std::invalid_argument("unknown profile '" + name + "' (paper, desk)");
}

std::string RunConfig::label() const {
  return latent + "/d" + std::to_string(d) + "/p" + std::to_string(p) + "/" + mode;
}

io::KeyValueDoc RunConfig::to_doc() const {
  io::KeyValueDoc doc;
  doc.set("profile", profile);
  doc.set("mode", mode);
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  doc.set("seeds", s);
  doc.set("targets_seed", std::to_string(targets_seed));
  doc.set("data.latent", latent);
  doc.set("data.d", d);
  doc.set("data.p", p);
  doc.set("data.n", n);
  doc.set("data.decoder", decoder);
  doc.set("data.decoder_hidden", decoder_hidden);
  doc.set("data.interventions", interventions);
  doc.set("data.do_value", do_value);
  doc.set("data.do_grid", do_grid ? 1 : 0);
  doc.set("data.train_rows", static_cast<std::int64_t>(sizes.train));
  doc.set("data.val_rows", static_cast<std::int64_t>(sizes.val));
  doc.set("data.test_rows", static_cast<std::int64_t>(sizes.test));
  doc.set("step1.head", head);
  doc.set("step1.epochs", train.epochs);
  doc.set("step1.batch_size", train.batch_size);
  doc.set("step1.weight_decay", train.weight_decay);
  doc.set("step1.patience", train.patience);
  doc.set("step1.lr_grid", join_doubles(lr_grid));
  doc.set("step1.restarts", restarts);
  doc.set("step1.retries", retries);
  doc.set("step1.retry_above", retry_above);
  doc.set("step1.whiten", train.whiten ? 1 : 0);
  doc.set("step1.whiten_ridge", train.whiten_ridge);
  doc.set("ios.lambda", ios.lambda);
  doc.set("ios.batch_size", ios.batch_size);
  doc.set("ios.epochs", ios.epochs);
  doc.set("ios.lr", ios.lr);
  std::string hidden;
  for (std::size_t i = 0; i < regressor.hidden.size(); ++i)
    hidden += (i ? "," : "") + std::to_string(regressor.hidden[i]);
  doc.set("regressor.hidden", hidden);
  doc.set("regressor.lr", regressor.lr);
  doc.set("regressor.alpha", regressor.alpha);
  doc.set("regressor.max_iter", regressor.max_iter);
  doc.set("regressor.batch_size", regressor.batch_size);
  doc.set("regressor.tol", regressor.tol);
  doc.set("regressor.n_iter_no_change", regressor.n_iter_no_change);
  return doc;
}

RunConfig RunConfig::from_doc(const io::KeyValueDoc& doc) {
  // Missing keys keep the profile defaults, so a config file may list only
  // what it changes.
  RunConfig c = for_profile(doc.get("profile").value_or("paper"));
  auto str = [&](const char* k, std::string& v) {
    if (auto s = doc.get(k)) v = *s;
  };
  auto num = [&](const char* k, auto& v) {
    if (auto s = doc.get(k)) {
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
        v = io::parse_double(*s);
      else
        v = static_cast<std::decay_t<decltype(v)>>(io::parse_int(*s));
    }
  };
  auto flag = [&](const char* k, bool& v) {
    if (auto s = doc.get(k)) v = parse_bool(*s);
  };
  str("mode", c.mode);
  if (auto s = doc.get("seeds"))
    c.seeds = split_list<std::uint64_t>(*s, [](const std::string& t) { return std::stoull(t); });
  if (auto s = doc.get("targets_seed")) c.targets_seed = std::stoull(*s);
  str("data.latent", c.latent);
  num("data.d", c.d);
  num("data.p", c.p);
  num("data.n", c.n);
  str("data.decoder", c.decoder);
  num("data.decoder_hidden", c.decoder_hidden);
  num("data.interventions", c.interventions);
  num("data.do_value", c.do_value);
  flag("data.do_grid", c.do_grid);
  num("data.train_rows", c.sizes.train);
  num("data.val_rows", c.sizes.val);
  num("data.test_rows", c.sizes.test);
  str("step1.head", c.head);
  num("step1.epochs", c.train.epochs);
  num("step1.batch_size", c.train.batch_size);
  num("step1.weight_decay", c.train.weight_decay);
  num("step1.patience", c.train.patience);
  if (auto s = doc.get("step1.lr_grid")) c.lr_grid = split_list<double>(*s, io::parse_double);
  num("step1.restarts", c.restarts);
  num("step1.retries", c.retries);
  num("step1.retry_above", c.retry_above);
  flag("step1.whiten", c.train.whiten);
  num("step1.whiten_ridge", c.train.whiten_ridge);
  num("ios.lambda", c.ios.lambda);
  num("ios.batch_size", c.ios.batch_size);
  num("ios.epochs", c.ios.epochs);
  num("ios.lr", c.ios.lr);
  if (auto s = doc.get("regressor.hidden"))
    c.regressor.hidden = split_list<int>(*s, [](const std::string& t) { return static_cast<int>(io::parse_int(t)); });
  num("regressor.lr", c.regressor.lr);
  num("regressor.alpha", c.regressor.alpha);
  num("regressor.max_iter", c.regressor.max_iter);
  num("regressor.batch_size", c.regressor.batch_size);
  num("regressor.tol", c.regressor.tol);
  num("regressor.n_iter_no_change", c.regressor.n_iter_no_change);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (latent != "uniform" && latent != "uniform-c" && latent != "gmm" && latent != "scm-s" && latent != "scm-d")
    fail("unknown latent '" + latent + "'");
  if (mode != "obs" && mode != "il" && mode != "il-mlp" && mode != "ios") fail("unknown mode '" + mode + "'");
  if (decoder != "poly" && decoder != "mlp") fail("decoder must be poly or mlp");
  if (head != "poly" && head != "mlp") fail("head must be poly or mlp");
  if (d < 1 || p < 1 || n < 1) fail("d, p and n must be positive");
  if (latent == "uniform-c" && d % 2) fail("uniform-c needs an even d");
  if (interventions < 1) fail("interventions must be at least 1");
  if (sizes.train < 2 || sizes.val < 2 || sizes.test < 2) fail("every split needs at least two rows");
  if (lr_grid.empty()) fail("empty learning-rate grid");
  if (restarts < 1) fail("restarts must be at least 1");
  if (retries < 0) fail("retries must not be negative");
  if (seeds.empty()) fail("no seeds");
}

// ------------------------------------------------------------------- csv rows

std::string seed_csv_header() {
  return "latent,d,p,mode,seed,r2,mcc_raw,mcc_il,mcc_ios,recon_mse,lr,epochs,ios_det";
}

std::string to_csv_row(const SeedResult& r) {
  std::ostringstream o;
  o << r.latent << ',' << r.d << ',' << r.p << ',' << r.mode << ',' << r.seed << ','
    << io::format_double(r.report.r2) << ',' << io::format_double(r.report.mcc_raw) << ','
    << io::format_double(r.report.mcc_il) << ',' << io::format_double(r.report.mcc_ios) << ','
    << io::format_double(r.report.recon_mse) << ',' << io::format_double(r.lr) << ',' << r.epochs << ','
    << io::format_double(r.ios_det);
  return o.str();
}

SeedResult parse_csv_row(const std::string& line) {
  const auto f = split_list<std::string>(line, [](const std::string& t) { return t; });
  if (f.size() != 13) throw FormatError("seed csv row: expected 13 fields, got " + std::to_string(f.size()));
  SeedResult r;
  r.latent = f[0];
  r.d = static_cast<int>(io::parse_int(f[1]));
  r.p = static_cast<int>(io::parse_int(f[2]));
  r.mode = f[3];
  r.seed = std::stoull(f[4]);
  r.report.r2 = io::parse_double(f[5]);
  r.report.mcc_raw = io::parse_double(f[6]);
  r.report.mcc_il = io::parse_double(f[7]);
  r.report.mcc_ios = io::parse_double(f[8]);
  r.report.recon_mse = io::parse_double(f[9]);
  r.lr = io::parse_double(f[10]);
  r.epochs = static_cast<int>(io::parse_int(f[11]));
  r.ios_det = io::parse_double(f[12]);
  return r;
}

// ------------------------------------------------------------------- pipeline

Dataset make_dataset(const RunConfig& cfg, std::uint64_t seed, GroundTruthDecoder* truth) {
  cfg.validate();
  const auto model = make_latent_model(cfg.latent, cfg.d, derive_seed(seed, 1));
  GroundTruthDecoder g;
  if (cfg.decoder == "poly") {
    Rng rng(derive_seed(seed, 2));
    g = PolyDecoder::random(cfg.d, cfg.p, cfg.n, rng);
  } else {
    g = NeuralDecoder::random(cfg.d, cfg.n, cfg.decoder_hidden, derive_seed(seed, 2));
  }
  std::vector<InterventionSpec> specs;
  GenerateSizes sizes{cfg.sizes, {0, 0, 0}};
  if (cfg.uses_interventions()) {
    sizes.interventional = cfg.sizes;
    for (int i = 0; i < cfg.d; ++i) {
      if (cfg.interventions == 1 && !cfg.do_grid) {
        specs.push_back(InterventionSpec::do_single(i, cfg.do_value));
      } else {
        const auto [a, b] = model.coordinate_range(i);
        specs.push_back(InterventionSpec::do_multi(i, do_value_grid(cfg.interventions, a, b)));
      }
    }
  }
  auto ds = generate(model, g, specs, sizes, derive_seed(seed, 3));
  if (truth) *truth = std::move(g);
  return ds;
}

nets::LrSelection train_step1(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed) {
  const int n = static_cast<int>(ds.x.cols());
  auto make = [&](std::size_t k) {
    Rng rng(derive_seed(derive_seed(seed, 21), k));
    nets::Mlp enc = nets::Mlp::encoder(n, cfg.d, rng);
    if (cfg.head == "poly") return nets::Autoencoder{std::move(enc), nets::PolyDecoderHead(cfg.d, cfg.p, n, rng), {}};
    return nets::Autoencoder{std::move(enc), nets::Mlp::decoder(cfg.d, n, rng), {}};
  };
  std::vector<double> grid;
  for (int r = 0; r < cfg.restarts; ++r) grid.insert(grid.end(), cfg.lr_grid.begin(), cfg.lr_grid.end());
  auto hp = cfg.train;
  hp.seed = derive_seed(seed, 22);
  const Matrix xt = ds.rows_x(ds.select(Split::Train));
  const Matrix xv = ds.rows_x(ds.select(Split::Val));
  auto sel = nets::lr_select(grid, make, xt, xv, hp);
  if (cfg.head != "poly") return sel;

  // The right-degree head reconstructs x almost exactly, so a clearly worse
  // fit is a stuck run rather than a hard problem.
  const double var = (xv.rowwise() - xv.colwise().mean()).squaredNorm() / static_cast<double>(xv.size());
  auto relative = [&](const nets::LrSelection& s) { return nets::mse(s.best.model.reconstruct(xv), xv) / var; };
  for (int round = 1; round <= cfg.retries && relative(sel) >= cfg.retry_above; ++round) {
    const std::size_t offset = static_cast<std::size_t>(round) * grid.size();
    try {
      auto more = nets::lr_select(grid, [&](std::size_t k) { return make(offset + k); }, xt, xv, hp);
      sel.val_losses.insert(sel.val_losses.end(), more.val_losses.begin(), more.val_losses.end());
      if (more.best.best_val < sel.best.best_val) {
        sel.chosen = offset + more.chosen;
        sel.lr = more.lr;
        sel.best = std::move(more.best);
      }
    } catch (const nets::TrainingDivergence&) {
      sel.val_losses.insert(sel.val_losses.end(), grid.size(), std::numeric_limits<double>::infinity());
    }
  }
  return sel;
}

EncodedInterventions encode_interventions(const nets::Autoencoder& model, const Dataset& ds, Split split, int d) {
  EncodedInterventions out(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    int values = 0;
    for (const auto& s : ds.specs)
      if (s.target == i) values = std::max(values, s.num_values());
    for (int v = 0; v < values; ++v) {
      const auto rows = ds.select_value(split, i, v);
      if (rows.empty())
        throw std::runtime_error("no rows for latent " + std::to_string(i) + " value " + std::to_string(v));
      out[static_cast<std::size_t>(i)].push_back(model.encode(ds.rows_x(rows)));
    }
  }
  return out;
}

SeedArtifacts evaluate(const RunConfig& cfg, const Dataset& ds, const nets::Autoencoder& model, std::uint64_t seed) {
  SeedArtifacts art;
  art.model = model;
  auto& r = art.result;
  r.latent = cfg.latent;
  r.d = cfg.d;
  r.p = cfg.p;
  r.mode = cfg.mode;
  r.seed = seed;
  const auto test = ds.select(Split::Test, -1);
  const Matrix x_test = ds.rows_x(test);
  const Matrix z_test = ds.rows_z(test);
  const Matrix zh = model.encode(x_test);
  r.report.r2 = r2_affine(zh, z_test).r2;
  r.report.mcc_raw = mcc(zh, z_test);
  r.report.recon_mse = nets::mse(model.reconstruct(x_test), x_test);

  if (cfg.mode == "il" || cfg.mode == "il-mlp") {
    const auto targets = draw_targets(cfg.d, cfg.interventions, derive_seed(cfg.targets_seed, seed));
    const auto encoded = encode_interventions(model, ds, Split::Train, cfg.d);
    if (cfg.mode == "il") {
      art.representation = fit_linear_gamma(encoded, targets).apply(zh);
    } else {
      auto h = cfg.regressor;
      h.seed = derive_seed(seed, 41);
      art.representation = fit_nonlinear_gamma(encoded, targets, h).apply(zh);
    }
    r.report.mcc_il = mcc(art.representation, z_test);
  } else if (cfg.mode == "ios") {
    auto h = cfg.ios;
    h.seed = derive_seed(seed, 31);
    const auto g = fit_ios_gamma(model.encode(ds.rows_x(ds.select(Split::Train, -1))), h);
    art.representation = g.apply(zh);
    r.report.mcc_ios = mcc(art.representation, z_test);
    r.ios_det = g.det;
  }
  return art;
}

SeedArtifacts run_seed(const RunConfig& cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  GroundTruthDecoder truth;
  Dataset ds;
  try {
    ds = make_dataset(cfg, seed, &truth);
  } catch (const std::exception& e) {
    throw std::runtime_error("[gen] " + std::string(e.what()));
  }
  nets::LrSelection sel;
  try {
    sel = train_step1(cfg, ds, seed);
  } catch (const std::exception& e) {
    throw std::runtime_error("[train] " + std::string(e.what()));
  }
  SeedArtifacts art;
  try {
    art = evaluate(cfg, ds, sel.best.model, seed);
  } catch (const std::exception& e) {
    throw std::runtime_error("[identify] " + std::string(e.what()));
  }
  art.result.lr = sel.lr;
  art.result.epochs = static_cast<int>(sel.best.val_loss.size());
  art.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  art.data = std::move(ds);
  art.truth = std::move(truth);
  return art;
}

unsigned worker_threads() {
  if (const char* env = std::getenv("CRL_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        fn(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const auto pool = std::min<std::size_t>(worker_threads(), jobs);
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < pool; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<SeedResult> run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const std::size_t jobs = cfg.seeds.size();
  std::vector<SeedResult> rows(jobs);
  parallel_for(jobs, [&](std::size_t j) {
    try {
      rows[j] = run_seed(cfg, cfg.seeds[j]).result;
    } catch (const std::exception& e) {
      throw std::runtime_error("seed " + std::to_string(cfg.seeds[j]) + ": " + e.what());
    }
  });
  if (!out_dir.empty()) {
    io::write_file(out_dir / "config.txt", cfg.to_doc().emit());
    for (const auto& r : rows)
      io::write_file(out_dir / ("seed-" + std::to_string(r.seed) + ".csv"),
                     seed_csv_header() + "\n" + to_csv_row(r) + "\n");
    const auto t = aggregate(rows, static_cast<int>(jobs));
    io::write_file(out_dir / "table.md", t.markdown);
    io::write_file(out_dir / "table.csv", t.csv);
  }
  return rows;
}

// --------------------------------------------------------------------- tables

namespace {

struct Column {
  const char* title;
  const char* key;
  double EvalReport::*field;
  int digits;
};

const Column kColumns[] = {
    {"Recon-MSE", "recon_mse", &EvalReport::recon_mse, 2},
    {"R2", "r2", &EvalReport::r2, 2},
    {"MCC", "mcc_raw", &EvalReport::mcc_raw, 2},
    {"MCC (IL)", "mcc_il", &EvalReport::mcc_il, 2},
    {"MCC (IOS)", "mcc_ios", &EvalReport::mcc_ios, 2},
};

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

}  // namespace

Tables aggregate(const std::vector<SeedResult>& rows, int expected_seeds) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SeedResult*>> groups;
  for (const auto& r : rows) {
    const std::string key = r.latent + "/d" + std::to_string(r.d) + "/p" + std::to_string(r.p) + "/" + r.mode;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }

  Tables out;
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"P_Z", "d", "p", "mode", "seeds"});
  for (const auto& c : kColumns) cells.back().push_back(c.title);
  out.csv = "latent,d,p,mode,seeds";
  for (const auto& c : kColumns) out.csv += std::string(",") + c.key + "_mean," + c.key + "_se";
  out.csv += "\n";

  for (const auto& key : order) {
    const auto& g = groups[key];
    const auto& first = *g.front();
    const int count = static_cast<int>(g.size());
    if (count < expected_seeds)
      out.warnings.push_back(key + ": " + std::to_string(count) + " of " + std::to_string(expected_seeds) +
                             " seeds present");
    if (count == 1) out.warnings.push_back(key + ": single seed, no standard error");
    std::vector<std::string> row{first.latent, std::to_string(first.d), std::to_string(first.p), first.mode,
                                 std::to_string(count)};
    std::string csv = first.latent + "," + std::to_string(first.d) + "," + std::to_string(first.p) + "," +
                      first.mode + "," + std::to_string(count);
    for (const auto& c : kColumns) {
      std::vector<double> vals;
      for (const auto* r : g)
        if (!std::isnan(r->report.*c.field)) vals.push_back(r->report.*c.field);
      const auto ms = mean_se(vals);
      if (vals.empty()) {
        row.push_back("-");
        csv += ",,";
      } else if (std::isnan(ms.se)) {
        row.push_back(fixed(ms.mean, c.digits));
        csv += "," + io::format_double(ms.mean) + ",";
      } else {
        row.push_back(fixed(ms.mean, c.digits) + " ± " + fixed(ms.se, c.digits));
        csv += "," + io::format_double(ms.mean) + "," + io::format_double(ms.se);
      }
    }
    cells.push_back(std::move(row));
    out.csv += csv + "\n";
  }

  // aligned markdown; "±" is two bytes but one column wide
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> w(cells.front().size(), 3);
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j) w[j] = std::max(w[j], width(row[j]));
  auto line = [&](const std::vector<std::string>& row) {
    std::string s = "|";
    for (std::size_t j = 0; j < row.size(); ++j) s += " " + row[j] + std::string(w[j] - width(row[j]), ' ') + " |";
    return s + "\n";
  };
  out.markdown = line(cells.front());
  out.markdown += "|";
  for (auto x : w) out.markdown += std::string(x + 2, '-') + "|";
  out.markdown += "\n";
  for (std::size_t i = 1; i < cells.size(); ++i) out.markdown += line(cells[i]);
  return out;
}

Tables emit_tables(const std::filesystem::path& dir, int expected_seeds) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("seed-", 0) == 0 && e.path().extension() == ".csv")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SeedResult> rows;
  for (const auto& f : files) {
    std::istringstream in(io::read_file(f));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (header) {
        if (line != seed_csv_header()) throw FormatError(f.string() + ": unexpected header");
        header = false;
        continue;
      }
      rows.push_back(parse_csv_row(line));
    }
  }
  auto t = aggregate(rows, expected_seeds);
  if (rows.empty()) t.warnings.push_back("no seed-*.csv files under " + dir.string());
  return t;
}

}  // namespace crl
