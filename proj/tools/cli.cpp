#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tikreg/config.hpp"
#include "tikreg/experiment.hpp"
#include "tikreg/report.hpp"

namespace tikreg::cli {

std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

namespace fs = std::filesystem;

struct InstanceOptions {
  int n = 64;
  double sigma = 0.05;
  std::string noise_case = "a";
  std::string prior = "paper";
  double kernel_c = 0.2;
  double laplacian_s = 2.0;
  std::string forward = "identity";
  double blur_width = 0.01;

  void attach(CLI::App* app, bool with_n = true) {
    if (with_n) app->add_option("--n", n, "grid size N")->capture_default_str();
    app->add_option("--sigma", sigma, "noise level")->capture_default_str();
    app->add_option("--case", noise_case, "noise case: a (Gaussian), b (uniform), c (uniform Haar)")
        ->check(CLI::IsMember({"a", "b", "c"}))
        ->capture_default_str();
    app->add_option("--prior", prior, "prior: paper, laplacian or unit")
        ->check(CLI::IsMember({"paper", "laplacian", "unit"}))
        ->capture_default_str();
    app->add_option("--kernel-c", kernel_c, "support radius c of the compact prior kernel")->capture_default_str();
    app->add_option("--laplacian-s", laplacian_s, "smoothness exponent s of the Laplacian prior")
        ->capture_default_str();
    app->add_option("--forward", forward, "forward operator: identity or blur")
        ->check(CLI::IsMember({"identity", "blur"}))
        ->capture_default_str();
    app->add_option("--blur-width", blur_width, "Gaussian blur width")->capture_default_str();
  }

  ProblemInstance build() const {
    const Grid grid(n);
    std::optional<PriorModel> p;
    if (prior == "unit") {
      // Coefficient covariance I.
      p.emplace(GridSignal::zero(grid), SymMatrix(Matrix::Identity(n, n) / std::sqrt(static_cast<double>(n))));
    } else if (prior == "laplacian") {
      p.emplace(triangle_mean(grid), laplacian_prior_cov_sqrt(laplacian_s, grid));
    } else {
      p.emplace(triangle_mean(grid), convolution_operator(paper_kernel(kernel_c), grid));
    }
    ForwardOp a = forward == "blur" ? blur_operator(blur_width, grid) : ForwardOp::identity(grid);
    return {std::move(a), std::move(*p), noise_model_for(parse_case(noise_case), sigma)};
  }
};

std::string print_double(double x) { return format_double(x, 10); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

// Pair files hold one row per grid cell: h_i, B_i1, ..., B_iN.
RegPair read_pair_file(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pair file '" + path + "'");
  const int n = grid.n();
  Vector h(n);
  Matrix b(n, n);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#') continue;
    if (row >= n) throw ConfigError("pair file: more than N=" + std::to_string(n) + " rows");
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col > n) throw ConfigError("pair file: row " + std::to_string(row + 1) + " has too many fields");
      const auto b0 = cell.find_first_not_of(" \t\r");
      const auto e0 = cell.find_last_not_of(" \t\r");
      const std::string t = b0 == std::string::npos ? std::string() : cell.substr(b0, e0 - b0 + 1);
      double v = 0.0;
      const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw ConfigError("pair file: bad number '" + cell + "'");
      }
      (col == 0 ? h(row) : b(row, col - 1)) = v;
      ++col;
    }
    if (col != n + 1) {
      throw ConfigError("pair file: row " + std::to_string(row + 1) + " needs " + std::to_string(n + 1) + " fields");
    }
    ++row;
  }
  if (row != n) throw ConfigError("pair file: expected " + std::to_string(n) + " rows, got " + std::to_string(row));
  if (!((b - b.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()))) {
    throw ConfigError("pair file: B is not symmetric");
  }
  return {GridSignal(grid, h), SymMatrix(b)};
}

void write_pair_file(const std::string& path, const RegPair& pair) {
  std::ofstream out = open_out(path);
  out << "# h_i,B_i1..B_iN\n";
  const auto n = pair.b.dim();
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(pair.h.coeffs(i));
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(pair.b(i, j));
    out << '\n';
  }
}

struct SweepOptions {
  std::string config;
  bool paper_default = false;
  bool quick = false;
  std::optional<std::string> noise_case;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> grid_sizes;
  std::optional<std::string> sample_sizes;
  std::optional<int> reps;
  std::optional<double> sigma;
  std::optional<unsigned> threads;
  std::optional<std::string> prior;
  std::optional<double> kernel_c;
  std::optional<std::string> forward;
  std::optional<double> blur_width;
  std::string out = ".";
  bool progress = false;

  SweepConfig resolve() const {
    if (quick && !config.empty()) throw ConfigError("--quick and --config are mutually exclusive");
    SweepConfig cfg = quick ? SweepConfig::quick() : SweepConfig::paper_default();
    if (!config.empty()) cfg = load_sweep_config(config);
    if (noise_case) cfg.noise_case = parse_case(*noise_case);
    if (seed) cfg.master_seed = *seed;
    if (grid_sizes) cfg.grid_sizes = parse_int_list(*grid_sizes);
    if (sample_sizes) cfg.sample_sizes = parse_size_list(*sample_sizes);
    if (reps) cfg.reps = *reps;
    if (sigma) cfg.sigma = *sigma;
    if (threads) cfg.threads = *threads;
    if (prior) {
      cfg.prior.kind = *prior == "laplacian" ? PriorSpec::Kind::Laplacian : PriorSpec::Kind::PaperConvolution;
    }
    if (kernel_c) cfg.prior.kernel_c = *kernel_c;
    if (forward) cfg.forward.kind = *forward == "blur" ? ForwardSpec::Kind::Blur : ForwardSpec::Kind::Identity;
    if (blur_width) cfg.forward.blur_width = *blur_width;
    cfg.validate();
    return cfg;
  }
};

int cmd_risk(const InstanceOptions& io, const std::string& pair_file, const std::string& write_pair,
             std::ostream& out) {
  const ProblemInstance inst = io.build();
  const double lstar = minimal_risk(inst);
  out << "N=" << inst.n() << '\n';
  out << "minimal_risk=" << print_double(lstar) << '\n';
  out << "prior_trace=" << print_double(inst.prior_cov().matrix().trace() / inst.n()) << '\n';
  if (!write_pair.empty()) write_pair_file(write_pair, optimal_pair(inst));
  if (!pair_file.empty()) {
    const RegPair pair = read_pair_file(pair_file, inst.grid());
    const double risk = expected_risk(build_reconstructor(pair, inst), inst);
    const double excess = std::max(0.0, risk - lstar);
    out << "pair_risk=" << print_double(risk) << '\n';
    out << "excess=" << print_double(excess) << '\n';
  }
  return kOk;
}

int cmd_sweep(const SweepOptions& so, std::ostream& out, std::ostream& err) {
  const SweepConfig cfg = so.resolve();
  const fs::path dir(so.out);
  ensure_dir(dir);

  SweepControl control;
  control.cancel = &cancel_flag();
  if (so.progress) {
    control.progress = [&err](std::size_t done, std::size_t total) {
      if (done == total || done % 10 == 0) err << "\r" << done << '/' << total << " cells" << std::flush;
      if (done == total) err << '\n';
    };
  }
  const SweepResult res = run_sweep(cfg, control);

  {
    std::ofstream f = open_out(dir / "sweep.csv");
    write_sweep_csv(f, res);
  }
  const SummaryTable table = summary_table(res);
  {
    std::ofstream f = open_out(dir / "summary.csv");
    Provenance p = provenance_for(cfg);
    if (res.interrupted) p.extra["status"] = "interrupted";
    write_summary_csv(f, table, p);
  }
  {
    std::ofstream f = open_out(dir / "decay.svg");
    f << render_decay_svg(table);
  }

  out << "case=" << case_letter(cfg.noise_case) << " cells=" << res.cells.size()
      << " failed=" << res.failed_cells << " clamp_warnings=" << res.clamp_warnings << '\n';
  for (const auto& [n, l] : res.minimal_risk) out << "N=" << n << " minimal_risk=" << print_double(l) << '\n';
  for (const auto& [n, fit] : res.slope_sup) {
    out << "N=" << n << " slope_sup=" << print_double(fit.slope)
        << " slope_unsup=" << print_double(res.slope_unsup.at(n).slope) << '\n';
  }
  if (res.minimal_risk.size() >= 2 && !res.interrupted) {
    const DiscretizationReport rep = compare_discretizations(res);
    out << "discretization N=" << rep.coarse_n << " vs N=" << rep.fine_n
        << " slope_diff_sup=" << print_double(rep.slope_diff_sup)
        << " slope_diff_unsup=" << print_double(rep.slope_diff_unsup)
        << " unsup_ratio_flag=" << rep.unsup_ratio_flag << " slope_flag_sup=" << rep.slope_flag_sup
        << " slope_flag_unsup=" << rep.slope_flag_unsup << '\n';
  }
  if (res.interrupted) {
    err << "interrupted: wrote " << res.cells.size() << " completed cells to " << dir.string() << '\n';
    return kInterrupted;
  }
  return kOk;
}

struct Learner {
  enum class Kind { Optimal, Supervised, Unsupervised } kind = Kind::Optimal;
  std::size_t m = 0;
};

Learner parse_learner(const std::string& s) {
  if (s == "optimal") return {};
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  if (colon == std::string::npos || (name != "supervised" && name != "unsupervised")) {
    throw ConfigError("--learner must be optimal, supervised:M or unsupervised:M, got '" + s + "'");
  }
  Learner l;
  l.kind = name == "supervised" ? Learner::Kind::Supervised : Learner::Kind::Unsupervised;
  const std::vector<std::size_t> m = parse_size_list(s.substr(colon + 1));
  if (m.size() != 1 || m[0] < 2) throw ConfigError("--learner sample size must be a single integer >= 2");
  l.m = m[0];
  return l;
}

int cmd_reconstruct(const InstanceOptions& io, std::uint64_t seed, const std::string& learner_arg,
                    const std::string& pair_file, const std::string& out_path, std::ostream& out) {
  const Learner learner = parse_learner(learner_arg);
  const ProblemInstance inst = io.build();
  const int n = inst.n();
  RandomStream root(seed);

  AffineReconstructor r = build_reconstructor(optimal_pair(inst), inst);
  if (!pair_file.empty()) {
    r = build_reconstructor(read_pair_file(pair_file, inst.grid()), inst);
  } else if (learner.kind != Learner::Kind::Optimal) {
    RandomStream train = root.child({1});
    const TrainingSet data = draw_training_set(inst, learner.m, train);
    const EmpiricalMoments mo = empirical_moments(data);
    r = learner.kind == Learner::Kind::Supervised ? supervised_fit(mo, inst).projected
                                                  : build_reconstructor(unsupervised_pair(mo.x), inst);
  }

  RandomStream test = root.child({2});
  const TrainingSet one = draw_training_set(inst, 1, test);
  const GridSignal xhat = reconstruct(r, one.ys[0]);

  std::vector<SignalRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rows.push_back({inst.grid().midpoint(i), one.xs[0].coeffs(i), one.ys[0].coeffs(i), xhat.coeffs(i)});
  }
  Provenance p;
  p.seed = seed;
  p.config_hash = 0;
  p.extra["learner"] = pair_file.empty() ? learner_arg : "pair-file";
  p.extra["N"] = std::to_string(n);
  {
    fs::path path(out_path);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    std::ofstream f = open_out(path);
    write_signals_csv(f, rows, p);
  }
  const double risk = expected_risk(r, inst);
  out << "expected_risk=" << print_double(risk) << " minimal_risk=" << print_double(minimal_risk(inst)) << '\n';
  out << "error_xhat=" << print_double((xhat.coeffs - one.xs[0].coeffs).norm() / std::sqrt(n))
      << " error_y=" << print_double((one.ys[0].coeffs - one.xs[0].coeffs).norm() / std::sqrt(n)) << '\n';
  return kOk;
}

int cmd_concentration(const InstanceOptions& io, const std::string& ms_arg, int reps, std::uint64_t seed,
                      unsigned threads, const std::string& out_path, std::ostream& out) {
  const ProblemInstance inst = io.build();
  const std::vector<std::size_t> ms = parse_size_list(ms_arg);
  const std::vector<ConcentrationRow> rows = concentration_curve(inst.prior(), ms, reps, seed, threads);
  Provenance p;
  p.seed = seed;
  p.extra["N"] = std::to_string(inst.n());
  p.extra["reps"] = std::to_string(reps);
  {
    fs::path path(out_path);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    std::ofstream f = open_out(path);
    write_concentration_csv(f, rows, p);
  }
  std::vector<double> m, mu, sig;
  for (const ConcentrationRow& r : rows) {
    m.push_back(static_cast<double>(r.m));
    mu.push_back(r.mean_dev_mu);
    sig.push_back(r.mean_dev_sigma);
  }
  if (rows.size() >= 3) {
    auto slope = [&](const std::vector<double>& v) {
      try {
        return print_double(fit_slope(m, v).slope);
      } catch (const std::invalid_argument&) {
        return std::string("n/a");
      }
    };
    out << "slope_mu=" << slope(mu) << " slope_sigma=" << slope(sig) << '\n';
  }
  return kOk;
}

int cmd_transform(const std::string& in_path, const std::string& column, bool inverse, const std::string& out_path,
                  std::ostream& out) {
  std::vector<double> v;
  if (in_path == "-") {
    v = read_csv_column(std::cin, column);
  } else {
    std::ifstream in(in_path);
    if (!in) throw ConfigError("cannot open '" + in_path + "'");
    v = read_csv_column(in, column);
  }
  if (v.empty() || (v.size() & (v.size() - 1)) != 0) {
    throw ConfigError("transform: column length " + std::to_string(v.size()) + " is not a power of 2");
  }
  const std::vector<double> w = inverse ? haar_inverse(v) : haar_forward(v);
  auto emit = [&](std::ostream& os) {
    os << (inverse ? "value" : "coefficient") << '\n';
    for (double x : w) os << format_double(x) << '\n';
  };
  if (out_path.empty() || out_path == "-") {
    emit(out);
  } else {
    std::ofstream f = open_out(out_path);
    emit(f);
  }
  return kOk;
}

int cmd_plot(const std::string& summary_path, const std::string& out_path) {
  std::ifstream in(summary_path);
  if (!in) throw ConfigError("cannot open '" + summary_path + "'");
  SummaryTable table;
  try {
    table = parse_summary_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::ofstream f = open_out(out_path);
  f << render_decay_svg(table);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned generalized Tikhonov regularization: risks, sweeps and diagnostics", "tikreg"};
  app.require_subcommand(1);
  app.footer(config_keys_help() + "Exit codes: 0 success, 1 numerical failure, 2 configuration error.");

  InstanceOptions risk_io;
  std::string pair_file, write_pair;
  CLI::App* risk = app.add_subcommand("risk", "minimal risk of an instance and, optionally, the risk of a pair");
  risk_io.attach(risk);
  risk->add_option("--pair-file", pair_file, "CSV with rows h_i,B_i1..B_iN (coefficient units)");
  risk->add_option("--write-pair", write_pair, "write the optimal pair in pair-file format");

  SweepOptions so;
  CLI::App* sweep = app.add_subcommand("sweep", "excess-risk sweep over sample and grid sizes");
  sweep->add_option("--config", so.config, "INI config file");
  CLI::Option* paper_flag =
      sweep->add_flag("--paper-default", so.paper_default, "reference configuration (the default)");
  sweep->add_flag("--quick", so.quick, "reps 10, m up to 1e5, N in {32, 64}")->excludes(paper_flag);
  sweep->add_option("--case", so.noise_case, "noise case a, b or c")->check(CLI::IsMember({"a", "b", "c"}));
  sweep->add_option("--seed", so.seed, "master seed");
  sweep->add_option("--n", so.grid_sizes, "grid sizes, comma separated");
  sweep->add_option("--m", so.sample_sizes, "sample sizes, comma separated and ascending");
  sweep->add_option("--reps", so.reps, "repetitions per (N, m)");
  sweep->add_option("--sigma", so.sigma, "noise level");
  sweep->add_option("--threads", so.threads, "worker threads (0 = all cores); results do not depend on it");
  sweep->add_option("--prior", so.prior, "paper or laplacian")->check(CLI::IsMember({"paper", "laplacian"}));
  sweep->add_option("--kernel-c", so.kernel_c, "support radius c of the compact prior kernel");
  sweep->add_option("--forward", so.forward, "identity or blur")->check(CLI::IsMember({"identity", "blur"}));
  sweep->add_option("--blur-width", so.blur_width, "Gaussian blur width");
  sweep->add_option("--out", so.out, "output directory")->capture_default_str();
  sweep->add_flag("--progress", so.progress, "report progress on stderr");

  InstanceOptions rec_io;
  std::uint64_t rec_seed = 0;
  std::string learner = "optimal";
  std::string rec_out = "signals.csv";
  std::string rec_pair;
  CLI::App* rec = app.add_subcommand("reconstruct", "reconstruct one drawn signal");
  rec_io.attach(rec);
  rec->add_option("--seed", rec_seed, "seed")->capture_default_str();
  rec->add_option("--learner", learner, "optimal, supervised:M or unsupervised:M")->capture_default_str();
  rec->add_option("--pair-file", rec_pair, "use this regularization pair instead of a learner");
  rec->add_option("--out", rec_out, "output CSV (t,x,y,xhat)")->capture_default_str();

  InstanceOptions con_io;
  std::string con_ms = "100,300,1000,3000,10000,30000";
  int con_reps = 20;
  std::uint64_t con_seed = 0;
  unsigned con_threads = 0;
  std::string con_out = "concentration.csv";
  CLI::App* con = app.add_subcommand("concentration", "deviation of empirical prior moments against m");
  con_io.attach(con);
  con->add_option("--m", con_ms, "sample sizes, comma separated and ascending")->capture_default_str();
  con->add_option("--reps", con_reps, "repetitions per m")->capture_default_str();
  con->add_option("--seed", con_seed, "seed")->capture_default_str();
  con->add_option("--threads", con_threads, "worker threads (0 = all cores)");
  con->add_option("--out", con_out, "output CSV")->capture_default_str();

  std::string tr_in, tr_col, tr_out;
  bool tr_inverse = false;
  CLI::App* tr = app.add_subcommand("transform", "orthonormal Haar transform of a CSV column");
  tr->add_option("--in", tr_in, "input CSV ('-' for stdin)")->required();
  tr->add_option("--column", tr_col, "column name (default: first column)");
  tr->add_flag("--inverse", tr_inverse, "apply the inverse transform");
  tr->add_option("--out", tr_out, "output CSV (default: stdout)");

  std::string plot_in, plot_out = "decay.svg";
  CLI::App* plot = app.add_subcommand("plot", "render decay.svg from a summary CSV");
  plot->add_option("--summary", plot_in, "summary.csv written by sweep")->required();
  plot->add_option("--out", plot_out, "output SVG")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (risk->parsed()) return cmd_risk(risk_io, pair_file, write_pair, out);
    if (sweep->parsed()) return cmd_sweep(so, out, err);
    if (rec->parsed()) return cmd_reconstruct(rec_io, rec_seed, learner, rec_pair, rec_out, out);
    if (con->parsed()) return cmd_concentration(con_io, con_ms, con_reps, con_seed, con_threads, con_out, out);
    if (tr->parsed()) return cmd_transform(tr_in, tr_col, tr_inverse, tr_out, out);
    if (plot->parsed()) return cmd_plot(plot_in, plot_out);
  } catch (const NumericalError& e) {
    err << stage << ": numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::invalid_argument& e) {
    err << stage << ": configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << stage << ": numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kConfigError;
}

}  // namespace tikreg::cli
