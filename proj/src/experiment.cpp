#include "tikreg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tikreg/parallel.hpp"

namespace tikreg {

namespace {

constexpr Eigen::Index kBlock = 256;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

char case_letter(NoiseCase c) {
  switch (c) {
    case NoiseCase::GaussGauss: return 'a';
    case NoiseCase::GaussUniform: return 'b';
    case NoiseCase::GaussHaarUniform: return 'c';
  }
  return '?';
}

NoiseCase parse_case(const std::string& s) {
  if (s == "a") return NoiseCase::GaussGauss;
  if (s == "b") return NoiseCase::GaussUniform;
  if (s == "c") return NoiseCase::GaussHaarUniform;
  throw std::invalid_argument("unknown case '" + s + "' (expected a, b or c)");
}

NoiseModel noise_model_for(NoiseCase c, double sigma) {
  switch (c) {
    case NoiseCase::GaussGauss: return {sigma, ComponentDist::Gaussian, NoiseBasis::Pixel};
    case NoiseCase::GaussUniform: return {sigma, ComponentDist::Uniform, NoiseBasis::Pixel};
    case NoiseCase::GaussHaarUniform: return {sigma, ComponentDist::Uniform, NoiseBasis::Haar};
  }
  throw std::invalid_argument("noise_model_for: bad case");
}

SweepConfig SweepConfig::paper_default() { return SweepConfig{}; }

SweepConfig SweepConfig::quick() {
  SweepConfig cfg;
  cfg.grid_sizes = {32, 64};
  cfg.sample_sizes = {1000, 3162, 10000, 31623, 100000};
  cfg.reps = 10;
  return cfg;
}

void SweepConfig::validate() const {
  if (grid_sizes.empty()) throw std::invalid_argument("sweep config: no grid sizes");
  if (sample_sizes.empty()) throw std::invalid_argument("sweep config: no sample sizes");
  if (reps < 1) throw std::invalid_argument("sweep config: reps must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sweep config: sigma must be positive");
  for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
    if (sample_sizes[i] < 2) throw std::invalid_argument("sweep config: sample sizes must be >= 2");
    if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1]) {
      throw std::invalid_argument("sweep config: sample sizes must be strictly ascending");
    }
  }
  for (int n : grid_sizes) {
    if (n < 2) throw std::invalid_argument("sweep config: grid sizes must be >= 2, got " + std::to_string(n));
    if (noise_case == NoiseCase::GaussHaarUniform && (n & (n - 1)) != 0) {
      throw std::invalid_argument("sweep config: case c (Haar noise) needs N a power of 2, got N=" +
                                  std::to_string(n));
    }
  }
  if (prior.kind == PriorSpec::Kind::PaperConvolution && !(prior.kernel_c > 0.0 && prior.kernel_c <= 0.5)) {
    throw std::invalid_argument("sweep config: kernel_c must lie in (0, 0.5]");
  }
  if (prior.kind == PriorSpec::Kind::Laplacian && !(prior.laplacian_s > 0.5)) {
    throw std::invalid_argument("sweep config: laplacian_s must exceed 1/2");
  }
  if (forward.kind == ForwardSpec::Kind::Blur && !(forward.blur_width > 0.0 && forward.blur_width < 0.5)) {
    throw std::invalid_argument("sweep config: blur_width must lie in (0, 0.5)");
  }
}

std::string SweepConfig::canonical() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "case=" << case_letter(noise_case) << ";N=";
  for (int n : grid_sizes) os << n << ',';
  os << ";m=";
  for (std::size_t m : sample_sizes) os << m << ',';
  os << ";reps=" << reps << ";seed=" << master_seed << ";sigma=" << sigma;
  if (prior.kind == PriorSpec::Kind::PaperConvolution) {
    os << ";prior=paper(" << prior.kernel_c << ")";
  } else {
    os << ";prior=laplacian(" << prior.laplacian_s << ")";
  }
  if (forward.kind == ForwardSpec::Kind::Identity) {
    os << ";forward=identity";
  } else {
    os << ";forward=blur(" << forward.blur_width << ")";
  }
  return os.str();
}

std::uint64_t SweepConfig::hash() const { return fnv1a(canonical()); }

ProblemInstance make_instance(const SweepConfig& cfg, int n) {
  const Grid grid(n);
  SymMatrix root = cfg.prior.kind == PriorSpec::Kind::PaperConvolution
                       ? convolution_operator(paper_kernel(cfg.prior.kernel_c), grid)
                       : laplacian_prior_cov_sqrt(cfg.prior.laplacian_s, grid);
  PriorModel prior(triangle_mean(grid), std::move(root), ComponentDist::Gaussian);
  ForwardOp forward = cfg.forward.kind == ForwardSpec::Kind::Identity ? ForwardOp::identity(grid)
                                                                       : blur_operator(cfg.forward.blur_width, grid);
  return {std::move(forward), std::move(prior), noise_model_for(cfg.noise_case, cfg.sigma)};
}

namespace {

// Fills y = x Aᵀ + ε for a block of samples stored as rows.
void observe_block(const ProblemInstance& inst, const Matrix& xs, const Matrix& noise, Matrix& ys) {
  ys = noise;
  if (inst.forward().kind == ForwardKind::Identity) {
    ys += xs;
  } else {
    const Matrix at = inst.forward().matrix.transpose();
    kernels::gemm(kernels::Op::None, view(xs), view(at), mut_view(ys), 1.0);
  }
}

}  // namespace

TrainingSet draw_training_set(const ProblemInstance& inst, std::size_t m, RandomStream& rng) {
  TrainingSet set;
  set.xs.reserve(m);
  set.ys.reserve(m);
  const int n = inst.n();
  Matrix xb, eb, yb;
  for (std::size_t left = m; left > 0;) {
    const Eigen::Index b = static_cast<Eigen::Index>(std::min<std::size_t>(left, kBlock));
    xb.resize(b, n);
    eb.resize(b, n);
    sample_prior_block(inst.prior(), rng, xb);
    sample_noise_block(inst.noise(), inst.grid(), rng, eb);
    observe_block(inst, xb, eb, yb);
    for (Eigen::Index s = 0; s < b; ++s) {
      set.xs.emplace_back(inst.grid(), xb.row(s).transpose());
      set.ys.emplace_back(inst.grid(), yb.row(s).transpose());
    }
    left -= static_cast<std::size_t>(b);
  }
  return set;
}

SweepCell run_cell(const SweepConfig& cfg, const ProblemInstance& inst, double min_risk, std::size_t m_index,
                   int rep) {
  const int n = inst.n();
  SweepCell cell;
  cell.n = n;
  cell.m_index = m_index;
  cell.m = cfg.sample_sizes.at(m_index);
  cell.rep = rep;
  try {
    RandomStream rng(derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(n), m_index,
                                                   static_cast<std::uint64_t>(rep)}));
    MomentAccumulator acc(inst.grid());
    Matrix xb, eb, yb;
    for (std::size_t left = cell.m; left > 0;) {
      const Eigen::Index b = static_cast<Eigen::Index>(std::min<std::size_t>(left, kBlock));
      if (xb.rows() != b) {
        xb.resize(b, n);
        eb.resize(b, n);
      }
      sample_prior_block(inst.prior(), rng, xb);
      sample_noise_block(inst.noise(), inst.grid(), rng, eb);
      observe_block(inst, xb, eb, yb);
      acc.add_block(xb, &yb);
      left -= static_cast<std::size_t>(b);
    }
    const EmpiricalMoments mo = acc.finalize();

    const AffineReconstructor unsup = build_reconstructor(unsupervised_pair(mo.x), inst);
    cell.excess_unsup_raw = expected_risk(unsup, inst) - min_risk;

    const SupervisedEstimate sup = supervised_fit(mo, inst);
    cell.excess_sup_raw = sup.risk - min_risk;
    cell.clamp_warning = sup.clamp_warning;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

std::vector<SummaryRow> summarize(std::span<const SweepCell> cells) {
  std::map<std::pair<int, std::size_t>, std::vector<const SweepCell*>> groups;
  for (const SweepCell& c : cells) {
    if (c.ok) groups[{c.n, c.m}].push_back(&c);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, group] : groups) {
    SummaryRow row;
    row.n = key.first;
    row.m = key.second;
    row.count = group.size();
    for (const SweepCell* c : group) {
      row.mean_sup += c->excess_sup();
      row.mean_unsup += c->excess_unsup();
    }
    row.mean_sup /= static_cast<double>(row.count);
    row.mean_unsup /= static_cast<double>(row.count);
    if (row.count > 1) {
      for (const SweepCell* c : group) {
        row.std_sup += (c->excess_sup() - row.mean_sup) * (c->excess_sup() - row.mean_sup);
        row.std_unsup += (c->excess_unsup() - row.mean_unsup) * (c->excess_unsup() - row.mean_unsup);
      }
      row.std_sup = std::sqrt(row.std_sup / static_cast<double>(row.count - 1));
      row.std_unsup = std::sqrt(row.std_unsup / static_cast<double>(row.count - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

SlopeFit fit_slope(std::span<const double> ms, std::span<const double> values) {
  if (ms.size() != values.size()) throw std::invalid_argument("fit_slope: length mismatch");
  if (ms.size() < 3) throw std::invalid_argument("fit_slope: need at least 3 points");
  const std::size_t k = ms.size();
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ms[i] > 0.0) || !(values[i] > 0.0)) {
      throw std::invalid_argument("fit_slope: values must be positive to take logarithms");
    }
    lx[i] = std::log(ms[i]);
    ly[i] = std::log(values[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope: sample sizes are all equal");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

namespace {

void fit_slopes(SweepResult& res) {
  std::map<int, std::vector<const SummaryRow*>> by_n;
  for (const SummaryRow& r : res.summary) by_n[r.n].push_back(&r);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [n, rows] : by_n) {
    std::vector<double> ms, sup, unsup;
    for (const SummaryRow* r : rows) {
      ms.push_back(static_cast<double>(r->m));
      sup.push_back(r->mean_sup);
      unsup.push_back(r->mean_unsup);
    }
    auto safe_fit = [&](const std::vector<double>& v) {
      try {
        return fit_slope(ms, v);
      } catch (const std::invalid_argument&) {
        return SlopeFit{nan, nan, nan};
      }
    };
    res.slope_sup[n] = safe_fit(sup);
    res.slope_unsup[n] = safe_fit(unsup);
  }
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, const SweepControl& control) {
  cfg.validate();
  SweepResult res;
  res.config = cfg;

  std::vector<int> grids = cfg.grid_sizes;
  std::sort(grids.begin(), grids.end());
  grids.erase(std::unique(grids.begin(), grids.end()), grids.end());

  std::vector<ProblemInstance> instances;
  instances.reserve(grids.size());
  for (int n : grids) {
    instances.push_back(make_instance(cfg, n));
    res.minimal_risk[n] = minimal_risk(instances.back());
  }

  const std::size_t n_m = cfg.sample_sizes.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  const std::size_t total = grids.size() * n_m * reps;
  std::vector<SweepCell> cells(total);
  std::vector<char> done(total, 0);

  // Schedule expensive cells first; storage stays keyed by (N, m, rep).
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  auto cost = [&](std::size_t idx) {
    const std::size_t gi = idx / (n_m * reps);
    const std::size_t mi = (idx / reps) % n_m;
    const double n = grids[gi];
    return static_cast<double>(cfg.sample_sizes[mi]) * n * n;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost(a) > cost(b); });

  std::atomic<std::size_t> finished{0};
  std::mutex progress_mutex;
  parallel_for(total, cfg.threads, [&](std::size_t k) {
    if (control.cancel && control.cancel->load()) return;
    const std::size_t idx = order[k];
    const std::size_t gi = idx / (n_m * reps);
    const std::size_t mi = (idx / reps) % n_m;
    const int rep = static_cast<int>(idx % reps);
    cells[idx] = run_cell(cfg, instances[gi], res.minimal_risk[grids[gi]], mi, rep);
    done[idx] = 1;
    const std::size_t f = finished.fetch_add(1) + 1;
    if (control.progress) {
      std::lock_guard lock(progress_mutex);
      control.progress(f, total);
    }
  });

  for (std::size_t i = 0; i < total; ++i) {
    if (!done[i]) {
      res.interrupted = true;
      continue;
    }
    res.cells.push_back(std::move(cells[i]));
  }
  for (const SweepCell& c : res.cells) {
    if (!c.ok) ++res.failed_cells;
    if (c.clamp_warning) ++res.clamp_warnings;
  }
  res.summary = summarize(res.cells);
  fit_slopes(res);

  if (!res.interrupted && res.failed_cells * 10 > total) {
    std::string first;
    for (const SweepCell& c : res.cells) {
      if (!c.ok) {
        first = c.error;
        break;
      }
    }
    throw NumericalError("run_sweep: " + std::to_string(res.failed_cells) + " of " + std::to_string(total) +
                         " cells failed (first: " + first + ")");
  }
  return res;
}

DiscretizationReport compare_discretizations(const SweepResult& res) {
  std::map<int, std::map<std::size_t, const SummaryRow*>> by_n;
  for (const SummaryRow& r : res.summary) by_n[r.n][r.m] = &r;
  if (by_n.size() < 2) throw std::invalid_argument("compare_discretizations: need at least two grid sizes");
  DiscretizationReport rep;
  rep.coarse_n = by_n.begin()->first;
  rep.fine_n = by_n.rbegin()->first;
  const auto& coarse = by_n.begin()->second;
  const auto& fine = by_n.rbegin()->second;
  auto ratio = [](double f, double c) {
    if (c == 0.0) return f == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return f / c;
  };
  for (const auto& [m, c] : coarse) {
    auto it = fine.find(m);
    if (it == fine.end()) continue;
    DiscretizationRow row{m, ratio(it->second->mean_sup, c->mean_sup), ratio(it->second->mean_unsup, c->mean_unsup)};
    if (!(row.ratio_unsup <= kMaxUnsupRatio && row.ratio_unsup >= 1.0 / kMaxUnsupRatio)) rep.unsup_ratio_flag = true;
    if (!(row.ratio_sup <= kMaxUnsupRatio && row.ratio_sup >= 1.0 / kMaxUnsupRatio)) rep.sup_ratio_flag = true;
    rep.rows.push_back(row);
  }
  rep.slope_diff_sup = res.slope_sup.at(rep.fine_n).slope - res.slope_sup.at(rep.coarse_n).slope;
  rep.slope_diff_unsup = res.slope_unsup.at(rep.fine_n).slope - res.slope_unsup.at(rep.coarse_n).slope;
  rep.slope_flag_sup = !(std::abs(rep.slope_diff_sup) <= kMaxSlopeDiff);
  rep.slope_flag_unsup = !(std::abs(rep.slope_diff_unsup) <= kMaxSlopeDiff);
  return rep;
}

}  // namespace tikreg
