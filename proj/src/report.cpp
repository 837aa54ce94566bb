#include "tikreg/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <locale>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace tikreg {

std::string format_double(double x, int significant) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, significant);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, res.ptr);
}

namespace {

std::string fixed2(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw std::invalid_argument(std::string("bad number in column ") + what + ": '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const char* what) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad integer in column ") + what + ": '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// Integers go through operator<<; pin the classic locale so no grouping
// separators can appear whatever the caller imbued.
class ClassicLocale {
 public:
  explicit ClassicLocale(std::ostream& os) : os_(os), saved_(os.imbue(std::locale::classic())) {}
  ~ClassicLocale() { os_.imbue(saved_); }

 private:
  std::ostream& os_;
  std::locale saved_;
};

bool skippable(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '#';
}

}  // namespace

Provenance provenance_for(const SweepConfig& cfg) {
  Provenance p;
  p.seed = cfg.master_seed;
  p.config_hash = cfg.hash();
  p.extra["config"] = cfg.canonical();
  return p;
}

void write_provenance(std::ostream& os, const Provenance& p) {
  const ClassicLocale guard(os);
  os << "# seed=" << p.seed << '\n';
  os << "# config_hash=" << hex64(p.config_hash) << '\n';
  os << "# version=" << p.version << '\n';
  for (const auto& [k, v] : p.extra) os << "# " << k << '=' << v << '\n';
}

void write_sweep_csv(std::ostream& os, const SweepResult& res) {
  const ClassicLocale guard(os);
  Provenance p = provenance_for(res.config);
  if (res.interrupted) p.extra["status"] = "interrupted";
  write_provenance(os, p);
  const char c = case_letter(res.config.noise_case);
  os << "case,N,m,rep,excess_sup,excess_unsup,raw_sup,raw_unsup,status\n";
  for (const SweepCell& cell : res.cells) {
    os << c << ',' << cell.n << ',' << cell.m << ',' << cell.rep << ',';
    if (cell.ok) {
      os << format_double(cell.excess_sup()) << ',' << format_double(cell.excess_unsup()) << ','
         << format_double(cell.excess_sup_raw) << ',' << format_double(cell.excess_unsup_raw) << ','
         << (cell.clamp_warning ? "clamped" : "ok");
    } else {
      os << "nan,nan,nan,nan,failed";
    }
    os << '\n';
  }
}

SummaryTable summary_table(const SweepResult& res) {
  return {case_letter(res.config.noise_case), res.summary};
}

void write_summary_csv(std::ostream& os, const SummaryTable& table, const Provenance& p) {
  const ClassicLocale guard(os);
  write_provenance(os, p);
  os << "case,N,m,mean_sup,std_sup,mean_unsup,std_unsup\n";
  for (const SummaryRow& r : table.rows) {
    os << table.noise_case << ',' << r.n << ',' << r.m << ',' << format_double(r.mean_sup) << ','
       << format_double(r.std_sup) << ',' << format_double(r.mean_unsup) << ',' << format_double(r.std_unsup)
       << '\n';
  }
}

SummaryTable parse_summary_csv(std::istream& is) {
  SummaryTable table;
  std::string line;
  bool header = false;
  bool have_case = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto f = split(line, ',');
    if (!header) {
      if (f != std::vector<std::string>{"case", "N", "m", "mean_sup", "std_sup", "mean_unsup", "std_unsup"}) {
        throw std::invalid_argument("summary csv: unexpected header on line " + std::to_string(lineno));
      }
      header = true;
      continue;
    }
    if (f.size() != 7) {
      throw std::invalid_argument("summary csv: line " + std::to_string(lineno) + " has " +
                                  std::to_string(f.size()) + " fields, expected 7");
    }
    if (f[0].size() != 1) throw std::invalid_argument("summary csv: bad case '" + f[0] + "'");
    if (have_case && f[0][0] != table.noise_case) {
      throw std::invalid_argument("summary csv: mixed cases in one file");
    }
    table.noise_case = f[0][0];
    have_case = true;
    SummaryRow r;
    r.n = parse_int<int>(f[1], "N");
    r.m = parse_int<std::size_t>(f[2], "m");
    r.mean_sup = parse_double(f[3], "mean_sup");
    r.std_sup = parse_double(f[4], "std_sup");
    r.mean_unsup = parse_double(f[5], "mean_unsup");
    r.std_unsup = parse_double(f[6], "std_unsup");
    table.rows.push_back(r);
  }
  if (!header) throw std::invalid_argument("summary csv: missing header");
  return table;
}

namespace {

struct Axis {
  double lo_dec, hi_dec;  // decades
  double px_lo, px_hi;

  double map(double v) const {
    const double t = (std::log10(v) - lo_dec) / (hi_dec - lo_dec);
    return px_lo + t * (px_hi - px_lo);
  }
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string decade_label(int d) { return "1e" + std::to_string(d); }

}  // namespace

std::string render_decay_svg(const SummaryTable& table) {
  constexpr double width = 760, height = 500;
  constexpr double left = 80, right = 230, top = 40, bottom = 60;

  std::map<int, std::vector<SummaryRow>> by_n;
  for (const SummaryRow& r : table.rows) by_n[r.n].push_back(r);
  for (auto& [n, rows] : by_n) {
    std::sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.m < b.m; });
  }

  double mmin = std::numeric_limits<double>::infinity(), mmax = 0.0;
  double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
  auto take = [&](double mean, double sd) {
    if (!(mean > 0.0)) return;
    vmin = std::min(vmin, mean - sd > 0.0 ? mean - sd : mean);
    vmax = std::max(vmax, mean + sd);
  };
  for (const SummaryRow& r : table.rows) {
    mmin = std::min(mmin, static_cast<double>(r.m));
    mmax = std::max(mmax, static_cast<double>(r.m));
    take(r.mean_sup, r.std_sup);
    take(r.mean_unsup, r.std_unsup);
  }
  if (!(mmax > 0.0)) mmin = 1.0, mmax = 10.0;
  if (!(vmax > 0.0)) vmin = 1e-3, vmax = 1.0;

  Axis ax{std::floor(std::log10(mmin)), std::ceil(std::log10(mmax)), left, width - right};
  Axis ay{std::floor(std::log10(vmin)), std::ceil(std::log10(vmax)), height - bottom, top};
  if (ax.hi_dec == ax.lo_dec) ax.hi_dec += 1;
  if (ay.hi_dec == ay.lo_dec) ay.hi_dec += 1;

  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << fixed2((left + width - right) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << "Excess risk decay, case (" << table.noise_case << ")</text>\n";

  // Grid lines and decade labels.
  s << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (int d = static_cast<int>(ax.lo_dec); d <= static_cast<int>(ax.hi_dec); ++d) {
    const double x = ax.map(std::pow(10.0, d));
    s << "<line x1=\"" << fixed2(x) << "\" y1=\"" << fixed2(top) << "\" x2=\"" << fixed2(x) << "\" y2=\""
      << fixed2(height - bottom) << "\"/>\n";
  }
  for (int d = static_cast<int>(ay.lo_dec); d <= static_cast<int>(ay.hi_dec); ++d) {
    const double y = ay.map(std::pow(10.0, d));
    s << "<line x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(y) << "\" x2=\"" << fixed2(width - right)
      << "\" y2=\"" << fixed2(y) << "\"/>\n";
  }
  s << "</g>\n";
  s << "<rect x=\"" << fixed2(left) << "\" y=\"" << fixed2(top) << "\" width=\"" << fixed2(width - right - left)
    << "\" height=\"" << fixed2(height - bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(ax.lo_dec); d <= static_cast<int>(ax.hi_dec); ++d) {
    s << "<text x=\"" << fixed2(ax.map(std::pow(10.0, d))) << "\" y=\"" << fixed2(height - bottom + 18)
      << "\" text-anchor=\"middle\">" << decade_label(d) << "</text>\n";
  }
  for (int d = static_cast<int>(ay.lo_dec); d <= static_cast<int>(ay.hi_dec); ++d) {
    s << "<text x=\"" << fixed2(left - 8) << "\" y=\"" << fixed2(ay.map(std::pow(10.0, d)) + 4)
      << "\" text-anchor=\"end\">" << decade_label(d) << "</text>\n";
  }
  s << "<text x=\"" << fixed2((left + width - right) / 2) << "\" y=\"" << fixed2(height - 18)
    << "\" text-anchor=\"middle\">sample size m</text>\n";
  s << "<text transform=\"translate(20 " << fixed2((top + height - bottom) / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">mean excess risk</text>\n";

  std::size_t colour = 0;
  double legend_y = top + 10;
  for (const auto& [n, rows] : by_n) {
    const char* col = kPalette[colour++ % std::size(kPalette)];
    for (int method = 0; method < 2; ++method) {
      const bool sup = method == 0;
      std::vector<double> ms, means;
      std::ostringstream path, bars;
      for (const SummaryRow& r : rows) {
        const double mean = sup ? r.mean_sup : r.mean_unsup;
        const double sd = sup ? r.std_sup : r.std_unsup;
        if (!(mean > 0.0)) continue;
        const double x = ax.map(static_cast<double>(r.m));
        const double y = ay.map(mean);
        path << (ms.empty() ? "M" : " L") << fixed2(x) << ' ' << fixed2(y);
        const double lo = mean - sd > 0.0 ? mean - sd : mean;
        const double y_lo = ay.map(lo), y_hi = ay.map(mean + sd);
        bars << "<line x1=\"" << fixed2(x) << "\" y1=\"" << fixed2(y_lo) << "\" x2=\"" << fixed2(x) << "\" y2=\""
             << fixed2(y_hi) << "\"/>";
        bars << "<line x1=\"" << fixed2(x - 3) << "\" y1=\"" << fixed2(y_lo) << "\" x2=\"" << fixed2(x + 3)
             << "\" y2=\"" << fixed2(y_lo) << "\"/>";
        bars << "<line x1=\"" << fixed2(x - 3) << "\" y1=\"" << fixed2(y_hi) << "\" x2=\"" << fixed2(x + 3)
             << "\" y2=\"" << fixed2(y_hi) << "\"/>";
        bars << "<circle cx=\"" << fixed2(x) << "\" cy=\"" << fixed2(y) << "\" r=\"3\" fill=\""
             << (sup ? col : "white") << "\"/>\n";
        ms.push_back(static_cast<double>(r.m));
        means.push_back(mean);
      }
      s << "<g stroke=\"" << col << "\" fill=\"none\" stroke-width=\"1.5\""
        << (sup ? "" : " stroke-dasharray=\"6 4\"") << ">\n";
      if (!ms.empty()) s << "<path d=\"" << path.str() << "\"/>\n";
      s << "</g>\n<g stroke=\"" << col << "\" stroke-width=\"1\">\n" << bars.str() << "</g>\n";

      std::string slope = "n/a";
      try {
        slope = format_double(fit_slope(ms, means).slope, 3);
      } catch (const std::invalid_argument&) {
      }
      const double lx = width - right + 15;
      s << "<line x1=\"" << fixed2(lx) << "\" y1=\"" << fixed2(legend_y) << "\" x2=\"" << fixed2(lx + 25)
        << "\" y2=\"" << fixed2(legend_y) << "\" stroke=\"" << col << "\" stroke-width=\"1.5\""
        << (sup ? "" : " stroke-dasharray=\"6 4\"") << "/>\n";
      s << "<text x=\"" << fixed2(lx + 32) << "\" y=\"" << fixed2(legend_y + 4) << "\">N=" << n << ' '
        << (sup ? "sup." : "unsup.") << " slope " << slope << "</text>\n";
      legend_y += 20;
    }
  }
  s << "</svg>\n";
  return s.str();
}

void write_concentration_csv(std::ostream& os, const std::vector<ConcentrationRow>& rows, const Provenance& p) {
  const ClassicLocale guard(os);
  write_provenance(os, p);
  os << "m,mean_dev_mu,mean_dev_sigma\n";
  for (const ConcentrationRow& r : rows) {
    os << r.m << ',' << format_double(r.mean_dev_mu) << ',' << format_double(r.mean_dev_sigma) << '\n';
  }
}

void write_signals_csv(std::ostream& os, const std::vector<SignalRow>& rows, const Provenance& p) {
  const ClassicLocale guard(os);
  write_provenance(os, p);
  os << "t,x,y,xhat\n";
  for (const SignalRow& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.x) << ',' << format_double(r.y) << ','
       << format_double(r.xhat) << '\n';
  }
}

std::vector<double> read_csv_column(std::istream& is, const std::string& column) {
  std::vector<double> out;
  std::string line;
  std::size_t col = 0;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto f = split(line, ',');
    if (first) {
      first = false;
      bool numeric = true;
      try {
        parse_double(f[0], "1");
      } catch (const std::invalid_argument&) {
        numeric = false;
      }
      if (!numeric) {
        if (column.empty()) {
          col = 0;
        } else {
          const auto it = std::find(f.begin(), f.end(), column);
          if (it == f.end()) throw std::invalid_argument("csv: no column named '" + column + "'");
          col = static_cast<std::size_t>(it - f.begin());
        }
        continue;
      }
      if (!column.empty()) throw std::invalid_argument("csv: column '" + column + "' requested but file has no header");
    }
    if (col >= f.size()) throw std::invalid_argument("csv: line " + std::to_string(lineno) + " is too short");
    out.push_back(parse_double(f[col], column.empty() ? "1" : column.c_str()));
  }
  return out;
}

}  // namespace tikreg
