#pragma once

// CSV tables and the static SVG decay plot. Numbers are written with
// std::to_chars, so output never depends on the process locale.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tikreg/experiment.hpp"

namespace tikreg {

inline constexpr const char* kVersion = "0.3.1";

/// Fixed significant-digit formatting ("%.17g"-like, always '.' decimal).
std::string format_double(double x, int significant = 17);

/// Key/value pairs written as leading "# key=value" lines.
struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string version = kVersion;
  std::map<std::string, std::string> extra;
};

Provenance provenance_for(const SweepConfig& cfg);

void write_provenance(std::ostream& os, const Provenance& p);

/// case,N,m,rep,excess_sup,excess_unsup followed by the unclamped debug
/// columns raw_sup,raw_unsup and a status column.
void write_sweep_csv(std::ostream& os, const SweepResult& res);

struct SummaryTable {
  char noise_case = 'a';
  std::vector<SummaryRow> rows;
};

SummaryTable summary_table(const SweepResult& res);

/// case,N,m,mean_sup,std_sup,mean_unsup,std_unsup
void write_summary_csv(std::ostream& os, const SummaryTable& table, const Provenance& p);

/// Inverse of write_summary_csv; comment lines are skipped. Throws
/// std::invalid_argument on malformed input.
SummaryTable parse_summary_csv(std::istream& is);

/// Log-log plot of the mean excess against m for every N and both learners,
/// with ±1 std error bars and fitted slopes in the legend. Depends only on
/// the table, so re-rendering from a parsed summary CSV is byte-identical.
std::string render_decay_svg(const SummaryTable& table);

void write_concentration_csv(std::ostream& os, const std::vector<ConcentrationRow>& rows, const Provenance& p);

struct SignalRow {
  double t, x, y, xhat;
};
void write_signals_csv(std::ostream& os, const std::vector<SignalRow>& rows, const Provenance& p);

/// Reads one numeric column (the first, or the one named `column` when the
/// file has a header). Blank and '#' lines are skipped.
std::vector<double> read_csv_column(std::istream& is, const std::string& column = "");

}  // namespace tikreg
