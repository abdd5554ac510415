#pragma once

// Data CSV (header x,y1,...,yk; LF; '.' decimal) and the embedded
// blood-pressure case study.

#include "ddpq/geoquant.hpp"

#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddpq {

/// Malformed input file. `line` is 1-based and counts the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct PairedData {
  std::vector<double> xs;
  std::vector<Vec> ys;
};

PairedData read_data_csv(std::istream& in);
PairedData read_data_csv_file(const std::string& path);

void write_data_csv(std::ostream& out, const std::vector<double>& xs, const std::vector<Vec>& ys,
                    int precision = std::numeric_limits<double>::max_digits10);

/// Strict decimal parse of a whole field; throws std::invalid_argument.
double parse_number(const std::string& field);

/// "a,b,c" into numbers.
std::vector<double> parse_number_list(const std::string& text);

struct BpRow {
  int serial;
  double age;
  double systolic;
  double diastolic;
};

/// Blood pressure of Marwari females in Kolkata. The survey numbers its subjects
/// up to 40, but serials 1 and 21 have no record, so this table has 38 rows.
/// Nothing has been filled in.
std::span<const BpRow> bp_table();

}  // namespace ddpq
