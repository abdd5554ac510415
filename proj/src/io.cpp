#include "ddpq/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace ddpq {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

double parse_number(const std::string& field) {
  const std::string s = trim(field);
  if (s.empty()) throw std::invalid_argument("empty number");
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite value: '" + s + "'");
  return v;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : split(text, ',')) out.push_back(parse_number(f));
  return out;
}

PairedData read_data_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CsvError(1, "empty file (expected header x,y1,...,yk)");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 2 || trim(header[0]) != "x") throw CsvError(1, "header must be x,y1,...,yk");
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (trim(header[c]) != "y" + std::to_string(c)) throw CsvError(1, "header must be x,y1,...,yk");
  }
  const std::size_t k = header.size() - 1;

  PairedData data;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != k + 1) {
      throw CsvError(lineno, "expected " + std::to_string(k + 1) + " fields, found " + std::to_string(fields.size()));
    }
    try {
      data.xs.push_back(parse_number(fields[0]));
      Vec y(static_cast<Eigen::Index>(k));
      for (std::size_t c = 0; c < k; ++c) y[static_cast<Eigen::Index>(c)] = parse_number(fields[c + 1]);
      data.ys.push_back(std::move(y));
    } catch (const std::invalid_argument& e) {
      throw CsvError(lineno, e.what());
    }
  }
  if (data.xs.empty()) throw CsvError(lineno, "no data rows");
  return data;
}

PairedData read_data_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file '" + path + "'");
  return read_data_csv(in);
}

void write_data_csv(std::ostream& out, const std::vector<double>& xs, const std::vector<Vec>& ys, int precision) {
  if (xs.size() != ys.size()) throw std::invalid_argument("write_data_csv: lengths differ");
  const Eigen::Index k = ys.empty() ? 0 : ys.front().size();
  out << "x";
  for (Eigen::Index c = 0; c < k; ++c) out << ",y" << (c + 1);
  out << '\n';
  std::ostringstream buf;
  buf.imbue(std::locale::classic());
  buf << std::setprecision(precision);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    buf << xs[i];
    for (Eigen::Index c = 0; c < k; ++c) buf << ',' << ys[i][c];
    buf << '\n';
  }
  out << buf.str();
}

}  // namespace ddpq
