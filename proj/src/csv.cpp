#include "perturbmc/csv.hpp"

#include <cstdio>

namespace perturbmc {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : os_(path, std::ios::binary) {
  if (!os_) throw Error(Errc::IoFailure, "cannot open " + path);
}

void CsvWriter::comment(const std::string& line) { os_ << "# " << line << "\n"; }

void CsvWriter::header(const std::vector<std::string>& columns) {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) os_ << ",";
    os_ << columns[i];
  }
  os_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) os_ << ",";
    os_ << format_double(values[i]);
  }
  os_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { os_ << line << "\n"; }

}  // namespace perturbmc
