#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "perturbmc/errors.hpp"

namespace perturbmc {

/// Deterministic CSV writer: %.17g formatting, newline "\n", binary stream.
/// Identical inputs produce byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void comment(const std::string& line);
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);

 private:
  std::ofstream os_;
};

std::string format_double(double v);

}  // namespace perturbmc
