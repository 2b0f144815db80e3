#ifndef BLNO_CSV_HPP_
#define BLNO_CSV_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace blno {

// Shortest decimal string that parses back to exactly x. Deterministic, so
// output files are byte-stable across runs.
std::string format_double(double x);

// Minimal CSV writer: one header row, then typed cells. No quoting; field
// values in this project never contain commas.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(const char* v) { return cell(std::string(v)); }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }
  CsvWriter& cell(std::int64_t v) { return cell(std::to_string(v)); }
  void end_row();

  int rows_written() const { return rows_; }

 private:
  std::ofstream out_;
  bool row_open_ = false;
  int rows_ = 0;
};

// Parses a whole CSV file back into rows of strings (header included).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace blno

#endif  // BLNO_CSV_HPP_
