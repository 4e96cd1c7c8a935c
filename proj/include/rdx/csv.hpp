#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdx {

// Fixed decimal formatting so identical runs produce identical bytes.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    path_ = path;
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k > 0) out_ << ',';
      out_ << cells[k];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("write failed on '" + path_ + "'");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace rdx
