#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "phantom/errors.hpp"

namespace phantom::csv {

/// Shortest decimal form that round-trips to the same double.
inline std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string num(long x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }
inline std::string num(std::size_t x) { return std::to_string(x); }

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path) {
    if (!out_) throw ValidationError("cannot open " + path + " for writing");
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace phantom::csv
