#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace multiarm {

// RFC-4180-style CSV emission: mandatory header row, quoted fields where
// needed, floats at a fixed number of significant digits so reruns are
// byte-identical.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out, int sig_digits = 6)
      : out_(out), sig_digits_(sig_digits) {}

  std::string format(double value) const {
    if (std::isnan(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", sig_digits_, value);
    return buf;
  }

  static std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char ch : field) {
      if (ch == '"') quoted += '"';
      quoted += ch;
    }
    quoted += '"';
    return quoted;
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << escape(cells[i]);
    }
    out_ << '\n';
  }

  std::string cell(double v) const { return format(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::optional<int>& v) {
    return v ? std::to_string(*v) : std::string();
  }

 private:
  std::ostream& out_;
  int sig_digits_;
};

}  // namespace multiarm
