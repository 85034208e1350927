#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tem/errors.hpp"

namespace tem {

/// Shortest round-trippable decimal form, C locale ('.' decimal point).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal CSV assembler: '#'-prefixed header comment (config hash, library
/// version), one column row, then data rows. Comma separated, LF line ends.
class CsvBuilder {
public:
  explicit CsvBuilder(std::string header_comment) {
    body_ += "# " + std::move(header_comment) + "\n";
  }

  void columns(const std::vector<std::string>& names) { append_row(names); }

  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ += ',';
      body_ += cells[i];
    }
    body_ += '\n';
  }

  const std::string& str() const { return body_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open CSV for writing", path.string());
    out << body_;
    if (!out) throw io_error("failed writing CSV", path.string());
  }

private:
  std::string body_;
};

/// FNV-1a 64-bit hash; used to stamp CSV headers with the effective config.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace tem
