#pragma once
// File helpers shared by the persistence code.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtf::io {

/// Writes via a sibling temporary file and rename, so readers never observe
/// a partially written file. Throws IoError.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// `%.17g`: 17 significant digits, the format of every numeric table.
std::string format_double(double x);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtf::io
