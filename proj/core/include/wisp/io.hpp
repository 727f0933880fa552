#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wisp::io {

/// Shortest round-trip decimal form, locale-independent; identical output for
/// identical doubles on every run.
std::string format_double(double v);

/// Minimal CSV builder: header row first, LF newlines, stable column order.
class Csv {
  public:
    explicit Csv(std::vector<std::string> columns);

    Csv& cell(const std::string& v);
    Csv& cell(double v);
    Csv& cell(long long v);
    Csv& cell(int v) { return cell(static_cast<long long>(v)); }
    void end_row();

    const std::string& str() const { return buf_; }

  private:
    std::string buf_;
    std::size_t n_cols_ = 0;
    std::size_t col_ = 0;
};

/// Writes through a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a(std::string_view data);

}  // namespace wisp::io
