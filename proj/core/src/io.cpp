#include "wisp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace wisp::io {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

Csv::Csv(std::vector<std::string> columns) : n_cols_(columns.size()) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += columns[i];
    }
    buf_ += '\n';
}

Csv& Csv::cell(const std::string& v) {
    if (col_) buf_ += ',';
    buf_ += v;
    ++col_;
    return *this;
}

Csv& Csv::cell(double v) { return cell(format_double(v)); }

Csv& Csv::cell(long long v) { return cell(std::to_string(v)); }

void Csv::end_row() {
    if (col_ != n_cols_)
        throw std::runtime_error("Csv: row has " + std::to_string(col_) + " cells, expected " +
                                 std::to_string(n_cols_));
    buf_ += '\n';
    col_ = 0;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace wisp::io
