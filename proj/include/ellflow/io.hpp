#pragma once

// CSV output at full double precision and atomic file replacement.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ellflow/errors.hpp"

namespace ellflow {

/// %.17g, which round-trips every double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw domain_error("csv row width does not match header");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        row_strings(cells);
    }

    void row_strings(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw domain_error("csv row width does not match header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    std::size_t columns_;
    std::ostringstream out_;
};

/// Writes to `path.tmp` and renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw domain_error("cannot open " + tmp.string() + " for writing");
        f << content;
        if (!f) throw domain_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ellflow
