#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sbc/errors.hpp"

namespace sbc {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Line-oriented CSV writer with a fixed header.
class CsvFile {
public:
    explicit CsvFile(std::string header) { lines_.push_back(std::move(header)); }

    void add_row(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ",";
            line += cells[i];
        }
        lines_.push_back(std::move(line));
    }

    std::string text() const {
        std::string out;
        for (const auto& l : lines_) {
            out += l;
            out += "\n";
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write " + path);
        f << text();
    }

private:
    std::vector<std::string> lines_;
};

} // namespace sbc
