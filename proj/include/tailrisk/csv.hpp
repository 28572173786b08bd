#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tailrisk/types.hpp"

namespace tailrisk {

/// Shortest decimal representation that round-trips to the same double.
/// Keeps CSV output byte-exact across runs.
inline std::string format_number(Real value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline std::string format_number(long value) { return std::to_string(value); }
inline std::string format_number(int value) { return std::to_string(value); }

/// Minimal CSV emitter: fixed column order, header always present.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
        rows_.reserve(64);
    }

    void row(std::vector<std::string> cells) {
        if (cells.size() != header_.size())
            throw std::logic_error("csv: row width does not match header");
        rows_.push_back(std::move(cells));
    }

    std::string str() const {
        std::string out = join(header_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("csv: cannot open " + path);
        os << str();
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        line += '\n';
        return line;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace tailrisk
