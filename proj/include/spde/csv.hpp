#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace spde {

// Floats print with 17 significant digits so regression baselines are
// bit-exact across runs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
    }

    void raw_row(const std::string& line) { out_ << line << "\n"; }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << "\n";
    }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(float v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(unsigned long v) { return std::to_string(v); }
    static std::string cell(unsigned long long v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const char* v) { return v; }
    static std::string cell(const std::string& v) { return v; }

    std::ofstream out_;
};

}  // namespace spde
