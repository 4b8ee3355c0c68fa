#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "adpsgd/errors.hpp"

namespace adpsgd {

// 17 significant digits: enough to round-trip any double exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header) : out_(path) {
        if (!out_) throw InvalidStateError("cannot open output file: " + path);
        out_ << header << "\n";
    }

    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << field(fields), first = false), ...);
        out_ << "\n";
    }

  private:
    static std::string field(double v) { return fmt_double(v); }
    static std::string field(const std::string& s) { return s; }
    static std::string field(const char* s) { return s; }
    static std::string field(int v) { return std::to_string(v); }
    static std::string field(long v) { return std::to_string(v); }

    std::ofstream out_;
};

}  // namespace adpsgd
