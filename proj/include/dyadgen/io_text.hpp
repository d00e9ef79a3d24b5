#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dyadgen/error.hpp"

namespace dyadgen {

// 17 significant digits: shortest text that round-trips any finite double.
inline std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Whitespace-token reader that tracks line numbers for error reporting.
class TokenReader {
public:
    TokenReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::string next() {
        std::string tok;
        while (true) {
            const int c = in_.peek();
            if (c == EOF) break;
            if (c == '\n') {
                if (!tok.empty()) return tok;
                ++line_;
                in_.get();
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                in_.get();
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(in_.get()));
        }
        if (tok.empty()) fail("unexpected end of file");
        return tok;
    }

    double next_double() {
        const std::string tok = next();
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') fail("expected a number, got '" + tok + "'");
        return v;
    }

    long next_int() {
        const std::string tok = next();
        char* end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0') fail("expected an integer, got '" + tok + "'");
        return v;
    }

    void expect(const std::string& literal) {
        const std::string tok = next();
        if (tok != literal) fail("expected '" + literal + "', got '" + tok + "'");
    }

    bool at_eof() {
        while (true) {
            const int c = in_.peek();
            if (c == EOF) return true;
            if (c == '\n') {
                ++line_;
                in_.get();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                in_.get();
            } else {
                return false;
            }
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(source_ + ":" + std::to_string(line_) + ": " + what);
    }

    int line() const { return line_; }

private:
    std::istream& in_;
    std::string source_;
    int line_ = 1;
};

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);
    return in;
}

}  // namespace dyadgen
