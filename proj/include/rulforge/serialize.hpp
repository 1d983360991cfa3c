#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <iosfwd>
#include <string>
#include <vector>

#include "rulforge/errors.hpp"

namespace rulforge {

// Bit-exact float round trips: doubles are stored as the 16-hex-digit
// IEEE-754 pattern, most significant nibble first.
inline std::string f64_to_hex(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[bits & 0xf];
        bits >>= 4;
    }
    return out;
}

inline double hex_to_f64(const char* hex) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[i];
        std::uint64_t nibble;
        if (c >= '0' && c <= '9') nibble = static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') nibble = static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') nibble = static_cast<std::uint64_t>(c - 'A' + 10);
        else throw DataError("bad hex digit in float encoding");
        bits = (bits << 4) | nibble;
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

inline std::string doubles_to_hex(const std::vector<double>& values) {
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) out += f64_to_hex(v);
    return out;
}

inline std::vector<double> hex_to_doubles(const std::string& hex) {
    if (hex.size() % 16 != 0) throw DataError("hex float blob length not a multiple of 16");
    std::vector<double> out(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = hex_to_f64(hex.data() + i * 16);
    return out;
}

// 17 significant digits round-trip IEEE-754 doubles exactly; used for all
// human-readable emission (CSV, reports).
inline std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// FNV-1a over a string; used for config digests.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_u32_le(std::ostream& out, std::uint32_t v);
void write_f64_le(std::ostream& out, double v);
std::uint32_t read_u32_le(std::istream& in, const char* what);
double read_f64_le(std::istream& in, const char* what);

}  // namespace rulforge
