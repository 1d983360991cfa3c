#include "rulforge/serialize.hpp"

#include <bit>
#include <istream>
#include <ostream>

namespace rulforge {

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
    if (!out) throw IoError("binary write failed");
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw IoError(std::string("binary read failed or truncated at ") + what);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

}  // namespace

void write_u32_le(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_f64_le(std::ostream& out, double v) { write_le(out, v); }
std::uint32_t read_u32_le(std::istream& in, const char* what) { return read_le<std::uint32_t>(in, what); }
double read_f64_le(std::istream& in, const char* what) { return read_le<double>(in, what); }

}  // namespace rulforge
