#pragma once

// Internal little-endian binary I/O helpers shared by the store and
// dataset container code.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace probembed::binio {

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian; big-endian hosts are unsupported");

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("I/O failure while writing");
}

template <class T>
void write_pod(std::ostream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    if (!s.empty()) write_bytes(out, s.data(), s.size());
}

inline void write_f32_array(std::ostream& out, const std::vector<float>& v) {
    if (!v.empty()) write_bytes(out, v.data(), v.size() * sizeof(float));
}

inline void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw std::runtime_error("truncated file");
    }
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    read_bytes(in, &v, sizeof(T));
    return v;
}

inline std::string read_string(std::istream& in, std::uint32_t max_len = 1u << 20) {
    const std::uint32_t len = read_pod<std::uint32_t>(in);
    if (len > max_len) throw std::runtime_error("unreasonable string length in file");
    std::string s(len, '\0');
    if (len > 0) read_bytes(in, s.data(), len);
    return s;
}

inline std::vector<float> read_f32_array(std::istream& in, std::size_t n) {
    std::vector<float> v(n);
    if (n > 0) read_bytes(in, v.data(), n * sizeof(float));
    return v;
}

}  // namespace probembed::binio
