#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace hifd {

/// Incremental FNV-1a (64-bit). Used to fingerprint inputs in reports so
/// reruns can be checked for byte identity. Not cryptographic.
class Fnv1a64 {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ull;
        }
    }

    void update(std::string_view s) { update(s.data(), s.size()); }

    /// Doubles are hashed by their IEEE-754 little-endian bytes so the digest
    /// is identical on every platform this library targets.
    void update(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(bits >> (8 * i));
        update(le, sizeof le);
    }

    void update(std::span<const double> v) {
        for (double x : v) update(x);
    }

    void update(std::uint64_t v) {
        unsigned char le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(v >> (8 * i));
        update(le, sizeof le);
    }

    [[nodiscard]] std::uint64_t value() const { return hash_; }

    [[nodiscard]] std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i)
            out[15 - i] = digits[(hash_ >> (4 * i)) & 0xf];
        return out;
    }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace hifd
