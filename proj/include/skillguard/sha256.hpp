#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace skillguard {

struct Digest256 {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const;
    static Digest256 from_hex(std::string_view hex);

    auto operator<=>(const Digest256&) const = default;
};

Digest256 sha256(std::span<const std::uint8_t> data);
Digest256 sha256(std::string_view data);

// Incremental hashing over the OpenSSL EVP interface.
class Sha256Hasher {
public:
    Sha256Hasher();
    ~Sha256Hasher();
    Sha256Hasher(const Sha256Hasher&) = delete;
    Sha256Hasher& operator=(const Sha256Hasher&) = delete;

    void update(std::string_view data);
    void update(std::span<const std::uint8_t> data);
    Digest256 finish();

private:
    void* ctx_;
};

}  // namespace skillguard
