#include "skillguard/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

#include "skillguard/util.hpp"

namespace skillguard {

std::string Digest256::hex() const {
    return hex_encode(bytes);
}

Digest256 Digest256::from_hex(std::string_view hex) {
    auto raw = hex_decode(hex);
    if (raw.size() != 32) throw std::invalid_argument("Digest256: expected 64 hex chars");
    Digest256 d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

Sha256Hasher::Sha256Hasher() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: init failed");
    }
}

Sha256Hasher::~Sha256Hasher() {
    EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Hasher::update(std::string_view data) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1) {
        throw std::runtime_error("sha256: update failed");
    }
}

void Sha256Hasher::update(std::span<const std::uint8_t> data) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1) {
        throw std::runtime_error("sha256: update failed");
    }
}

Digest256 Sha256Hasher::finish() {
    Digest256 d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.bytes.data(), &len) != 1 || len != 32) {
        throw std::runtime_error("sha256: final failed");
    }
    return d;
}

Digest256 sha256(std::span<const std::uint8_t> data) {
    Sha256Hasher h;
    h.update(data);
    return h.finish();
}

Digest256 sha256(std::string_view data) {
    Sha256Hasher h;
    h.update(data);
    return h.finish();
}

}  // namespace skillguard
