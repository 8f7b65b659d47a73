#include "racket/digest.hpp"

#include <openssl/sha.h>

#include <array>

namespace racket {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(md.size() * 2);
    for (unsigned char b : md) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

}  // namespace racket
