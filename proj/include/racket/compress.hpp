#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace racket {

class CompressionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// zlib (DEFLATE) compression of chunk payloads.
std::string deflate_bytes(std::string_view raw);

// Throws CompressionError on undecompressible input.
std::string inflate_bytes(std::string_view compressed);

}  // namespace racket
