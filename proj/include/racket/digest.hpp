#pragma once

#include <string>
#include <string_view>

namespace racket {

// SHA-256 of `data`, lowercase hex. This is the digest used on the wire and
// in artifact manifests.
std::string sha256_hex(std::string_view data);

}  // namespace racket
