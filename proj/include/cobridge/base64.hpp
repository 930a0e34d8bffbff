#pragma once

#include <string>
#include <string_view>

namespace cobridge {

/// Standard alphabet with `=` padding (RFC 4648).
std::string base64_encode(std::string_view bytes);
/// Throws DecodeError on characters outside the alphabet or bad padding.
std::string base64_decode(std::string_view text);

}  // namespace cobridge
