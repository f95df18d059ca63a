#pragma once

#include <string>
#include <string_view>

namespace pgen::utf8 {

/// Strict decode; throws Error(kInvalidUtf8) naming the offending byte offset.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);
std::string encode(char32_t c);

/// "U+06CC" style label for diagnostics.
std::string codepoint_label(char32_t c);

bool is_whitespace(char32_t c);

}  // namespace pgen::utf8
