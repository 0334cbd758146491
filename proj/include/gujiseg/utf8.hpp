#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "gujiseg/error.hpp"

namespace gujiseg::utf8 {

// Strict decoder: rejects overlong forms, surrogates and values past U+10FFFF.
// `base_offset` is added to reported offsets so callers can report positions
// relative to a whole file.
inline std::u32string decode(std::string_view bytes, std::size_t base_offset = 0) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
      throw DecodeError(base_offset + i, "invalid lead byte");
    }
    if (i + len > n) throw DecodeError(base_offset + i, "truncated sequence");
    for (std::size_t j = 1; j < len; ++j) {
      const auto b = static_cast<unsigned char>(bytes[i + j]);
      if ((b & 0xC0) != 0x80) throw DecodeError(base_offset + i, "invalid continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min) throw DecodeError(base_offset + i, "overlong encoding");
    if (cp > 0x10FFFF) throw DecodeError(base_offset + i, "code point out of range");
    if (cp >= 0xD800 && cp <= 0xDFFF) throw DecodeError(base_offset + i, "surrogate code point");
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size() * 3);
  for (char32_t cp : text) append(out, cp);
  return out;
}

inline std::string encode(char32_t cp) {
  std::string out;
  append(out, cp);
  return out;
}

}  // namespace gujiseg::utf8
