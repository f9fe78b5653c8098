#pragma once

// UTF-8 helpers. Every character offset in the workbench counts Unicode code
// points, never bytes.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cdcr/errors.hpp"

namespace cdcr::text {

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw Error(ErrorCode::format, "invalid UTF-8 lead byte at byte " + std::to_string(i));
    }
    if (extra > 0 && i + extra >= s.size()) {
      throw Error(ErrorCode::format, "truncated UTF-8 sequence at byte " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        throw Error(ErrorCode::format, "invalid UTF-8 continuation at byte " + std::to_string(i + k));
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
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

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

inline std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

// Code-point substring [begin, end).
inline std::string substr(std::string_view s, std::size_t begin, std::size_t end) {
  auto cps = decode_utf8(s);
  if (begin > end || end > cps.size()) {
    throw Error(ErrorCode::validation, "substring range out of bounds");
  }
  return encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' ||
         c == 0xA0 || c == 0x2009 || c == 0x200A || c == 0x202F || c == 0x3000;
}

struct Token {
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  std::string surface;
};

inline std::vector<Token> whitespace_tokens(std::string_view s) {
  auto cps = decode_utf8(s);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    if (i == cps.size()) break;
    std::size_t start = i;
    while (i < cps.size() && !is_space(cps[i])) ++i;
    tokens.push_back({start, i, encode_utf8(std::u32string_view(cps).substr(start, i - start))});
  }
  return tokens;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Maps Latin-1 Supplement and Latin Extended-A letters to their base ASCII
// letter; returns 0 for anything else.
inline char fold_diacritic(char32_t cp) {
  static constexpr const char* latin1 =
      // U+00C0 .. U+00FF
      "AAAAAAACEEEEIIII"
      "DNOOOOO*OUUUUYTs"
      "aaaaaaaceeeeiiii"
      "dnooooo/ouuuuyty";
  static constexpr const char* ext_a =
      // U+0100 .. U+017F
      "AaAaAaCcCcCcCcDd"
      "DdEeEeEeEeEeGgGg"
      "GgGgHhHhIiIiIiIi"
      "IiJjJjKkkLlLlLlL"
      "lLlNnNnNnnNnOoOo"
      "OoOoRrRrRrSsSsSs"
      "SsTtTtTtUuUuUuUu"
      "UuUuWwYyYZzZzZzs";
  if (cp >= 0xC0 && cp <= 0xFF) {
    char c = latin1[cp - 0xC0];
    return (c == '*' || c == '/') ? 0 : c;
  }
  if (cp >= 0x100 && cp <= 0x17F) return ext_a[cp - 0x100];
  return 0;
}

}  // namespace cdcr::text
