// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   unicode.hpp
 * @brief  Minimal UTF-8 codec and character classes for text normalization.
 *
 * Covers what abstracts in Latin scripts need: ASCII, Latin-1, Latin
 * Extended-A, basic Greek and Cyrillic case folding, combining marks and the
 * common punctuation blocks. Invalid UTF-8 decodes to U+FFFD.
 */
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hallmark::unicode {

inline constexpr char32_t replacement_char = 0xFFFD;

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(replacement_char);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(replacement_char);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
    if (!ok || cp < min_for_len[len] || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(replacement_char);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string &out, char32_t cp) {
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

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (auto cp : s) append_utf8(out, cp);
  return out;
}

inline bool is_whitespace(char32_t c) {
  switch (c) {
  case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
  case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
  case 0x205F: case 0x3000:
    return true;
  default:
    return c >= 0x2000 && c <= 0x200A;
  }
}

/// Control and format characters that normalization removes.
inline bool is_control(char32_t c) {
  if (is_whitespace(c)) return false;
  if (c < 0x20 || (c >= 0x7F && c <= 0x9F)) return true;
  switch (c) {
  case 0x00AD: case 0x200B: case 0x200C: case 0x200D: case 0x200E:
  case 0x200F: case 0x2060: case 0xFEFF: case replacement_char:
    return true;
  default:
    return (c >= 0x202A && c <= 0x202E) || (c >= 0xE000 && c <= 0xF8FF);
  }
}

inline bool is_combining_mark(char32_t c) {
  return (c >= 0x0300 && c <= 0x036F) || (c >= 0x1AB0 && c <= 0x1AFF) ||
         (c >= 0x1DC0 && c <= 0x1DFF) || (c >= 0x20D0 && c <= 0x20FF) ||
         (c >= 0xFE20 && c <= 0xFE2F);
}

inline bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126))
    return true;
  // Latin-1 punctuation and symbols, excluding the letter-like ª µ º.
  if (c >= 0x00A1 && c <= 0x00BF) return c != 0x00AA && c != 0x00B5 && c != 0x00BA;
  if (c == 0x00D7 || c == 0x00F7) return true;
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x2190 && c <= 0x21FF) || (c >= 0x2200 && c <= 0x22FF) ||
         (c >= 0x3001 && c <= 0x303F) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65);
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0x80) return c;
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 32;
  if (c >= 0x0100 && c <= 0x017F) {
    if ((c >= 0x0100 && c <= 0x0137) || (c >= 0x014A && c <= 0x0177))
      return (c % 2 == 0) ? c + 1 : c;
    if ((c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E))
      return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x0178) return 0x00FF;
    return c;
  }
  if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 32;
  if (c >= 0x0410 && c <= 0x042F) return c + 32;
  if (c >= 0x0400 && c <= 0x040F) return c + 80;
  return c;
}

/// Base letter of a precomposed Latin-1 / Latin Extended-A letter, or the
/// input unchanged. Letters without a canonical decomposition (æ, đ, ł, ß)
/// are left alone.
inline char32_t strip_accent(char32_t c) {
  // Index 0 corresponds to U+00C0; '\0' marks "no decomposition".
  static constexpr char latin1[] =
      "AAAAAA\0CEEEEIIII\0NOOOOO\0\0UUUUY\0\0"
      "aaaaaa\0ceeeeiiii\0nooooo\0\0uuuuy\0y";
  // Index 0 corresponds to U+0100.
  static constexpr char ext_a[] =
      "AaAaAaCcCcCcCcDd\0\0EeEeEeEeEeGgGgGgGgHh\0\0IiIiIiIiI\0\0\0JjKk\0"
      "LlLlLl\0\0\0\0NnNnNn\0\0\0OoOoOo\0\0RrRrRrSsSsSsSsTtTt\0\0UuUuUuUuUuUu"
      "WwYyYZzZzZz\0";
  if (c >= 0x00C0 && c <= 0x00FF) {
    const char b = latin1[c - 0x00C0];
    return b ? static_cast<char32_t>(b) : c;
  }
  if (c >= 0x0100 && c <= 0x017F) {
    const char b = ext_a[c - 0x0100];
    return b ? static_cast<char32_t>(b) : c;
  }
  return c;
}

} // namespace hallmark::unicode
