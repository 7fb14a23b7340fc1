#pragma once

// Text normalization for the lexical gate and output scanner: lowercasing,
// Unicode-confusable folding, leet/homoglyph substitution and whitespace
// collapsing. The fold table is a fixed, versioned asset; normalize() is
// idempotent, which the property tests check over random inputs.
//
// Leet folding is applied only to characters strictly between ASCII letters
// inside a token ("c@l0r!es" -> "calories"). Standalone digit runs are left
// untouched so numeric redlines keep matching ("1200 calories").

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

namespace redline {

inline constexpr std::string_view kNormalizerVersion = "fold-table-1";

namespace detail {

// Confusable codepoint -> ASCII. Covers the Cyrillic/Greek lookalikes and
// typographic punctuation seen in obfuscated prompts; fullwidth forms are
// mapped programmatically below.
inline char confusable_to_ascii(char32_t cp) {
  switch (cp) {
    // Cyrillic lowercase / uppercase lookalikes
    case 0x0430: case 0x0410: return 'a';
    case 0x0435: case 0x0415: return 'e';
    case 0x043E: case 0x041E: return 'o';
    case 0x0441: case 0x0421: return 'c';
    case 0x0440: case 0x0420: return 'p';
    case 0x0445: case 0x0425: return 'x';
    case 0x0443: case 0x0423: return 'y';
    case 0x0456: case 0x0406: return 'i';
    case 0x0455: case 0x0405: return 's';
    case 0x0454: case 0x0404: return 'e';
    case 0x0458: case 0x0408: return 'j';
    // Greek lookalikes
    case 0x03B1: case 0x0391: return 'a';
    case 0x03B5: case 0x0395: return 'e';
    case 0x03B9: case 0x0399: return 'i';
    case 0x03BF: case 0x039F: return 'o';
    case 0x03C1: case 0x03A1: return 'p';
    case 0x03C4: return 't';
    case 0x03C5: return 'u';
    case 0x03BD: return 'v';
    // typographic punctuation
    case 0x2018: case 0x2019: case 0x02BC: return '\'';
    case 0x201C: case 0x201D: return '"';
    case 0x2010: case 0x2011: case 0x2012: case 0x2013:
    case 0x2014: case 0x2015: case 0x2212: return '-';
    default: return 0;
  }
}

inline bool is_unicode_space(char32_t cp) {
  return cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

inline bool is_zero_width(char32_t cp) {
  return cp == 0x200B || cp == 0x200C || cp == 0x200D || cp == 0xFEFF ||
         cp == 0x00AD;
}

// Decodes one UTF-8 codepoint at s[i]; advances i. Invalid bytes decode as
// '?' one byte at a time so arbitrary input stays total and deterministic.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) { len = 2; cp = b0 & 0x1F; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; cp = b0 & 0x0F; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; cp = b0 & 0x07; }
  else { ++i; return U'?'; }
  if (i + len > s.size()) { ++i; return U'?'; }
  for (int k = 1; k < len; ++k) {
    unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) { ++i; return U'?'; }
    cp = (cp << 6) | (bk & 0x3F);
  }
  // reject overlong / out-of-range encodings
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
      (len == 4 && cp < 0x10000) || cp > 0x10FFFF) {
    ++i;
    return U'?';
  }
  i += len;
  return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
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

inline bool ascii_letter(char c) { return c >= 'a' && c <= 'z'; }

inline char leet_symbol(char c) {
  switch (c) {
    case '@': return 'a';
    case '!': return 'i';
    case '$': return 's';
    default: return 0;
  }
}

inline char leet_digit(char c) {
  switch (c) {
    case '0': return 'o';
    case '1': return 'l';
    case '3': return 'e';
    default: return 0;
  }
}

// Folds leet characters that sit strictly between ASCII letters within one
// token. Digit runs fold only when every digit is mappable and the run is
// short (<=2); longer or unmappable runs are numeric content, not leet.
inline void fold_leet_token(std::string& tok) {
  const std::size_t n = tok.size();
  std::string out = tok;
  std::size_t i = 0;
  while (i < n) {
    char c = tok[i];
    if (leet_symbol(c) != 0) {
      bool left = i > 0 && ascii_letter(out[i - 1]);
      bool right = i + 1 < n && ascii_letter(tok[i + 1]);
      if (left && right) out[i] = leet_symbol(c);
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      bool all_mappable = true;
      while (j < n && std::isdigit(static_cast<unsigned char>(tok[j]))) {
        if (leet_digit(tok[j]) == 0) all_mappable = false;
        ++j;
      }
      bool left = i > 0 && ascii_letter(out[i - 1]);
      bool right = j < n && ascii_letter(tok[j]);
      if (all_mappable && left && right && (j - i) <= 2) {
        for (std::size_t k = i; k < j; ++k) out[k] = leet_digit(tok[k]);
      }
      i = j;
      continue;
    }
    ++i;
  }
  tok = out;
}

}  // namespace detail

// Lowercases, folds confusables and leet, collapses whitespace, trims.
inline std::string normalize(std::string_view raw) {
  // pass 1: decode, fold confusables, ascii-lowercase, unify whitespace
  std::string folded;
  folded.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    char32_t cp = detail::decode_utf8(raw, i);
    if (detail::is_zero_width(cp)) continue;
    if (cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
        cp == ' ' || detail::is_unicode_space(cp)) {
      folded.push_back(' ');
      continue;
    }
    if (char mapped = detail::confusable_to_ascii(cp); mapped != 0) {
      folded.push_back(mapped);
      continue;
    }
    if (cp < 0x80) {
      folded.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(cp))));
    } else {
      detail::encode_utf8(cp, folded);
    }
  }

  // pass 2: per-token leet folding + whitespace collapse
  std::string out;
  out.reserve(folded.size());
  std::size_t pos = 0;
  while (pos < folded.size()) {
    while (pos < folded.size() && folded[pos] == ' ') ++pos;
    std::size_t start = pos;
    while (pos < folded.size() && folded[pos] != ' ') ++pos;
    if (start == pos) break;
    std::string tok = folded.substr(start, pos - start);
    detail::fold_leet_token(tok);
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace redline
