#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "nomen/errors.hpp"
#include "nomen/tensor.hpp"

namespace nomen {

inline constexpr std::size_t kMaxNameLen = 30;

/// The 28 input channels: the 26 basic Latin letters in alphabetical order,
/// then whitespace, then padding.
struct Alphabet {
  static constexpr std::size_t kSize = 28;
  static constexpr std::size_t kWhitespaceChannel = 26;
  static constexpr std::size_t kPaddingChannel = 27;

  /// Channel of a normalized symbol, or -1 if the symbol is not in the
  /// alphabet.
  static int channel_of(char symbol) {
    if (symbol >= 'a' && symbol <= 'z') return symbol - 'a';
    if (symbol == ' ') return static_cast<int>(kWhitespaceChannel);
    return -1;
  }

  /// Inverse of channel_of; the padding channel yields '\0'.
  static char symbol_of(std::size_t channel) {
    if (channel < 26) return static_cast<char>('a' + channel);
    if (channel == kWhitespaceChannel) return ' ';
    return '\0';
  }
};

/// Lowercase text over letters and single internal spaces, at most 30 symbols.
struct NormalizedName {
  std::string text;

  std::size_t size() const { return text.size(); }
  bool operator==(const NormalizedName& other) const = default;
};

namespace detail {

struct Transliteration {
  std::uint32_t code_point;
  const char* expansion;
};

// Latin-1 Supplement and Latin Extended-A letters, reduced to their base
// letters by canonical decomposition; ligatures and non-decomposable letters
// carry explicit expansions.
inline constexpr Transliteration kTransliterations[] = {
    {0x00C0, "a"},  {0x00C1, "a"},  {0x00C2, "a"},  {0x00C3, "a"},
    {0x00C4, "a"},  {0x00C5, "a"},  {0x00C6, "ae"}, {0x00C7, "c"},
    {0x00C8, "e"},  {0x00C9, "e"},  {0x00CA, "e"},  {0x00CB, "e"},
    {0x00CC, "i"},  {0x00CD, "i"},  {0x00CE, "i"},  {0x00CF, "i"},
    {0x00D0, "d"},  {0x00D1, "n"},  {0x00D2, "o"},  {0x00D3, "o"},
    {0x00D4, "o"},  {0x00D5, "o"},  {0x00D6, "o"},  {0x00D8, "o"},
    {0x00D9, "u"},  {0x00DA, "u"},  {0x00DB, "u"},  {0x00DC, "u"},
    {0x00DD, "y"},  {0x00DE, "th"}, {0x00DF, "ss"}, {0x00E0, "a"},
    {0x00E1, "a"},  {0x00E2, "a"},  {0x00E3, "a"},  {0x00E4, "a"},
    {0x00E5, "a"},  {0x00E6, "ae"}, {0x00E7, "c"},  {0x00E8, "e"},
    {0x00E9, "e"},  {0x00EA, "e"},  {0x00EB, "e"},  {0x00EC, "i"},
    {0x00ED, "i"},  {0x00EE, "i"},  {0x00EF, "i"},  {0x00F0, "d"},
    {0x00F1, "n"},  {0x00F2, "o"},  {0x00F3, "o"},  {0x00F4, "o"},
    {0x00F5, "o"},  {0x00F6, "o"},  {0x00F8, "o"},  {0x00F9, "u"},
    {0x00FA, "u"},  {0x00FB, "u"},  {0x00FC, "u"},  {0x00FD, "y"},
    {0x00FE, "th"}, {0x00FF, "y"},  {0x0100, "a"},  {0x0101, "a"},
    {0x0102, "a"},  {0x0103, "a"},  {0x0104, "a"},  {0x0105, "a"},
    {0x0106, "c"},  {0x0107, "c"},  {0x0108, "c"},  {0x0109, "c"},
    {0x010A, "c"},  {0x010B, "c"},  {0x010C, "c"},  {0x010D, "c"},
    {0x010E, "d"},  {0x010F, "d"},  {0x0110, "d"},  {0x0111, "d"},
    {0x0112, "e"},  {0x0113, "e"},  {0x0114, "e"},  {0x0115, "e"},
    {0x0116, "e"},  {0x0117, "e"},  {0x0118, "e"},  {0x0119, "e"},
    {0x011A, "e"},  {0x011B, "e"},  {0x011C, "g"},  {0x011D, "g"},
    {0x011E, "g"},  {0x011F, "g"},  {0x0120, "g"},  {0x0121, "g"},
    {0x0122, "g"},  {0x0123, "g"},  {0x0124, "h"},  {0x0125, "h"},
    {0x0126, "h"},  {0x0127, "h"},  {0x0128, "i"},  {0x0129, "i"},
    {0x012A, "i"},  {0x012B, "i"},  {0x012C, "i"},  {0x012D, "i"},
    {0x012E, "i"},  {0x012F, "i"},  {0x0130, "i"},  {0x0131, "i"},
    {0x0132, "ij"}, {0x0133, "ij"}, {0x0134, "j"},  {0x0135, "j"},
    {0x0136, "k"},  {0x0137, "k"},  {0x0138, "k"},  {0x0139, "l"},
    {0x013A, "l"},  {0x013B, "l"},  {0x013C, "l"},  {0x013D, "l"},
    {0x013E, "l"},  {0x013F, "l"},  {0x0140, "l"},  {0x0141, "l"},
    {0x0142, "l"},  {0x0143, "n"},  {0x0144, "n"},  {0x0145, "n"},
    {0x0146, "n"},  {0x0147, "n"},  {0x0148, "n"},  {0x0149, "n"},
    {0x014A, "n"},  {0x014B, "n"},  {0x014C, "o"},  {0x014D, "o"},
    {0x014E, "o"},  {0x014F, "o"},  {0x0150, "o"},  {0x0151, "o"},
    {0x0152, "oe"}, {0x0153, "oe"}, {0x0154, "r"},  {0x0155, "r"},
    {0x0156, "r"},  {0x0157, "r"},  {0x0158, "r"},  {0x0159, "r"},
    {0x015A, "s"},  {0x015B, "s"},  {0x015C, "s"},  {0x015D, "s"},
    {0x015E, "s"},  {0x015F, "s"},  {0x0160, "s"},  {0x0161, "s"},
    {0x0162, "t"},  {0x0163, "t"},  {0x0164, "t"},  {0x0165, "t"},
    {0x0166, "t"},  {0x0167, "t"},  {0x0168, "u"},  {0x0169, "u"},
    {0x016A, "u"},  {0x016B, "u"},  {0x016C, "u"},  {0x016D, "u"},
    {0x016E, "u"},  {0x016F, "u"},  {0x0170, "u"},  {0x0171, "u"},
    {0x0172, "u"},  {0x0173, "u"},  {0x0174, "w"},  {0x0175, "w"},
    {0x0176, "y"},  {0x0177, "y"},  {0x0178, "y"},  {0x0179, "z"},
    {0x017A, "z"},  {0x017B, "z"},  {0x017C, "z"},  {0x017D, "z"},
    {0x017E, "z"},  {0x017F, "s"},  {0x1E9E, "ss"},
};

inline const char* transliterate(std::uint32_t cp) {
  const auto* begin = std::begin(kTransliterations);
  const auto* end = std::end(kTransliterations);
  const auto* it = std::lower_bound(
      begin, end, cp,
      [](const Transliteration& t, std::uint32_t c) { return t.code_point < c; });
  if (it != end && it->code_point == cp) return it->expansion;
  return nullptr;
}

/// Decodes the UTF-8 code point starting at position i and advances i.
/// Malformed bytes decode to U+FFFD and advance by one byte.
inline std::uint32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[k]));
  };
  const std::uint32_t b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto continuation = [&](std::size_t k) {
    return k < s.size() && (byte(k) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && continuation(i + 1)) {
    const std::uint32_t cp = ((b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp >= 0x80 ? cp : 0xFFFD;
  }
  if ((b0 & 0xF0) == 0xE0 && continuation(i + 1) && continuation(i + 2)) {
    const std::uint32_t cp =
        ((b0 & 0x0F) << 12) | ((byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    i += 3;
    return cp >= 0x800 ? cp : 0xFFFD;
  }
  if ((b0 & 0xF8) == 0xF0 && continuation(i + 1) && continuation(i + 2) &&
      continuation(i + 3)) {
    const std::uint32_t cp = ((b0 & 0x07) << 18) | ((byte(i + 1) & 0x3F) << 12) |
                             ((byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp >= 0x10000 ? cp : 0xFFFD;
  }
  i += 1;
  return 0xFFFD;
}

inline bool is_whitespace_cp(std::uint32_t cp) {
  switch (cp) {
    case ' ':
    case '\t':
    case '\n':
    case '\r':
    case '\f':
    case '\v':
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200B;
  }
}

// Hyphens and apostrophes separate name particles; they become whitespace.
inline bool is_separator_cp(std::uint32_t cp) {
  switch (cp) {
    case '-':
    case '\'':
    case '`':
    case 0x02BC:
    case 0x2018:
    case 0x2019:
    case 0x2212:
      return true;
    default:
      return cp >= 0x2010 && cp <= 0x2015;
  }
}

inline bool is_combining_mark(std::uint32_t cp) {
  return cp >= 0x0300 && cp <= 0x036F;
}

inline bool is_valid_normalized(std::string_view text) {
  if (text.empty() || text.size() > kMaxNameLen) return false;
  if (text.front() == ' ' || text.back() == ' ') return false;
  char prev = '\0';
  for (char c : text) {
    if (Alphabet::channel_of(c) < 0) return false;
    if (c == ' ' && prev == ' ') return false;
    prev = c;
  }
  return true;
}

}  // namespace detail

/// Lowercases, strips diacritics and punctuation, collapses whitespace, and
/// truncates to 30 symbols. Hyphens and apostrophes act as particle
/// separators; characters outside the Latin repertoire are dropped.
inline NormalizedName normalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  auto push = [&](char c) {
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  };
  for (std::size_t i = 0; i < raw.size();) {
    const std::uint32_t cp = detail::next_code_point(raw, i);
    if (cp >= 'a' && cp <= 'z') {
      push(static_cast<char>(cp));
    } else if (cp >= 'A' && cp <= 'Z') {
      push(static_cast<char>(cp - 'A' + 'a'));
    } else if (detail::is_whitespace_cp(cp) || detail::is_separator_cp(cp)) {
      if (!out.empty()) pending_space = true;
    } else if (detail::is_combining_mark(cp)) {
      // mark of an already-emitted base letter
    } else if (const char* expansion = detail::transliterate(cp)) {
      for (const char* p = expansion; *p; ++p) push(*p);
    }
    // everything else (digits, punctuation, other scripts) is dropped
  }
  if (out.size() > kMaxNameLen) {
    out.resize(kMaxNameLen);
    if (out.back() == ' ') out.pop_back();
  }
  if (out.empty()) {
    throw EmptyAfterNormalization("no letters survive normalization of \"" +
                                  std::string(raw) + "\"");
  }
  return NormalizedName{std::move(out)};
}

/// Fixed-shape one-hot encoding of a normalized name: 30 rows, 28 channels,
/// padding rows fill the suffix beyond the name's symbols.
class EncodedName {
 public:
  EncodedName() { channels_.fill(Alphabet::kPaddingChannel); }

  static constexpr std::size_t kRows = kMaxNameLen;
  static constexpr std::size_t kCols = Alphabet::kSize;

  /// Validates a raw 30x28 matrix (one-hot rows, padding suffix, well-formed
  /// symbol layout) and adopts it.
  static EncodedName from_matrix(const nn::Tensor& m) {
    nn::check_matrix(m, kRows, kCols, "encoded name");
    EncodedName result;
    std::string text;
    bool padding_seen = false;
    for (std::size_t r = 0; r < kRows; ++r) {
      int hot = -1;
      for (std::size_t c = 0; c < kCols; ++c) {
        const double v = m.at(r, c);
        if (v == 0.0) continue;
        if (v != 1.0 || hot >= 0) {
          throw MalformedEncoding("row " + std::to_string(r) +
                                  " is not one-hot");
        }
        hot = static_cast<int>(c);
      }
      if (hot < 0) {
        throw MalformedEncoding("row " + std::to_string(r) + " is all zero");
      }
      if (hot == static_cast<int>(Alphabet::kPaddingChannel)) {
        padding_seen = true;
      } else if (padding_seen) {
        throw MalformedEncoding("padding is not a suffix (row " +
                                std::to_string(r) + ")");
      } else {
        text += Alphabet::symbol_of(static_cast<std::size_t>(hot));
      }
      result.channels_[r] = static_cast<std::uint8_t>(hot);
    }
    if (text.empty()) {
      throw EmptyAfterNormalization("matrix is all padding");
    }
    if (!detail::is_valid_normalized(text)) {
      throw MalformedEncoding("rows do not spell a normalized name: \"" + text +
                              "\"");
    }
    result.source_ = std::move(text);
    return result;
  }

  const std::array<std::uint8_t, kRows>& channels() const { return channels_; }

  /// Materializes the 30x28 one-hot matrix.
  nn::Tensor matrix() const {
    nn::Tensor m{kRows, kCols};
    for (std::size_t r = 0; r < kRows; ++r) m.at(r, channels_[r]) = 1.0;
    return m;
  }

  /// The normalized text this encoding spells.
  const std::string& source() const { return source_; }

  bool operator==(const EncodedName& other) const {
    return channels_ == other.channels_;
  }

 private:
  friend EncodedName encode(const NormalizedName&);

  std::array<std::uint8_t, kRows> channels_;
  std::string source_;
};

/// One-hot encodes a normalized name; rows past the text are padding.
inline EncodedName encode(const NormalizedName& name) {
  if (!detail::is_valid_normalized(name.text)) {
    throw MalformedEncoding("not a normalized name: \"" + name.text + "\"");
  }
  EncodedName result;
  for (std::size_t i = 0; i < name.text.size(); ++i) {
    result.channels_[i] =
        static_cast<std::uint8_t>(Alphabet::channel_of(name.text[i]));
  }
  result.source_ = name.text;
  return result;
}

/// Recovers the unique normalized name an encoding spells.
inline NormalizedName decode(const EncodedName& encoded) {
  return NormalizedName{encoded.source()};
}

/// Validating decode from a raw matrix.
inline NormalizedName decode(const nn::Tensor& matrix) {
  return decode(EncodedName::from_matrix(matrix));
}

}  // namespace nomen
