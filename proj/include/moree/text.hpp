#pragma once

// Tokenization, n-grams and suffix-stripping concept matching. Every other
// module normalizes text through these functions so that metric scores and
// retrieval features agree bit-for-bit.

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moree/common.hpp"

namespace moree {

using Token = std::string;
using TokenSeq = std::vector<Token>;

/// Reserved separators used when composing model inputs. tokenize() never
/// produces them because '[' and ']' are split off as punctuation.
inline const Token kCls = "[CLS]";
inline const Token kSep = "[SEP]";

inline bool is_reserved(const Token& t) { return t == kCls || t == kSep; }

/// Lowercases, isolates every ASCII punctuation character as its own token and
/// collapses whitespace. Bytes >= 0x80 are treated as word characters.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

inline std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out.push_back(' ');
    out += seq[i];
  }
  return out;
}

struct NGram {
  std::vector<Token> grams;

  std::size_t n() const { return grams.size(); }
  auto operator<=>(const NGram&) const = default;
  bool operator==(const NGram&) const = default;
};

/// All contiguous n-grams of `seq`, in order.
inline std::vector<NGram> ngrams(const TokenSeq& seq, std::size_t n) {
  if (n == 0) throw UsageError("ngrams: order must be >= 1");
  std::vector<NGram> out;
  if (seq.size() < n) return out;
  out.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    out.push_back(NGram{TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                 seq.begin() + static_cast<std::ptrdiff_t>(i + n))});
  return out;
}

namespace detail {

struct SuffixRule {
  std::string_view suffix;
  std::string_view replacement;
};

// Longest suffix first.
inline constexpr std::array<SuffixRule, 6> kSuffixRules{{
    {"ing", ""},
    {"ies", "y"},
    {"es", ""},
    {"ed", ""},
    {"s", ""},
    {"d", ""},
}};

inline constexpr std::size_t kMinStem = 2;

}  // namespace detail

/// First applicable suffix rule (longest first); returns the word unchanged if
/// none applies or the remaining stem would be shorter than two characters.
inline std::string strip_suffix(std::string_view word) {
  for (const auto& r : detail::kSuffixRules) {
    if (word.size() >= r.suffix.size() + detail::kMinStem && word.ends_with(r.suffix)) {
      std::string s(word.substr(0, word.size() - r.suffix.size()));
      s += r.replacement;
      return s;
    }
  }
  return std::string(word);
}

/// The surface form plus the result of every applicable suffix rule.
inline std::vector<std::string> stem_forms(std::string_view word) {
  std::vector<std::string> forms{std::string(word)};
  for (const auto& r : detail::kSuffixRules) {
    if (word.size() >= r.suffix.size() + detail::kMinStem && word.ends_with(r.suffix)) {
      std::string s(word.substr(0, word.size() - r.suffix.size()));
      s += r.replacement;
      forms.push_back(std::move(s));
    }
  }
  std::sort(forms.begin(), forms.end());
  forms.erase(std::unique(forms.begin(), forms.end()), forms.end());
  return forms;
}

/// True when the two words share a stem form. Reflexive and symmetric.
inline bool stem_match(std::string_view word, std::string_view concept_token) {
  if (word == concept_token) return true;
  if (word.empty() || concept_token.empty()) return false;
  const auto a = stem_forms(word);
  const auto b = stem_forms(concept_token);
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j])
      ++i;
    else
      ++j;
  }
  return false;
}

inline bool contains_concept(const TokenSeq& seq, std::string_view concept_token) {
  return std::any_of(seq.begin(), seq.end(),
                     [&](const Token& t) { return stem_match(t, concept_token); });
}

/// A normalized, unordered-input concept pair {e_a, e_b}.
struct ConceptPair {
  Token a;
  Token b;

  /// Normalizes (trim + lowercase) and validates both concepts.
  static ConceptPair make(std::string_view first, std::string_view second) {
    ConceptPair p{normalize(first), normalize(second)};
    if (p.a == p.b) throw DataError("concept pair has identical concepts: '" + p.a + "'");
    return p;
  }

  /// Lexicographically ordered copy.
  ConceptPair canonical() const { return a <= b ? *this : ConceptPair{b, a}; }

  bool covered_by(const TokenSeq& seq) const {
    return contains_concept(seq, a) && contains_concept(seq, b);
  }

  std::string str() const { return a + "|" + b; }

  auto operator<=>(const ConceptPair&) const = default;
  bool operator==(const ConceptPair&) const = default;

  static Token normalize(std::string_view raw) {
    std::size_t lo = 0, hi = raw.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(raw[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(raw[hi - 1]))) --hi;
    Token t;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto c = static_cast<unsigned char>(raw[i]);
      if (std::isspace(c)) throw DataError("concept contains whitespace: '" + std::string(raw) + "'");
      t.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : raw[i]);
    }
    if (t.empty()) throw DataError("empty concept");
    return t;
  }
};

}  // namespace moree
