#pragma once

// Low-level scanning helpers for the vernacular surface syntax: nested
// (* ... *) comments, double-quoted strings with doubled-quote escapes,
// and identifier/number/symbol tokens.

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vermin {

inline bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c));
}

/// Position just past the closing quote, or npos if the string never ends.
/// `i` must point at the opening quote. A doubled quote escapes itself.
inline std::size_t skip_string(std::string_view s, std::size_t i) {
  ++i;
  while (i < s.size()) {
    if (s[i] == '"') {
      if (i + 1 < s.size() && s[i + 1] == '"') {
        i += 2;
        continue;
      }
      return i + 1;
    }
    ++i;
  }
  return std::string_view::npos;
}

/// Position just past the matching close of a (possibly nested) comment, or
/// npos if unterminated. `i` must point at the opening '('.
inline std::size_t skip_comment(std::string_view s, std::size_t i) {
  std::size_t depth = 0;
  while (i < s.size()) {
    if (s[i] == '(' && i + 1 < s.size() && s[i + 1] == '*') {
      ++depth;
      i += 2;
    } else if (s[i] == '*' && i + 1 < s.size() && s[i + 1] == ')') {
      --depth;
      i += 2;
      if (depth == 0) return i;
    } else {
      ++i;
    }
  }
  return std::string_view::npos;
}

enum class TokKind { Ident, Number, String, PatternVar, Symbol };

struct Token {
  TokKind kind;
  std::string text;  // for String: raw slice including quotes
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Tokenize a source fragment. Comments are skipped entirely; unterminated
/// comments or strings simply end the token stream.
inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '(' && i + 1 < s.size() && s[i + 1] == '*') {
      std::size_t j = skip_comment(s, i);
      if (j == std::string_view::npos) break;
      i = j;
      continue;
    }
    if (c == '"') {
      std::size_t j = skip_string(s, i);
      if (j == std::string_view::npos) break;
      out.push_back({TokKind::String, std::string(s.substr(i, j - i)), i, j});
      i = j;
      continue;
    }
    if (c == '?' && i + 1 < s.size() && is_ident_start(s[i + 1])) {
      std::size_t j = i + 1;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      out.push_back({TokKind::PatternVar, std::string(s.substr(i + 1, j - i - 1)), i, j});
      i = j;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      out.push_back({TokKind::Ident, std::string(s.substr(i, j - i)), i, j});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({TokKind::Number, std::string(s.substr(i, j - i)), i, j});
      i = j;
      continue;
    }
    // Multi-char symbols we care about; everything else is a single char.
    static constexpr std::string_view multi[] = {":=", "=>", "->", "<-", "|-", "::"};
    std::size_t len = 1;
    for (auto m : multi) {
      if (s.substr(i, m.size()) == m) {
        len = m.size();
        break;
      }
    }
    out.push_back({TokKind::Symbol, std::string(s.substr(i, len)), i, i + len});
    i += len;
  }
  return out;
}

/// First identifier token, if any.
inline std::optional<Token> head_ident(const std::vector<Token>& toks) {
  for (const auto& t : toks)
    if (t.kind == TokKind::Ident) return t;
  return std::nullopt;
}

/// Offset of the first occurrence of symbol `sym` at parenthesis/bracket/brace
/// depth zero, scanning tokens; npos when absent.
inline std::size_t top_level_symbol(const std::vector<Token>& toks, std::string_view sym) {
  int depth = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind != TokKind::Symbol) continue;
    if (t.text == "(" || t.text == "[" || t.text == "{")
      ++depth;
    else if (t.text == ")" || t.text == "]" || t.text == "}")
      --depth;
    else if (depth == 0 && t.text == sym)
      return i;
  }
  return std::string_view::npos;
}

}  // namespace vermin
