#pragma once

// Error extraction from checker logs and the equivalence relation on error
// messages that decides whether a candidate still fails "the same way".

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vermin {

struct RawError {
  std::string file;
  std::size_t line = 0;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;
  std::string message;  // from the "Error" line to the end of its block
};

enum class ErrorClass {
  UniverseInconsistency,
  ForgottenUniverse,
  BuggedTacticConstraints,
  Normalized,
};

struct ErrorSignature {
  ErrorClass cls = ErrorClass::Normalized;
  std::string text;  // canonical text; significant only for Normalized
  bool number_sensitive = false;
};

struct NormalizeOptions {
  std::string forgotten_literal = "forgotten universe";
};

namespace detail {

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

inline bool icontains(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return true;
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    std::size_t j = 0;
    while (j < needle.size() && lower(hay[i + j]) == lower(needle[j])) ++j;
    if (j == needle.size()) return true;
  }
  return false;
}

/// Parse a `File "...", line N, characters A-B:` header. Returns the end
/// offset of the fragment, or npos on mismatch. `at` points at 'F'.
inline std::size_t parse_location(std::string_view s, std::size_t at, RawError* out) {
  auto expect = [&](std::string_view lit, std::size_t& i) {
    if (s.substr(i, lit.size()) != lit) return false;
    i += lit.size();
    return true;
  };
  auto number = [&](std::size_t& i, std::size_t& val) {
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    val = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
      val = val * 10 + static_cast<std::size_t>(s[i++] - '0');
    return true;
  };
  std::size_t i = at;
  if (!expect("File \"", i)) return std::string_view::npos;
  std::size_t fstart = i;
  while (i < s.size() && s[i] != '"' && s[i] != '\n') ++i;
  if (i >= s.size() || s[i] != '"') return std::string_view::npos;
  std::string file(s.substr(fstart, i - fstart));
  ++i;
  std::size_t line = 0, cb = 0, ce = 0;
  if (!expect(", line ", i) || !number(i, line)) return std::string_view::npos;
  if (!expect(", characters ", i) || !number(i, cb)) return std::string_view::npos;
  if (!expect("-", i) || !number(i, ce)) return std::string_view::npos;
  if (i >= s.size() || s[i] != ':') return std::string_view::npos;
  ++i;
  if (out) {
    out->file = std::move(file);
    out->line = line;
    out->char_begin = cb;
    out->char_end = ce;
  }
  return i;
}

}  // namespace detail

/// Last location header immediately followed by a line beginning with
/// "Error"; the message runs to the end of that contiguous non-empty block.
/// Headers followed by warnings or other text are skipped.
inline std::optional<RawError> extract_error(std::string_view log) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= log.size()) {
    std::size_t nl = log.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(log.substr(pos));
      break;
    }
    lines.push_back(log.substr(pos, nl - pos));
    pos = nl + 1;
  }
  std::optional<RawError> found;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    std::string_view line = lines[i];
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string_view::npos) continue;
    RawError err;
    if (detail::parse_location(line, start, &err) == std::string_view::npos) continue;
    std::string_view next = lines[i + 1];
    if (next.substr(0, 5) != "Error") continue;
    std::string msg(next);
    std::size_t j = i + 2;
    while (j < lines.size() && !lines[j].empty() &&
           lines[j].find_first_not_of(" \t") != std::string_view::npos) {
      msg += '\n';
      msg += lines[j];
      ++j;
    }
    err.message = std::move(msg);
    found = std::move(err);
  }
  return found;
}

/// Collapse an error message to its signature. Applied relaxations, in
/// order of precedence:
///   - any universe-inconsistency message matches any other;
///   - any "forgotten universe" message (case-insensitive) matches any other;
///   - "Unsatisfied constraints" + "maybe a bugged tactic" messages form one
///     class;
///   - otherwise location fragments are stripped, whitespace runs collapse to
///     single spaces, and digit runs are blinded to '#' unless the message
///     mentions "Universe instance should have length".
inline ErrorSignature normalize(std::string_view message,
                                const NormalizeOptions& opts = {}) {
  ErrorSignature sig;
  sig.number_sensitive = detail::contains(message, "Universe instance should have length");
  if (detail::contains(message, "Universe inconsistency")) {
    sig.cls = ErrorClass::UniverseInconsistency;
    sig.text = "Universe inconsistency";
    return sig;
  }
  if (detail::icontains(message, opts.forgotten_literal)) {
    sig.cls = ErrorClass::ForgottenUniverse;
    sig.text = opts.forgotten_literal;
    return sig;
  }
  if (detail::contains(message, "Unsatisfied constraints") &&
      detail::contains(message, "maybe a bugged tactic")) {
    sig.cls = ErrorClass::BuggedTacticConstraints;
    sig.text = "Unsatisfied constraints (maybe a bugged tactic)";
    return sig;
  }
  sig.cls = ErrorClass::Normalized;
  std::string work(message);
  // Strip location fragments wherever they occur.
  std::string no_loc;
  for (std::size_t i = 0; i < work.size();) {
    if (work[i] == 'F') {
      std::size_t end = detail::parse_location(work, i, nullptr);
      if (end != std::string_view::npos) {
        i = end;
        continue;
      }
    }
    no_loc += work[i++];
  }
  // Collapse whitespace (this also undoes word wrapping) and trim.
  std::string out;
  bool in_space = false;
  for (char c : no_loc) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    if (!sig.number_sensitive && std::isdigit(static_cast<unsigned char>(c))) {
      if (out.empty() || out.back() != '#') out += '#';
      continue;
    }
    out += c;
  }
  sig.text = std::move(out);
  return sig;
}

inline bool equivalent(const ErrorSignature& a, const ErrorSignature& b) {
  if (a.cls != b.cls) return false;
  if (a.cls != ErrorClass::Normalized) return true;
  return a.text == b.text;
}

}  // namespace vermin
