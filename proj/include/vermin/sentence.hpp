#pragma once

// Sentence model: splitting vernacular source into period-terminated
// sentences, classifying them, and grouping them into removable blocks.
//
// A sentence's text is the verbatim source slice from its first
// non-whitespace character (leading comments attach to the following
// sentence) through its terminator. The whitespace gap before each sentence
// is kept separately so an untransformed document renders byte-identically.
// Once a document has been edited it renders with single newline separators.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vermin/lex.hpp"

namespace vermin {

enum class SentenceKind {
  Command,
  ProofOpener,
  ProofStep,
  ProofCloser,
  ScopeOpener,
  ScopeCloser,
  RequireLike,
  ImportLike,
  Blank,
};

struct Sentence {
  std::string leading;  // whitespace gap before this sentence
  std::string text;     // verbatim slice, terminator included
  SentenceKind kind = SentenceKind::Command;
  std::size_t begin = 0;  // byte span in the originally parsed source
  std::size_t end = 0;
  std::vector<Token> tokens;  // comment/string-aware token cache
};

struct SplitError {
  enum Kind { UnterminatedComment, UnterminatedString } kind;
  std::size_t offset;
};

enum class BlockKind { Definition, ProofBlock, Scope, Loose };

struct Block {
  BlockKind kind = BlockKind::Loose;
  std::size_t first = 0;  // inclusive sentence range
  std::size_t last = 0;
  std::string name;  // introduced identifier, empty when anonymous
  std::vector<Block> children;
};

namespace detail {

inline bool is_proof_closer_head(std::string_view h) {
  return h == "Qed" || h == "Defined" || h == "Admitted" || h == "Abort" || h == "Save";
}

inline bool is_statement_head(std::string_view h) {
  return h == "Lemma" || h == "Theorem" || h == "Fact" || h == "Corollary" ||
         h == "Goal" || h == "Instance";
}

inline bool is_definition_head(std::string_view h) {
  return h == "Definition" || h == "Fixpoint" || h == "CoFixpoint" || h == "Ltac" ||
         h == "Axiom" || h == "Parameter" || h == "Variable" || h == "Variables" ||
         h == "Hypothesis" || h == "Context" || h == "Example" || h == "Program";
}

}  // namespace detail

struct ParseResult;

class Document {
 public:
  /// Split source text into sentences. A period terminates a sentence when it
  /// is followed by whitespace or end of input and sits outside strings and
  /// comments; a period glued to the next character (M.t) never terminates.
  static ParseResult parse(std::string_view src);

  const std::vector<Sentence>& sentences() const { return sentences_; }
  std::size_t size() const { return sentences_.size(); }
  bool pristine() const { return pristine_; }
  bool unbalanced_scope() const { return unbalanced_; }

  std::string render() const {
    if (pristine_) {
      std::string out;
      for (const auto& s : sentences_) {
        out += s.leading;
        out += s.text;
      }
      out += trailing_;
      return out;
    }
    std::string out;
    for (const auto& s : sentences_) {
      if (!out.empty()) out += '\n';
      out += s.text;
    }
    if (!out.empty()) out += '\n';
    return out;
  }

  std::size_t line_count() const {
    std::string r = render();
    std::size_t n = 0;
    for (char c : r)
      if (c == '\n') ++n;
    if (!r.empty() && r.back() != '\n') ++n;
    return n;
  }

  /// 1-based line of the first character of each sentence in the current
  /// rendering, plus the line on which the sentence ends.
  struct LineRange {
    std::size_t first = 0;
    std::size_t last = 0;
  };

  std::vector<LineRange> sentence_lines() const {
    std::vector<LineRange> out(sentences_.size());
    std::size_t line = 1;
    auto newlines = [](const std::string& s) {
      std::size_t n = 0;
      for (char c : s)
        if (c == '\n') ++n;
      return n;
    };
    if (pristine_) {
      for (std::size_t k = 0; k < sentences_.size(); ++k) {
        line += newlines(sentences_[k].leading);
        out[k].first = line;
        line += newlines(sentences_[k].text);
        out[k].last = line;
      }
    } else {
      for (std::size_t k = 0; k < sentences_.size(); ++k) {
        out[k].first = line;
        line += newlines(sentences_[k].text);
        out[k].last = line;
        ++line;  // the joining newline
      }
    }
    return out;
  }

  /// Index of the sentence covering a 1-based rendered line.
  std::optional<std::size_t> sentence_at_line(std::size_t line) const {
    auto ranges = sentence_lines();
    for (std::size_t k = 0; k < ranges.size(); ++k)
      if (line >= ranges[k].first && line <= ranges[k].last) return k;
    return std::nullopt;
  }

  // -- mutation (all mark the document transformed) --

  void erase(std::size_t first, std::size_t last) {
    sentences_.erase(sentences_.begin() + first, sentences_.begin() + last + 1);
    touch();
  }

  /// Replace the sentence range [first, last] by the sentences of `text`.
  void replace_with_text(std::size_t first, std::size_t last, std::string_view text);

  void insert_text(std::size_t pos, std::string_view text);

  void set_sentence_text(std::size_t idx, std::string_view text) {
    sentences_[idx].text = std::string(text);
    touch();
  }

  /// Group sentences into a block tree. Blocks partition the document: every
  /// sentence belongs to exactly one block node. A closer with no opener is
  /// kept as a Loose block and flags the document as unbalanced.
  std::vector<Block> blocks() const {
    std::size_t i = 0;
    bool unbalanced = false;
    std::vector<Block> out;
    while (i < sentences_.size()) {
      auto part = group_range(i, sentences_.size(), unbalanced);
      out.insert(out.end(), part.begin(), part.end());
      if (i < sentences_.size() && sentences_[i].kind == SentenceKind::ScopeCloser) {
        unbalanced = true;
        Block orphan;
        orphan.kind = BlockKind::Loose;
        orphan.first = orphan.last = i;
        out.push_back(orphan);
        ++i;
      }
    }
    unbalanced_ = unbalanced;
    return out;
  }

  /// Depth-first flattening of the block tree, parents before children.
  std::vector<Block> flat_blocks() const {
    std::vector<Block> flat;
    auto walk = [&](auto&& self, const std::vector<Block>& bs) -> void {
      for (const auto& b : bs) {
        flat.push_back(b);
        self(self, b.children);
      }
    };
    walk(walk, blocks());
    return flat;
  }

 private:
  void touch() {
    pristine_ = false;
    trailing_.clear();
    classify();
  }

  /// Assign sentence kinds; needs a small amount of proof-state context.
  void classify() {
    bool in_proof = false;
    for (auto& s : sentences_) {
      s.tokens = tokenize(s.text);
      auto head = head_ident(s.tokens);
      if (!head) {
        s.kind = SentenceKind::Blank;
        continue;
      }
      const std::string& h = head->text;
      if (detail::is_proof_closer_head(h)) {
        s.kind = SentenceKind::ProofCloser;
        in_proof = false;
      } else if (h == "Proof") {
        s.kind = SentenceKind::ProofOpener;
        in_proof = true;
      } else if (h == "Require") {
        s.kind = SentenceKind::RequireLike;
        in_proof = false;
      } else if (h == "Import" || h == "Export") {
        s.kind = SentenceKind::ImportLike;
        in_proof = false;
      } else if ((h == "Module" || h == "Section") &&
                 top_level_symbol(s.tokens, ":=") == std::string_view::npos) {
        s.kind = SentenceKind::ScopeOpener;
        in_proof = false;
      } else if (h == "End") {
        s.kind = SentenceKind::ScopeCloser;
        in_proof = false;
      } else if (opens_proof(s.tokens, h)) {
        s.kind = SentenceKind::Command;
        in_proof = true;
      } else if (in_proof) {
        s.kind = SentenceKind::ProofStep;
      } else {
        s.kind = SentenceKind::Command;
      }
    }
  }

  /// Statement sentences that open a proof: Lemma-style statements,
  /// Obligation openers, and body-less Definition/Example forms.
  static bool opens_proof(const std::vector<Token>& toks, const std::string& head) {
    if (detail::is_statement_head(head)) return true;
    if (head == "Obligation") return true;
    if (head == "Next" && toks.size() > 1) {
      for (std::size_t i = 1; i < toks.size(); ++i)
        if (toks[i].kind == TokKind::Ident) return toks[i].text == "Obligation";
    }
    if ((head == "Definition" || head == "Example") &&
        top_level_symbol(toks, ":=") == std::string_view::npos)
      return true;
    return false;
  }

  std::vector<Block> group_range(std::size_t& i, std::size_t end, bool& unbalanced) const {
    std::vector<Block> out;
    while (i < end) {
      const Sentence& s = sentences_[i];
      switch (s.kind) {
        case SentenceKind::ScopeOpener: {
          Block b;
          b.kind = BlockKind::Scope;
          b.first = i;
          b.name = scope_name(s);
          std::size_t self = i;
          ++i;
          b.children = group_range(i, end, unbalanced);
          if (i < end && sentences_[i].kind == SentenceKind::ScopeCloser) {
            b.last = i;
            ++i;
          } else {
            b.last = (i > self) ? i - 1 : self;  // unclosed at end of input
          }
          out.push_back(std::move(b));
          break;
        }
        case SentenceKind::ScopeCloser:
          return out;  // caller owns the closer (or it is orphaned below)
        default: {
          if (is_proof_opening(i)) {
            Block b;
            b.kind = BlockKind::ProofBlock;
            b.first = i;
            b.name = defined_name(s);
            std::size_t j = i + 1;
            while (j < end) {
              SentenceKind k = sentences_[j].kind;
              if (k == SentenceKind::ProofCloser) {
                ++j;
                break;
              }
              if (k == SentenceKind::ScopeOpener || k == SentenceKind::ScopeCloser ||
                  is_proof_opening(j))
                break;
              ++j;
            }
            b.last = j - 1;
            i = j;
            out.push_back(std::move(b));
          } else {
            Block b;
            b.first = b.last = i;
            auto head = head_ident(s.tokens);
            if (head && detail::is_definition_head(head->text)) {
              b.kind = BlockKind::Definition;
              b.name = defined_name(s);
            } else {
              b.kind = BlockKind::Loose;
            }
            ++i;
            out.push_back(std::move(b));
          }
          break;
        }
      }
    }
    return out;
  }

  bool is_proof_opening(std::size_t idx) const {
    const Sentence& s = sentences_[idx];
    if (s.kind != SentenceKind::Command) return false;
    auto head = head_ident(s.tokens);
    return head && opens_proof(s.tokens, head->text);
  }

  static std::string scope_name(const Sentence& s) {
    // Module [Export|Import|Type] <name> / Section <name>
    bool first = true;
    for (const auto& t : s.tokens) {
      if (t.kind != TokKind::Ident) continue;
      if (first) {
        first = false;
        continue;
      }
      if (t.text == "Export" || t.text == "Import" || t.text == "Type") continue;
      return t.text;
    }
    return "";
  }

  static std::string defined_name(const Sentence& s) {
    auto head = head_ident(s.tokens);
    if (!head) return "";
    bool skip_next_keyword = (head->text == "Program" || head->text == "Next");
    bool seen_head = false;
    for (const auto& t : s.tokens) {
      if (t.kind != TokKind::Ident) continue;
      if (!seen_head) {
        seen_head = true;
        continue;
      }
      if (skip_next_keyword &&
          (t.text == "Definition" || t.text == "Fixpoint" || t.text == "Obligation")) {
        skip_next_keyword = false;
        continue;
      }
      return t.text;
    }
    return "";
  }

  std::vector<Sentence> sentences_;
  std::string trailing_;
  bool pristine_ = false;
  mutable bool unbalanced_ = false;
};

struct ParseResult {
  std::optional<Document> doc;
  std::optional<SplitError> error;
};

inline ParseResult Document::parse(std::string_view src) {
  Document d;
  std::size_t i = 0;
  while (i < src.size()) {
    std::size_t gap_start = i;
    while (i < src.size() && is_space(src[i])) ++i;
    if (i >= src.size()) {
      d.trailing_ = std::string(src.substr(gap_start));
      break;
    }
    std::size_t start = i;
    std::size_t end = std::string_view::npos;
    while (i < src.size()) {
      char c = src[i];
      if (c == '(' && i + 1 < src.size() && src[i + 1] == '*') {
        std::size_t j = skip_comment(src, i);
        if (j == std::string_view::npos)
          return {std::nullopt, SplitError{SplitError::UnterminatedComment, i}};
        i = j;
        continue;
      }
      if (c == '"') {
        std::size_t j = skip_string(src, i);
        if (j == std::string_view::npos)
          return {std::nullopt, SplitError{SplitError::UnterminatedString, i}};
        i = j;
        continue;
      }
      if (c == '.' && (i + 1 >= src.size() || is_space(src[i + 1]))) {
        end = i + 1;
        i = end;
        break;
      }
      ++i;
    }
    if (end == std::string_view::npos) end = src.size();  // unterminated tail
    Sentence s;
    s.leading = std::string(src.substr(gap_start, start - gap_start));
    s.text = std::string(src.substr(start, end - start));
    s.begin = start;
    s.end = end;
    d.sentences_.push_back(std::move(s));
  }
  d.pristine_ = true;
  d.classify();
  return {std::move(d), std::nullopt};
}

inline void Document::replace_with_text(std::size_t first, std::size_t last,
                                        std::string_view text) {
  auto parsed = parse(text);
  std::vector<Sentence> repl =
      parsed.doc ? parsed.doc->sentences_ : std::vector<Sentence>{};
  sentences_.erase(sentences_.begin() + first, sentences_.begin() + last + 1);
  sentences_.insert(sentences_.begin() + first, repl.begin(), repl.end());
  touch();
}

inline void Document::insert_text(std::size_t pos, std::string_view text) {
  auto parsed = parse(text);
  if (!parsed.doc) return;
  auto& repl = parsed.doc->sentences_;
  sentences_.insert(sentences_.begin() + pos, repl.begin(), repl.end());
  touch();
}

/// All identifiers a sentence head declares or binds: tokens before the
/// first top-level ':' or ':=', excluding anything following a ':' inside a
/// binder group (those are types, not names). Used by the
/// unused-definition scan, so over-inclusion only costs effectiveness.
inline std::vector<std::string> declared_names(const Sentence& s) {
  std::vector<std::string> names;
  auto head = head_ident(s.tokens);
  if (!head) return names;
  std::size_t stop = top_level_symbol(s.tokens, ":");
  std::size_t stop2 = top_level_symbol(s.tokens, ":=");
  if (stop == std::string_view::npos || (stop2 != std::string_view::npos && stop2 < stop))
    stop = stop2;
  if (stop == std::string_view::npos) stop = s.tokens.size();
  bool seen_head = false;
  bool skip_next_keyword = (head->text == "Program" || head->text == "Next");
  std::vector<bool> colon_seen{false};  // per bracket depth
  for (std::size_t i = 0; i < stop; ++i) {
    const auto& t = s.tokens[i];
    if (t.kind == TokKind::Symbol) {
      if (t.text == "(" || t.text == "[" || t.text == "{")
        colon_seen.push_back(false);
      else if ((t.text == ")" || t.text == "]" || t.text == "}") && colon_seen.size() > 1)
        colon_seen.pop_back();
      else if (t.text == ":")
        colon_seen.back() = true;
      continue;
    }
    if (t.kind != TokKind::Ident) continue;
    if (!seen_head) {
      seen_head = true;
      continue;
    }
    if (skip_next_keyword &&
        (t.text == "Definition" || t.text == "Fixpoint" || t.text == "Obligation")) {
      skip_next_keyword = false;
      continue;
    }
    bool in_type = false;
    for (bool b : colon_seen) in_type = in_type || b;
    if (!in_type) names.push_back(t.text);
  }
  return names;
}

}  // namespace vermin
