#pragma once

// Pass library and the resumable scheduler driving it.
//
// A pass enumerates candidate edits of the current document over descending
// anchors, with a small variant index (sub) per anchor. The scheduler owns a
// cursor into that space: a rejected candidate bumps sub, an accepted one
// moves strictly past the anchor. Anchors descend, so an accepted edit never
// shifts the positions still ahead of the cursor; the cursor plus the
// current document pins the exact resume point after an interruption.
//
// Passes repeat in sweeps until a sweep accepts nothing (capped), phases
// group passes by intent, and the phase cycle repeats while progress is
// made. Dependency inlining stays inert until a full block-removal pass has
// completed once, so dependencies are inlined into an already shrunk file;
// --inline-all-first waives that order via a dedicated leading phase.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <climits>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vermin/inliner.hpp"
#include "vermin/oracle.hpp"
#include "vermin/sentence.hpp"

namespace vermin {

struct LedgerEntry {
  std::string phase;
  std::string pass;
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  std::size_t sentences_before = 0;
  std::size_t sentences_after = 0;
  std::size_t lines_before = 0;
  std::size_t lines_after = 0;
};

/// State that survives checkpoints but is not part of the cursor.
struct MinimizationState {
  bool removal_sweep_done = false;  // one full block-removal execution finished
  bool inline_all_first = false;
  std::vector<std::string> failed_inlines;  // deps still required after all variants
  std::size_t inlined_lines_total = 0;      // dependency lines pulled into the doc
  std::vector<LedgerEntry> ledger;

  void record_failed_inline(const std::string& logical) {
    for (const auto& f : failed_inlines)
      if (f == logical) return;
    failed_inlines.push_back(logical);
  }

  std::size_t removed_lines() const {
    std::size_t n = 0;
    for (const auto& e : ledger)
      if (e.lines_before > e.lines_after) n += e.lines_before - e.lines_after;
    return n;
  }
};

struct PassCursor {
  long long anchor = LLONG_MAX;
  int sub = 0;
};

struct PassContext {
  const Document& doc;
  MinimizationState& state;
  DepResolver* deps = nullptr;
  std::optional<std::size_t> error_sentence;
  std::size_t protect_first = 1;  // inclusive protected range; empty when first > last
  std::size_t protect_last = 0;

  bool protects(std::size_t i) const {
    return protect_first <= protect_last && i >= protect_first && i <= protect_last;
  }
  bool touches_error(std::size_t first, std::size_t last) const {
    return error_sentence && *error_sentence >= first && *error_sentence <= last;
  }
};

struct Candidate {
  Document doc;
  std::string description;
  std::size_t inlined_lines = 0;  // dependency lines added when this is an inline
};

class Pass {
 public:
  virtual ~Pass() = default;
  virtual std::string name() const = 0;
  virtual std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) = 0;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace((unsigned char)s[b])) ++b;
  while (e > b && std::isspace((unsigned char)s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Shared iteration skeleton: units sorted by strictly descending anchor,
/// `variants(unit)` subs each, `build(unit, sub)` producing the candidate.
template <typename Unit, typename VariantsFn, typename BuildFn>
std::optional<Candidate> scan_units(const std::vector<std::pair<long long, Unit>>& units,
                                    PassCursor& cur, VariantsFn variants, BuildFn build) {
  for (const auto& [anchor, unit] : units) {
    if (anchor > cur.anchor) continue;
    int sub = (anchor == cur.anchor) ? cur.sub : 0;
    int n = variants(unit);
    for (; sub < n; ++sub) {
      if (auto cand = build(unit, sub)) {
        cur.anchor = anchor;
        cur.sub = sub;
        return cand;
      }
    }
  }
  return std::nullopt;
}

/// Byte offset just before the sentence terminator, for slicing out a body.
inline std::size_t terminator_begin(const Sentence& s) {
  if (!s.tokens.empty() && s.tokens.back().kind == TokKind::Symbol &&
      s.tokens.back().text == ".")
    return s.tokens.back().begin;
  return s.text.size();
}

/// Dotted names of an Import/Export sentence, adjacency-joined like
/// require_refs does for Require.
inline std::vector<std::string> import_names(const Sentence& s) {
  std::vector<std::string> out;
  std::size_t k = 0;
  while (k < s.tokens.size() && s.tokens[k].kind != TokKind::Ident) ++k;
  ++k;  // past Import/Export
  while (k < s.tokens.size()) {
    if (s.tokens[k].kind != TokKind::Ident) {
      ++k;
      continue;
    }
    std::string name = s.tokens[k].text;
    while (k + 2 < s.tokens.size() && s.tokens[k + 1].kind == TokKind::Symbol &&
           s.tokens[k + 1].text == "." && s.tokens[k + 1].begin == s.tokens[k].end &&
           s.tokens[k + 2].kind == TokKind::Ident &&
           s.tokens[k + 2].begin == s.tokens[k + 1].end) {
      name += "." + s.tokens[k + 2].text;
      k += 2;
    }
    out.push_back(std::move(name));
    ++k;
  }
  return out;
}

inline std::size_t file_line_count(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace detail

/// Drop every sentence after the erroring one (after the erroring proof
/// script when it is protected).
class TruncateAfterError : public Pass {
 public:
  std::string name() const override { return "truncate-after-error"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    if (!ctx.error_sentence) return std::nullopt;
    std::size_t cut = *ctx.error_sentence;
    if (ctx.protect_first <= ctx.protect_last && ctx.protect_last > cut)
      cut = ctx.protect_last;
    if (cut + 1 >= ctx.doc.size()) return std::nullopt;
    std::vector<std::pair<long long, std::size_t>> units{{(long long)cut, cut}};
    return detail::scan_units(
        units, cur, [](std::size_t) { return 1; },
        [&](std::size_t at, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.erase(at + 1, c.doc.size() - 1);
          c.description = "truncate after sentence " + std::to_string(at);
          return c;
        });
  }
};

/// Remove definition and proof blocks whose declared names are referenced
/// nowhere outside the block.
class RemoveUnusedDefinitions : public Pass {
 public:
  std::string name() const override { return "remove-unused-definitions"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, Block>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::Definition && b.kind != BlockKind::ProofBlock) continue;
      if (ctx.touches_error(b.first, b.last)) continue;
      auto names = declared_names(ctx.doc.sentences()[b.first]);
      if (names.empty()) continue;
      if (used_outside(ctx.doc, b, names)) continue;
      units.emplace_back((long long)b.first, b);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const Block&) { return 1; },
        [&](const Block& b, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.erase(b.first, b.last);
          c.description = "remove unused " + (b.name.empty() ? "block" : b.name);
          return c;
        });
  }

 private:
  static bool used_outside(const Document& doc, const Block& b,
                           const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i >= b.first && i <= b.last) continue;
      for (const auto& t : doc.sentences()[i].tokens) {
        if (t.kind != TokKind::Ident && t.kind != TokKind::PatternVar) continue;
        for (const auto& n : names)
          if (t.text == n) return true;
      }
    }
    return false;
  }
};

/// Replace obligation proof scripts with a blanket Admit Obligations.
class AdmitObligations : public Pass {
 public:
  std::string name() const override { return "admit-obligations"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, Block>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::ProofBlock) continue;
      if (ctx.touches_error(b.first, b.last)) continue;
      auto head = head_ident(ctx.doc.sentences()[b.first].tokens);
      if (!head || (head->text != "Obligation" && head->text != "Next")) continue;
      units.emplace_back((long long)b.first, b);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const Block&) { return 1; },
        [&](const Block& b, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.replace_with_text(b.first, b.last, "Admit Obligations.");
          c.description = "admit obligations at sentence " + std::to_string(b.first);
          return c;
        });
  }
};

/// Replace whole proof scripts: sub 0 keeps the statement and closes it with
/// Admitted, sub 1 swaps the statement for an axiom plus a transparent
/// definition through it.
class AdmitProofs : public Pass {
 public:
  std::string name() const override { return "admit-proofs"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, Block>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::ProofBlock) continue;
      if (ctx.touches_error(b.first, b.last)) continue;
      auto head = head_ident(ctx.doc.sentences()[b.first].tokens);
      if (!head || head->text == "Obligation" || head->text == "Next") continue;
      units.emplace_back((long long)b.first, b);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const Block&) { return 2; },
        [&](const Block& b, int sub) -> std::optional<Candidate> {
          return sub == 0 ? opaque(ctx, b) : transparent(ctx, b);
        });
  }

 private:
  static bool already_admitted(const PassContext& ctx, const Block& b) {
    const Sentence& last = ctx.doc.sentences()[b.last];
    auto head = head_ident(last.tokens);
    return b.last == b.first + 1 && last.kind == SentenceKind::ProofCloser && head &&
           head->text == "Admitted";
  }

  static std::optional<Candidate> opaque(PassContext& ctx, const Block& b) {
    if (already_admitted(ctx, b)) return std::nullopt;
    Candidate c;
    c.doc = ctx.doc;
    std::string text = ctx.doc.sentences()[b.first].text;
    c.doc.replace_with_text(b.first, b.last, text + "\nAdmitted.");
    c.description = "admit " + (b.name.empty() ? "proof" : b.name);
    return c;
  }

  static std::optional<Candidate> transparent(PassContext& ctx, const Block& b) {
    if (b.name.empty()) return std::nullopt;
    const Sentence& s = ctx.doc.sentences()[b.first];
    std::size_t colon = top_level_symbol(s.tokens, ":");
    if (colon == std::string_view::npos) return std::nullopt;
    std::size_t from = s.tokens[colon].end;
    std::string type = detail::trim_copy(
        std::string_view(s.text).substr(from, detail::terminator_begin(s) - from));
    if (type.empty()) return std::nullopt;
    Candidate c;
    c.doc = ctx.doc;
    c.doc.replace_with_text(b.first, b.last,
                            "Axiom " + b.name + "_admitted : " + type + ".\n" +
                                "Definition " + b.name + " := " + b.name + "_admitted.");
    c.description = "axiomatize " + b.name;
    return c;
  }
};

/// Replace one abstract subterm of a proof step with admit, downgrading the
/// script's closer to Admitted.
class AdmitAbstractSubproofs : public Pass {
 public:
  std::string name() const override { return "admit-abstract-subproofs"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, std::size_t>> units;
    for (std::size_t i = 0; i < ctx.doc.size(); ++i) {
      const Sentence& s = ctx.doc.sentences()[i];
      if (s.kind != SentenceKind::ProofStep || ctx.protects(i)) continue;
      if (occurrences(s) > 0) units.emplace_back((long long)i, i);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur,
        [&](std::size_t i) { return (int)occurrences(ctx.doc.sentences()[i]); },
        [&](std::size_t i, int sub) { return build(ctx, i, sub); });
  }

 private:
  static std::size_t occurrences(const Sentence& s) {
    std::size_t n = 0;
    for (const auto& t : s.tokens)
      if (t.kind == TokKind::Ident && t.text == "abstract") ++n;
    return n;
  }

  static std::optional<Candidate> build(PassContext& ctx, std::size_t idx, int occ) {
    const Sentence& s = ctx.doc.sentences()[idx];
    std::size_t at = s.tokens.size();
    int seen = 0;
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      if (s.tokens[k].kind == TokKind::Ident && s.tokens[k].text == "abstract" &&
          seen++ == occ) {
        at = k;
        break;
      }
    }
    if (at >= s.tokens.size()) return std::nullopt;
    std::size_t span_begin = s.tokens[at].begin;
    std::size_t span_end = detail::terminator_begin(s);
    if (at + 1 < s.tokens.size() && s.tokens[at + 1].kind == TokKind::Symbol &&
        s.tokens[at + 1].text == "(") {
      int depth = 0;
      for (std::size_t k = at + 1; k < s.tokens.size(); ++k) {
        if (s.tokens[k].kind != TokKind::Symbol) continue;
        if (s.tokens[k].text == "(") ++depth;
        if (s.tokens[k].text == ")" && --depth == 0) {
          span_end = s.tokens[k].end;
          break;
        }
      }
    } else {
      // Unparenthesized argument: swallow up to the next same-level
      // semicolon or the terminator.
      int depth = 0;
      for (std::size_t k = at + 1; k < s.tokens.size(); ++k) {
        const auto& t = s.tokens[k];
        if (t.kind != TokKind::Symbol) continue;
        if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
        if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
        if (depth == 0 && (t.text == ";" || t.text == ".")) {
          span_end = t.begin;
          break;
        }
      }
    }
    Candidate c;
    c.doc = ctx.doc;
    c.doc.set_sentence_text(idx, s.text.substr(0, span_begin) + "admit" +
                                     s.text.substr(span_end));
    // The proof is now incomplete; a strict closer must become Admitted.
    std::size_t best_span = SIZE_MAX;
    std::optional<std::size_t> closer;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::ProofBlock || idx < b.first || idx > b.last) continue;
      if (b.last - b.first >= best_span) continue;
      best_span = b.last - b.first;
      const Sentence& last = ctx.doc.sentences()[b.last];
      auto head = head_ident(last.tokens);
      if (last.kind == SentenceKind::ProofCloser && head &&
          (head->text == "Qed" || head->text == "Defined" || head->text == "Save"))
        closer = b.last;
      else
        closer = std::nullopt;
    }
    if (closer) c.doc.set_sentence_text(*closer, "Admitted.");
    c.description = "admit abstract subproof in sentence " + std::to_string(idx);
    return c;
  }
};

/// Turn plain Module openers into Module Export so inner names stay visible
/// when surrounding structure is simplified.
class ExportModules : public Pass {
 public:
  std::string name() const override { return "export-modules"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, std::pair<std::size_t, std::string>>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::Scope) continue;
      const Sentence& s = ctx.doc.sentences()[b.first];
      if (ctx.protects(b.first)) continue;
      if (s.tokens.size() != 3) continue;
      if (s.tokens[0].kind != TokKind::Ident || s.tokens[0].text != "Module") continue;
      if (s.tokens[1].kind != TokKind::Ident) continue;
      units.emplace_back((long long)b.first,
                         std::make_pair(b.first, s.tokens[1].text));
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const auto&) { return 1; },
        [&](const auto& u, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.set_sentence_text(u.first, "Module Export " + u.second + ".");
          c.description = "export module " + u.second;
          return c;
        });
  }
};

/// Split multi-name Import/Export sentences into singletons.
class SplitImports : public Pass {
 public:
  std::string name() const override { return "split-imports"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, std::size_t>> units;
    for (std::size_t i = 0; i < ctx.doc.size(); ++i) {
      const Sentence& s = ctx.doc.sentences()[i];
      if (s.kind != SentenceKind::ImportLike || ctx.protects(i)) continue;
      if (detail::import_names(s).size() >= 2) units.emplace_back((long long)i, i);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](std::size_t) { return 1; },
        [&](std::size_t i, int) -> std::optional<Candidate> {
          const Sentence& s = ctx.doc.sentences()[i];
          auto head = head_ident(s.tokens);
          if (!head) return std::nullopt;
          std::string out;
          for (const auto& n : detail::import_names(s)) {
            if (!out.empty()) out += '\n';
            out += head->text + " " + n + ".";
          }
          Candidate c;
          c.doc = ctx.doc;
          c.doc.replace_with_text(i, i, out);
          c.description = "split imports at sentence " + std::to_string(i);
          return c;
        });
  }
};

/// Split multi-name Require sentences into singletons, keeping the modifier.
class SplitRequires : public Pass {
 public:
  std::string name() const override { return "split-requires"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::map<std::size_t, std::vector<RequireRef>> by_sentence;
    for (const auto& ref : require_refs(ctx.doc)) by_sentence[ref.sentence].push_back(ref);
    std::vector<std::pair<long long, std::size_t>> units;
    for (const auto& [i, refs] : by_sentence)
      if (refs.size() >= 2 && !ctx.protects(i)) units.emplace_back((long long)i, i);
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](std::size_t) { return 1; },
        [&](std::size_t i, int) -> std::optional<Candidate> {
          std::string out;
          for (const auto& ref : by_sentence[i]) {
            if (!out.empty()) out += '\n';
            out += "Require ";
            if (ref.mod == RequireRef::Import) out += "Import ";
            if (ref.mod == RequireRef::Export) out += "Export ";
            out += ref.short_name + ".";
          }
          Candidate c;
          c.doc = ctx.doc;
          c.doc.replace_with_text(i, i, out);
          c.description = "split requires at sentence " + std::to_string(i);
          return c;
        });
  }
};

/// Add direct Require sentences for transitively reached dependencies so
/// later passes see every dependency at top level.
class InsertTransitiveRequires : public Pass {
 public:
  std::string name() const override { return "insert-transitive-requires"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    if (!ctx.deps) return std::nullopt;
    std::string text = ctx.doc.render();
    auto graph = discover_deps(*ctx.deps, text);
    if (graph.topo.empty()) return std::nullopt;
    auto direct = qualified_requires(ctx.doc, ctx.deps->names_for_text(text),
                                     ctx.deps->file_table());
    long long n = (long long)graph.topo.size();
    std::vector<std::pair<long long, std::string>> units;
    // Dependencies first: descending anchors map to ascending topo order.
    for (long long k = n - 1; k >= 0; --k) {
      const std::string& logical = graph.topo[k];
      if (!direct.count(logical)) units.emplace_back(n - 1 - k, logical);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const std::string&) { return 1; },
        [&](const std::string& logical, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.insert_text(require_insert_pos(ctx.doc), "Require " + logical + ".");
          c.description = "require " + logical + " directly";
          return c;
        });
  }
};

/// Inline one dependency whose only in-graph consumer is the document
/// itself: sub 0 puts the wrapper at the first Require site, sub 1 at the
/// top. Deps still required after both variants are recorded as failed.
class InlineDeps : public Pass {
 public:
  std::string name() const override { return "inline-deps"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    if (!ctx.deps) return std::nullopt;
    if (!ctx.state.removal_sweep_done && !ctx.state.inline_all_first)
      return std::nullopt;
    std::string text = ctx.doc.render();
    auto graph = discover_deps(*ctx.deps, text);
    if (graph.topo.empty()) return std::nullopt;
    const auto& names = ctx.deps->names_for_text(text);
    auto direct = qualified_requires(ctx.doc, names, ctx.deps->file_table());

    // Dependents before dependencies: reverse topological order.
    for (long long a = (long long)graph.topo.size() - 1; a >= 0; --a) {
      if (a > cur.anchor) continue;
      const std::string& logical = graph.topo[a];
      if (!direct.count(logical)) continue;
      int sub = (a == cur.anchor) ? cur.sub : 0;
      if (sub >= 2) {
        // Both variants were rejected and the dependency is still required.
        ctx.state.record_failed_inline(logical);
        continue;
      }
      if (required_by_other(graph, direct, logical)) continue;
      auto path = ctx.deps->file_for(logical);
      if (!path) continue;
      for (; sub < 2; ++sub) {
        bool at_top = sub == 1;
        auto doc = build_inline_candidate(ctx.doc, logical, *path, names, at_top);
        if (!doc) continue;
        Candidate c;
        c.doc = std::move(*doc);
        c.inlined_lines = detail::file_line_count(*path);
        c.description =
            "inline " + logical + (at_top ? " at top" : " at require site");
        cur.anchor = a;
        cur.sub = sub;
        return c;
      }
      ctx.state.record_failed_inline(logical);
    }
    return std::nullopt;
  }

 private:
  static bool required_by_other(const DepGraph& graph, const std::set<std::string>& direct,
                                const std::string& logical) {
    for (const auto& other : direct) {
      if (other == logical) continue;
      auto it = graph.nodes.find(other);
      if (it == graph.nodes.end()) continue;
      for (const auto& d : it->second.deps)
        if (d == logical) return true;
    }
    return false;
  }
};

/// Remove whole blocks, last first.
class RemoveBlocksBackward : public Pass {
 public:
  std::string name() const override { return "remove-blocks"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, Block>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (ctx.touches_error(b.first, b.last)) continue;
      units.emplace_back((long long)b.first, b);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const Block&) { return 1; },
        [&](const Block& b, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.erase(b.first, b.last);
          c.description = "remove sentences " + std::to_string(b.first) + ".." +
                          std::to_string(b.last) +
                          (b.name.empty() ? "" : " (" + b.name + ")");
          return c;
        });
  }
};

/// Remove closed scopes with nothing but blank sentences inside.
class RemoveEmptyScopes : public Pass {
 public:
  std::string name() const override { return "remove-empty-scopes"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, Block>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::Scope) continue;
      if (ctx.touches_error(b.first, b.last)) continue;
      if (ctx.doc.sentences()[b.last].kind != SentenceKind::ScopeCloser) continue;
      bool empty = true;
      for (std::size_t i = b.first + 1; i < b.last && empty; ++i)
        empty = ctx.doc.sentences()[i].kind == SentenceKind::Blank;
      if (!empty) continue;
      units.emplace_back((long long)b.first, b);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](const Block&) { return 1; },
        [&](const Block& b, int) -> std::optional<Candidate> {
          Candidate c;
          c.doc = ctx.doc;
          c.doc.erase(b.first, b.last);
          c.description = "remove empty scope " + (b.name.empty() ? "" : b.name);
          return c;
        });
  }
};

/// Rewrite one-sentence definitions into statement plus explicit proof so
/// the body becomes separately removable.
class SplitDefinitions : public Pass {
 public:
  std::string name() const override { return "split-definitions"; }

  std::optional<Candidate> next(PassContext& ctx, PassCursor& cur) override {
    std::vector<std::pair<long long, std::size_t>> units;
    for (const auto& b : ctx.doc.flat_blocks()) {
      if (b.kind != BlockKind::Definition || b.first != b.last) continue;
      if (ctx.protects(b.first)) continue;
      const Sentence& s = ctx.doc.sentences()[b.first];
      auto head = head_ident(s.tokens);
      if (!head || (head->text != "Definition" && head->text != "Example")) continue;
      if (top_level_symbol(s.tokens, ":=") == std::string_view::npos) continue;
      units.emplace_back((long long)b.first, b.first);
    }
    std::sort(units.begin(), units.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return detail::scan_units(
        units, cur, [](std::size_t) { return 1; },
        [&](std::size_t i, int) -> std::optional<Candidate> {
          const Sentence& s = ctx.doc.sentences()[i];
          std::size_t assign = top_level_symbol(s.tokens, ":=");
          std::string prefix = detail::trim_copy(s.text.substr(0, s.tokens[assign].begin));
          std::size_t from = s.tokens[assign].end;
          std::string body = detail::trim_copy(
              std::string_view(s.text).substr(from, detail::terminator_begin(s) - from));
          if (prefix.empty() || body.empty()) return std::nullopt;
          Candidate c;
          c.doc = ctx.doc;
          c.doc.replace_with_text(i, i, prefix + ".\nProof.\nexact (" + body +
                                            ").\nDefined.");
          c.description = "split definition at sentence " + std::to_string(i);
          return c;
        });
  }
};

/// Everything the scheduler needs to persist across interruptions besides
/// the state block: position in phase/pass/sweep space and the open ledger
/// entry for the in-flight pass execution.
struct SchedulerCursor {
  int cycle = 0;
  int phase = 0;
  int pass = 0;
  int sweep = 0;
  PassCursor pc;
  bool sweep_accepted = false;
  bool cycle_accepted = false;
  bool unlocked = false;  // inline gate opened during this cycle
  bool entry_open = false;
  std::size_t entry_candidates = 0;
  std::size_t entry_accepted = 0;
  std::size_t entry_sentences_before = 0;
  std::size_t entry_lines_before = 0;
};

struct MinimizationRun {
  Document doc;
  RawError error;  // latest accepted error, locations valid in doc.render()
  SchedulerCursor cursor;
  MinimizationState state;
};

struct SchedulerOptions {
  bool inline_all_first = false;
  bool preserve_error_script = false;
  double wall_budget = 0.0;            // seconds for this invocation, 0 unlimited
  std::size_t stop_after_accepts = 0;  // interrupt knob for checkpoint testing
  int max_sweeps = 10;
  int max_cycles = 25;
};

enum class RunStatus { Converged, BudgetExhausted, AcceptLimit };

class Scheduler {
 public:
  using CheckpointFn = std::function<void(const MinimizationRun&)>;
  using EventFn = std::function<void(const std::string&)>;

  Scheduler(Oracle& oracle, DepResolver* deps, SchedulerOptions opts)
      : oracle_(oracle), deps_(deps), opts_(opts) {
    if (opts_.inline_all_first) add_phase("pre-inline", pre_phase());
    add_phase("speed-critical", speed_phase());
    add_phase("structural", structural_phase());
    add_phase("cosmetic", cosmetic_phase());
  }

  void on_checkpoint(CheckpointFn fn) { checkpoint_ = std::move(fn); }
  void on_event(EventFn fn) { event_ = std::move(fn); }

  RunStatus run(MinimizationRun& run) {
    start_ = std::chrono::steady_clock::now();
    accepts_ = 0;
    run.state.inline_all_first = opts_.inline_all_first;
    auto& cur = run.cursor;
    for (;;) {
      if (cur.cycle >= opts_.max_cycles) return RunStatus::Converged;
      if (cur.phase >= (int)phases_.size()) {
        if (!cur.cycle_accepted && !cur.unlocked) return RunStatus::Converged;
        ++cur.cycle;
        cur.cycle_accepted = false;
        cur.unlocked = false;
        cur.phase = opts_.inline_all_first ? 1 : 0;  // the pre phase runs once
        cur.pass = 0;
        continue;
      }
      if (cur.pass >= (int)phases_[cur.phase].size()) {
        ++cur.phase;
        cur.pass = 0;
        continue;
      }
      if (auto stop = run_pass(run, *phases_[cur.phase][cur.pass])) return *stop;
    }
  }

 private:
  using PassList = std::vector<std::unique_ptr<Pass>>;

  static PassList pre_phase() {
    PassList l;
    l.push_back(std::make_unique<InsertTransitiveRequires>());
    l.push_back(std::make_unique<InlineDeps>());
    return l;
  }
  static PassList speed_phase() {
    PassList l;
    l.push_back(std::make_unique<TruncateAfterError>());
    l.push_back(std::make_unique<RemoveUnusedDefinitions>());
    l.push_back(std::make_unique<AdmitObligations>());
    l.push_back(std::make_unique<AdmitProofs>());
    l.push_back(std::make_unique<AdmitAbstractSubproofs>());
    return l;
  }
  static PassList structural_phase() {
    PassList l;
    l.push_back(std::make_unique<ExportModules>());
    l.push_back(std::make_unique<SplitImports>());
    l.push_back(std::make_unique<SplitRequires>());
    l.push_back(std::make_unique<InsertTransitiveRequires>());
    l.push_back(std::make_unique<InlineDeps>());
    l.push_back(std::make_unique<RemoveBlocksBackward>());
    l.push_back(std::make_unique<RemoveEmptyScopes>());
    return l;
  }
  static PassList cosmetic_phase() {
    PassList l;
    l.push_back(std::make_unique<SplitDefinitions>());
    l.push_back(std::make_unique<RemoveBlocksBackward>());
    return l;
  }

  void add_phase(std::string name, PassList passes) {
    phase_names_.push_back(std::move(name));
    phases_.push_back(std::move(passes));
  }

  PassContext make_context(MinimizationRun& run) {
    PassContext ctx{run.doc, run.state, deps_, std::nullopt, 1, 0};
    auto es = run.doc.sentence_at_line(run.error.line);
    ctx.error_sentence = es;
    if (es) {
      std::size_t pf = *es, pl = *es;
      if (opts_.preserve_error_script) {
        std::size_t best = SIZE_MAX;
        for (const auto& b : run.doc.flat_blocks()) {
          if (b.first <= *es && *es <= b.last && b.last - b.first < best) {
            best = b.last - b.first;
            pf = b.first;
            pl = b.last;
          }
        }
      }
      ctx.protect_first = pf;
      ctx.protect_last = pl;
    }
    return ctx;
  }

  std::optional<RunStatus> run_pass(MinimizationRun& run, Pass& pass) {
    auto& cur = run.cursor;
    if (!cur.entry_open) {
      cur.entry_open = true;
      cur.entry_candidates = 0;
      cur.entry_accepted = 0;
      cur.entry_sentences_before = run.doc.size();
      cur.entry_lines_before = run.doc.line_count();
    }
    for (;;) {
      PassContext ctx = make_context(run);
      auto cand = pass.next(ctx, cur.pc);
      if (!cand) {
        if (cur.sweep_accepted) {
          if (cur.sweep + 1 < opts_.max_sweeps) {
            ++cur.sweep;
            cur.sweep_accepted = false;
            cur.pc = PassCursor{};
            continue;
          }
          note("sweep cap (" + std::to_string(opts_.max_sweeps) + ") hit in " +
               pass.name() + "; moving on");
        }
        finish_pass(run, pass);
        return std::nullopt;
      }
      std::string render = cand->doc.render();
      if (render == run.doc.render()) {
        ++cur.pc.sub;  // identity edit: skip without consulting the oracle
        continue;
      }
      if (budget_exhausted()) return RunStatus::BudgetExhausted;
      ++cur.entry_candidates;
      auto res = oracle_.check(render);
      if (res.outcome == CheckOutcome::Interesting && res.error) {
        run.doc = std::move(cand->doc);
        run.error = *res.error;
        run.state.inlined_lines_total += cand->inlined_lines;
        ++cur.entry_accepted;
        cur.sweep_accepted = true;
        cur.cycle_accepted = true;
        cur.pc.sub = 0;
        --cur.pc.anchor;
        ++accepts_;
        note("accept [" + pass.name() + "] " + cand->description);
        if (checkpoint_) checkpoint_(run);
        if (opts_.stop_after_accepts && accepts_ >= opts_.stop_after_accepts)
          return RunStatus::AcceptLimit;
      } else {
        ++cur.pc.sub;
      }
    }
  }

  void finish_pass(MinimizationRun& run, Pass& pass) {
    auto& cur = run.cursor;
    if (cur.entry_candidates || cur.entry_accepted) {
      LedgerEntry e;
      e.phase = phase_names_[cur.phase];
      e.pass = pass.name();
      e.candidates = cur.entry_candidates;
      e.accepted = cur.entry_accepted;
      e.sentences_before = cur.entry_sentences_before;
      e.sentences_after = run.doc.size();
      e.lines_before = cur.entry_lines_before;
      e.lines_after = run.doc.line_count();
      run.state.ledger.push_back(std::move(e));
    }
    if (pass.name() == "remove-blocks" && !run.state.removal_sweep_done) {
      run.state.removal_sweep_done = true;
      cur.unlocked = true;
    }
    cur.entry_open = false;
    ++cur.pass;
    cur.sweep = 0;
    cur.sweep_accepted = false;
    cur.pc = PassCursor{};
  }

  bool budget_exhausted() const {
    if (opts_.wall_budget <= 0) return false;
    auto el =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return el >= opts_.wall_budget;
  }

  void note(const std::string& msg) {
    if (event_) event_(msg);
  }

  Oracle& oracle_;
  DepResolver* deps_;
  SchedulerOptions opts_;
  std::vector<std::string> phase_names_;
  std::vector<PassList> phases_;
  CheckpointFn checkpoint_;
  EventFn event_;
  std::chrono::steady_clock::time_point start_;
  std::size_t accepts_ = 0;
};

/// One line aggregating the ledger by pass in first-seen order, for the
/// output header.
inline std::string ledger_summary(const std::vector<LedgerEntry>& ledger) {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> agg;
  for (const auto& e : ledger) {
    auto it = std::find_if(agg.begin(), agg.end(),
                           [&](const auto& a) { return a.first == e.pass; });
    if (it == agg.end())
      agg.emplace_back(e.pass, std::make_pair(e.accepted, e.candidates));
    else {
      it->second.first += e.accepted;
      it->second.second += e.candidates;
    }
  }
  std::string out;
  for (const auto& [name, counts] : agg) {
    if (!out.empty()) out += "; ";
    out += name + ":" + std::to_string(counts.first) + "/" +
           std::to_string(counts.second);
  }
  return out.empty() ? "none" : out;
}

}  // namespace vermin
