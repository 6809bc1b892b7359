#pragma once

// Toy vernacular checker: a hermetic stand-in for a proof-assistant
// command-line compiler. It parses sentence-structured source, resolves
// references (definitions, tactics, modules, file dependencies) and reports
// compiler-style errors with File/line/characters headers. There is no term
// or tactic evaluation: "checking" is reference resolution plus a small
// amount of proof-state bookkeeping.
//
// Two versions are selectable at run time: under --version=fail the
// trigger_* commands (and tactics whose bodies mention them) raise errors;
// under --version=pass they are inert. Everything else behaves identically,
// which makes the pair usable as the failing/passing oracle legs.
//
// Deliberate toy semantics, relied upon elsewhere:
//   - open proofs and unclosed scopes at end of input are accepted, so a
//     file truncated right after its error still compiles;
//   - a Definition with neither body nor type is rejected, so splitting
//     "Definition x := b." into proof form is only viable when typed;
//   - "Global Set <flag>" applies globally only at file scope; inside any
//     module it is inert, so a dependency relying on it cannot be inlined
//     under a module wrapper ("Assert Flag <flag>" then fails);
//   - names under the standard-library prefix (default "Corelib") resolve
//     to empty virtual modules so fixtures need not ship a library.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vermin/lex.hpp"
#include "vermin/sentence.hpp"

namespace vermin::toy {

struct SearchPath {
  std::string flag;  // "-Q" or "-R" (identical semantics here)
  std::string dir;
  std::string prefix;  // logical prefix, may be empty
};

struct Options {
  std::vector<SearchPath> paths;
  std::vector<std::string> env_dirs;  // module search-path variable entries
  bool fail_version = false;
  std::string emit_names_path;
  std::string stdlib_prefix = "Corelib";
};

struct Result {
  int exit_code = 0;  // 0 ok, 1 check failure, 2 internal fault
  std::string log;
};

namespace detail {

struct Entity;

struct Binding {
  enum Kind { Term, Tactic, Module } kind = Term;
  Entity* entity = nullptr;
  std::vector<std::string> ltac_body;  // identifier/string stream of an Ltac body
};

struct Entity {
  std::string qualified;
  bool is_module_type = false;
  std::map<std::string, Binding> contents;
  std::vector<Entity*> reexports;
};

struct CheckError {
  std::string file;
  std::size_t line = 1;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;
  std::string message;  // including the leading "Error: "
};

inline const std::set<std::string>& keyword_set() {
  static const std::set<std::string> s = {
      "forall", "fun",  "let", "in",   "match",  "with", "end",   "if",
      "then",   "else", "as",  "return", "at",   "goal", "using", "by",
      "Prop",   "Set",  "Type"};
  return s;
}

inline const std::set<std::string>& builtin_terms() {
  static const std::set<std::string> s = {
      "S",    "O",    "nat",  "bool", "true", "false", "unit", "tt",
      "list", "nil",  "cons", "option", "Some", "None", "eq",  "eq_refl",
      "and",  "or",   "not",  "ex",   "prod", "pair",  "fst",  "snd",
      "sum",  "inl",  "inr",  "le",   "lt",   "plus",  "mult", "True",
      "False", "I"};
  return s;
}

inline const std::set<std::string>& builtin_tactics() {
  static const std::set<std::string> s = {
      "intros",     "intro",      "apply",     "exact",      "refine",
      "assumption", "auto",       "eauto",     "trivial",    "reflexivity",
      "symmetry",   "subst",      "simpl",     "cbn",        "cbv",
      "hnf",        "unfold",     "fold",      "rewrite",    "destruct",
      "induction",  "inversion",  "case",      "constructor", "split",
      "left",       "right",      "exists",    "idtac",      "fail",
      "try",        "repeat",     "progress",  "first",      "solve",
      "abstract",   "admit",      "clear",     "revert",     "generalize",
      "specialize", "pose",       "set",       "assert",     "cut",
      "enough",     "change",     "eval",      "lazymatch",  "multimatch",
      "now",        "congruence", "discriminate", "injection", "contradiction",
      "exfalso",    "tauto",      "firstorder", "lia",       "transitivity"};
  return s;
}

inline bool is_trigger(std::string_view n) {
  return n == "trigger_bug" || n == "trigger_universe" || n == "trigger_bugged_tactic" ||
         n == "trigger_numbered";
}

inline const std::set<std::string>& command_heads() {
  static const std::set<std::string> s = {
      "Require", "Import",  "Export",   "Module",   "Section", "End",
      "Proof",   "Qed",     "Defined",  "Admitted", "Abort",   "Save",
      "Definition", "Example", "Fixpoint", "CoFixpoint", "Ltac", "Axiom",
      "Parameter", "Variable", "Variables", "Hypothesis", "Context",
      "Lemma",   "Theorem", "Fact",     "Corollary", "Goal",   "Instance",
      "Program", "Obligation", "Next",  "Admit",    "Check",   "Global",
      "Assert",  "trigger_bug", "trigger_universe", "trigger_bugged_tactic",
      "trigger_numbered", "trigger_warning", "trigger_crash"};
  return s;
}

inline std::vector<std::string> split_components(std::string_view dotted) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    std::size_t dot = dotted.find('.', pos);
    if (dot == std::string_view::npos) {
      out.emplace_back(dotted.substr(pos));
      break;
    }
    out.emplace_back(dotted.substr(pos, dot - pos));
    pos = dot + 1;
  }
  return out;
}

inline bool is_component_suffix(const std::vector<std::string>& suffix,
                                const std::vector<std::string>& full) {
  if (suffix.size() > full.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i)
    if (full[full.size() - suffix.size() + i] != suffix[i]) return false;
  return true;
}

class Engine {
 public:
  explicit Engine(Options opts) : opts_(std::move(opts)) { build_file_table(); }

  Result run(const std::string& root_path) {
    Result res;
    try {
      load_unit(root_path, "", /*depth=*/0);
      res.exit_code = 0;
    } catch (const CheckError& e) {
      std::ostringstream os;
      os << "File \"" << e.file << "\", line " << e.line << ", characters "
         << e.char_begin << "-" << e.char_end << ":\n"
         << e.message << "\n";
      log_ += os.str();
      res.exit_code = 1;
    } catch (const std::exception&) {
      res.exit_code = 2;
    }
    if (!opts_.emit_names_path.empty()) write_sidecar();
    res.log = log_;
    return res;
  }

 private:
  // ---- scope & proof state -------------------------------------------------

  struct Scope {
    enum Kind { File, Module, ModuleType, Section } kind = File;
    std::string name;
    bool export_flag = false;
    Entity* entity = nullptr;
    std::map<std::string, Binding> extra;  // visibility from imports
  };

  struct ProofState {
    bool pending = false;
    std::string name;
    bool used_admit = false;
    std::set<std::string> intro_bound;
  };

  struct Unit {
    std::string file;
    std::string source;
    std::vector<std::size_t> line_starts;
    std::vector<Scope> scopes;
    ProofState proof;
    int programs_seen = 0;
    int depth = 0;
  };

  // ---- setup ---------------------------------------------------------------

  void build_file_table() {
    namespace fs = std::filesystem;
    auto add_root = [&](const std::string& dir, const std::string& prefix) {
      std::error_code ec;
      fs::path base(dir);
      if (!fs::is_directory(base, ec)) return;
      for (fs::recursive_directory_iterator it(base, ec), end; it != end && !ec;
           it.increment(ec)) {
        if (!it->is_regular_file(ec) || it->path().extension() != ".v") continue;
        fs::path rel = fs::relative(it->path(), base, ec);
        std::string logical;
        for (const auto& part : rel.parent_path()) {
          logical += part.string();
          logical += '.';
        }
        logical += rel.stem().string();
        if (!prefix.empty()) logical = prefix + "." + logical;
        file_table_.emplace(logical, it->path().string());
      }
    };
    for (const auto& p : opts_.paths) add_root(p.dir, p.prefix);
    for (const auto& d : opts_.env_dirs) add_root(d, "");
  }

  // ---- unit processing -----------------------------------------------------

  Entity* load_unit(const std::string& path, const std::string& logical, int depth) {
    Unit u;
    u.file = path;
    u.depth = depth;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw CheckError{path, 1, 0, 1,
                       "Error: Cannot open file " + path + "."};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    u.source = buf.str();
    u.line_starts.push_back(0);
    for (std::size_t i = 0; i < u.source.size(); ++i)
      if (u.source[i] == '\n') u.line_starts.push_back(i + 1);

    auto parsed = Document::parse(u.source);
    if (!parsed.doc) {
      auto err = *parsed.error;
      auto [line, col] = to_line_col(u, err.offset);
      const char* what = err.kind == SplitError::UnterminatedComment
                             ? "Error: Unterminated comment."
                             : "Error: Unterminated string.";
      throw CheckError{u.file, line, col, col + 1, what};
    }

    arena_.emplace_back();
    Entity* ent = &arena_.back();
    ent->qualified = logical.empty() ? path : logical;
    u.scopes.push_back(Scope{Scope::File, "", false, ent, {}});

    for (const auto& s : parsed.doc->sentences()) process_sentence(u, s);
    return ent;
  }

  std::pair<std::size_t, std::size_t> to_line_col(const Unit& u, std::size_t off) const {
    std::size_t lo = 0, hi = u.line_starts.size();
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u.line_starts[mid] <= off)
        lo = mid;
      else
        hi = mid;
    }
    return {lo + 1, off - u.line_starts[lo]};
  }

  [[noreturn]] void fail_at(const Unit& u, const Sentence& s, const Token* tok,
                            std::string message) const {
    std::size_t abs_b = s.begin, abs_e = s.end;
    if (tok) {
      abs_b = s.begin + tok->begin;
      abs_e = s.begin + tok->end;
    } else if (auto h = head_ident(s.tokens)) {
      abs_b = s.begin + h->begin;
      abs_e = s.begin + h->end;
    }
    auto [line, col] = to_line_col(u, abs_b);
    auto [eline, ecol] = to_line_col(u, abs_e);
    (void)eline;
    throw CheckError{u.file, line, col, ecol, std::move(message)};
  }

  // ---- name resolution -----------------------------------------------------

  static void collect_surface(Entity* e, std::map<std::string, Binding>& out,
                              std::set<const Entity*>& seen) {
    if (!e || seen.count(e)) return;
    seen.insert(e);
    for (const auto& [k, v] : e->contents) out.emplace(k, v);
    for (Entity* r : e->reexports) collect_surface(r, out, seen);
  }

  static void import_into(Scope& sc, Entity* e) {
    std::set<const Entity*> seen;
    std::map<std::string, Binding> surface;
    collect_surface(e, surface, seen);
    for (auto& [k, v] : surface) sc.extra[k] = v;
  }

  const Binding* lookup_unqualified(const Unit& u, const std::string& name) const {
    for (auto it = u.scopes.rbegin(); it != u.scopes.rend(); ++it) {
      auto c = it->entity->contents.find(name);
      if (c != it->entity->contents.end()) return &c->second;
      auto x = it->extra.find(name);
      if (x != it->extra.end()) return &x->second;
    }
    return nullptr;
  }

  /// Resolve a dotted module path: local modules shadow required roots;
  /// required roots match by exact name, then longest prefix, then unique
  /// component suffix.
  Entity* resolve_module_path(const Unit& u, const std::string& dotted) const {
    auto comps = split_components(dotted);
    if (comps.empty()) return nullptr;
    if (const Binding* b = lookup_unqualified(u, comps[0]);
        b && b->kind == Binding::Module) {
      Entity* e = b->entity;
      for (std::size_t i = 1; i < comps.size() && e; ++i) {
        auto it = e->contents.find(comps[i]);
        e = (it != e->contents.end() && it->second.kind == Binding::Module)
                ? it->second.entity
                : nullptr;
      }
      if (e) return e;
    }
    if (auto it = required_.find(dotted); it != required_.end()) return it->second;
    for (std::size_t cut = comps.size() - 1; cut >= 1; --cut) {
      std::string prefix = comps[0];
      for (std::size_t i = 1; i < cut; ++i) prefix += "." + comps[i];
      auto it = required_.find(prefix);
      if (it == required_.end()) continue;
      Entity* e = it->second;
      for (std::size_t i = cut; i < comps.size() && e; ++i) {
        auto c = e->contents.find(comps[i]);
        e = (c != e->contents.end() && c->second.kind == Binding::Module)
                ? c->second.entity
                : nullptr;
      }
      if (e) return e;
    }
    Entity* match = nullptr;
    for (const auto& [logical, ent] : required_) {
      if (is_component_suffix(comps, split_components(logical))) {
        if (match) return nullptr;  // ambiguous
        match = ent;
      }
    }
    return match;
  }

  /// Fully qualified name a short module path resolves to through the
  /// required-root registry, for the name sidecar. Empty for local modules.
  std::string qualified_for_sidecar(const Unit& u, const std::string& dotted) const {
    auto comps = split_components(dotted);
    if (comps.empty()) return "";
    if (const Binding* b = lookup_unqualified(u, comps[0]);
        b && b->kind == Binding::Module)
      return "";
    if (required_.count(dotted)) return dotted;
    for (std::size_t cut = comps.size() - 1; cut >= 1; --cut) {
      std::string prefix = comps[0];
      for (std::size_t i = 1; i < cut; ++i) prefix += "." + comps[i];
      if (required_.count(prefix)) return prefix;
    }
    std::string match;
    for (const auto& [logical, ent] : required_) {
      (void)ent;
      if (is_component_suffix(comps, split_components(logical))) {
        if (!match.empty()) return "";
        match = logical;
      }
    }
    return match;
  }

  // ---- term / tactic region resolution ------------------------------------

  struct ResolveCtx {
    std::set<std::string> bound;
    std::vector<const Binding*> tactic_hits;  // resolved user tactics, in order
    std::vector<const Token*> trigger_hits;   // direct trigger tokens
  };

  /// Resolve identifier references in tokens [from, to). Binder constructs
  /// (forall/fun/let, match patterns, ?vars) bind rather than resolve.
  void resolve_region(Unit& u, const Sentence& s, std::size_t from, std::size_t to,
                      ResolveCtx& ctx) {
    bool in_pattern = false;
    enum class BinderMode { None, UntilComma, UntilArrow, UntilAssign };
    BinderMode binder = BinderMode::None;
    for (std::size_t i = from; i < to; ++i) {
      const Token& t = s.tokens[i];
      if (t.kind == TokKind::String || t.kind == TokKind::Number) continue;
      if (t.kind == TokKind::PatternVar) {
        ctx.bound.insert(t.text);
        continue;
      }
      if (t.kind == TokKind::Symbol) {
        if (t.text == "|")
          in_pattern = true;
        else if (t.text == "=>") {
          in_pattern = false;
          if (binder == BinderMode::UntilArrow) binder = BinderMode::None;
        } else if (t.text == ",") {
          if (binder == BinderMode::UntilComma) binder = BinderMode::None;
        } else if (t.text == ":=") {
          if (binder == BinderMode::UntilAssign) binder = BinderMode::None;
        }
        continue;
      }
      // identifier
      const std::string& name = t.text;
      if (name == "forall" || name == "exists") {
        binder = BinderMode::UntilComma;
        continue;
      }
      if (name == "fun") {
        binder = BinderMode::UntilArrow;
        continue;
      }
      if (name == "let") {
        binder = BinderMode::UntilAssign;
        continue;
      }
      if (binder != BinderMode::None || in_pattern) {
        ctx.bound.insert(name);
        continue;
      }
      if (name == "_") continue;
      if (keyword_set().count(name)) continue;
      if (is_trigger(name) || name == "trigger_warning" || name == "trigger_crash") {
        ctx.trigger_hits.push_back(&t);
        continue;
      }
      // Qualified reference: adjacent ident '.' ident chains.
      if (i + 2 < to && s.tokens[i + 1].kind == TokKind::Symbol &&
          s.tokens[i + 1].text == "." && s.tokens[i + 1].begin == t.end &&
          s.tokens[i + 2].kind == TokKind::Ident &&
          s.tokens[i + 2].begin == s.tokens[i + 1].end) {
        std::string dotted = name;
        std::size_t j = i;
        while (j + 2 < to && s.tokens[j + 1].kind == TokKind::Symbol &&
               s.tokens[j + 1].text == "." &&
               s.tokens[j + 1].begin == s.tokens[j].end &&
               s.tokens[j + 2].kind == TokKind::Ident &&
               s.tokens[j + 2].begin == s.tokens[j + 1].end) {
          dotted += "." + s.tokens[j + 2].text;
          j += 2;
        }
        if (!resolve_qualified(u, dotted)) {
          fail_at(u, s, &t,
                  "Error: The reference " + dotted +
                      " was not found in the current environment.");
        }
        i = j;
        continue;
      }
      if (ctx.bound.count(name) || u.proof.intro_bound.count(name)) continue;
      if (builtin_terms().count(name) || builtin_tactics().count(name)) {
        if (name == "admit") u.proof.used_admit = true;
        if (name == "intros" || name == "intro") {
          // arguments of intros become proof-local binders
          std::size_t j = i + 1;
          while (j < to && s.tokens[j].kind == TokKind::Ident)
            u.proof.intro_bound.insert(s.tokens[j++].text);
          i = j - 1;
        }
        continue;
      }
      const Binding* b = lookup_unqualified(u, name);
      if (!b) {
        fail_at(u, s, &t,
                "Error: The reference " + name +
                    " was not found in the current environment.");
      }
      if (b->kind == Binding::Tactic) ctx.tactic_hits.push_back(b);
    }
  }

  bool resolve_qualified(const Unit& u, const std::string& dotted) const {
    auto comps = split_components(dotted);
    if (comps.size() < 2) return lookup_unqualified(u, dotted) != nullptr;
    std::string module_part = comps[0];
    for (std::size_t i = 1; i + 1 < comps.size(); ++i) module_part += "." + comps[i];
    Entity* e = resolve_module_path(u, module_part);
    if (!e) {
      // Maybe the whole dotted path is itself a module.
      return resolve_module_path(u, dotted) != nullptr;
    }
    if (e->contents.count(comps.back())) return true;
    std::set<const Entity*> seen;
    std::map<std::string, Binding> surface;
    collect_surface(e, surface, seen);
    return surface.count(comps.back()) > 0;
  }

  // ---- triggers ------------------------------------------------------------

  std::uint64_t basename_hash(const Unit& u) const {
    std::uint64_t h = 1469598103934665603ull;
    std::string base = std::filesystem::path(u.file).filename().string();
    for (unsigned char c : base) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  [[noreturn]] void fire_trigger(Unit& u, const Sentence& s, const Token* at,
                                 const std::string& which, const std::string& msg_arg) {
    if (which == "trigger_bug") {
      fail_at(u, s, at, "Error: " + (msg_arg.empty() ? "Unspecified failure." : msg_arg));
    }
    if (which == "trigger_universe") {
      std::uint64_t h = basename_hash(u);
      int a = defs_count_ + 1;
      int b = a + 1 + static_cast<int>(h % 7);
      int c = static_cast<int>(h % 89) + 1;
      std::ostringstream os;
      os << "Error: Universe inconsistency.\n"
         << "Cannot enforce u" << a << " <= u" << b << " because u" << b << " < u" << c
         << ".";
      fail_at(u, s, at, os.str());
    }
    if (which == "trigger_bugged_tactic") {
      std::ostringstream os;
      os << "Error: Unsatisfied constraints: UNDEFINED <= u" << defs_count_ + 1
         << " (maybe a bugged tactic).";
      fail_at(u, s, at, os.str());
    }
    std::ostringstream os;  // trigger_numbered
    os << "Error: Cannot unfold autogenerated identifier x" << defs_count_ + 1 << ".";
    fail_at(u, s, at, os.str());
  }

  /// Fire the first trigger reachable from a resolved sentence: direct
  /// trigger tokens first, then (one level deep) triggers mentioned in the
  /// bodies of invoked Ltac definitions.
  void fire_pending_triggers(Unit& u, const Sentence& s, const ResolveCtx& ctx) {
    for (const Token* t : ctx.trigger_hits) {
      if (t->text == "trigger_warning") {
        std::string msg = string_arg_after(s, *t);
        emit_warning(u, s, t, msg.empty() ? "unspecified" : msg);
        continue;
      }
      if (t->text == "trigger_crash") throw std::runtime_error("internal fault");
      if (!opts_.fail_version) continue;
      fire_trigger(u, s, t, t->text, string_arg_after(s, *t));
    }
    if (!opts_.fail_version) return;
    for (const Binding* b : ctx.tactic_hits) {
      for (std::size_t i = 0; i < b->ltac_body.size(); ++i) {
        const std::string& w = b->ltac_body[i];
        if (!is_trigger(w)) continue;
        std::string arg;
        if (i + 1 < b->ltac_body.size() && !b->ltac_body[i + 1].empty() &&
            b->ltac_body[i + 1].front() == '"') {
          arg = unquote(b->ltac_body[i + 1]);
        }
        fire_trigger(u, s, nullptr, w, arg);
      }
    }
  }

  static std::string unquote(const std::string& raw) {
    if (raw.size() < 2 || raw.front() != '"') return raw;
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '"' && i + 2 < raw.size() && raw[i + 1] == '"') {
        out += '"';
        ++i;
      } else {
        out += raw[i];
      }
    }
    return out;
  }

  static std::string string_arg_after(const Sentence& s, const Token& t) {
    for (const auto& tok : s.tokens) {
      if (tok.begin < t.end) continue;
      if (tok.kind == TokKind::String) return unquote(tok.text);
      if (tok.kind != TokKind::String) break;
    }
    return "";
  }

  void emit_warning(const Unit& u, const Sentence& s, const Token* tok,
                    const std::string& msg) {
    std::size_t abs_b = s.begin + (tok ? tok->begin : 0);
    std::size_t abs_e = s.begin + (tok ? tok->end : 1);
    auto [line, col] = to_line_col(u, abs_b);
    auto [l2, col2] = to_line_col(u, abs_e);
    (void)l2;
    std::ostringstream os;
    os << "File \"" << u.file << "\", line " << line << ", characters " << col << "-"
       << col2 << ":\nWarning: " << msg << "\n\n";
    log_ += os.str();
  }

  // ---- require handling ----------------------------------------------------

  Entity* process_require_name(Unit& u, const Sentence& s, const Token& at,
                               const std::string& name) {
    if (auto it = required_.find(name); it != required_.end()) {
      note_sidecar(u, name, name);
      return it->second;
    }
    std::string logical;
    std::string path;
    if (auto it = file_table_.find(name); it != file_table_.end()) {
      logical = name;
      path = it->second;
    } else {
      auto comps = split_components(name);
      for (const auto& [log, p] : file_table_) {
        if (is_component_suffix(comps, split_components(log))) {
          if (!logical.empty()) {
            fail_at(u, s, &at, "Error: Ambiguous logical path " + name + ".");
          }
          logical = log;
          path = p;
        }
      }
    }
    if (logical.empty()) {
      bool stdlib = name == opts_.stdlib_prefix ||
                    name.rfind(opts_.stdlib_prefix + ".", 0) == 0;
      if (stdlib) {
        arena_.emplace_back();
        Entity* e = &arena_.back();
        e->qualified = name;
        required_.emplace(name, e);
        note_sidecar(u, name, name);
        return e;
      }
      fail_at(u, s, &at,
              "Error: Cannot find a physical path bound to logical path " + name + ".");
    }
    if (auto it = required_.find(logical); it != required_.end()) {
      note_sidecar(u, name, logical);
      return it->second;
    }
    if (loading_.count(logical)) {
      fail_at(u, s, &at, "Error: Circular dependency on " + logical + ".");
    }
    loading_.insert(logical);
    Entity* e = nullptr;
    try {
      e = load_unit(path, logical, u.depth + 1);
    } catch (const CheckError& inner) {
      loading_.erase(logical);
      std::string first_line = inner.message;
      if (auto nl = first_line.find('\n'); nl != std::string::npos)
        first_line.resize(nl);
      fail_at(u, s, &at, "Error: Cannot load " + logical + ": " + first_line);
    }
    loading_.erase(logical);
    required_.emplace(logical, e);
    note_sidecar(u, name, logical);
    return e;
  }

  void note_sidecar(const Unit& u, const std::string& short_name,
                    const std::string& qualified) {
    if (u.depth != 0 || opts_.emit_names_path.empty()) return;
    for (const auto& [s, q] : sidecar_)
      if (s == short_name && q == qualified) return;
    sidecar_.emplace_back(short_name, qualified);
  }

  void write_sidecar() {
    std::ofstream out(opts_.emit_names_path, std::ios::binary);
    for (const auto& [s, q] : sidecar_) out << s << " " << q << "\n";
  }

  // ---- dotted-name parsing from a sentence ---------------------------------

  struct DottedName {
    std::string text;
    const Token* first = nullptr;
  };

  /// Collect dotted names after token index `from` (ident chains joined by
  /// adjacent '.'), stopping at the terminator.
  static std::vector<DottedName> parse_dotted_names(const Sentence& s, std::size_t from) {
    std::vector<DottedName> names;
    std::size_t i = from;
    while (i < s.tokens.size()) {
      if (s.tokens[i].kind != TokKind::Ident) {
        ++i;
        continue;
      }
      DottedName d;
      d.first = &s.tokens[i];
      d.text = s.tokens[i].text;
      while (i + 2 < s.tokens.size() && s.tokens[i + 1].kind == TokKind::Symbol &&
             s.tokens[i + 1].text == "." && s.tokens[i + 1].begin == s.tokens[i].end &&
             s.tokens[i + 2].kind == TokKind::Ident &&
             s.tokens[i + 2].begin == s.tokens[i + 1].end) {
        d.text += "." + s.tokens[i + 2].text;
        i += 2;
      }
      names.push_back(std::move(d));
      ++i;
    }
    return names;
  }

  // ---- sentence dispatch ---------------------------------------------------

  void process_sentence(Unit& u, const Sentence& s) {
    auto head = head_ident(s.tokens);
    if (!head) return;  // blank / comment-only
    const std::string& h = head->text;
    std::size_t head_idx = 0;
    while (head_idx < s.tokens.size() &&
           !(s.tokens[head_idx].kind == TokKind::Ident && s.tokens[head_idx].text == h))
      ++head_idx;

    if (u.proof.pending && !command_heads().count(h)) {
      tactic_step(u, s);
      return;
    }
    if (!command_heads().count(h)) {
      if (builtin_tactics().count(h) || lookup_tactic(u, h)) {
        fail_at(u, s, &*head, "Error: No focused proof (No proof-editing in progress).");
      }
      fail_at(u, s, &*head,
              "Error: The reference " + h + " was not found in the current environment.");
    }

    if (h == "Require") {
      handle_require(u, s, head_idx);
    } else if (h == "Import" || h == "Export") {
      handle_import(u, s, head_idx, /*reexport=*/h == "Export");
    } else if (h == "Module" || h == "Section") {
      handle_scope_open(u, s, head_idx, h == "Section");
    } else if (h == "End") {
      handle_scope_end(u, s, head_idx);
    } else if (h == "Proof") {
      if (!u.proof.pending)
        fail_at(u, s, &*head, "Error: No focused proof (No proof-editing in progress).");
    } else if (h == "Qed" || h == "Defined" || h == "Save" || h == "Admitted" ||
               h == "Abort") {
      handle_closer(u, s, head_idx, h);
    } else if (h == "Definition" || h == "Example") {
      handle_definition(u, s, head_idx, /*program=*/false);
    } else if (h == "Program") {
      handle_program(u, s, head_idx);
    } else if (h == "Fixpoint" || h == "CoFixpoint") {
      handle_fixpoint(u, s, head_idx);
    } else if (h == "Ltac") {
      handle_ltac(u, s, head_idx);
    } else if (h == "Axiom" || h == "Parameter" || h == "Variable" || h == "Variables" ||
               h == "Hypothesis" || h == "Context") {
      handle_assumptions(u, s, head_idx);
    } else if (h == "Lemma" || h == "Theorem" || h == "Fact" || h == "Corollary" ||
               h == "Instance") {
      handle_statement(u, s, head_idx, /*named=*/true);
    } else if (h == "Goal") {
      handle_statement(u, s, head_idx, /*named=*/false);
    } else if (h == "Obligation" || h == "Next") {
      handle_obligation(u, s, head_idx);
    } else if (h == "Admit") {
      if (u.proof.pending)
        fail_at(u, s, &*head, "Error: Command not supported in proof mode.");
      // Admit Obligations: closes any outstanding obligations; idempotent.
    } else if (h == "Check") {
      ResolveCtx ctx;
      resolve_region(u, s, head_idx + 1, s.tokens.size(), ctx);
      fire_pending_triggers(u, s, ctx);
    } else if (h == "Global") {
      handle_global_set(u, s, head_idx);
    } else if (h == "Assert") {
      handle_assert_flag(u, s, head_idx);
    } else {  // trigger commands
      ResolveCtx ctx;
      ctx.trigger_hits.push_back(&s.tokens[head_idx]);
      resolve_region(u, s, head_idx + 1, s.tokens.size(), ctx);
      fire_pending_triggers(u, s, ctx);
    }
  }

  const Binding* lookup_tactic(const Unit& u, const std::string& n) const {
    const Binding* b = lookup_unqualified(u, n);
    return (b && b->kind == Binding::Tactic) ? b : nullptr;
  }

  void tactic_step(Unit& u, const Sentence& s) {
    ResolveCtx ctx;
    resolve_region(u, s, 0, s.tokens.size(), ctx);
    fire_pending_triggers(u, s, ctx);
  }

  void handle_require(Unit& u, const Sentence& s, std::size_t head_idx) {
    std::size_t i = head_idx + 1;
    bool import = false, reexport = false;
    if (i < s.tokens.size() && s.tokens[i].kind == TokKind::Ident) {
      if (s.tokens[i].text == "Import") {
        import = true;
        ++i;
      } else if (s.tokens[i].text == "Export") {
        import = reexport = true;
        ++i;
      }
    }
    auto names = parse_dotted_names(s, i);
    if (names.empty())
      fail_at(u, s, nullptr, "Error: Require expects at least one module name.");
    for (const auto& n : names) {
      Entity* e = process_require_name(u, s, *n.first, n.text);
      if (import) import_into(u.scopes.back(), e);
      if (reexport) u.scopes.back().entity->reexports.push_back(e);
    }
  }

  void handle_import(Unit& u, const Sentence& s, std::size_t head_idx, bool reexport) {
    auto names = parse_dotted_names(s, head_idx + 1);
    if (names.empty())
      fail_at(u, s, nullptr, "Error: Import expects at least one module name.");
    for (const auto& n : names) {
      Entity* e = resolve_module_path(u, n.text);
      if (!e) {
        fail_at(u, s, n.first,
                "Error: The reference " + n.text +
                    " was not found in the current environment.");
      }
      if (e->is_module_type)
        fail_at(u, s, n.first, "Error: " + n.text + " is not a module.");
      std::string q = qualified_for_sidecar(u, n.text);
      if (!q.empty()) note_sidecar(u, n.text, q);
      import_into(u.scopes.back(), e);
      if (reexport) u.scopes.back().entity->reexports.push_back(e);
    }
  }

  void handle_scope_open(Unit& u, const Sentence& s, std::size_t head_idx, bool section) {
    std::size_t i = head_idx + 1;
    bool export_flag = false;
    bool module_type = false;
    while (!section && i < s.tokens.size() && s.tokens[i].kind == TokKind::Ident &&
           (s.tokens[i].text == "Export" || s.tokens[i].text == "Import" ||
            s.tokens[i].text == "Type")) {
      if (s.tokens[i].text == "Export") export_flag = true;
      if (s.tokens[i].text == "Type") module_type = true;
      ++i;
    }
    if (i >= s.tokens.size() || s.tokens[i].kind != TokKind::Ident)
      fail_at(u, s, nullptr, "Error: Expected a name.");
    const Token& name_tok = s.tokens[i];
    std::string name = name_tok.text;

    if (!section && top_level_symbol(s.tokens, ":=") != std::string_view::npos) {
      // Module alias: Module M := Path.
      auto names = parse_dotted_names(s, i + 1);
      if (names.empty()) fail_at(u, s, nullptr, "Error: Expected a module path.");
      Entity* e = resolve_module_path(u, names.back().text);
      if (!e) {
        fail_at(u, s, names.back().first,
                "Error: The reference " + names.back().text +
                    " was not found in the current environment.");
      }
      check_top_level_duplicate(u, s, name_tok, name);
      u.scopes.back().entity->contents[name] = Binding{Binding::Module, e, {}};
      return;
    }

    if (!section) check_top_level_duplicate(u, s, name_tok, name);
    arena_.emplace_back();
    Entity* e = &arena_.back();
    e->qualified = u.scopes.back().entity->qualified + "." + name;
    e->is_module_type = module_type;
    Scope sc;
    sc.kind = section ? Scope::Section : (module_type ? Scope::ModuleType : Scope::Module);
    sc.name = name;
    sc.export_flag = export_flag;
    sc.entity = e;
    u.scopes.push_back(std::move(sc));
  }

  void check_top_level_duplicate(Unit& u, const Sentence& s, const Token& tok,
                                 const std::string& name) {
    if (u.scopes.size() != 1) return;
    auto it = u.scopes[0].entity->contents.find(name);
    if (it != u.scopes[0].entity->contents.end() && it->second.kind == Binding::Module)
      fail_at(u, s, &tok, "Error: " + name + " already exists.");
  }

  void handle_scope_end(Unit& u, const Sentence& s, std::size_t head_idx) {
    if (u.scopes.size() <= 1)
      fail_at(u, s, nullptr, "Error: There is nothing to end.");
    std::string name;
    if (head_idx + 1 < s.tokens.size() && s.tokens[head_idx + 1].kind == TokKind::Ident)
      name = s.tokens[head_idx + 1].text;
    Scope done = std::move(u.scopes.back());
    u.scopes.pop_back();
    if (!name.empty() && name != done.name)
      fail_at(u, s, nullptr, "Error: Last block to end has name " + done.name + ".");
    Scope& parent = u.scopes.back();
    if (done.kind == Scope::Section) {
      for (auto& [k, v] : done.entity->contents) parent.entity->contents[k] = v;
      for (Entity* r : done.entity->reexports) parent.entity->reexports.push_back(r);
      return;
    }
    parent.entity->contents[done.name] = Binding{Binding::Module, done.entity, {}};
    if (done.export_flag && !done.entity->is_module_type) {
      import_into(parent, done.entity);
      parent.entity->reexports.push_back(done.entity);
    }
  }

  void handle_closer(Unit& u, const Sentence& s, std::size_t head_idx,
                     const std::string& h) {
    if (!u.proof.pending) {
      fail_at(u, s, &s.tokens[head_idx],
              "Error: No focused proof (No proof-editing in progress).");
    }
    if ((h == "Qed" || h == "Defined" || h == "Save") && u.proof.used_admit)
      fail_at(u, s, &s.tokens[head_idx], "Error: Attempt to save an incomplete proof.");
    if (h != "Abort" && !u.proof.name.empty()) bind_term(u, u.proof.name);
    u.proof = ProofState{};
  }

  void bind_term(Unit& u, const std::string& name) {
    u.scopes.back().entity->contents[name] = Binding{Binding::Term, nullptr, {}};
    ++defs_count_;
  }

  /// Region after the first top-level ':' or ':=' is resolved; identifiers
  /// before it are the introduced names and binders.
  std::size_t body_region_start(const Sentence& s) const {
    std::size_t c = top_level_symbol(s.tokens, ":");
    std::size_t a = top_level_symbol(s.tokens, ":=");
    std::size_t cut = std::min(c == std::string_view::npos ? s.tokens.size() : c,
                               a == std::string_view::npos ? s.tokens.size() : a);
    return cut == s.tokens.size() ? cut : cut + 1;
  }

  std::set<std::string> header_idents(const Sentence& s, std::size_t upto) const {
    std::set<std::string> out;
    for (std::size_t i = 0; i < upto && i < s.tokens.size(); ++i)
      if (s.tokens[i].kind == TokKind::Ident) out.insert(s.tokens[i].text);
    return out;
  }

  void handle_definition(Unit& u, const Sentence& s, std::size_t head_idx, bool program) {
    if (u.proof.pending)
      fail_at(u, s, &s.tokens[head_idx], "Error: Nested proofs are not allowed.");
    std::size_t name_idx = head_idx + 1;
    while (name_idx < s.tokens.size() && s.tokens[name_idx].kind != TokKind::Ident)
      ++name_idx;
    if (name_idx >= s.tokens.size())
      fail_at(u, s, nullptr, "Error: Expected a name.");
    std::string name = s.tokens[name_idx].text;
    bool has_body = top_level_symbol(s.tokens, ":=") != std::string_view::npos;
    bool has_type = false;
    {
      std::size_t c = top_level_symbol(s.tokens, ":");
      std::size_t a = top_level_symbol(s.tokens, ":=");
      has_type = c != std::string_view::npos && (a == std::string_view::npos || c < a);
    }
    std::size_t region = body_region_start(s);
    ResolveCtx ctx;
    ctx.bound = header_idents(s, region);
    resolve_region(u, s, region, s.tokens.size(), ctx);
    fire_pending_triggers(u, s, ctx);
    if (has_body) {
      bind_term(u, name);
      if (program) ++u.programs_seen;
      return;
    }
    if (!has_type)
      fail_at(u, s, &s.tokens[name_idx], "Error: The definition " + name + " needs a type.");
    u.proof = ProofState{};
    u.proof.pending = true;
    u.proof.name = name;
  }

  void handle_program(Unit& u, const Sentence& s, std::size_t head_idx) {
    std::size_t i = head_idx + 1;
    if (i < s.tokens.size() && s.tokens[i].kind == TokKind::Ident &&
        (s.tokens[i].text == "Definition" || s.tokens[i].text == "Fixpoint")) {
      handle_definition(u, s, i, /*program=*/true);
      return;
    }
    fail_at(u, s, nullptr, "Error: Unsupported Program command.");
  }

  void handle_fixpoint(Unit& u, const Sentence& s, std::size_t head_idx) {
    if (u.proof.pending)
      fail_at(u, s, &s.tokens[head_idx], "Error: Nested proofs are not allowed.");
    std::size_t name_idx = head_idx + 1;
    while (name_idx < s.tokens.size() && s.tokens[name_idx].kind != TokKind::Ident)
      ++name_idx;
    if (name_idx >= s.tokens.size())
      fail_at(u, s, nullptr, "Error: Expected a name.");
    if (top_level_symbol(s.tokens, ":=") == std::string_view::npos)
      fail_at(u, s, &s.tokens[name_idx], "Error: Fixpoint requires a body.");
    std::size_t region = body_region_start(s);
    ResolveCtx ctx;
    ctx.bound = header_idents(s, region);
    resolve_region(u, s, region, s.tokens.size(), ctx);
    fire_pending_triggers(u, s, ctx);
    bind_term(u, s.tokens[name_idx].text);
  }

  void handle_ltac(Unit& u, const Sentence& s, std::size_t head_idx) {
    std::size_t assign = top_level_symbol(s.tokens, ":=");
    if (assign == std::string_view::npos)
      fail_at(u, s, nullptr, "Error: Ltac requires a body.");
    std::size_t name_idx = head_idx + 1;
    if (name_idx >= s.tokens.size() || s.tokens[name_idx].kind != TokKind::Ident)
      fail_at(u, s, nullptr, "Error: Expected a name.");
    std::string name = s.tokens[name_idx].text;
    ResolveCtx ctx;
    ctx.bound = header_idents(s, assign);
    ctx.bound.insert(name);
    // Bind the tactic before resolving so self-recursion works; triggers in
    // the body fire at invocation sites, not here.
    Binding b;
    b.kind = Binding::Tactic;
    for (std::size_t i = assign + 1; i < s.tokens.size(); ++i) {
      if (s.tokens[i].kind == TokKind::Ident || s.tokens[i].kind == TokKind::String)
        b.ltac_body.push_back(s.tokens[i].text);
    }
    u.scopes.back().entity->contents[name] = std::move(b);
    ++defs_count_;
    ResolveCtx body_ctx;
    body_ctx.bound = ctx.bound;
    resolve_region(u, s, assign + 1, s.tokens.size(), body_ctx);
    // No trigger firing at definition time.
  }

  void handle_assumptions(Unit& u, const Sentence& s, std::size_t head_idx) {
    const std::string& h = s.tokens[head_idx].text;
    if (h == "Context") {
      handle_context(u, s, head_idx);
      return;
    }
    std::size_t colon = top_level_symbol(s.tokens, ":");
    std::size_t upto = colon == std::string_view::npos ? s.tokens.size() : colon;
    std::vector<std::string> names;
    for (std::size_t i = head_idx + 1; i < upto; ++i)
      if (s.tokens[i].kind == TokKind::Ident) names.push_back(s.tokens[i].text);
    if (names.empty()) fail_at(u, s, nullptr, "Error: Expected a name.");
    ResolveCtx ctx;
    for (const auto& n : names) ctx.bound.insert(n);
    if (colon != std::string_view::npos)
      resolve_region(u, s, colon + 1, s.tokens.size(), ctx);
    fire_pending_triggers(u, s, ctx);
    for (const auto& n : names) bind_term(u, n);
  }

  /// Context binder groups: (x y : T) introduces x y and resolves T.
  void handle_context(Unit& u, const Sentence& s, std::size_t head_idx) {
    std::vector<std::string> names;
    int depth = 0;
    bool after_colon = false;
    ResolveCtx ctx;
    for (std::size_t i = head_idx + 1; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      if (t.kind == TokKind::Symbol) {
        if (t.text == "(") {
          ++depth;
          after_colon = false;
        } else if (t.text == ")") {
          --depth;
          after_colon = false;
        } else if (t.text == ":" && depth > 0) {
          after_colon = true;
        }
        continue;
      }
      if (t.kind != TokKind::Ident) continue;
      if (depth > 0 && !after_colon) {
        names.push_back(t.text);
        ctx.bound.insert(t.text);
      } else if (after_colon) {
        std::size_t end = i + 1;
        resolve_region(u, s, i, end, ctx);
      } else {
        names.push_back(t.text);
        ctx.bound.insert(t.text);
      }
    }
    if (names.empty()) fail_at(u, s, nullptr, "Error: Expected a name.");
    for (const auto& n : names) bind_term(u, n);
  }

  void handle_statement(Unit& u, const Sentence& s, std::size_t head_idx, bool named) {
    if (u.proof.pending)
      fail_at(u, s, &s.tokens[head_idx], "Error: Nested proofs are not allowed.");
    std::string name;
    if (named) {
      std::size_t i = head_idx + 1;
      while (i < s.tokens.size() && s.tokens[i].kind != TokKind::Ident) ++i;
      if (i >= s.tokens.size()) fail_at(u, s, nullptr, "Error: Expected a name.");
      name = s.tokens[i].text;
    }
    std::size_t region = named ? body_region_start(s) : head_idx + 1;
    ResolveCtx ctx;
    ctx.bound = header_idents(s, region);
    resolve_region(u, s, region, s.tokens.size(), ctx);
    fire_pending_triggers(u, s, ctx);
    u.proof = ProofState{};
    u.proof.pending = true;
    u.proof.name = name;
  }

  void handle_obligation(Unit& u, const Sentence& s, std::size_t head_idx) {
    if (u.proof.pending)
      fail_at(u, s, &s.tokens[head_idx], "Error: Nested proofs are not allowed.");
    if (u.programs_seen == 0)
      fail_at(u, s, &s.tokens[head_idx], "Error: No program definition in scope.");
    u.proof = ProofState{};
    u.proof.pending = true;
  }

  void handle_global_set(Unit& u, const Sentence& s, std::size_t head_idx) {
    if (head_idx + 2 >= s.tokens.size() || s.tokens[head_idx + 1].text != "Set" ||
        s.tokens[head_idx + 2].kind != TokKind::Ident)
      fail_at(u, s, nullptr, "Error: Unsupported Global command.");
    bool inside_module = false;
    for (const auto& sc : u.scopes)
      if (sc.kind == Scope::Module || sc.kind == Scope::ModuleType) inside_module = true;
    // Module wrappers contain the effect; file scope (even via Require) does not.
    if (!inside_module) global_flags_.insert(s.tokens[head_idx + 2].text);
  }

  void handle_assert_flag(Unit& u, const Sentence& s, std::size_t head_idx) {
    if (head_idx + 2 >= s.tokens.size() || s.tokens[head_idx + 1].text != "Flag" ||
        s.tokens[head_idx + 2].kind != TokKind::Ident)
      fail_at(u, s, nullptr, "Error: Unsupported Assert command.");
    const std::string& flag = s.tokens[head_idx + 2].text;
    if (!global_flags_.count(flag))
      fail_at(u, s, &s.tokens[head_idx + 2], "Error: Flag " + flag + " is not set.");
  }

  // ---- state ---------------------------------------------------------------

  Options opts_;
  std::map<std::string, std::string> file_table_;
  std::map<std::string, Entity*> required_;
  std::set<std::string> loading_;
  std::set<std::string> global_flags_;
  std::deque<Entity> arena_;
  std::vector<std::pair<std::string, std::string>> sidecar_;
  std::string log_;
  int defs_count_ = 0;
};

}  // namespace detail

inline Result check_file(const std::string& path, const Options& opts) {
  detail::Engine engine(opts);
  return engine.run(path);
}

}  // namespace vermin::toy
