#pragma once

// Dependency discovery and inlining support.
//
// The minimizer never resolves module names itself. It asks the failing
// checker to emit a name sidecar ("short qualified" lines) for a file, and
// combines that with a file table built from the search roots to map
// logical names to files. A checker that does not support the sidecar flag
// simply yields empty tables, which disables inlining rather than breaking
// minimization.
//
// Inlining a dependency replaces its Require sentences by a module wrapper
// named after the last component of the dependency's logical name, with the
// dependency's file content verbatim inside; an Import/Export command after
// the wrapper reproduces a Require Import/Export. The wrapper can sit where
// the Require was or at the top of the document.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vermin/oracle.hpp"
#include "vermin/sentence.hpp"

namespace vermin {

struct SearchRoot {
  std::string dir;
  std::string prefix;  // logical prefix, may be empty
};

/// Walk search roots for checker source files, mapping logical names to
/// paths (prefix plus dot-joined relative path).
inline std::map<std::string, std::string> build_file_table(
    const std::vector<SearchRoot>& roots) {
  namespace fs = std::filesystem;
  std::map<std::string, std::string> table;
  for (const auto& root : roots) {
    std::error_code ec;
    fs::path base(root.dir);
    if (!fs::is_directory(base, ec)) continue;
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
      if (!root.prefix.empty()) logical = root.prefix + "." + logical;
      table.emplace(logical, it->path().string());
    }
  }
  return table;
}

struct RequireRef {
  std::size_t sentence = 0;
  std::string short_name;  // as written
  enum Mod { Plain, Import, Export } mod = Plain;
};

/// All Require sentences of a document with their dotted names.
inline std::vector<RequireRef> require_refs(const Document& doc) {
  std::vector<RequireRef> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Sentence& s = doc.sentences()[i];
    if (s.kind != SentenceKind::RequireLike) continue;
    RequireRef::Mod mod = RequireRef::Plain;
    std::size_t k = 0;
    while (k < s.tokens.size() && s.tokens[k].kind != TokKind::Ident) ++k;
    ++k;  // past Require
    if (k < s.tokens.size() && s.tokens[k].kind == TokKind::Ident) {
      if (s.tokens[k].text == "Import") {
        mod = RequireRef::Import;
        ++k;
      } else if (s.tokens[k].text == "Export") {
        mod = RequireRef::Export;
        ++k;
      }
    }
    while (k < s.tokens.size()) {
      if (s.tokens[k].kind != TokKind::Ident) {
        ++k;
        continue;
      }
      RequireRef ref;
      ref.sentence = i;
      ref.mod = mod;
      ref.short_name = s.tokens[k].text;
      while (k + 2 < s.tokens.size() && s.tokens[k + 1].kind == TokKind::Symbol &&
             s.tokens[k + 1].text == "." && s.tokens[k + 1].begin == s.tokens[k].end &&
             s.tokens[k + 2].kind == TokKind::Ident &&
             s.tokens[k + 2].begin == s.tokens[k + 1].end) {
        ref.short_name += "." + s.tokens[k + 2].text;
        k += 2;
      }
      out.push_back(std::move(ref));
      ++k;
    }
  }
  return out;
}

/// Resolves names through checker sidecars and locates dependency files.
class DepResolver {
 public:
  struct Config {
    CheckerCommand fail_cmd;       // invoked with --emit-names for tables
    std::vector<SearchRoot> roots;
    std::string scratch_dir;       // sidecar and probe files live here
    double sidecar_timeout = 60.0;
  };

  explicit DepResolver(Config cfg) : cfg_(std::move(cfg)) {
    table_ = build_file_table(cfg_.roots);
  }

  const std::map<std::string, std::string>& file_table() const { return table_; }

  std::optional<std::string> file_for(const std::string& logical) const {
    auto it = table_.find(logical);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  /// short -> qualified table for a dependency file (cached per path).
  const std::map<std::string, std::string>& names_for_file(const std::string& path) {
    auto it = file_cache_.find(path);
    if (it != file_cache_.end()) return it->second;
    return file_cache_.emplace(path, run_sidecar(path)).first->second;
  }

  /// short -> qualified table for in-memory text (cached by content).
  const std::map<std::string, std::string>& names_for_text(const std::string& text) {
    auto it = text_cache_.find(text);
    if (it != text_cache_.end()) return it->second;
    std::string probe = (std::filesystem::path(cfg_.scratch_dir) / "names_probe.v").string();
    {
      std::ofstream out(probe, std::ios::binary | std::ios::trunc);
      out << text;
    }
    return text_cache_.emplace(text, run_sidecar(probe)).first->second;
  }

  std::size_t sidecar_runs() const { return sidecar_runs_; }

 private:
  std::map<std::string, std::string> run_sidecar(const std::string& file) {
    std::string sidecar =
        (std::filesystem::path(cfg_.scratch_dir) / "names_sidecar.txt").string();
    std::error_code ec;
    std::filesystem::remove(sidecar, ec);
    auto argv = cfg_.fail_cmd.argv;
    argv.push_back("--emit-names");
    argv.push_back(sidecar);
    argv.push_back(file);
    run_process(argv, cfg_.sidecar_timeout, cfg_.fail_cmd.working_dir, cfg_.fail_cmd.env);
    ++sidecar_runs_;
    std::map<std::string, std::string> out;
    std::ifstream in(sidecar, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      auto space = line.find(' ');
      if (space == std::string::npos || space == 0 || space + 1 >= line.size()) continue;
      out.emplace(line.substr(0, space), line.substr(space + 1));
    }
    return out;
  }

  Config cfg_;
  std::map<std::string, std::string> table_;
  std::map<std::string, std::map<std::string, std::string>> file_cache_;
  std::map<std::string, std::map<std::string, std::string>> text_cache_;
  std::size_t sidecar_runs_ = 0;
};

struct DepNode {
  std::string logical;
  std::string path;
  std::vector<std::string> deps;  // qualified names of files this one requires
};

struct DepGraph {
  std::map<std::string, DepNode> nodes;
  std::vector<std::string> topo;  // dependencies before dependents
};

/// Qualified names of the file-backed dependencies a parsed document
/// requires, given its sidecar table.
inline std::set<std::string> qualified_requires(
    const Document& doc, const std::map<std::string, std::string>& names,
    const std::map<std::string, std::string>& files) {
  std::set<std::string> out;
  for (const auto& ref : require_refs(doc)) {
    auto it = names.find(ref.short_name);
    if (it == names.end()) continue;
    if (files.count(it->second)) out.insert(it->second);
  }
  return out;
}

/// Discover the file-backed dependency graph reachable from document text.
/// Deterministic: children are visited in name order and the topological
/// order breaks ties lexicographically.
inline DepGraph discover_deps(DepResolver& resolver, const std::string& doc_text) {
  DepGraph g;
  std::vector<std::string> work;
  {
    auto parsed = Document::parse(doc_text);
    if (!parsed.doc) return g;
    auto direct = qualified_requires(*parsed.doc, resolver.names_for_text(doc_text),
                                             resolver.file_table());
    work.assign(direct.begin(), direct.end());
  }
  while (!work.empty()) {
    std::string logical = work.back();
    work.pop_back();
    if (g.nodes.count(logical)) continue;
    auto path = resolver.file_for(logical);
    if (!path) continue;
    DepNode node;
    node.logical = logical;
    node.path = *path;
    std::ifstream in(*path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto parsed = Document::parse(buf.str());
    if (parsed.doc) {
      auto deps = qualified_requires(*parsed.doc, resolver.names_for_file(*path),
                                             resolver.file_table());
      node.deps.assign(deps.begin(), deps.end());
    }
    for (const auto& d : node.deps) work.push_back(d);
    g.nodes.emplace(logical, std::move(node));
  }
  // Kahn's algorithm, smallest name first; indegree = in-graph dependencies.
  std::map<std::string, int> indeg;
  for (const auto& [name, node] : g.nodes) {
    int n = 0;
    for (const auto& d : node.deps)
      if (g.nodes.count(d) && d != name) ++n;
    indeg.emplace(name, n);
  }
  std::set<std::string> frontier;
  for (const auto& [name, n] : indeg)
    if (n == 0) frontier.insert(name);
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [name, node] : g.nodes)
    for (const auto& d : node.deps)
      if (g.nodes.count(d)) dependents[d].push_back(name);
  while (!frontier.empty()) {
    std::string name = *frontier.begin();
    frontier.erase(frontier.begin());
    g.topo.push_back(name);
    for (const auto& dep : dependents[name])
      if (--indeg[dep] == 0) frontier.insert(dep);
  }
  for (const auto& [name, n] : indeg)  // cycle fallback, stable order
    if (n > 0) g.topo.push_back(name);
  return g;
}

/// Deps in the graph with files that the document does not directly
/// require, topologically ordered (dependencies first).
inline std::vector<std::string> missing_requires(const DepGraph& graph,
                                                 const std::set<std::string>& direct) {
  std::vector<std::string> out;
  for (const auto& name : graph.topo)
    if (!direct.count(name)) out.push_back(name);
  return out;
}

/// Insertion point for new Require sentences: right after the last
/// RequireLike sentence, else the top.
inline std::size_t require_insert_pos(const Document& doc) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < doc.size(); ++i)
    if (doc.sentences()[i].kind == SentenceKind::RequireLike) pos = i + 1;
  return pos;
}

inline std::string last_component(const std::string& logical) {
  auto dot = logical.rfind('.');
  return dot == std::string::npos ? logical : logical.substr(dot + 1);
}

/// Build a candidate document with dependency `logical` inlined, or nullopt
/// when the document does not require it or its file cannot be used.
/// `names` is the sidecar table for the current document text.
inline std::optional<Document> build_inline_candidate(
    const Document& doc, const std::string& logical, const std::string& dep_path,
    const std::map<std::string, std::string>& names, bool at_top) {
  std::vector<RequireRef> mentions;
  for (const auto& ref : require_refs(doc)) {
    auto it = names.find(ref.short_name);
    if (it != names.end() && it->second == logical) mentions.push_back(ref);
  }
  if (mentions.empty()) return std::nullopt;

  std::ifstream in(dep_path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string content = buf.str();
  auto dep_parsed = Document::parse(content);
  if (!dep_parsed.doc || dep_parsed.doc->size() == 0) return std::nullopt;

  RequireRef::Mod mod = RequireRef::Plain;
  for (const auto& m : mentions)
    if (m.mod > mod) mod = m.mod;

  std::string component = last_component(logical);
  std::string wrapper = "Module " + component + ".\n";
  wrapper += content;
  if (wrapper.back() != '\n') wrapper += '\n';
  wrapper += "End " + component + ".";
  if (mod == RequireRef::Import)
    wrapper += "\nImport " + component + ".";
  else if (mod == RequireRef::Export)
    wrapper += "\nExport " + component + ".";

  Document out = doc;
  // Rewrite mention sentences from the bottom up, dropping the dependency's
  // name; a sentence left with no names disappears.
  std::map<std::size_t, std::vector<RequireRef>> by_sentence;
  for (const auto& m : mentions) by_sentence[m.sentence].push_back(m);
  std::size_t insert_at = mentions.front().sentence;
  for (auto it = by_sentence.rbegin(); it != by_sentence.rend(); ++it) {
    std::size_t idx = it->first;
    std::vector<std::string> keep;
    RequireRef::Mod sentence_mod = RequireRef::Plain;
    for (const auto& ref : require_refs(out)) {
      if (ref.sentence != idx) continue;
      sentence_mod = ref.mod;
      auto resolved = names.find(ref.short_name);
      if (resolved != names.end() && resolved->second == logical) continue;
      keep.push_back(ref.short_name);
    }
    if (keep.empty()) {
      out.erase(idx, idx);
    } else {
      std::string text = "Require ";
      if (sentence_mod == RequireRef::Import) text += "Import ";
      if (sentence_mod == RequireRef::Export) text += "Export ";
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (i) text += ' ';
        text += keep[i];
      }
      text += '.';
      out.set_sentence_text(idx, text);
    }
  }
  out.insert_text(at_top ? 0 : insert_at, wrapper);
  return out;
}

}  // namespace vermin
