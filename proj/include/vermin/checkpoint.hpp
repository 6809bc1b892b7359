#pragma once

// Checkpoint persistence. A checkpoint captures everything a fresh process
// needs to continue a minimization exactly where it stopped: the current
// document text, the expected error signature and derived timeout, the
// scheduler cursor, the bookkeeping state, and cumulative oracle stats.
// The document is stored as rendered text and re-parsed on load; rendering
// is a fixpoint, so a save/load round trip is byte-identical.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "vermin/error_signature.hpp"
#include "vermin/passes.hpp"
#include "vermin/version.hpp"

namespace vermin {

struct Checkpoint {
  std::string original_file;
  std::size_t original_lines = 0;
  ErrorSignature expected;
  double timeout = 10.0;
  MinimizationRun run;
  OracleStats stats;  // cumulative across completed invocations
};

namespace detail {

inline nlohmann::json to_json(const RawError& e) {
  return {{"file", e.file},
          {"line", e.line},
          {"char_begin", e.char_begin},
          {"char_end", e.char_end},
          {"message", e.message}};
}

inline RawError raw_error_from(const nlohmann::json& j) {
  RawError e;
  e.file = j.at("file").get<std::string>();
  e.line = j.at("line").get<std::size_t>();
  e.char_begin = j.at("char_begin").get<std::size_t>();
  e.char_end = j.at("char_end").get<std::size_t>();
  e.message = j.at("message").get<std::string>();
  return e;
}

inline nlohmann::json to_json(const LedgerEntry& e) {
  return {{"phase", e.phase},
          {"pass", e.pass},
          {"candidates", e.candidates},
          {"accepted", e.accepted},
          {"sentences_before", e.sentences_before},
          {"sentences_after", e.sentences_after},
          {"lines_before", e.lines_before},
          {"lines_after", e.lines_after}};
}

inline LedgerEntry ledger_entry_from(const nlohmann::json& j) {
  LedgerEntry e;
  e.phase = j.at("phase").get<std::string>();
  e.pass = j.at("pass").get<std::string>();
  e.candidates = j.at("candidates").get<std::size_t>();
  e.accepted = j.at("accepted").get<std::size_t>();
  e.sentences_before = j.at("sentences_before").get<std::size_t>();
  e.sentences_after = j.at("sentences_after").get<std::size_t>();
  e.lines_before = j.at("lines_before").get<std::size_t>();
  e.lines_after = j.at("lines_after").get<std::size_t>();
  return e;
}

}  // namespace detail

inline bool save_checkpoint(const std::string& path, const Checkpoint& cp) {
  nlohmann::json j;
  j["tool"] = "vermin";
  j["version"] = kVersion;
  j["original_file"] = cp.original_file;
  j["original_lines"] = cp.original_lines;
  j["expected"] = {{"cls", (int)cp.expected.cls},
                   {"text", cp.expected.text},
                   {"number_sensitive", cp.expected.number_sensitive}};
  j["timeout"] = cp.timeout;
  j["doc"] = cp.run.doc.render();
  j["error"] = detail::to_json(cp.run.error);

  const auto& c = cp.run.cursor;
  j["cursor"] = {{"cycle", c.cycle},
                 {"phase", c.phase},
                 {"pass", c.pass},
                 {"sweep", c.sweep},
                 {"anchor", c.pc.anchor},
                 {"sub", c.pc.sub},
                 {"sweep_accepted", c.sweep_accepted},
                 {"cycle_accepted", c.cycle_accepted},
                 {"unlocked", c.unlocked},
                 {"entry_open", c.entry_open},
                 {"entry_candidates", c.entry_candidates},
                 {"entry_accepted", c.entry_accepted},
                 {"entry_sentences_before", c.entry_sentences_before},
                 {"entry_lines_before", c.entry_lines_before}};

  const auto& s = cp.run.state;
  nlohmann::json ledger = nlohmann::json::array();
  for (const auto& e : s.ledger) ledger.push_back(detail::to_json(e));
  j["state"] = {{"removal_sweep_done", s.removal_sweep_done},
                {"inline_all_first", s.inline_all_first},
                {"failed_inlines", s.failed_inlines},
                {"inlined_lines_total", s.inlined_lines_total},
                {"ledger", std::move(ledger)}};

  j["stats"] = {{"checks", cp.stats.checks},
                {"runs", cp.stats.runs},
                {"cache_hits", cp.stats.cache_hits},
                {"accepted", cp.stats.accepted},
                {"rejected", cp.stats.rejected},
                {"checker_wall", cp.stats.checker_wall}};

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out << j.dump(2) << '\n';
    if (!out) return false;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

inline std::optional<Checkpoint> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    Checkpoint cp;
    cp.original_file = j.at("original_file").get<std::string>();
    cp.original_lines = j.at("original_lines").get<std::size_t>();
    cp.expected.cls = (ErrorClass)j.at("expected").at("cls").get<int>();
    cp.expected.text = j.at("expected").at("text").get<std::string>();
    cp.expected.number_sensitive = j.at("expected").at("number_sensitive").get<bool>();
    cp.timeout = j.at("timeout").get<double>();

    auto parsed = Document::parse(j.at("doc").get<std::string>());
    if (!parsed.doc) return std::nullopt;
    cp.run.doc = *parsed.doc;
    cp.run.error = detail::raw_error_from(j.at("error"));

    const auto& jc = j.at("cursor");
    auto& c = cp.run.cursor;
    c.cycle = jc.at("cycle").get<int>();
    c.phase = jc.at("phase").get<int>();
    c.pass = jc.at("pass").get<int>();
    c.sweep = jc.at("sweep").get<int>();
    c.pc.anchor = jc.at("anchor").get<long long>();
    c.pc.sub = jc.at("sub").get<int>();
    c.sweep_accepted = jc.at("sweep_accepted").get<bool>();
    c.cycle_accepted = jc.at("cycle_accepted").get<bool>();
    c.unlocked = jc.at("unlocked").get<bool>();
    c.entry_open = jc.at("entry_open").get<bool>();
    c.entry_candidates = jc.at("entry_candidates").get<std::size_t>();
    c.entry_accepted = jc.at("entry_accepted").get<std::size_t>();
    c.entry_sentences_before = jc.at("entry_sentences_before").get<std::size_t>();
    c.entry_lines_before = jc.at("entry_lines_before").get<std::size_t>();

    const auto& js = j.at("state");
    auto& s = cp.run.state;
    s.removal_sweep_done = js.at("removal_sweep_done").get<bool>();
    s.inline_all_first = js.at("inline_all_first").get<bool>();
    s.failed_inlines = js.at("failed_inlines").get<std::vector<std::string>>();
    s.inlined_lines_total = js.at("inlined_lines_total").get<std::size_t>();
    for (const auto& je : js.at("ledger"))
      s.ledger.push_back(detail::ledger_entry_from(je));

    const auto& jt = j.at("stats");
    cp.stats.checks = jt.at("checks").get<std::size_t>();
    cp.stats.runs = jt.at("runs").get<std::size_t>();
    cp.stats.cache_hits = jt.at("cache_hits").get<std::size_t>();
    cp.stats.accepted = jt.at("accepted").get<std::size_t>();
    cp.stats.rejected = jt.at("rejected").get<std::size_t>();
    cp.stats.checker_wall = jt.at("checker_wall").get<double>();
    return cp;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace vermin
