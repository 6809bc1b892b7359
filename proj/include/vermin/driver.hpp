#pragma once

// Ties the pieces into the command-line tool: resolves checker commands
// (directly or from a build log), initializes the oracle, drives the
// scheduler with checkpointing, and writes the minimized file, its header,
// and the stats sidecar.
//
// Build logs are expected to carry one `VERMIN_CALL:` line per checker
// invocation, emitted by the build wrapper:
//
//   VERMIN_CALL: cwd=<dir> env_path=<colon-dirs> args=["prog","-Q","lib","Top","file.v"]
//
// The last call whose arguments mention the failing file (exactly, else by
// basename) describes how to re-run the failing checker.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vermin/checkpoint.hpp"
#include "vermin/error_signature.hpp"
#include "vermin/oracle.hpp"
#include "vermin/passes.hpp"
#include "vermin/version.hpp"

namespace vermin {

struct DriverConfig {
  std::string file;          // direct mode target
  std::string build_log;     // build-log mode input
  std::string fail_checker;  // binary; optional in build-log mode
  std::string pass_checker;
  std::vector<std::string> fail_paths;  // "flag,dir,prefix" or "dir,prefix"
  std::vector<std::string> pass_paths;
  std::vector<std::string> args;  // extra args for both checkers
  bool inline_all_first = false;
  bool single_version = false;
  bool preserve_error_script = false;
  double wall_budget = 0.0;
  double check_timeout = 0.0;
  std::size_t stop_after_accepts = 0;
  bool resume = false;
  std::string output;
  std::string stats_path;
  std::string checkpoint_path;  // default <output>.ckpt.json
  std::string stdlib_prefix;    // forwarded to checkers that support it
  bool verbose = false;
};

/// Drop checker arguments that are irrelevant or harmful when re-running
/// single files: -batch/-time/-noglob, and -o/-dump-glob with their values.
inline std::vector<std::string> filter_args(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::string& a = in[i];
    if (a == "-batch" || a == "-time" || a == "-noglob") continue;
    if ((a == "-o" || a == "-dump-glob") && i + 1 < in.size()) {
      ++i;
      continue;
    }
    out.push_back(a);
  }
  return out;
}

struct CheckerCall {
  std::string cwd;
  std::vector<std::string> env_dirs;
  std::vector<std::string> args;
};

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<CheckerCall> parse_vermin_calls(const std::string& log) {
  std::vector<CheckerCall> out;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    auto at = line.find("VERMIN_CALL:");
    if (at == std::string::npos) continue;
    auto cwd_at = line.find("cwd=", at);
    auto env_at = line.find(" env_path=", at);
    auto args_at = line.find(" args=", at);
    if (cwd_at == std::string::npos || env_at == std::string::npos ||
        args_at == std::string::npos || cwd_at > env_at || env_at > args_at)
      continue;
    CheckerCall c;
    c.cwd = line.substr(cwd_at + 4, env_at - (cwd_at + 4));
    for (auto& d : split_on(line.substr(env_at + 10, args_at - (env_at + 10)), ':'))
      if (!d.empty()) c.env_dirs.push_back(d);
    auto js = nlohmann::json::parse(line.substr(args_at + 6), nullptr, false);
    if (!js.is_array()) continue;
    bool ok = true;
    for (const auto& v : js) {
      if (!v.is_string()) {
        ok = false;
        break;
      }
      c.args.push_back(v.get<std::string>());
    }
    if (ok) out.push_back(std::move(c));
  }
  return out;
}

inline bool arg_names_file(const std::string& arg, const std::string& file) {
  if (arg == file) return true;
  auto base = std::filesystem::path(arg).filename().string();
  return !base.empty() && base == std::filesystem::path(file).filename().string();
}

/// The last call mentioning the failing file wins; exact path matches beat
/// basename matches.
inline std::optional<CheckerCall> select_call(const std::vector<CheckerCall>& calls,
                                              const std::string& error_file) {
  std::optional<CheckerCall> exact, byname;
  for (const auto& c : calls) {
    for (const auto& a : c.args) {
      if (a == error_file)
        exact = c;
      else if (arg_names_file(a, error_file))
        byname = c;
    }
  }
  return exact ? exact : byname;
}

/// "flag,dir,prefix" or "dir,prefix" (flag defaults to -Q).
inline std::optional<std::array<std::string, 3>> parse_path_spec(const std::string& spec) {
  auto parts = split_on(spec, ',');
  if (parts.size() == 3 && !parts[0].empty() && !parts[1].empty())
    return std::array{parts[0], parts[1], parts[2]};
  if (parts.size() == 2 && !parts[0].empty())
    return std::array{std::string("-Q"), parts[0], parts[1]};
  return std::nullopt;
}

struct Setup {
  bool ok = false;
  std::string message;
  CheckerCommand fail_cmd;
  CheckerCommand pass_cmd;
  std::vector<SearchRoot> roots;
  std::string target;          // file being minimized
  bool single_version = false; // explicit flag, or no passing checker given
};

namespace detail {

inline std::string resolve_against(const std::string& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  std::filesystem::path b = base.empty() ? std::filesystem::current_path()
                                         : std::filesystem::path(base);
  return (b / path).lexically_normal().string();
}

}  // namespace detail

inline Setup resolve_setup(const DriverConfig& cfg) {
  Setup s;
  std::vector<std::array<std::string, 3>> fail_triples, pass_triples;
  for (const auto& spec : cfg.fail_paths) {
    auto t = parse_path_spec(spec);
    if (!t) {
      s.message = "bad --fail-path '" + spec + "' (want flag,dir,prefix)";
      return s;
    }
    fail_triples.push_back(*t);
  }
  for (const auto& spec : cfg.pass_paths) {
    auto t = parse_path_spec(spec);
    if (!t) {
      s.message = "bad --pass-path '" + spec + "' (want flag,dir,prefix)";
      return s;
    }
    pass_triples.push_back(*t);
  }

  std::string cwd;  // checker working directory; empty inherits
  std::vector<std::string> base_args;
  std::string fail_bin = cfg.fail_checker;

  if (!cfg.build_log.empty()) {
    std::ifstream in(cfg.build_log, std::ios::binary);
    if (!in) {
      s.message = "cannot read build log '" + cfg.build_log + "'";
      return s;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string log = buf.str();
    auto err = extract_error(log);
    if (!err) {
      s.message = "no structured error found in the build log";
      return s;
    }
    auto call = select_call(parse_vermin_calls(log), err->file);
    if (!call) {
      s.message = "no VERMIN_CALL line matches failing file '" + err->file + "'";
      return s;
    }
    if (fail_bin.empty()) {
      if (call->args.empty()) {
        s.message = "selected VERMIN_CALL has no arguments";
        return s;
      }
      fail_bin = call->args[0];
    }
    cwd = call->cwd;
    std::vector<std::string> rest(call->args.begin() + (call->args.empty() ? 0 : 1),
                                  call->args.end());
    rest = filter_args(rest);
    for (const auto& a : rest)
      if (!arg_names_file(a, err->file)) base_args.push_back(a);
    for (const auto& d : call->env_dirs) {
      base_args.push_back("-Q");
      base_args.push_back(d);
      base_args.push_back("");
    }
    s.target = detail::resolve_against(cwd, err->file);
  } else {
    if (cfg.file.empty()) {
      s.message = "either --file or --build-log is required";
      return s;
    }
    if (fail_bin.empty()) {
      s.message = "--fail-checker is required with --file";
      return s;
    }
    base_args = filter_args(cfg.args);
    s.target = cfg.file;
  }

  if (const char* vp = std::getenv("VERMIN_PATH")) {
    for (const auto& d : split_on(vp, ':')) {
      if (d.empty()) continue;
      base_args.push_back("-Q");
      base_args.push_back(d);
      base_args.push_back("");
    }
  }

  // Search roots for dependency discovery come from -Q/-R pairs.
  for (std::size_t i = 0; i + 2 < base_args.size(); ++i)
    if (base_args[i] == "-Q" || base_args[i] == "-R")
      s.roots.push_back({detail::resolve_against(cwd, base_args[i + 1]), base_args[i + 2]});
  for (const auto& t : fail_triples)
    s.roots.push_back({detail::resolve_against(cwd, t[1]), t[2]});

  auto compose = [&](const std::string& bin,
                     const std::vector<std::array<std::string, 3>>& triples) {
    CheckerCommand cmd;
    cmd.argv.push_back(bin);
    cmd.argv.insert(cmd.argv.end(), base_args.begin(), base_args.end());
    for (const auto& t : triples) {
      cmd.argv.push_back(t[0]);
      cmd.argv.push_back(t[1]);
      cmd.argv.push_back(t[2]);
    }
    if (!cfg.stdlib_prefix.empty()) {
      cmd.argv.push_back("--stdlib-prefix");
      cmd.argv.push_back(cfg.stdlib_prefix);
    }
    cmd.working_dir = cwd;
    return cmd;
  };

  s.fail_cmd = compose(fail_bin, fail_triples);
  s.single_version = cfg.single_version || cfg.pass_checker.empty();
  if (!s.single_version) s.pass_cmd = compose(cfg.pass_checker, pass_triples);
  s.ok = true;
  return s;
}

class Driver {
 public:
  explicit Driver(DriverConfig cfg) : cfg_(std::move(cfg)) {}

  // Exit codes: 0 converged; 10 the error cannot be (re)established from the
  // input; 11 interrupted with a checkpoint saved; 12 configuration or
  // internal error.
  int run() {
    auto setup = resolve_setup(cfg_);
    if (!setup.ok) return fail(12, setup.message);
    if (cfg_.output.empty()) return fail(12, "--output is required");
    if (setup.single_version && !cfg_.single_version)
      std::cout << "vermin: no passing checker given; single-version mode\n";
    std::string checkpoint_path =
        cfg_.checkpoint_path.empty() ? cfg_.output + ".ckpt.json" : cfg_.checkpoint_path;
    {
      auto parent = std::filesystem::path(cfg_.output).parent_path();
      if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
      }
    }

    Oracle::Config oc;
    oc.fail_cmd = setup.fail_cmd;
    oc.pass_cmd = setup.pass_cmd;
    oc.scratch_path = cfg_.output;
    oc.check_timeout = cfg_.check_timeout;
    oc.single_version = setup.single_version;
    Oracle oracle(oc);

    MinimizationRun run;
    OracleStats base_stats;
    std::string original_file;
    std::size_t original_lines = 0;

    if (cfg_.resume) {
      auto cp = load_checkpoint(checkpoint_path);
      if (!cp) return fail(10, "cannot load checkpoint '" + checkpoint_path + "'");
      oracle.adopt(cp->expected, cp->timeout);
      run = std::move(cp->run);
      base_stats = cp->stats;
      original_file = cp->original_file;
      original_lines = cp->original_lines;
    } else {
      std::ifstream in(setup.target, std::ios::binary);
      if (!in) return fail(10, "cannot read '" + setup.target + "'");
      std::ostringstream buf;
      buf << in.rdbuf();
      std::string original = buf.str();
      auto parsed = Document::parse(original);
      if (!parsed.doc) {
        auto& e = *parsed.error;
        return fail(10, "cannot split '" + setup.target + "': unterminated " +
                        (e.kind == SplitError::UnterminatedComment ? "comment"
                                                                   : "string") +
                        " at offset " + std::to_string(e.offset));
      }
      auto init = oracle.initialize(original);
      if (!init.ok) return fail(10, init.message);
      run.doc = std::move(*parsed.doc);
      run.error = *init.error;
      original_file = setup.target;
      original_lines = run.doc.line_count();
      std::cout << "vermin: reproduced the error (line " << run.error.line
                << "), per-check timeout " << oracle.timeout() << "s\n";
    }

    std::optional<DepResolver> resolver;
    if (!setup.roots.empty()) {
      DepResolver::Config rc;
      rc.fail_cmd = setup.fail_cmd;
      rc.roots = setup.roots;
      auto parent = std::filesystem::path(cfg_.output).parent_path();
      rc.scratch_dir = parent.empty() ? "." : parent.string();
      resolver.emplace(std::move(rc));
    }

    SchedulerOptions opts;
    opts.inline_all_first = cfg_.inline_all_first;
    opts.preserve_error_script = cfg_.preserve_error_script;
    opts.wall_budget = cfg_.wall_budget;
    opts.stop_after_accepts = cfg_.stop_after_accepts;
    Scheduler sched(oracle, resolver ? &*resolver : nullptr, opts);

    auto assemble = [&](const MinimizationRun& r) {
      Checkpoint cp;
      cp.original_file = original_file;
      cp.original_lines = original_lines;
      cp.expected = oracle.expected();
      cp.timeout = oracle.timeout();
      cp.run = r;
      cp.stats = add_stats(base_stats, oracle.stats());
      return cp;
    };
    sched.on_checkpoint([&](const MinimizationRun& r) {
      save_checkpoint(checkpoint_path, assemble(r));
    });
    if (cfg_.verbose)
      sched.on_event([](const std::string& m) { std::cout << "vermin: " << m << "\n"; });

    RunStatus status;
    try {
      status = sched.run(run);
    } catch (const std::exception& e) {
      std::cerr << "vermin: internal error: " << e.what() << "\n";
      return 12;
    }
    save_checkpoint(checkpoint_path, assemble(run));

    // Final artifacts: measured compile time, header, output, stats.
    std::string final_render = run.doc.render();
    std::array<double, 3> times{oracle.measure_fail_leg(final_render),
                                oracle.measure_fail_leg(final_render),
                                oracle.measure_fail_leg(final_render)};
    std::sort(times.begin(), times.end());
    double compile_time = times[1];

    std::size_t final_lines = run.doc.line_count();
    std::size_t removed = run.state.removed_lines();
    double ratio = (final_lines + removed) == 0
                       ? 1.0
                       : (double)final_lines / (double)(final_lines + removed);
    std::size_t corpus_lines = original_lines + run.state.inlined_lines_total;

    std::string failed = "none";
    if (!run.state.failed_inlines.empty()) {
      failed.clear();
      for (const auto& f : run.state.failed_inlines) {
        if (!failed.empty()) failed += ", ";
        failed += f;
      }
    }

    std::string header;
    auto kv = [&](const std::string& k, const std::string& v) {
      header += "(* " + k + ": " + v + " *)\n";
    };
    kv("tool-version", "vermin " + std::string(kVersion));
    kv("original-file", original_file);
    kv("original-lines", std::to_string(corpus_lines));
    kv("final-lines", std::to_string(final_lines));
    kv("reduction-ratio", format(ratio, "%.6f"));
    kv("expected-compile-time-seconds", format(compile_time, "%.1f"));
    kv("failed-inlines", failed);
    kv("pass-ledger", ledger_summary(run.state.ledger));
    {
      std::ofstream out(cfg_.output, std::ios::binary | std::ios::trunc);
      if (!out) return fail(12, "cannot write '" + cfg_.output + "'");
      out << header << final_render;
    }

    if (!cfg_.stats_path.empty()) {
      auto st = add_stats(base_stats, oracle.stats());
      nlohmann::json js;
      js["status"] = status == RunStatus::Converged
                         ? "converged"
                         : (status == RunStatus::BudgetExhausted ? "budget-exhausted"
                                                                 : "interrupted");
      js["original_file"] = original_file;
      js["original_lines"] = corpus_lines;
      js["final_lines"] = final_lines;
      js["reduction_ratio"] = ratio;
      js["expected_compile_time_seconds"] = compile_time;
      js["failed_inlines"] = run.state.failed_inlines;
      js["checks"] = st.checks;
      js["runs"] = st.runs;
      js["cache_hits"] = st.cache_hits;
      js["accepted"] = st.accepted;
      js["rejected"] = st.rejected;
      js["checker_wall"] = st.checker_wall;
      nlohmann::json ledger = nlohmann::json::array();
      for (const auto& e : run.state.ledger) ledger.push_back(detail::to_json(e));
      js["ledger"] = std::move(ledger);
      std::ofstream out(cfg_.stats_path, std::ios::binary | std::ios::trunc);
      out << js.dump(2) << '\n';
    }

    if (status == RunStatus::Converged) {
      std::cout << "vermin: converged: " << corpus_lines << " -> " << final_lines
                << " lines, output " << cfg_.output << "\n";
      return 0;
    }
    std::cout << "vermin: interrupted ("
              << (status == RunStatus::BudgetExhausted ? "wall budget exhausted"
                                                       : "acceptance limit reached")
              << "); resume with --resume using checkpoint " << checkpoint_path << "\n";
    return 11;
  }

 private:
  static int fail(int code, const std::string& message) {
    std::cerr << "vermin: " << message << "\n";
    return code;
  }

  static OracleStats add_stats(const OracleStats& a, const OracleStats& b) {
    OracleStats s;
    s.checks = a.checks + b.checks;
    s.runs = a.runs + b.runs;
    s.cache_hits = a.cache_hits + b.cache_hits;
    s.accepted = a.accepted + b.accepted;
    s.rejected = a.rejected + b.rejected;
    s.checker_wall = a.checker_wall + b.checker_wall;
    return s;
  }

  static std::string format(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
  }

  DriverConfig cfg_;
};

}  // namespace vermin
