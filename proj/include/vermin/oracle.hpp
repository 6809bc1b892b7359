#pragma once

// Interestingness oracle. A candidate document is interesting when the
// failing checker still rejects it with an equivalent error signature and
// the passing checker still accepts it. Each checker leg's verdict is cached
// by (render hash, checker identity) so repeated candidates cost nothing.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vermin/error_signature.hpp"
#include "vermin/subprocess.hpp"

namespace vermin {

struct CheckerCommand {
  std::vector<std::string> argv;  // candidate file path is appended at run time
  std::string working_dir;
  std::vector<std::pair<std::string, std::string>> env;

  std::string identity() const {
    std::string id;
    for (const auto& a : argv) {
      id += a;
      id += '\0';
    }
    id += '|';
    id += working_dir;
    for (const auto& [k, v] : env) {
      id += '\0';
      id += k;
      id += '=';
      id += v;
    }
    return id;
  }
};

enum class CheckOutcome {
  Interesting,
  PassLegFailed,
  FailLegPassed,
  DifferentError,
  NoError,
  Crash,
  Timeout,
};

inline const char* to_string(CheckOutcome o) {
  switch (o) {
    case CheckOutcome::Interesting: return "interesting";
    case CheckOutcome::PassLegFailed: return "pass-leg-failed";
    case CheckOutcome::FailLegPassed: return "fail-leg-passed";
    case CheckOutcome::DifferentError: return "different-error";
    case CheckOutcome::NoError: return "no-error";
    case CheckOutcome::Crash: return "crash";
    case CheckOutcome::Timeout: return "timeout";
  }
  return "?";
}

struct OracleResult {
  CheckOutcome outcome = CheckOutcome::Crash;
  std::optional<RawError> error;  // fail-leg error when one was extracted
  bool from_cache = false;        // both legs answered from cache
};

struct OracleStats {
  std::size_t checks = 0;     // candidate checks
  std::size_t runs = 0;       // actual checker subprocess runs
  std::size_t cache_hits = 0; // leg verdicts answered from cache
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double checker_wall = 0.0;  // seconds spent inside checker processes
};

class Oracle {
 public:
  struct Config {
    CheckerCommand fail_cmd;
    CheckerCommand pass_cmd;
    std::string scratch_path;  // candidate file both checkers compile
    NormalizeOptions normalize = {};
    double check_timeout = 0.0;    // seconds; 0 derives 3x the initial failing run
    double init_timeout = 600.0;   // cap for the initial measuring runs
    bool single_version = false;   // no passing checker available; skip that leg
  };

  struct InitResult {
    bool ok = false;
    std::string message;           // diagnostic when !ok
    std::optional<RawError> error; // initial error when ok
  };

  explicit Oracle(Config cfg) : cfg_(std::move(cfg)) {}

  /// Establish the expected signature from the original text: the fail leg
  /// must reject it with an extractable error and the pass leg must accept
  /// it. Derives the per-check timeout from the failing run's wall time.
  InitResult initialize(const std::string& original) {
    InitResult res;
    auto fail = run_leg(cfg_.fail_cmd, original, cfg_.init_timeout);
    if (fail.timed_out) {
      res.message = "initial failing-checker run timed out";
      return res;
    }
    if (crashed(fail)) {
      res.message = "initial failing-checker run crashed";
      return res;
    }
    if (fail.exit_code == 0) {
      res.message = "input compiles cleanly under the failing checker";
      return res;
    }
    auto err = extract_error(fail.output);
    if (!err) {
      res.message = "no structured error found in the failing checker's output";
      return res;
    }
    if (cfg_.check_timeout <= 0.0)
      timeout_ = std::max(10.0, 3.0 * fail.wall_seconds);
    else
      timeout_ = cfg_.check_timeout;

    if (!cfg_.single_version) {
      auto pass = run_leg(cfg_.pass_cmd, original, cfg_.init_timeout);
      if (pass.timed_out || crashed(pass) || pass.exit_code != 0) {
        res.message = "input does not compile under the passing checker";
        return res;
      }
    }
    expected_ = normalize(err->message, cfg_.normalize);
    res.ok = true;
    res.error = std::move(err);
    return res;
  }

  /// Resume path: adopt a previously established signature and timeout
  /// without rerunning the initial measurement.
  void adopt(ErrorSignature expected, double timeout_seconds) {
    expected_ = std::move(expected);
    timeout_ = timeout_seconds;
  }

  OracleResult check(const std::string& candidate) {
    ++stats_.checks;
    OracleResult out;
    bool cached = true;
    bool pass_ok = true;
    if (!cfg_.single_version) {
      auto pass = run_leg_cached(cfg_.pass_cmd, candidate, cached);
      if (pass.timed_out) {
        out.outcome = CheckOutcome::Timeout;
        pass_ok = false;
      } else if (crashed(pass)) {
        out.outcome = CheckOutcome::Crash;
        pass_ok = false;
      } else if (pass.exit_code != 0) {
        out.outcome = CheckOutcome::PassLegFailed;
        pass_ok = false;
      }
    }
    if (pass_ok) {
      auto fail = run_leg_cached(cfg_.fail_cmd, candidate, cached);
      if (fail.timed_out) {
        out.outcome = CheckOutcome::Timeout;
      } else if (crashed(fail)) {
        out.outcome = CheckOutcome::Crash;
      } else if (fail.exit_code == 0) {
        out.outcome = CheckOutcome::FailLegPassed;
      } else {
        auto err = extract_error(fail.output);
        if (!err) {
          out.outcome = CheckOutcome::NoError;
        } else {
          auto sig = normalize(err->message, cfg_.normalize);
          out.outcome = equivalent(sig, expected_) ? CheckOutcome::Interesting
                                                   : CheckOutcome::DifferentError;
          out.error = std::move(err);
        }
      }
    }
    out.from_cache = cached;
    if (out.outcome == CheckOutcome::Interesting)
      ++stats_.accepted;
    else
      ++stats_.rejected;
    return out;
  }

  /// Wall time of one fresh fail-leg run on `text` (used for the final
  /// compile-time estimate); bypasses and does not touch the cache.
  double measure_fail_leg(const std::string& text) {
    write_scratch(text);
    auto argv = cfg_.fail_cmd.argv;
    argv.push_back(cfg_.scratch_path);
    auto res = run_process(argv, timeout_, cfg_.fail_cmd.working_dir, cfg_.fail_cmd.env);
    return res.wall_seconds;
  }

  const ErrorSignature& expected() const { return expected_; }
  double timeout() const { return timeout_; }
  const OracleStats& stats() const { return stats_; }
  const std::string& scratch_path() const { return cfg_.scratch_path; }

 private:
  struct LegVerdict {
    int exit_code = -1;
    bool timed_out = false;
    bool signaled = false;
    bool spawn_failed = false;
    std::string output;
    double wall_seconds = 0.0;
  };

  static bool crashed(const LegVerdict& v) {
    return v.signaled || v.spawn_failed || v.exit_code == 2;
  }

  static std::uint64_t hash_text(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  void write_scratch(const std::string& text) {
    std::ofstream out(cfg_.scratch_path, std::ios::binary | std::ios::trunc);
    out << text;
  }

  LegVerdict run_leg(const CheckerCommand& cmd, const std::string& text, double timeout) {
    write_scratch(text);
    auto argv = cmd.argv;
    argv.push_back(cfg_.scratch_path);
    auto res = run_process(argv, timeout, cmd.working_dir, cmd.env);
    ++stats_.runs;
    stats_.checker_wall += res.wall_seconds;
    LegVerdict v{res.exit_code, res.timed_out, res.signaled, res.spawn_failed,
                 std::move(res.output), res.wall_seconds};
    cache_[{hash_text(text), cmd.identity()}] = v;
    return v;
  }

  LegVerdict run_leg_cached(const CheckerCommand& cmd, const std::string& text,
                            bool& cached) {
    auto key = std::make_pair(hash_text(text), cmd.identity());
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    cached = false;
    return run_leg(cmd, text, timeout_);
  }

  Config cfg_;
  ErrorSignature expected_;
  double timeout_ = 10.0;
  OracleStats stats_;
  std::map<std::pair<std::uint64_t, std::string>, LegVerdict> cache_;
};

}  // namespace vermin
