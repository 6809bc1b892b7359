#include <string>

#include <CLI11.hpp>

#include "vermin/driver.hpp"
#include "vermin/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vermin: oracle-driven minimizer for sentence-structured proof files"};
  app.set_version_flag("--version", "vermin " + std::string(vermin::kVersion));

  vermin::DriverConfig cfg;
  app.add_option("--file", cfg.file, "file to minimize (direct mode)");
  app.add_option("--build-log", cfg.build_log,
                 "build log with VERMIN_CALL lines and the failure (build-log mode)");
  app.add_option("--fail-checker", cfg.fail_checker,
                 "checker binary that reproduces the error");
  app.add_option("--pass-checker", cfg.pass_checker,
                 "checker binary that accepts the original file");
  app.add_option("--fail-path", cfg.fail_paths,
                 "search path for the failing checker, as flag,dir,prefix");
  app.add_option("--pass-path", cfg.pass_paths,
                 "search path for the passing checker, as flag,dir,prefix");
  app.add_option("--arg", cfg.args, "extra argument passed to both checkers");
  app.add_flag("--inline-all-first", cfg.inline_all_first,
               "inline every dependency before minimizing");
  app.add_flag("--single-version", cfg.single_version,
               "no passing checker is available; accept any matching failure");
  app.add_flag("--preserve-error-script", cfg.preserve_error_script,
               "keep the whole proof script containing the error intact");
  app.add_option("--wall-budget", cfg.wall_budget,
                 "seconds of wall clock before checkpoint-and-exit (0 = unlimited)");
  app.add_option("--check-timeout", cfg.check_timeout,
                 "per-check timeout in seconds (0 = derive from the initial run)");
  app.add_option("--stop-after-accepts", cfg.stop_after_accepts,
                 "checkpoint and exit after this many accepted edits (0 = off)");
  app.add_flag("--resume", cfg.resume, "resume from the checkpoint");
  app.add_option("--output", cfg.output, "minimized output file")->required();
  app.add_option("--stats", cfg.stats_path, "write a JSON stats sidecar here");
  app.add_option("--checkpoint", cfg.checkpoint_path,
                 "checkpoint file (default: <output>.ckpt.json)");
  app.add_option("--stdlib-prefix", cfg.stdlib_prefix,
                 "forwarded to checkers that take --stdlib-prefix");
  app.add_flag("--verbose", cfg.verbose, "log every accepted edit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 12;  // 12: configuration error
  }

  vermin::Driver driver(std::move(cfg));
  return driver.run();
}
