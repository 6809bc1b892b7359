#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "test_util.hpp"
#include "vermin/oracle.hpp"

using testutil::TempDir;
using testutil::contains;
using vermin::CheckOutcome;
using vermin::Oracle;

namespace {

Oracle::Config toy_config(const TempDir& t) {
  Oracle::Config cfg;
  cfg.fail_cmd.argv = {TOYCHECK_BIN, "--version=fail"};
  cfg.pass_cmd.argv = {TOYCHECK_BIN, "--version=pass"};
  cfg.scratch_path = t.file("scratch.v");
  return cfg;
}

std::string write_script(const TempDir& t, const std::string& name,
                         const std::string& body) {
  auto path = t.write(name, "#!/bin/sh\n" + body + "\n");
  std::filesystem::permissions(path, std::filesystem::perms::owner_all |
                                         std::filesystem::perms::group_read |
                                         std::filesystem::perms::others_read);
  return path;
}

const std::string kOriginal =
    "Definition keep := 1.\n"
    "Definition junk := 2.\n"
    "trigger_bug \"boom\" keep.\n";

}  // namespace

TEST_CASE("initialize establishes signature and timeout") {
  TempDir t;
  Oracle oracle(toy_config(t));
  auto init = oracle.initialize(kOriginal);
  REQUIRE(init.ok);
  REQUIRE(init.error.has_value());
  CHECK(init.error->line == 3);
  CHECK(contains(init.error->message, "Error: boom"));
  CHECK(oracle.expected().cls == vermin::ErrorClass::Normalized);
  CHECK(oracle.expected().text == "Error: boom");
  CHECK(oracle.timeout() >= 10.0);
}

TEST_CASE("initialize rejects unsuitable inputs") {
  TempDir t;
  {
    Oracle oracle(toy_config(t));
    auto init = oracle.initialize("Definition a := 1.\n");
    CHECK_FALSE(init.ok);
    CHECK(contains(init.message, "compiles cleanly"));
  }
  {
    Oracle oracle(toy_config(t));
    auto init = oracle.initialize("Definition a := undefined_thing.\n");
    CHECK_FALSE(init.ok);
    CHECK(contains(init.message, "passing checker"));
  }
}

TEST_CASE("candidate verdicts") {
  TempDir t;
  Oracle oracle(toy_config(t));
  REQUIRE(oracle.initialize(kOriginal).ok);

  SECTION("removing junk is interesting") {
    auto r = oracle.check("Definition keep := 1.\ntrigger_bug \"boom\" keep.\n");
    CHECK(r.outcome == CheckOutcome::Interesting);
    REQUIRE(r.error.has_value());
    CHECK(r.error->line == 2);
  }
  SECTION("removing a needed definition fails the pass leg") {
    auto r = oracle.check("Definition junk := 2.\ntrigger_bug \"boom\" keep.\n");
    CHECK(r.outcome == CheckOutcome::PassLegFailed);
  }
  SECTION("removing the error makes the fail leg pass") {
    auto r = oracle.check("Definition keep := 1.\nDefinition junk := 2.\n");
    CHECK(r.outcome == CheckOutcome::FailLegPassed);
  }
  SECTION("changed message is a different error") {
    auto r = oracle.check("Definition keep := 1.\ntrigger_bug \"other\" keep.\n");
    CHECK(r.outcome == CheckOutcome::DifferentError);
  }
  SECTION("crashing checker is a rejection") {
    auto r = oracle.check("trigger_crash.\n");
    CHECK(r.outcome == CheckOutcome::Crash);
  }
}

TEST_CASE("leg verdicts are cached by render and checker") {
  TempDir t;
  Oracle oracle(toy_config(t));
  REQUIRE(oracle.initialize(kOriginal).ok);
  std::string candidate = "Definition keep := 1.\ntrigger_bug \"boom\" keep.\n";
  auto first = oracle.check(candidate);
  CHECK_FALSE(first.from_cache);
  auto runs_before = oracle.stats().runs;
  auto second = oracle.check(candidate);
  CHECK(second.from_cache);
  CHECK(second.outcome == first.outcome);
  CHECK(oracle.stats().runs == runs_before);
  CHECK(oracle.stats().cache_hits >= 2);
}

TEST_CASE("timeouts are rejections") {
  TempDir t;
  Oracle::Config cfg;
  cfg.pass_cmd.argv = {write_script(t, "slow.sh", "sleep 30")};
  cfg.fail_cmd.argv = {write_script(t, "fail.sh", "echo nope; exit 1")};
  cfg.scratch_path = t.file("scratch.v");
  Oracle oracle(cfg);
  oracle.adopt(vermin::normalize("Error: boom"), 0.3);
  auto r = oracle.check("anything.\n");
  CHECK(r.outcome == CheckOutcome::Timeout);
}

TEST_CASE("unstructured failure output is a no-error rejection") {
  TempDir t;
  Oracle::Config cfg;
  cfg.pass_cmd.argv = {write_script(t, "ok.sh", "exit 0")};
  cfg.fail_cmd.argv = {write_script(t, "bad.sh", "echo mystery failure; exit 1")};
  cfg.scratch_path = t.file("scratch.v");
  Oracle oracle(cfg);
  oracle.adopt(vermin::normalize("Error: boom"), 5.0);
  auto r = oracle.check("anything.\n");
  CHECK(r.outcome == CheckOutcome::NoError);
}

TEST_CASE("measure_fail_leg times a fresh run") {
  TempDir t;
  Oracle oracle(toy_config(t));
  REQUIRE(oracle.initialize(kOriginal).ok);
  CHECK(oracle.measure_fail_leg(kOriginal) > 0.0);
}
