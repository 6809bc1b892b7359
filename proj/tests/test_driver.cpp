#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_util.hpp"
#include "vermin/driver.hpp"
#include "vermin/subprocess.hpp"

using testutil::TempDir;
using testutil::contains;
using testutil::read_file;
using namespace vermin;

namespace {

std::string write_script(const TempDir& t, const std::string& name,
                         const std::string& body) {
  auto path = t.write(name, "#!/bin/sh\n" + body + "\n");
  std::filesystem::permissions(path, std::filesystem::perms::owner_all |
                                         std::filesystem::perms::group_read |
                                         std::filesystem::perms::others_read);
  return path;
}

/// Scratch dir with fail/pass wrapper scripts around the toy checker.
struct BinFixture {
  TempDir t;
  std::string fail_sh, pass_sh;

  BinFixture() {
    fail_sh = write_script(t, "fail.sh", std::string("exec \"") + TOYCHECK_BIN +
                                             "\" --version=fail \"$@\"");
    pass_sh = write_script(t, "pass.sh", std::string("exec \"") + TOYCHECK_BIN +
                                             "\" --version=pass \"$@\"");
  }

  ProcessResult vermin(std::vector<std::string> extra) const {
    std::vector<std::string> argv{VERMIN_BIN};
    argv.insert(argv.end(), extra.begin(), extra.end());
    return run_process(argv, 120.0, t.path());
  }
};

const std::string kStandalone =
    "Definition used := 0.\n"
    "Definition unused := 1.\n"
    "Lemma junk : True.\n"
    "Proof.\n"
    "exact I.\n"
    "Qed.\n"
    "trigger_bug \"boom\" used.\n"
    "Definition after := 2.\n";

/// Output files start with `(* key: value *)` lines; return the rest.
std::string strip_header(const std::string& text) {
  std::size_t pos = 0;
  while (text.compare(pos, 3, "(* ") == 0) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) return "";
    pos = nl + 1;
  }
  return text.substr(pos);
}

std::vector<std::string> header_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (text.compare(pos, 3, "(* ") == 0) {
    auto nl = text.find('\n', pos);
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("filter_args drops batch flags and valued options") {
  std::vector<std::string> in{"-batch", "-time",      "-noglob", "-o",  "x",
                              "-dump-glob", "g",      "-Q",      "lib", "Top",
                              "keep"};
  CHECK(filter_args(in) == std::vector<std::string>{"-Q", "lib", "Top", "keep"});
}

TEST_CASE("parse_vermin_calls reads well-formed lines and skips the rest") {
  std::string log =
      "make: noise\n"
      "VERMIN_CALL: cwd=/a/b env_path=/p:/q args=[\"bin\",\"-Q\",\"l\",\"T\",\"f.v\"]\n"
      "VERMIN_CALL: cwd=/c env_path= args=[\"bin2\",\"g.v\"]\n"
      "VERMIN_CALL: cwd=/bad args=[\"x\"]\n"
      "VERMIN_CALL: cwd=/bad2 env_path= args=[1,2]\n";
  auto calls = parse_vermin_calls(log);
  REQUIRE(calls.size() == 2);
  CHECK(calls[0].cwd == "/a/b");
  CHECK(calls[0].env_dirs == std::vector<std::string>{"/p", "/q"});
  CHECK(calls[0].args == std::vector<std::string>{"bin", "-Q", "l", "T", "f.v"});
  CHECK(calls[1].cwd == "/c");
  CHECK(calls[1].env_dirs.empty());
  CHECK(calls[1].args == std::vector<std::string>{"bin2", "g.v"});
}

TEST_CASE("select_call prefers exact path matches, last one wins") {
  std::vector<CheckerCall> calls{
      {"/one", {}, {"bin", "src/f.v"}},
      {"/two", {}, {"bin", "f.v"}},
      {"/three", {}, {"bin", "src/f.v"}},
  };
  auto c = select_call(calls, "src/f.v");
  REQUIRE(c);
  CHECK(c->cwd == "/three");

  auto byname = select_call(calls, "elsewhere/f.v");
  REQUIRE(byname);
  CHECK(byname->cwd == "/three");

  CHECK_FALSE(select_call(calls, "missing.v"));
}

TEST_CASE("parse_path_spec accepts pairs and triples") {
  auto t = parse_path_spec("-R,lib,Top");
  REQUIRE(t);
  CHECK((*t) == std::array<std::string, 3>{"-R", "lib", "Top"});
  auto pair = parse_path_spec("lib,Top");
  REQUIRE(pair);
  CHECK((*pair) == std::array<std::string, 3>{"-Q", "lib", "Top"});
  CHECK_FALSE(parse_path_spec("lib"));
  CHECK_FALSE(parse_path_spec(",lib,Top"));
}

TEST_CASE("resolve_setup validates required flags") {
  DriverConfig cfg;
  cfg.output = "o.v";
  auto s = resolve_setup(cfg);
  CHECK_FALSE(s.ok);
  CHECK(contains(s.message, "--file"));

  cfg.file = "x.v";
  s = resolve_setup(cfg);
  CHECK_FALSE(s.ok);
  CHECK(contains(s.message, "--fail-checker"));

  // Omitting the passing checker implies single-version mode.
  cfg.fail_checker = "fc";
  s = resolve_setup(cfg);
  REQUIRE(s.ok);
  CHECK(s.single_version);
  CHECK(s.pass_cmd.argv.empty());

  cfg.pass_checker = "pc";
  s = resolve_setup(cfg);
  REQUIRE(s.ok);
  CHECK_FALSE(s.single_version);
  CHECK(s.pass_cmd.argv == std::vector<std::string>{"pc"});

  cfg.single_version = true;
  s = resolve_setup(cfg);
  REQUIRE(s.ok);
  CHECK(s.single_version);
  CHECK(s.pass_cmd.argv.empty());
}

TEST_CASE("resolve_setup collects roots from args, paths, and VERMIN_PATH") {
  DriverConfig cfg;
  cfg.file = "x.v";
  cfg.fail_checker = "fc";
  cfg.pass_checker = "pc";
  cfg.args = {"-Q", "libx", "P"};
  cfg.fail_paths = {"-R,/abs/lib,Top"};
  setenv("VERMIN_PATH", "/d1:/d2", 1);
  auto s = resolve_setup(cfg);
  unsetenv("VERMIN_PATH");
  REQUIRE(s.ok);

  REQUIRE(s.roots.size() == 4);
  auto cwd = std::filesystem::current_path();
  CHECK(s.roots[0].dir == (cwd / "libx").string());
  CHECK(s.roots[0].prefix == "P");
  CHECK(s.roots[1].dir == "/d1");
  CHECK(s.roots[1].prefix == "");
  CHECK(s.roots[2].dir == "/d2");
  CHECK(s.roots[3].dir == "/abs/lib");
  CHECK(s.roots[3].prefix == "Top");

  CHECK(s.fail_cmd.argv ==
        std::vector<std::string>{"fc", "-Q", "libx", "P", "-Q", "/d1", "", "-Q",
                                 "/d2", "", "-R", "/abs/lib", "Top"});
  // Pass leg shares base args but takes its own path triples.
  CHECK(s.pass_cmd.argv == std::vector<std::string>{"pc", "-Q", "libx", "P", "-Q",
                                                    "/d1", "", "-Q", "/d2", ""});
}

TEST_CASE("driver minimizes a standalone file and writes the header") {
  BinFixture fx;
  fx.t.write("input.v", kStandalone);
  auto res = fx.vermin({"--file", "input.v", "--fail-checker", fx.fail_sh,
                        "--pass-checker", fx.pass_sh, "--output", "out/min.v",
                        "--stats", "out/stats.json"});
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  auto text = read_file(fx.t.file("out/min.v"));
  CHECK(strip_header(text) == "Definition used := 0.\ntrigger_bug \"boom\" used.\n");

  auto hdr = header_lines(text);
  REQUIRE(hdr.size() == 8);
  CHECK(hdr[0] == "(* tool-version: vermin 0.1.0 *)");
  CHECK(hdr[1] == "(* original-file: input.v *)");
  CHECK(hdr[2] == "(* original-lines: 8 *)");
  CHECK(hdr[3] == "(* final-lines: 2 *)");
  CHECK(hdr[4] == "(* reduction-ratio: 0.250000 *)");
  CHECK(contains(hdr[5], "(* expected-compile-time-seconds: "));
  CHECK(hdr[6] == "(* failed-inlines: none *)");
  CHECK(hdr[7] ==
        "(* pass-ledger: truncate-after-error:1/1; "
        "remove-unused-definitions:2/2; remove-blocks:0/4; "
        "split-definitions:0/2 *)");

  auto js = nlohmann::json::parse(read_file(fx.t.file("out/stats.json")));
  CHECK(js["status"] == "converged");
  CHECK(js["original_lines"] == 8);
  CHECK(js["final_lines"] == 2);
  CHECK(js["accepted"] == 3);
  CHECK(js["failed_inlines"].empty());
  CHECK(js["checks"].get<std::size_t>() >= 3);
  CHECK(js["runs"].get<std::size_t>() > 0);
  // One raw entry per pass execution that produced candidates; the header
  // aggregates these by name.
  CHECK(js["ledger"].size() == 8);
}

TEST_CASE("driver build-log mode inlines the dependency chain") {
  BinFixture fx;
  fx.t.write("lib/Base.v", "Definition base := 0.\n");
  fx.t.write("lib/Mid.v", "Require Import Top.Base.\nDefinition mid := base.\n");
  fx.t.write("lib/Leaf.v", "Require Import Top.Mid.\nDefinition leaf := mid.\n");
  fx.t.write("main.v", "Require Import Top.Leaf.\ntrigger_bug \"x\" leaf.\n");
  fx.t.write("build.log",
             "make[1]: Entering directory '" + fx.t.path() + "'\n" +
                 "VERMIN_CALL: cwd=" + fx.t.path() + " env_path= args=[\"" +
                 fx.fail_sh + "\",\"-Q\",\"lib\",\"Top\",\"-batch\",\"lib/Leaf.v\"]\n" +
                 "VERMIN_CALL: cwd=" + fx.t.path() + " env_path= args=[\"" +
                 fx.fail_sh + "\",\"-Q\",\"lib\",\"Top\",\"-batch\",\"main.v\"]\n" +
                 "File \"main.v\", line 2, characters 0-11:\nError: x\n");

  auto res = fx.vermin({"--build-log", "build.log", "--pass-checker", fx.pass_sh,
                        "--output", "out/min.v"});
  INFO(res.output);
  REQUIRE(res.exit_code == 0);

  auto text = read_file(fx.t.file("out/min.v"));
  CHECK(strip_header(text) ==
        "Module Export Leaf.\n"
        "Module Export Mid.\n"
        "Module Export Base.\n"
        "Definition base := 0.\n"
        "End Base.\n"
        "Definition mid := base.\n"
        "End Mid.\n"
        "Definition leaf := mid.\n"
        "End Leaf.\n"
        "trigger_bug \"x\" leaf.\n");
  auto hdr = header_lines(text);
  REQUIRE(hdr.size() == 8);
  // 2 lines in main.v plus 5 inlined dependency lines.
  CHECK(hdr[2] == "(* original-lines: 7 *)");
  CHECK(hdr[6] == "(* failed-inlines: none *)");
}

TEST_CASE("driver resumes from checkpoints to an identical result") {
  BinFixture fx;
  fx.t.write("input.v", kStandalone);
  std::vector<std::string> base{"--file",         "input.v",  "--fail-checker",
                                fx.fail_sh,       "--pass-checker", fx.pass_sh};

  auto straight = base;
  straight.insert(straight.end(), {"--output", "ref/min.v"});
  REQUIRE(fx.vermin(straight).exit_code == 0);

  auto limited = base;
  limited.insert(limited.end(),
                 {"--output", "inc/min.v", "--stop-after-accepts", "1"});
  auto res = fx.vermin(limited);
  int rounds = 0;
  while (res.exit_code == 11 && rounds < 20) {
    auto again = limited;
    again.push_back("--resume");
    res = fx.vermin(again);
    ++rounds;
  }
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  CHECK(rounds == 3);  // one interruption per accepted edit
  CHECK(read_file(fx.t.file("inc/min.v")) == read_file(fx.t.file("ref/min.v")));
}

TEST_CASE("driver single-version mode needs no passing checker") {
  BinFixture fx;
  fx.t.write("input.v", kStandalone);
  auto res = fx.vermin({"--file", "input.v", "--fail-checker", fx.fail_sh,
                        "--single-version", "--output", "out/min.v"});
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  CHECK(strip_header(read_file(fx.t.file("out/min.v"))) ==
        "Definition used := 0.\ntrigger_bug \"boom\" used.\n");
}

TEST_CASE("driver reports setup failures with exit 10") {
  BinFixture fx;
  SECTION("missing input file") {
    auto res = fx.vermin({"--file", "absent.v", "--fail-checker", fx.fail_sh,
                          "--pass-checker", fx.pass_sh, "--output", "o.v"});
    CHECK(res.exit_code == 10);
    CHECK(contains(res.output, "cannot read"));
  }
  SECTION("input compiles cleanly") {
    fx.t.write("clean.v", "Definition ok := 0.\n");
    auto res = fx.vermin({"--file", "clean.v", "--fail-checker", fx.fail_sh,
                          "--pass-checker", fx.pass_sh, "--output", "o.v"});
    CHECK(res.exit_code == 10);
  }
}

TEST_CASE("driver checkpoints and exits 11 when the budget runs out") {
  BinFixture fx;
  fx.t.write("input.v", kStandalone);
  std::vector<std::string> base{"--file",         "input.v",  "--fail-checker",
                                fx.fail_sh,       "--pass-checker", fx.pass_sh};
  auto straight = base;
  straight.insert(straight.end(), {"--output", "ref/min.v"});
  REQUIRE(fx.vermin(straight).exit_code == 0);

  auto budgeted = base;
  budgeted.insert(budgeted.end(),
                  {"--output", "out/min.v", "--wall-budget", "0.000000001",
                   "--stats", "out/stats.json"});
  auto res = fx.vermin(budgeted);
  INFO(res.output);
  CHECK(res.exit_code == 11);
  CHECK(std::filesystem::exists(fx.t.file("out/min.v.ckpt.json")));
  auto js = nlohmann::json::parse(read_file(fx.t.file("out/stats.json")));
  CHECK(js["status"] == "budget-exhausted");
  // Nothing was accepted, so the output is the original text plus a header.
  CHECK(strip_header(read_file(fx.t.file("out/min.v"))) == kStandalone);

  // Resuming without the budget finishes and matches the unbudgeted run.
  auto resumed = base;
  resumed.insert(resumed.end(), {"--output", "out/min.v", "--resume"});
  auto fin = fx.vermin(resumed);
  INFO(fin.output);
  REQUIRE(fin.exit_code == 0);
  CHECK(read_file(fx.t.file("out/min.v")) == read_file(fx.t.file("ref/min.v")));
}
