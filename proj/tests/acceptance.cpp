// Acceptance suite: one test case per shipped guarantee, with a listener
// that prints a PASS/FAIL line per criterion.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_util.hpp"
#include "vermin/driver.hpp"
#include "vermin/error_signature.hpp"
#include "vermin/oracle.hpp"
#include "vermin/passes.hpp"
#include "vermin/sentence.hpp"
#include "vermin/subprocess.hpp"

using testutil::TempDir;
using testutil::contains;
using testutil::read_file;
using namespace vermin;

namespace {

class CriterionReporter : public Catch::EventListenerBase {
 public:
  using Catch::EventListenerBase::EventListenerBase;
  void testCaseEnded(const Catch::TestCaseStats& stats) override {
    std::cout << stats.testInfo->name << ": "
              << (stats.totals.assertions.allOk() ? "PASS" : "FAIL") << std::endl;
  }
};

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
    return run_process(argv, 300.0, t.path());
  }
};

std::string strip_header(const std::string& text) {
  std::size_t pos = 0;
  while (text.compare(pos, 3, "(* ") == 0) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) return "";
    pos = nl + 1;
  }
  return text.substr(pos);
}

std::string header_value(const std::string& text, const std::string& key) {
  auto tag = "(* " + key + ": ";
  auto at = text.find(tag);
  if (at == std::string::npos) return "";
  at += tag.size();
  auto end = text.find(" *)", at);
  return text.substr(at, end - at);
}

/// Random single-file fixture: definitions (sometimes chained), throwaway
/// lemmas, comments, one trigger referencing a few earlier names, junk after.
std::string random_fixture(std::mt19937& rng, int idx) {
  auto pct = [&](int p) { return (int)(rng() % 100) < p; };
  std::vector<std::string> names;
  std::string out;
  int serial = 0;
  auto add_def = [&]() {
    std::string n = "g" + std::to_string(idx) + "_" + std::to_string(serial++);
    std::string body =
        names.empty() || pct(60) ? "0" : names[rng() % names.size()];
    out += "Definition " + n + " := " + body + ".\n";
    names.push_back(n);
  };
  auto add_lemma = [&]() {
    out += "Lemma l" + std::to_string(idx) + "_" + std::to_string(serial++) +
           " : True.\nProof.\nexact I.\nQed.\n";
  };
  int pre = 2 + (int)(rng() % 5);
  for (int i = 0; i < pre; ++i) {
    if (pct(65))
      add_def();
    else if (pct(50))
      add_lemma();
    else
      out += "(* filler *)\n";
  }
  if (names.empty()) add_def();
  std::string trig = "trigger_bug \"r" + std::to_string(idx) + "\"";
  int refs = (int)(rng() % 3);
  for (int i = 0; i < refs; ++i) trig += " " + names[rng() % names.size()];
  out += trig + ".\n";
  int post = (int)(rng() % 3);
  for (int i = 0; i < post; ++i) {
    if (pct(70))
      add_def();
    else
      add_lemma();
  }
  return out;
}

Oracle::Config toy_oracle(const std::string& scratch) {
  Oracle::Config oc;
  oc.fail_cmd.argv = {TOYCHECK_BIN, "--version=fail"};
  oc.pass_cmd.argv = {TOYCHECK_BIN, "--version=pass"};
  oc.scratch_path = scratch;
  return oc;
}

}  // namespace

CATCH_REGISTER_LISTENER(CriterionReporter)

TEST_CASE("criterion 1 [golden end-to-end reduction]") {
  BinFixture fx;
  fx.t.write("deps/UsefulTactics.v",
             "Ltac head expr := match expr with | ?f _ => head f | _ => expr end.\n"
             "Ltac head_hnf expr := let expr' := eval hnf in expr in head expr'.\n"
             "Ltac crush := intros; subst; try reflexivity; trigger_bug \"segfault in crush\".\n");
  fx.t.write("main.v",
             "Require Import UsefulTactics.\n"
             "Definition zero := 0. Definition one := 1.\n"
             "Definition two := 2. Definition three := 3.\n"
             "Lemma foo : forall x, x = zero -> S x = one.\n"
             "Proof. crush. Qed.\n");
  auto res = fx.vermin({"--file", "main.v", "--fail-checker", fx.fail_sh,
                        "--pass-checker", fx.pass_sh, "--fail-path", "-Q,deps,",
                        "--pass-path", "-Q,deps,", "--output", "out/min.v"});
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  CHECK(res.wall_seconds < 10.0);

  auto body = strip_header(read_file(fx.t.file("out/min.v")));
  // Exactly the retained logical lines, inside the unique wrapper module.
  CHECK(body ==
        "Module Export UsefulTactics.\n"
        "Ltac crush := intros; subst; try reflexivity; trigger_bug \"segfault in crush\".\n"
        "End UsefulTactics.\n"
        "Definition zero := 0.\n"
        "Definition one := 1.\n"
        "Lemma foo : forall x, x = zero -> S x = one.\n"
        "Proof.\n"
        "crush.\n");
  CHECK(contains(body, "Ltac crush := intros; subst; try reflexivity"));
  CHECK(contains(body, "Definition zero := 0."));
  CHECK(contains(body, "Definition one := 1."));
  CHECK(contains(body, "Lemma foo : forall x, x = zero -> S x = one."));
  CHECK(contains(body, "Proof.\ncrush."));
  CHECK_FALSE(contains(body, "two"));
  CHECK_FALSE(contains(body, "head_hnf"));
  CHECK_FALSE(contains(body, "Qed."));
}

TEST_CASE("criterion 2 [linear oracle-call budget]") {
  TempDir t;
  std::string text;
  for (int i = 1; i <= 200; ++i)
    text += "Definition d" + std::to_string(i) + " := 0.\n";
  std::string trig = "trigger_bug \"blast\"";
  for (int i = 20; i <= 200; i += 20) trig += " d" + std::to_string(i);
  text += trig + ".\n";

  Oracle oracle(toy_oracle(t.file("scratch.v")));
  auto init = oracle.initialize(text);
  REQUIRE(init.ok);
  auto parsed = Document::parse(text);
  REQUIRE(parsed.doc);
  Document doc = std::move(*parsed.doc);
  RawError error = *init.error;

  std::size_t before = oracle.stats().checks;
  MinimizationState st;
  RemoveBlocksBackward pass;
  PassCursor pc;
  bool sweep_accepted = false;
  int sweeps = 0;
  for (;;) {
    auto err_idx = doc.sentence_at_line(error.line);
    PassContext ctx{doc, st, nullptr, {}, 1, 0};
    ctx.error_sentence = err_idx;
    if (err_idx) {
      ctx.protect_first = *err_idx;
      ctx.protect_last = *err_idx;
    }
    auto cand = pass.next(ctx, pc);
    if (!cand) {
      if (sweep_accepted && ++sweeps < 10) {
        pc = PassCursor{};
        sweep_accepted = false;
        continue;
      }
      break;
    }
    auto res = oracle.check(cand->doc.render());
    if (res.outcome == CheckOutcome::Interesting) {
      doc = std::move(cand->doc);
      error = *res.error;
      sweep_accepted = true;
      pc.sub = 0;
      --pc.anchor;
    } else {
      ++pc.sub;
    }
  }

  std::size_t calls = oracle.stats().checks - before;
  CHECK(calls <= 400);  // two linear sweeps over 200 blocks
  CHECK(calls == 210);  // 200 first sweep, 10 survivors re-tried once

  std::string expected;
  for (int i = 20; i <= 200; i += 20)
    expected += "Definition d" + std::to_string(i) + " := 0.\n";
  expected += trig + ".\n";
  CHECK(doc.render() == expected);
}

TEST_CASE("criterion 3 [error equivalence table and laws]") {
  struct Pair {
    const char* a;
    const char* b;
    bool equal;
  };
  const Pair table[] = {
      // Universe inconsistencies match regardless of detail.
      {"Error: Universe inconsistency (cannot enforce u < v).",
       "Error: Universe inconsistency (cannot enforce Top.12 <= Set).", true},
      {"Error: Universe inconsistency.",
       "Error:\nUniverse inconsistency (cannot enforce x < x).", true},
      {"Error: Universe inconsistency (cannot enforce u < v).",
       "Error: The term has type nat.", false},
      // Forgotten-universe anomalies match case-insensitively.
      {"Error: Anomaly \"Forgotten Universe u1.\"",
       "Error: anomaly: forgotten universe v9", true},
      {"Error: Anomaly \"Forgotten Universe u1.\"",
       "Error: Universe inconsistency.", false},
      // Digit runs are blinded.
      {"Error: Cannot unfold autogenerated identifier x23.",
       "Error: Cannot unfold autogenerated identifier x7.", true},
      {"Error: Cannot unfold autogenerated identifier x23.",
       "Error: Cannot unfold autogenerated identifier y23.", false},
      // ...except in universe-instance length complaints.
      {"Error: Universe instance should have length 2.",
       "Error: Universe instance should have length 3.", false},
      {"Error: Universe instance should have length 2.",
       "Error: Universe instance should have length 2.", true},
      // Leftover constraints blamed on tactics form one class.
      {"Error: Unsatisfied constraints: u < v (maybe a bugged tactic).",
       "Error: Unsatisfied constraints: a <= b, c < d (maybe a bugged tactic).",
       true},
      {"Error: Unsatisfied constraints: u < v (maybe a bugged tactic).",
       "Error: Unsatisfied constraints: u < v.", false},
      // Location fragments and wrapping are stripped.
      {"Error: Found in File \"x.v\", line 3, characters 0-4: here",
       "Error: Found in File \"y.v\", line 9, characters 2-8: here", true},
      {"Error: The term\n  foo has\n  type nat",
       "Error: The term foo has type nat", true},
      {"Error: A.", "Error: B.", false},
  };
  for (const auto& p : table) {
    INFO(p.a << "  vs  " << p.b);
    CHECK(equivalent(normalize(p.a), normalize(p.b)) == p.equal);
  }

  // Equivalence laws over randomized triples.
  const char* frags[] = {
      "Universe inconsistency", "forgotten universe",     "Forgotten Universe",
      "Unsatisfied constraints", "maybe a bugged tactic",
      "Universe instance should have length", "The term x", "has type",
      "12",  "7",  "nat", "File \"a.v\", line 5, characters 1-2:", "  ", "\n",
  };
  std::mt19937 rng(20260823);
  auto random_msg = [&]() {
    std::string m = "Error:";
    int n = 1 + (int)(rng() % 5);
    for (int i = 0; i < n; ++i) {
      m += (rng() % 2) ? " " : "\n";
      m += frags[rng() % (sizeof(frags) / sizeof(frags[0]))];
    }
    return m;
  };
  std::size_t transitive_checked = 0;
  bool laws = true;
  for (int i = 0; i < 10000; ++i) {
    auto na = normalize(random_msg());
    auto nb = normalize(random_msg());
    auto nc = normalize(random_msg());
    if (!equivalent(na, na)) laws = false;
    if (equivalent(na, nb) != equivalent(nb, na)) laws = false;
    if (equivalent(na, nb) && equivalent(nb, nc)) {
      ++transitive_checked;
      if (!equivalent(na, nc)) laws = false;
    }
  }
  CHECK(laws);
  CHECK(transitive_checked > 100);  // the generator actually collides
}

TEST_CASE("criterion 4 [standalone output and failed-inline reporting]") {
  // Diamond dependency graph, fully inlinable.
  {
    BinFixture fx;
    fx.t.write("lib/D.v", "Definition d := 0.\n");
    fx.t.write("lib/B.v", "Require Import Top.D.\nDefinition b := d.\n");
    fx.t.write("lib/C.v", "Require Import Top.D.\nDefinition c := d.\n");
    fx.t.write("lib/A.v",
               "Require Import Top.B.\nRequire Import Top.C.\n"
               "Definition a := b.\nDefinition a2 := c.\n");
    fx.t.write("main.v", "Require Import Top.A.\ntrigger_bug \"diamond\" a a2.\n");
    auto res = fx.vermin({"--file", "main.v", "--fail-checker", fx.fail_sh,
                          "--pass-checker", fx.pass_sh, "--fail-path",
                          "-Q,lib,Top", "--pass-path", "-Q,lib,Top", "--output",
                          "out/min.v"});
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    auto text = read_file(fx.t.file("out/min.v"));
    CHECK(header_value(text, "failed-inlines") == "none");
    auto body = strip_header(text);
    CHECK_FALSE(contains(body, "Require"));
    for (const char* def : {"Definition d := 0.", "Definition b := d.",
                            "Definition c := d.", "Definition a := b.",
                            "Definition a2 := c."})
      CHECK(contains(body, def));
  }

  // One dependency whose file-scope side effect the wrapper cannot contain.
  {
    BinFixture fx;
    fx.t.write("lib/Flags.v", "Global Set CrushMode.\nDefinition flagged := 0.\n");
    fx.t.write("main.v",
               "Require Import Top.Flags.\nDefinition pad := 1.\n"
               "Lemma l : True.\nProof.\nAssert Flag CrushMode.\n"
               "trigger_bug \"trap\" flagged.\nQed.\n");
    auto res = fx.vermin({"--file", "main.v", "--fail-checker", fx.fail_sh,
                          "--pass-checker", fx.pass_sh, "--fail-path",
                          "-Q,lib,Top", "--pass-path", "-Q,lib,Top", "--output",
                          "out/min.v"});
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    auto text = read_file(fx.t.file("out/min.v"));
    CHECK(header_value(text, "failed-inlines") == "Top.Flags");
    CHECK(contains(strip_header(text), "Require Import Top.Flags."));

    // The written file still reproduces under one checker and not the other.
    auto fail = run_process({fx.fail_sh, "-Q", "lib", "Top", "out/min.v"}, 30.0,
                            fx.t.path());
    REQUIRE(fail.exit_code == 1);
    auto err = extract_error(fail.output);
    REQUIRE(err);
    CHECK(equivalent(normalize(err->message), normalize("Error: trap")));
    auto pass = run_process({fx.pass_sh, "-Q", "lib", "Top", "out/min.v"}, 30.0,
                            fx.t.path());
    CHECK(pass.exit_code == 0);
  }
}

TEST_CASE("criterion 5 [reduction-ratio bookkeeping]") {
  // Scripted ledger: the ratio is final/(final+removed), entries that grow
  // the file contribute nothing.
  MinimizationState st;
  LedgerEntry a;
  a.lines_before = 100;
  a.lines_after = 60;
  LedgerEntry b;  // an inlining step that grows the file
  b.lines_before = 60;
  b.lines_after = 140;
  LedgerEntry c;
  c.lines_before = 140;
  c.lines_after = 90;
  st.ledger = {a, b, c};
  REQUIRE(st.removed_lines() == 90);  // 40 + 0 + 50
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", 90.0 / (90.0 + 90.0));
  CHECK(std::string(buf) == "0.500000");

  // Cross-check a real run: the header ratio must equal the same formula
  // applied to the raw ledger in the stats sidecar. The formula, not any
  // population average, is the contract.
  BinFixture fx;
  fx.t.write("input.v",
             "Definition used := 0.\nDefinition unused := 1.\n"
             "Lemma junk : True.\nProof.\nexact I.\nQed.\n"
             "trigger_bug \"boom\" used.\nDefinition after := 2.\n");
  auto res = fx.vermin({"--file", "input.v", "--fail-checker", fx.fail_sh,
                        "--pass-checker", fx.pass_sh, "--output", "out/min.v",
                        "--stats", "out/stats.json"});
  REQUIRE(res.exit_code == 0);
  auto js = nlohmann::json::parse(read_file(fx.t.file("out/stats.json")));
  long long removed = 0;
  for (const auto& e : js["ledger"]) {
    long long delta = (long long)e["lines_before"].get<std::size_t>() -
                      (long long)e["lines_after"].get<std::size_t>();
    if (delta > 0) removed += delta;
  }
  double final_lines = js["final_lines"].get<double>();
  double expectation = final_lines / (final_lines + (double)removed);
  CHECK(js["reduction_ratio"].get<double>() == expectation);
  std::snprintf(buf, sizeof buf, "%.6f", expectation);
  CHECK(header_value(read_file(fx.t.file("out/min.v")), "reduction-ratio") == buf);
}

TEST_CASE("criterion 6 [soundness over randomized fixtures]") {
  TempDir t;
  std::mt19937 rng(6001);
  for (int i = 0; i < 100; ++i) {
    auto text = random_fixture(rng, i);
    INFO("fixture " << i << ":\n" << text);

    Oracle oracle(toy_oracle(t.file("scratch.v")));
    auto init = oracle.initialize(text);
    REQUIRE(init.ok);
    auto parsed = Document::parse(text);
    REQUIRE(parsed.doc);
    MinimizationRun run;
    run.doc = std::move(*parsed.doc);
    run.error = *init.error;
    Scheduler sched(oracle, nullptr, SchedulerOptions{});
    REQUIRE(sched.run(run) == RunStatus::Converged);
    std::string final_text = run.doc.render();

    // (a) still fails the same way under the failing checker.
    auto path = t.write("final.v", final_text);
    auto fail = run_process({TOYCHECK_BIN, "--version=fail", path}, 10.0);
    REQUIRE(fail.exit_code == 1);
    auto err = extract_error(fail.output);
    REQUIRE(err);
    REQUIRE(equivalent(normalize(err->message), oracle.expected()));

    // (b) accepted by the passing checker.
    auto pass = run_process({TOYCHECK_BIN, "--version=pass", path}, 10.0);
    REQUIRE(pass.exit_code == 0);

    // (c) the output is a fixpoint: a fresh run accepts nothing.
    Oracle oracle2(toy_oracle(t.file("scratch.v")));
    auto init2 = oracle2.initialize(final_text);
    REQUIRE(init2.ok);
    auto parsed2 = Document::parse(final_text);
    REQUIRE(parsed2.doc);
    MinimizationRun rerun;
    rerun.doc = std::move(*parsed2.doc);
    rerun.error = *init2.error;
    Scheduler sched2(oracle2, nullptr, SchedulerOptions{});
    REQUIRE(sched2.run(rerun) == RunStatus::Converged);
    REQUIRE(oracle2.stats().accepted == 0);
  }
}

TEST_CASE("criterion 7 [resume equivalence under interruption]") {
  std::mt19937 rng(7001);
  for (int i = 0; i < 10; ++i) {
    BinFixture fx;
    auto text = random_fixture(rng, 700 + i);
    fx.t.write("input.v", text);
    INFO("fixture " << i << ":\n" << text);

    std::vector<std::string> base{"--file",        "input.v",
                                  "--fail-checker", fx.fail_sh,
                                  "--pass-checker", fx.pass_sh};
    auto straight = base;
    straight.insert(straight.end(), {"--output", "ref/min.v"});
    REQUIRE(fx.vermin(straight).exit_code == 0);

    auto limited = base;
    limited.insert(limited.end(),
                   {"--output", "inc/min.v", "--stop-after-accepts", "1"});
    auto res = fx.vermin(limited);
    int rounds = 0;
    while (res.exit_code == 11 && rounds < 30) {
      auto again = limited;
      again.push_back("--resume");
      res = fx.vermin(again);
      ++rounds;
    }
    REQUIRE(res.exit_code == 0);
    REQUIRE(read_file(fx.t.file("inc/min.v")) == read_file(fx.t.file("ref/min.v")));
  }
}

TEST_CASE("criterion 8 [preserve-error-script leaves guards untouched]") {
  BinFixture fx;
  const std::string guard =
      "lazymatch goal with |- _ => trigger_bug \"guarded\" marker end.";
  fx.t.write("guard.v", "Definition marker := 0.\nDefinition spare := 1.\n"
                        "Lemma g : True.\nProof.\n" +
                            guard + "\nQed.\nDefinition tail := 2.\n");
  auto res = fx.vermin({"--file", "guard.v", "--fail-checker", fx.fail_sh,
                        "--pass-checker", fx.pass_sh, "--preserve-error-script",
                        "--output", "out/min.v"});
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  auto body = strip_header(read_file(fx.t.file("out/min.v")));
  CHECK(contains(body, guard));  // byte-for-byte, including the period
  CHECK(body ==
        "Definition marker := 0.\n"
        "Lemma g : True.\n"
        "Proof.\n" +
            guard + "\n" +
            "Qed.\n");
}
