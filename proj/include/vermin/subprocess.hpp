#pragma once

// Minimal POSIX subprocess runner: captures interleaved stdout/stderr and
// enforces a wall-clock deadline with SIGKILL.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

namespace vermin {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool signaled = false;
  bool spawn_failed = false;
  std::string output;  // stdout and stderr, interleaved
  double wall_seconds = 0.0;
};

inline ProcessResult run_process(
    const std::vector<std::string>& argv, double timeout_seconds,
    const std::string& working_dir = {},
    const std::vector<std::pair<std::string, std::string>>& env = {}) {
  ProcessResult res;
  if (argv.empty()) {
    res.spawn_failed = true;
    return res;
  }
  int fds[2];
  if (pipe(fds) != 0) {
    res.spawn_failed = true;
    return res;
  }
  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    res.spawn_failed = true;
    return res;
  }
  if (pid == 0) {
    close(fds[0]);
    dup2(fds[1], 1);
    dup2(fds[1], 2);
    close(fds[1]);
    if (!working_dir.empty() && chdir(working_dir.c_str()) != 0) _exit(126);
    for (const auto& [k, v] : env) setenv(k.c_str(), v.c_str(), 1);
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }
  close(fds[1]);
  auto deadline = start + std::chrono::duration<double>(timeout_seconds);
  char buf[4096];
  bool open = true;
  while (open) {
    auto now = std::chrono::steady_clock::now();
    int wait_ms = -1;
    if (timeout_seconds > 0) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
      if (left <= 0) {
        res.timed_out = true;
        kill(pid, SIGKILL);
        break;
      }
      wait_ms = static_cast<int>(left);
    }
    struct pollfd pfd{fds[0], POLLIN, 0};
    int pr = poll(&pfd, 1, wait_ms);
    if (pr == 0) continue;  // recheck deadline
    if (pr < 0) break;
    ssize_t n = read(fds[0], buf, sizeof buf);
    if (n > 0)
      res.output.append(buf, static_cast<std::size_t>(n));
    else
      open = false;
  }
  close(fds[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status)) {
    res.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    res.signaled = true;
    res.exit_code = -WTERMSIG(status);
  }
  return res;
}

}  // namespace vermin
