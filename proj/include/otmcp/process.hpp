#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

#include "otmcp/net.hpp"

namespace otmcp {

struct SpawnOptions {
  std::vector<std::string> argv;
  std::map<std::string, std::string> env;  // overrides on top of the parent environment
  bool pipe_stdin = false;
  bool pipe_stdout = false;
  std::string stderr_path;  // empty: inherit
  bool batch_scheduling = false;  // SCHED_BATCH: wakeups never preempt the parent
};

/// A spawned child. Destruction kills a still-running child and reaps it.
class ChildProcess {
 public:
  static ChildProcess spawn(const SpawnOptions& options);

  ChildProcess() = default;
  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ~ChildProcess();

  pid_t pid() const noexcept { return pid_; }
  int stdin_fd() const noexcept { return stdin_.get(); }
  int stdout_fd() const noexcept { return stdout_.get(); }
  void close_stdin() noexcept { stdin_.reset(); }

  bool running();
  /// Exit status (or 128+signal) once the child is reaped within `timeout`.
  std::optional<int> wait_for(std::chrono::milliseconds timeout);
  void signal(int sig) noexcept;
  /// SIGTERM, wait up to `grace`, then SIGKILL.
  int stop(std::chrono::milliseconds grace = std::chrono::milliseconds(2000));

 private:
  pid_t pid_ = -1;
  std::optional<int> status_;
  net::Fd stdin_;
  net::Fd stdout_;
};

/// Absolute path of the running executable.
std::string self_executable();

}  // namespace otmcp
