#pragma once

#include <cstdint>
#include <functional>

namespace lwrn {

// Number of workers kernels may use. Defaults to $LWRN_WORKERS when set,
// otherwise the hardware concurrency.
int worker_count();
void set_worker_count(int workers);

// Runs fn(task) for every task in [0, tasks). Tasks are claimed dynamically,
// so callers must make each task's result independent of which worker runs
// it. The first exception thrown by any task is rethrown on the caller.
void parallel_for(int64_t tasks, const std::function<void(int64_t)>& fn);

// RAII override of the worker count, restored on scope exit.
class ScopedWorkers {
 public:
  explicit ScopedWorkers(int workers) : saved_(worker_count()) {
    set_worker_count(workers);
  }
  ~ScopedWorkers() { set_worker_count(saved_); }
  ScopedWorkers(const ScopedWorkers&) = delete;
  ScopedWorkers& operator=(const ScopedWorkers&) = delete;

 private:
  int saved_;
};

}  // namespace lwrn
