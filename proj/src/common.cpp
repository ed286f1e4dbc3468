#include "addl/common.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace addl {
namespace {

// Persistent pool; workers pull chunk indices from an atomic counter.  Chunk
// contents are index-disjoint so scheduling order never affects values.
class Pool {
 public:
  Pool() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 4;
    if (const char* env = std::getenv("ADDL_THREADS")) {
      const int cap = std::atoi(env);
      if (cap >= 1 && cap < n) n = cap;
    }
    if (n > 16) n = 16;
    workers_ = n;
    for (int i = 0; i + 1 < n; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int workers() const { return workers_; }

  void run(int n, const std::function<void(int)>& fn) {
    std::lock_guard<std::mutex> run_lk(run_m_);
    {
      std::lock_guard<std::mutex> lk(m_);
      fn_ = &fn;
      total_ = n;
      next_.store(0, std::memory_order_relaxed);
      active_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_.notify_all();
    drain();  // the calling thread participates
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return active_ == 0; });
    fn_ = nullptr;
  }

 private:
  void drain() {
    int i;
    while ((i = next_.fetch_add(1, std::memory_order_relaxed)) < total_) (*fn_)(i);
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(m_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      lk.unlock();
      drain();
      lk.lock();
      if (--active_ == 0) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  int workers_ = 1;
  std::mutex run_m_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  std::atomic<int> next_{0};
  int total_ = 0;
  int active_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p;
  return p;
}

// Nested parallel sections run serially instead of deadlocking the pool.
thread_local bool g_inside_parallel = false;

}  // namespace

int thread_count() { return pool().workers(); }

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (n == 1 || thread_count() == 1 || g_inside_parallel) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  g_inside_parallel = true;
  const std::function<void(int)> wrapped = [&fn](int i) {
    g_inside_parallel = true;
    fn(i);
  };
  pool().run(n, wrapped);
  g_inside_parallel = false;
}

}  // namespace addl
