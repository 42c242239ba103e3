#include "pbi/common.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace pbi {

namespace {

std::mutex sink_mutex;
void to_stderr(std::string_view m) { std::cerr << "warning: " << m << '\n'; }

LogSink& sink() {
  static LogSink s = to_stderr;
  return s;
}

std::atomic<int> thread_override{-1};

unsigned threads_from_env() {
  const char* env = std::getenv("PBI_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (end == env) return 0;
  return static_cast<unsigned>(std::min<unsigned long>(v, 256));
}

}  // namespace

void set_log_sink(LogSink s) {
  std::lock_guard lock(sink_mutex);
  sink() = s ? std::move(s) : LogSink(to_stderr);
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  sink()(message);
}

unsigned worker_threads() {
  const int o = thread_override.load();
  if (o >= 0) return static_cast<unsigned>(o);
  static const unsigned from_env = threads_from_env();
  return from_env;
}

void set_worker_threads(unsigned n) { thread_override.store(static_cast<int>(n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, worker_threads()), n);
  if (workers <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace pbi
