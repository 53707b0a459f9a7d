#include "cat/parallel.hpp"

#include <atomic>

#include "cat/error.hpp"

namespace cat {
namespace {

std::atomic<int> g_threads{1};

}  // namespace

void set_thread_count(int threads) {
  if (threads < 1) fail(ErrorKind::domain, "thread count must be >= 1");
  g_threads.store(threads);
}

int thread_count() { return g_threads.load(); }

}  // namespace cat
