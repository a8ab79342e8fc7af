#include "bsmp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace bsmp {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("BSMP_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return value;
  }
  return 1;
}

std::atomic<int>& workers_setting() {
  static std::atomic<int> workers{initial_workers()};
  return workers;
}

}  // namespace

int worker_count() { return workers_setting().load(); }

void set_worker_count(int workers) { workers_setting().store(std::max(1, workers)); }

void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(count);
  if (chunks == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kChunkSize;
    body(c, begin, std::min(count, begin + kChunkSize));
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      try {
        run_chunk(c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace bsmp
