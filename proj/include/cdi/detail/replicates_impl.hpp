#pragma once

#include <algorithm>
#include <exception>
#include <mutex>

namespace cdi {

template <class T>
std::vector<T> run_replicates(const SimConfig& cfg, const std::function<T(std::int64_t, Rng&)>& body) {
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<T> out(reps);
  unsigned workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(reps, 1)));

  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      Rng rng = replicate_stream(cfg.seed, r);
      out[r] = body(static_cast<std::int64_t>(r), rng);
    }
  };
  if (workers <= 1) {
    work(0, reps);
    return out;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const std::size_t chunk = (reps + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(reps, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        work(lo, hi);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cdi
