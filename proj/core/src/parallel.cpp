#include "ktraj/parallel.hpp"

namespace ktraj {
namespace {

std::atomic<int>& configured_workers() {
  static std::atomic<int> n{std::max(1, static_cast<int>(std::thread::hardware_concurrency()))};
  return n;
}

}  // namespace

int worker_count() { return configured_workers().load(); }

void set_worker_count(int n) { configured_workers().store(std::max(1, n)); }

}  // namespace ktraj
