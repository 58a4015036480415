#include "conglab/parallel.hpp"

#include <algorithm>
#include <cstdlib>

namespace conglab {

int worker_count() {
  static const int cached = [] {
    unsigned hw = std::thread::hardware_concurrency();
    int n = hw == 0 ? 1 : static_cast<int>(hw);
    if (const char* env = std::getenv("CONGLAB_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) n = std::min<long>(v, 256);
    }
    return n;
  }();
  return cached;
}

}  // namespace conglab
