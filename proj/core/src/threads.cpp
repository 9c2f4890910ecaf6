#include "xaikit/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <mutex>
#include <thread>

namespace xaikit {

int worker_threads() {
  static const int n = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("XAI_KIT_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    return hw;
  }();
  return n;
}

void apply_thread_cap() {
  static std::once_flag flag;
  std::call_once(flag, [] { omp_set_num_threads(worker_threads()); });
}

}  // namespace xaikit
