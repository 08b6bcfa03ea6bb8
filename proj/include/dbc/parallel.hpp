#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dbc {

// Every parallel kernel in this codebase is an index map: item i writes only
// slot i and draws only from its own random substream, so Serial and Parallel
// must produce bitwise-identical results. Tests assert exactly that, and
// dbc_bench times the two modes against each other.
enum class ExecMode { Serial, Parallel };

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

template <class F>
void for_each_index(std::size_t n, ExecMode mode, F&& f) {
#ifdef _OPENMP
  if (mode == ExecMode::Parallel) {
    const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < nn; ++i) f(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace dbc
