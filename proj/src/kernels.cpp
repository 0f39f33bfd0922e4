#include "rtpref/kernels.hpp"

#include <omp.h>

namespace rtpref::kernels {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

namespace detail {

void run_chunks(std::size_t n_chunks, Exec exec, void* ctx,
                void (*body)(void*, std::size_t)) {
  if (exec == Exec::Serial) {
    for (std::size_t c = 0; c < n_chunks; ++c) body(ctx, c);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(n_chunks); ++c) {
    body(ctx, static_cast<std::size_t>(c));
  }
}

}  // namespace detail
}  // namespace rtpref::kernels
