#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

namespace rtpref::kernels {

// Execution policy for the data-parallel kernels.  Serial is the reference
// implementation; Parallel distributes work across OpenMP threads.  Both
// produce bit-identical results because reductions have a fixed shape: the
// input is cut into fixed-size chunks, each chunk is summed sequentially with
// Neumaier compensation, and the per-chunk partials are combined in chunk
// order.  Thread count only changes who computes a chunk, never the
// arithmetic.
enum class Exec { Serial, Parallel };

inline constexpr std::size_t kChunk = 4096;

int max_threads();
void set_threads(int n);

namespace detail {
struct NeumaierAcc {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};
void run_chunks(std::size_t n_chunks, Exec exec, void* ctx,
                void (*body)(void*, std::size_t));
}  // namespace detail

// Compensated sum of term(i) for i in [0, n).
template <class Term>
double chunked_sum(std::size_t n, Exec exec, Term&& term) {
  if (n == 0) return 0.0;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(n_chunks);
  struct Ctx {
    std::size_t n;
    std::vector<double>* partial;
    std::remove_reference_t<Term>* term;
  } ctx{n, &partial, &term};
  detail::run_chunks(n_chunks, exec, &ctx, [](void* p, std::size_t c) {
    auto& x = *static_cast<Ctx*>(p);
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(x.n, lo + kChunk);
    detail::NeumaierAcc acc;
    for (std::size_t i = lo; i < hi; ++i) acc.add((*x.term)(i));
    (*x.partial)[c] = acc.value();
  });
  detail::NeumaierAcc total;
  for (double p : partial) total.add(p);
  return total.value();
}

// Compensated sum of an m-vector of terms per index: term_into(i, out) must
// add nothing itself, only fill out[0..m).  Accumulates into acc[0..m).
template <class TermInto>
void chunked_sum_vec(std::size_t n, std::size_t m, Exec exec, double* acc,
                     TermInto&& term_into) {
  for (std::size_t j = 0; j < m; ++j) acc[j] = 0.0;
  if (n == 0) return;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(n_chunks * m);
  struct Ctx {
    std::size_t n, m;
    std::vector<double>* partial;
    std::remove_reference_t<TermInto>* term;
  } ctx{n, m, &partial, &term_into};
  detail::run_chunks(n_chunks, exec, &ctx, [](void* p, std::size_t c) {
    auto& x = *static_cast<Ctx*>(p);
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(x.n, lo + kChunk);
    std::vector<detail::NeumaierAcc> acc(x.m);
    std::vector<double> row(x.m);
    for (std::size_t i = lo; i < hi; ++i) {
      (*x.term)(i, row.data());
      for (std::size_t j = 0; j < x.m; ++j) acc[j].add(row[j]);
    }
    for (std::size_t j = 0; j < x.m; ++j)
      (*x.partial)[c * x.m + j] = acc[j].value();
  });
  std::vector<detail::NeumaierAcc> total(m);
  for (std::size_t c = 0; c < n_chunks; ++c)
    for (std::size_t j = 0; j < m; ++j) total[j].add(partial[c * m + j]);
  for (std::size_t j = 0; j < m; ++j) acc[j] = total[j].value();
}

// Applies body(i) for i in [0, n).  Iterations must be independent (each i
// writes only its own slots), which makes the parallel form deterministic.
template <class Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  struct Ctx {
    std::size_t n;
    std::remove_reference_t<Body>* body;
  } ctx{n, &body};
  detail::run_chunks(n_chunks, exec, &ctx, [](void* p, std::size_t c) {
    auto& x = *static_cast<Ctx*>(p);
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(x.n, lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) (*x.body)(i);
  });
}

}  // namespace rtpref::kernels
