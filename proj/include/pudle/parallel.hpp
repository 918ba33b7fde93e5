#pragma once

#include "pudle/types.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace pudle {

/// Column chunk width for sample reductions. Partial products are computed
/// per fixed chunk and combined in ascending chunk order, so sums over
/// samples come out bit-identical no matter how many threads ran.
inline constexpr Index kReduceChunk = 256;

/// acc += a.cols(lo..lo+len) * b.cols(lo..lo+len).transpose(), reduced in
/// fixed chunk order. a is (ra x n), b is (rb x n), acc is (ra x rb).
inline void accumulate_outer(Matrix& acc, const Matrix& a, const Matrix& b,
                             Index lo, Index len) {
  const Index nchunks = (len + kReduceChunk - 1) / kReduceChunk;
  if (nchunks <= 1) {
    if (len > 0)
      acc.noalias() += a.middleCols(lo, len) * b.middleCols(lo, len).transpose();
    return;
  }
  std::vector<Matrix> parts(static_cast<std::size_t>(nchunks));
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < nchunks; ++c) {
    const Index off = lo + c * kReduceChunk;
    const Index w = std::min(kReduceChunk, lo + len - off);
    parts[static_cast<std::size_t>(c)].noalias() =
        a.middleCols(off, w) * b.middleCols(off, w).transpose();
  }
  for (Index c = 0; c < nchunks; ++c) acc += parts[static_cast<std::size_t>(c)];
}

inline void accumulate_outer(Matrix& acc, const Matrix& a, const Matrix& b) {
  accumulate_outer(acc, a, b, 0, a.cols());
}

}  // namespace pudle
