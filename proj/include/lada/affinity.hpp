#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lada/action_space.hpp"
#include "lada/numerics.hpp"

namespace lada {

struct AffinityWeights {
  double w_t = 1.0;
  double w_r = 1.0;
  double w_g = 1.0;

  void validate() const;
};

enum class Component { Trans, Rot, Grip };

// Soft-label similarity S between the samples of a batch. Symmetric, unit
// diagonal, entries in [0, 1].
struct AffinityMatrix {
  std::size_t n = 0;
  Mat s;
};

enum class SelfMode { IncludeSelf, ExcludeSelf };

// M(i, j) = 1 iff samples i and j agree on the selected primitive (axis and
// magnitude bin for Trans/Rot, state for Grip).
Mat match_matrix(std::span<const PrimitiveTriple> triples, Component component);

// Weighted average of the three match matrices.
AffinityMatrix similarity_matrix(std::span<const PrimitiveTriple> triples, const AffinityWeights& w = {});

// Row-stochastic target. ExcludeSelf zeroes the diagonal first; a row left with
// no mass becomes uniform over its off-diagonal entries.
Mat row_normalize(const AffinityMatrix& s, SelfMode mode);

// Row-major CSV with a header row of sample ids and the id as the first column.
void write_matrix_csv(std::ostream& out, const Mat& m, std::span<const std::string> ids);

}  // namespace lada
