#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/sdp/model.hpp"

namespace lowrank::sdp {

// value * E^(row,col) with row <= col.
struct SymEntry {
  int row;
  int col;
  double value;
};

using SparseSym = std::vector<SymEntry>;

// The single entry list of E^(k,l) (0-based).
SparseSym elementary(int k, int l);
Matrix to_dense(int dim, const SparseSym& a);
// <A, W> for sparse A.
double inner(const SparseSym& a, const Matrix& w);

struct StandardConstraint {
  SparseSym matrix;
  double rhs;
  std::string tag;
};

struct StandardBox {
  SparseSym matrix;  // P0
  double lower;      // delta_1
  double upper;      // delta_2
};

// min <P, W> + constant  s.t.  <P_i, W> = b_i,  lower <= <P0, W> <= upper,  W psd.
struct StandardSdp {
  int dim = 0;
  SparseSym cost;
  std::vector<StandardConstraint> constraints;
  std::optional<StandardBox> box;
  double constant = 0.0;
  // Offsets of the original blocks inside W, in model order.
  std::vector<int> block_offsets;
};

// Stacks every PSD block of p on the diagonal of one big block. Entries
// between distinct blocks are pinned to zero (tags "zero-block:A/B"); original
// equalities keep their tags. Throws CompileError for free scalars or more
// than one box.
StandardSdp standard_form_compile(const BlockSdpProblem& p);

// The compiled form as a one-block model.
BlockSdpProblem to_block_problem(const StandardSdp& s);

// Dual of the box-constrained standard form:
//   max b^T y + d1 t1 + d2 t2 + constant
//   s.t. sum y_i P_i + (t1 + t2) P0 + S = P,  S psd,  t1 >= 0,  t2 <= 0,
// posed as minimization of the negated objective. Scalars are y_1..y_m, then
// t1 and t2 for the finite sides of the box; the single block is S.
BlockSdpProblem dual_of_box_sdp(const StandardSdp& s);

// Sparse SDPA text (.dat-s). SDPA's primal is our dual, so F0 = -P and the
// SDPA objective value is the negation of ours (without the constant). A box
// adds a diagonal LP block with one slack per finite side.
void write_sdpa(const StandardSdp& s, std::ostream& out);

}  // namespace lowrank::sdp
