#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lowrank/linalg.hpp"

namespace lowrank::sdp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One term value * <E^(row,col), W_block>, where E^(k,l) is the symmetric
// elementary matrix with ones at (k,l) and (l,k). Note <E^(k,l), W> = 2 w_kl
// for k != l and w_kk on the diagonal.
struct BlockTerm {
  int block;
  int row;
  int col;
  double value;
};

// Affine functional over the scalar variables and PSD blocks of a problem.
class LinearForm {
 public:
  // v * <E^(row,col), W_block>.
  LinearForm& add_inner(int block, int row, int col, double v);
  // v * W_block(row, col).
  LinearForm& add_element(int block, int row, int col, double v);
  // sum_ab c(a, b) * W_block(row0 + a, col0 + b). For a symmetric c placed on
  // the diagonal (row0 == col0) this is <c, W_sub>.
  LinearForm& add_elements(int block, int row0, int col0, const Matrix& c, double scale = 1.0);
  // scale * trace of the dim x dim diagonal sub-block starting at offset.
  LinearForm& add_trace(int block, int offset, int dim, double scale = 1.0);
  LinearForm& add_scalar(int var, double v);
  LinearForm& add_constant(double v);

  const std::vector<BlockTerm>& block_terms() const { return block_terms_; }
  const std::vector<std::pair<int, double>>& scalar_terms() const { return scalar_terms_; }
  double constant() const { return constant_; }

 private:
  std::vector<BlockTerm> block_terms_;
  std::vector<std::pair<int, double>> scalar_terms_;
  double constant_ = 0.0;
};

struct PsdBlock {
  std::string name;
  int dim;
  double trace_bound;  // <= 0 when none is known
};

struct Equality {
  LinearForm form;
  double rhs;
  std::string tag;
};

struct Box {
  LinearForm form;
  double lower;
  double upper;
  std::string tag;
};

// Convex model: minimize an affine objective over free scalars and PSD
// blocks, subject to linear equalities and two-sided box inequalities.
class BlockSdpProblem {
 public:
  int add_scalar(std::string name);
  // trace_bound, if positive, is an a-priori bound on tr(W) over the feasible
  // set; it makes certified lower bounds rigorous for that block.
  int add_psd_block(std::string name, int dim, double trace_bound = 0.0);
  int add_equality(LinearForm form, double rhs, std::string tag = {});
  int add_box(LinearForm form, double lower, double upper, std::string tag = {});
  void set_objective(LinearForm form);

  int num_scalars() const { return static_cast<int>(scalars_.size()); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const std::vector<std::string>& scalar_names() const { return scalars_; }
  const std::vector<PsdBlock>& blocks() const { return blocks_; }
  const std::vector<Equality>& equalities() const { return equalities_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  const LinearForm& objective() const { return objective_; }
  bool has_objective() const { return objective_set_; }

  // Throws ModelError on references to undeclared variables, out-of-range
  // block entries, non-finite data, or a missing objective.
  void validate() const;

  double evaluate(const LinearForm& f, const std::vector<Matrix>& blocks,
                  const Vector& scalars) const;

 private:
  void check_form(const LinearForm& f, const char* where) const;

  std::vector<std::string> scalars_;
  std::vector<PsdBlock> blocks_;
  std::vector<Equality> equalities_;
  std::vector<Box> boxes_;
  LinearForm objective_;
  bool objective_set_ = false;
};

}  // namespace lowrank::sdp
