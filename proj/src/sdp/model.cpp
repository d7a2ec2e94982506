#include "lowrank/sdp/model.hpp"

#include <cmath>

#include "lowrank/errors.hpp"

namespace lowrank::sdp {

LinearForm& LinearForm::add_inner(int block, int row, int col, double v) {
  if (row > col) std::swap(row, col);
  if (v != 0.0) block_terms_.push_back({block, row, col, v});
  return *this;
}

LinearForm& LinearForm::add_element(int block, int row, int col, double v) {
  return add_inner(block, row, col, row == col ? v : 0.5 * v);
}

LinearForm& LinearForm::add_elements(int block, int row0, int col0, const Matrix& c,
                                     double scale) {
  for (int a = 0; a < c.rows(); ++a) {
    for (int b = 0; b < c.cols(); ++b) {
      if (c(a, b) != 0.0) add_element(block, row0 + a, col0 + b, scale * c(a, b));
    }
  }
  return *this;
}

LinearForm& LinearForm::add_trace(int block, int offset, int dim, double scale) {
  for (int a = 0; a < dim; ++a) add_inner(block, offset + a, offset + a, scale);
  return *this;
}

LinearForm& LinearForm::add_scalar(int var, double v) {
  if (v != 0.0) scalar_terms_.emplace_back(var, v);
  return *this;
}

LinearForm& LinearForm::add_constant(double v) {
  constant_ += v;
  return *this;
}

int BlockSdpProblem::add_scalar(std::string name) {
  scalars_.push_back(std::move(name));
  return num_scalars() - 1;
}

int BlockSdpProblem::add_psd_block(std::string name, int dim, double trace_bound) {
  if (dim < 1) throw ModelError("PSD block '" + name + "' must have dim >= 1");
  blocks_.push_back({std::move(name), dim, trace_bound});
  return num_blocks() - 1;
}

int BlockSdpProblem::add_equality(LinearForm form, double rhs, std::string tag) {
  check_form(form, "equality");
  if (!std::isfinite(rhs)) throw ModelError("equality right-hand side must be finite");
  equalities_.push_back({std::move(form), rhs, std::move(tag)});
  return static_cast<int>(equalities_.size()) - 1;
}

int BlockSdpProblem::add_box(LinearForm form, double lower, double upper, std::string tag) {
  check_form(form, "box");
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
    throw ModelError("box needs lower <= upper");
  }
  if (lower == kInf || upper == -kInf) throw ModelError("box bounds are empty");
  boxes_.push_back({std::move(form), lower, upper, std::move(tag)});
  return static_cast<int>(boxes_.size()) - 1;
}

void BlockSdpProblem::set_objective(LinearForm form) {
  check_form(form, "objective");
  objective_ = std::move(form);
  objective_set_ = true;
}

void BlockSdpProblem::check_form(const LinearForm& f, const char* where) const {
  for (const auto& t : f.block_terms()) {
    if (t.block < 0 || t.block >= num_blocks()) {
      throw ModelError(std::string(where) + " references an undeclared block");
    }
    const int d = blocks_[t.block].dim;
    if (t.row < 0 || t.col >= d) {
      throw ModelError(std::string(where) + " entry outside block '" +
                       blocks_[t.block].name + "'");
    }
    if (!std::isfinite(t.value)) throw ModelError(std::string(where) + " has non-finite data");
  }
  for (const auto& [var, v] : f.scalar_terms()) {
    if (var < 0 || var >= num_scalars()) {
      throw ModelError(std::string(where) + " references an undeclared scalar");
    }
    if (!std::isfinite(v)) throw ModelError(std::string(where) + " has non-finite data");
  }
  if (!std::isfinite(f.constant())) throw ModelError(std::string(where) + " has non-finite data");
}

void BlockSdpProblem::validate() const {
  if (!objective_set_) throw ModelError("objective was never set");
  for (const auto& e : equalities_) check_form(e.form, "equality");
  for (const auto& b : boxes_) check_form(b.form, "box");
  check_form(objective_, "objective");
}

double BlockSdpProblem::evaluate(const LinearForm& f, const std::vector<Matrix>& blocks,
                                 const Vector& scalars) const {
  double v = f.constant();
  for (const auto& t : f.block_terms()) {
    const Matrix& w = blocks.at(t.block);
    v += t.row == t.col ? t.value * w(t.row, t.row)
                        : t.value * (w(t.row, t.col) + w(t.col, t.row));
  }
  for (const auto& [var, c] : f.scalar_terms()) v += c * scalars(var);
  return v;
}

}  // namespace lowrank::sdp
