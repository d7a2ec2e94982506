#include "lowrank/sdp/standard_form.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"

namespace lowrank::sdp {

SparseSym elementary(int k, int l) {
  if (k > l) std::swap(k, l);
  return {{k, l, 1.0}};
}

Matrix to_dense(int dim, const SparseSym& a) {
  Matrix w = Matrix::Zero(dim, dim);
  for (const auto& e : a) {
    w(e.row, e.col) += e.value;
    if (e.row != e.col) w(e.col, e.row) += e.value;
  }
  return w;
}

double inner(const SparseSym& a, const Matrix& w) {
  double v = 0.0;
  for (const auto& e : a) {
    v += e.row == e.col ? e.value * w(e.row, e.row)
                        : e.value * (w(e.row, e.col) + w(e.col, e.row));
  }
  return v;
}

namespace {

SparseSym stacked(const LinearForm& f, const std::vector<int>& offsets) {
  std::map<std::pair<int, int>, double> acc;
  for (const auto& t : f.block_terms()) {
    int r = offsets[t.block] + t.row;
    int c = offsets[t.block] + t.col;
    if (r > c) std::swap(r, c);
    acc[{r, c}] += t.value;
  }
  SparseSym out;
  for (const auto& [rc, v] : acc) {
    if (v != 0.0) out.push_back({rc.first, rc.second, v});
  }
  return out;
}

LinearForm as_form(const SparseSym& a, int block) {
  LinearForm f;
  for (const auto& e : a) f.add_inner(block, e.row, e.col, e.value);
  return f;
}

}  // namespace

StandardSdp standard_form_compile(const BlockSdpProblem& p) {
  p.validate();
  if (p.num_scalars() > 0) throw CompileError("free scalar variables have no standard form");
  if (p.boxes().size() > 1) throw CompileError("at most one box inequality is supported");

  StandardSdp s;
  for (const auto& b : p.blocks()) {
    s.block_offsets.push_back(s.dim);
    s.dim += b.dim;
  }
  // Zero pattern between distinct diagonal blocks.
  const auto& blocks = p.blocks();
  for (int k = 0; k < p.num_blocks(); ++k) {
    for (int l = k + 1; l < p.num_blocks(); ++l) {
      for (int a = 0; a < blocks[k].dim; ++a) {
        for (int b = 0; b < blocks[l].dim; ++b) {
          s.constraints.push_back({elementary(s.block_offsets[k] + a, s.block_offsets[l] + b),
                                   0.0, "zero-block:" + blocks[k].name + "/" + blocks[l].name});
        }
      }
    }
  }
  for (const auto& e : p.equalities()) {
    SparseSym a = stacked(e.form, s.block_offsets);
    s.constraints.push_back({std::move(a), e.rhs - e.form.constant(), e.tag});
  }
  if (!p.boxes().empty()) {
    const auto& bx = p.boxes().front();
    const double k = bx.form.constant();
    s.box = StandardBox{stacked(bx.form, s.block_offsets), bx.lower - k, bx.upper - k};
  }
  s.cost = stacked(p.objective(), s.block_offsets);
  s.constant = p.objective().constant();
  return s;
}

BlockSdpProblem to_block_problem(const StandardSdp& s) {
  BlockSdpProblem p;
  const int w = p.add_psd_block("W", s.dim);
  for (const auto& c : s.constraints) p.add_equality(as_form(c.matrix, w), c.rhs, c.tag);
  if (s.box) p.add_box(as_form(s.box->matrix, w), s.box->lower, s.box->upper, "box");
  LinearForm obj = as_form(s.cost, w);
  obj.add_constant(s.constant);
  p.set_objective(std::move(obj));
  return p;
}

BlockSdpProblem dual_of_box_sdp(const StandardSdp& s) {
  BlockSdpProblem d;
  const int m = static_cast<int>(s.constraints.size());
  std::vector<Matrix> dense;
  for (int i = 0; i < m; ++i) {
    d.add_scalar("y" + std::to_string(i + 1));
    dense.push_back(to_dense(s.dim, s.constraints[i].matrix));
  }
  int t1 = -1;
  int t2 = -1;
  Matrix p0;
  if (s.box) {
    if (std::isfinite(s.box->lower)) t1 = d.add_scalar("t1");
    if (std::isfinite(s.box->upper)) t2 = d.add_scalar("t2");
    p0 = to_dense(s.dim, s.box->matrix);
  }
  const int slack = d.add_psd_block("S", s.dim);
  const Matrix cost = to_dense(s.dim, s.cost);

  // sum y_i P_i + (t1 + t2) P0 + S = P entrywise on the upper triangle.
  for (int k = 0; k < s.dim; ++k) {
    for (int l = k; l < s.dim; ++l) {
      LinearForm f;
      f.add_element(slack, k, l, 1.0);
      for (int i = 0; i < m; ++i) f.add_scalar(i, dense[i](k, l));
      if (t1 >= 0) f.add_scalar(t1, p0(k, l));
      if (t2 >= 0) f.add_scalar(t2, p0(k, l));
      d.add_equality(std::move(f), cost(k, l), "dual-slack");
    }
  }
  LinearForm obj;
  for (int i = 0; i < m; ++i) obj.add_scalar(i, -s.constraints[i].rhs);
  if (t1 >= 0) {
    d.add_box(LinearForm().add_scalar(t1, 1.0), 0.0, kInf, "t1");
    obj.add_scalar(t1, -s.box->lower);
  }
  if (t2 >= 0) {
    d.add_box(LinearForm().add_scalar(t2, 1.0), -kInf, 0.0, "t2");
    obj.add_scalar(t2, -s.box->upper);
  }
  obj.add_constant(-s.constant);
  d.set_objective(std::move(obj));
  return d;
}

void write_sdpa(const StandardSdp& s, std::ostream& out) {
  const int m = static_cast<int>(s.constraints.size());
  // Finite box sides become rows <P0,W> - s1 = d1 and <P0,W> + s2 = d2 with
  // s1, s2 >= 0 in a diagonal LP block.
  std::vector<int> sides;
  if (s.box) {
    if (std::isfinite(s.box->lower)) sides.push_back(0);
    if (std::isfinite(s.box->upper)) sides.push_back(1);
  }
  const int extra = static_cast<int>(sides.size());
  out << "* standard-form SDP; objective sign flipped (F0 = -P)\n";
  out << (m + extra) << "\n";
  out << (extra ? 2 : 1) << "\n";
  out << s.dim;
  if (extra) out << " -" << extra;
  out << "\n";
  for (int i = 0; i < m; ++i) out << (i ? " " : "") << format_double(s.constraints[i].rhs);
  for (int k = 0; k < extra; ++k) {
    out << (m + k ? " " : "") << format_double(sides[k] == 0 ? s.box->lower : s.box->upper);
  }
  out << "\n";
  auto emit = [&](int mat, int block, int i, int j, double v) {
    if (v == 0.0) return;
    out << mat << " " << block << " " << (i + 1) << " " << (j + 1) << " " << format_double(v)
        << "\n";
  };
  for (const auto& e : s.cost) emit(0, 1, e.row, e.col, -e.value);
  for (int i = 0; i < m; ++i) {
    for (const auto& e : s.constraints[i].matrix) emit(i + 1, 1, e.row, e.col, e.value);
  }
  for (int k = 0; k < extra; ++k) {
    for (const auto& e : s.box->matrix) emit(m + 1 + k, 1, e.row, e.col, e.value);
    emit(m + 1 + k, 2, k, k, sides[k] == 0 ? -1.0 : 1.0);
  }
}

}  // namespace lowrank::sdp
