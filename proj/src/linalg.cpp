#include "lowrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lowrank/errors.hpp"

namespace lowrank {

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw InvalidInput("symmetric matrix must be square");
  }
  require_finite(a, "symmetric matrix");
  const double scale = std::max(1.0, a.norm());
  if ((a - a.transpose()).norm() > 1e-10 * scale) {
    throw InvalidInput("matrix is not symmetric");
  }
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }

SymMatrix SymMatrix::identity(int dim) {
  return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Vector& d) {
  return SymMatrix(Matrix(d.asDiagonal()));
}

SymMatrix SymMatrix::from_upper(int dim, const std::vector<double>& upper) {
  if (dim < 1) throw InvalidInput("dimension must be positive");
  const auto expected = static_cast<std::size_t>(dim) * (dim + 1) / 2;
  if (upper.size() != expected) {
    throw InvalidInput("upper triangle needs " + std::to_string(expected) +
                       " entries, got " + std::to_string(upper.size()));
  }
  Matrix m(dim, dim);
  std::size_t k = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      m(i, j) = upper[k];
      m(j, i) = upper[k];
      ++k;
    }
  }
  return SymMatrix(m);
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  return SymMatrix(Matrix(m_ + o.m_));
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  return SymMatrix(Matrix(m_ - o.m_));
}

SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(Matrix(m_ * s)); }

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) {
    throw InvalidInput(std::string(what) + " has non-finite entries");
  }
}

SvdResult svd(const Matrix& x) {
  require_finite(x, "svd input");
  // Two-sided Jacobi keeps small singular values accurate to high relative
  // precision, which the rank-gap bounds depend on.
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> jac(
      x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {jac.matrixU(), jac.singularValues(), jac.matrixV()};
}

Vector singular_values(const Matrix& x) {
  require_finite(x, "svd input");
  if (x.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> jac(x);
  return jac.singularValues();
}

EigResult sym_eig(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
  if (es.info() != Eigen::Success) {
    throw InvalidInput("eigendecomposition failed");
  }
  // Eigen returns ascending order.
  const int n = a.dim();
  EigResult out{Vector(n), Matrix(n, n)};
  for (int i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double min_eigenvalue(const SymMatrix& a) { return min_eigenvalue(a.matrix()); }

Matrix solve_spd(const SymMatrix& a, const Matrix& b) {
  if (b.rows() != a.dim()) throw InvalidInput("solve_spd: dimension mismatch");
  require_finite(b, "right-hand side");
  Eigen::LLT<Matrix> llt(a.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("Cholesky factorization hit a non-positive pivot");
  }
  // LLT only fails on pivots that are exactly non-positive; also reject pivots
  // at the rounding level of the input.
  const Matrix& l = llt.matrixLLT();
  const double floor = a.dim() * std::numeric_limits<double>::epsilon() *
                       a.matrix().cwiseAbs().maxCoeff();
  for (int i = 0; i < a.dim(); ++i) {
    if (l(i, i) * l(i, i) <= floor) {
      throw NotPositiveDefinite("matrix is numerically singular");
    }
  }
  return llt.solve(b);
}

int numerical_rank(const Vector& sigma, int rows, int cols) {
  if (sigma.size() == 0) return 0;
  const double top = sigma.maxCoeff();
  if (top <= 0.0) return 0;
  const double tol =
      std::max(rows, cols) * std::numeric_limits<double>::epsilon() * top;
  int r = 0;
  for (int i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol) ++r;
  }
  return r;
}

int numerical_rank(const Matrix& x) {
  return numerical_rank(singular_values(x), static_cast<int>(x.rows()),
                        static_cast<int>(x.cols()));
}

}  // namespace lowrank
