#pragma once

#include <Eigen/Dense>

#include <vector>

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Real symmetric matrix. Symmetry holds exactly: the constructor rejects
// visibly asymmetric input and stores the averaged matrix (A + A^T) / 2.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& a);

  static SymMatrix zero(int dim);
  static SymMatrix identity(int dim);
  static SymMatrix diagonal(const Vector& d);
  // Builds from the row-major upper triangle (dim * (dim + 1) / 2 values).
  static SymMatrix from_upper(int dim, const std::vector<double>& upper);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }
  double frobenius_norm() const { return m_.norm(); }
  double trace() const { return m_.trace(); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  Matrix m_;
};

struct SvdResult {
  Matrix left;    // m x m, orthogonal
  Vector values;  // min(m, n) singular values, descending
  Matrix right;   // n x n, orthogonal
};

struct EigResult {
  Vector values;   // descending
  Matrix vectors;  // columns are orthonormal eigenvectors
};

// Throws InvalidInput when any entry is NaN or infinite.
void require_finite(const Matrix& x, const char* what);

SvdResult svd(const Matrix& x);
Vector singular_values(const Matrix& x);

EigResult sym_eig(const SymMatrix& a);
double min_eigenvalue(const SymMatrix& a);
double min_eigenvalue(const Matrix& symmetric);

// Solves A * X = B for symmetric positive definite A via Cholesky.
// Throws NotPositiveDefinite when the factorization meets a non-positive pivot.
Matrix solve_spd(const SymMatrix& a, const Matrix& b);

// Count of singular values above max(m, n) * machine-epsilon * sigma_1.
int numerical_rank(const Vector& sigma, int rows, int cols);
int numerical_rank(const Matrix& x);

}  // namespace lowrank
