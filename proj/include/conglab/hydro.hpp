// System models (diagonal and conservative form) and the coefficient fields
// derived from them: rotation coefficients a_ij, semihamiltonian residuals,
// eigenframes with commutator coefficients c^k_ij, Lame coefficients.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "conglab/expr.hpp"
#include "conglab/grid.hpp"
#include "conglab/numerics.hpp"
#include "conglab/report.hpp"

namespace conglab {

// Diagonal system R^i_t = lambda^i(R) R^i_x, optionally with Lame data h_i
// satisfying d_j ln h_i = a_ij for j != i.
struct DiagonalSystem {
  int n = 0;
  std::vector<Expr> lambda;
  std::vector<Expr> lame;  // empty or size n
  Coords coords;

  void validate() const;
};

// Conservative system u^i_t = f^i(u)_x.
struct GeneralSystem {
  int n = 0;
  std::vector<Expr> flux;
  Coords coords;

  void validate() const;
  // Jacobian v^i_j = d f^i / d u^j as expressions.
  std::vector<std::vector<Expr>> jacobian() const;
};

struct HyperbolicityReport {
  double min_gap = 0.0;
  RPoint argmin_point;
  std::pair<int, int> pair{0, 0};
};

HyperbolicityReport check_hyperbolicity(const DiagonalSystem& sys, const Grid& grid);
void require_hyperbolic(const DiagonalSystem& sys, const Grid& grid, double gap = 1e-8);

// Off-diagonal field a_ij = d_j lambda^i / (lambda^j - lambda^i).
class RotationCoefficients {
 public:
  RotationCoefficients(int n, std::vector<std::vector<Expr>> a, Coords coords)
      : n_(n), a_(std::move(a)), coords_(std::move(coords)) {}

  int n() const noexcept { return n_; }
  const Expr& at(int i, int j) const;
  const Coords& coords() const noexcept { return coords_; }

 private:
  int n_;
  std::vector<std::vector<Expr>> a_;
  Coords coords_;
};

RotationCoefficients rotation_coefficients(const DiagonalSystem& sys);
RotationCoefficients rotation_coefficients(const DiagonalSystem& sys, const Grid& grid,
                                           double gap = 1e-8);

// Max residual of d_k a_ij - (a_ik a_kj + a_ij a_jk - a_ij a_ik) over the grid
// and all ordered triples of distinct indices.  n <= 2 reports vacuous.
ResidualReport semihamiltonian_residual(const RotationCoefficients& rc, const Grid& grid);
ResidualReport semihamiltonian_residual(const DiagonalSystem& sys, const Grid& grid);

// Eigen-decomposition of a matrix field on a grid with a globally fixed
// normalization and commutator coefficients c^k_ij of the frame vector fields.
struct EigenFrame {
  Grid grid;
  int n = 0;

  // lambda[p*n + i]: ascending eigenvalues at flat point p.
  std::vector<double> lambda;
  // xi[(p*n + i)*n + m]: component m of eigenvector i at flat point p.
  std::vector<double> xi;
  // c[((p*n + k)*n + i)*n + j]: coefficient c^k_ij at flat point p.
  std::vector<double> c;

  double lambda_at(std::size_t p, int i) const {
    return lambda[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
  }
  double xi_at(std::size_t p, int i, int m) const {
    return xi[(p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)) *
                  static_cast<std::size_t>(n) +
              static_cast<std::size_t>(m)];
  }
  double c_at(std::size_t p, int k, int i, int j) const {
    std::size_t nn = static_cast<std::size_t>(n);
    return c[((p * nn + static_cast<std::size_t>(k)) * nn + static_cast<std::size_t>(i)) * nn +
             static_cast<std::size_t>(j)];
  }
};

struct EigenFrameOptions {
  FdOrder fd_order = FdOrder::Second;
  double collision_gap = 1e-8;
  double max_condition = 1e12;
  double imag_tol = 1e-9;  // relative to eigenvalue scale
};

// Build a frame from any pointwise matrix field (flux Jacobian, Weingarten...).
EigenFrame build_eigen_frame(const Grid& grid,
                             const std::function<void(const RPoint&, std::vector<double>&)>& matrix,
                             int n, const EigenFrameOptions& opts);

EigenFrame eigen_frame(const GeneralSystem& sys, const Grid& grid,
                       const EigenFrameOptions& opts = {});

struct DiagonalizabilityReport {
  bool diagonalizable = false;
  double max_c_distinct = 0.0;
  RPoint argmax_point;
  std::vector<int> argmax_indices;
  // per_index[m] = max |c^m_jk| over j,k != m (Riemann-invariant criterion for
  // the m-th field).
  std::vector<double> per_index;
  double tolerance = 0.0;
};

DiagonalizabilityReport diagonalizability_test(const EigenFrame& frame, double tol = 1e-6);

// Numeric Lame field integrated from rotation coefficients: h_i(base) = 1,
// d_j ln h_i = a_ij for j != i, gauge d ln h_i = 0 along axis i.
struct LameField {
  Grid grid;
  int n = 0;
  std::vector<double> h;  // [p*n + i]
  double loop_residual_max = 0.0;
  ResidualReport semiham;

  double at(std::size_t p, int i) const {
    return h[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
  }
};

struct LameOptions {
  double semiham_tol = 1e-8;
  double loop_tol = 1e-6;
};

LameField lame_from_rotation(const RotationCoefficients& rc, const RPoint& base, const Grid& grid,
                             const LameOptions& opts = {});

}  // namespace conglab
