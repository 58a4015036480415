#include "conglab/hydro.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <array>
#include <numeric>
#include <string>

#include "conglab/parallel.hpp"

namespace conglab {

void DiagonalSystem::validate() const {
  if (n < 1) throw ValidationError("diagonal system needs n >= 1");
  if (static_cast<int>(lambda.size()) != n)
    throw ValidationError("diagonal system: lambda count != n");
  if (!lame.empty() && static_cast<int>(lame.size()) != n)
    throw ValidationError("diagonal system: lame count != n");
  if (!coords || static_cast<int>(coords->size()) != n)
    throw ValidationError("diagonal system: coordinate list must have n names");
}

void GeneralSystem::validate() const {
  if (n < 1) throw ValidationError("general system needs n >= 1");
  if (static_cast<int>(flux.size()) != n) throw ValidationError("general system: flux count != n");
  if (!coords || static_cast<int>(coords->size()) != n)
    throw ValidationError("general system: coordinate list must have n names");
}

std::vector<std::vector<Expr>> GeneralSystem::jacobian() const {
  std::vector<std::vector<Expr>> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
      v[static_cast<std::size_t>(i)].push_back(flux[static_cast<std::size_t>(i)].derivative(j));
  }
  return v;
}

HyperbolicityReport check_hyperbolicity(const DiagonalSystem& sys, const Grid& grid) {
  sys.validate();
  HyperbolicityReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  if (sys.n < 2) {
    rep.min_gap = std::numeric_limits<double>::infinity();
    return rep;
  }
  std::vector<double> lam(static_cast<std::size_t>(sys.n));
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    for (int i = 0; i < sys.n; ++i) lam[static_cast<std::size_t>(i)] = sys.lambda[static_cast<std::size_t>(i)].eval(pt);
    for (int i = 0; i < sys.n; ++i)
      for (int j = i + 1; j < sys.n; ++j) {
        double gap = std::abs(lam[static_cast<std::size_t>(i)] - lam[static_cast<std::size_t>(j)]);
        if (gap < rep.min_gap) {
          rep.min_gap = gap;
          rep.argmin_point = pt;
          rep.pair = {i, j};
        }
      }
  }
  return rep;
}

void require_hyperbolic(const DiagonalSystem& sys, const Grid& grid, double gap) {
  HyperbolicityReport rep = check_hyperbolicity(sys, grid);
  if (rep.min_gap < gap)
    throw HyperbolicityError(
        "strict hyperbolicity violated: |lambda^" + std::to_string(rep.pair.first + 1) +
            " - lambda^" + std::to_string(rep.pair.second + 1) + "| = " +
            std::to_string(rep.min_gap) + " below gap threshold",
        rep.argmin_point, rep.pair);
}

const Expr& RotationCoefficients::at(int i, int j) const {
  if (i == j) throw ValidationError("rotation coefficient a_ii is undefined");
  return a_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
}

RotationCoefficients rotation_coefficients(const DiagonalSystem& sys) {
  sys.validate();
  std::vector<std::vector<Expr>> a(static_cast<std::size_t>(sys.n),
                                   std::vector<Expr>(static_cast<std::size_t>(sys.n)));
  for (int i = 0; i < sys.n; ++i)
    for (int j = 0; j < sys.n; ++j) {
      if (i == j) continue;
      const Expr& li = sys.lambda[static_cast<std::size_t>(i)];
      const Expr& lj = sys.lambda[static_cast<std::size_t>(j)];
      a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = li.derivative(j) / (lj - li);
    }
  return RotationCoefficients(sys.n, std::move(a), sys.coords);
}

RotationCoefficients rotation_coefficients(const DiagonalSystem& sys, const Grid& grid,
                                           double gap) {
  require_hyperbolic(sys, grid, gap);
  return rotation_coefficients(sys);
}

ResidualReport semihamiltonian_residual(const RotationCoefficients& rc, const Grid& grid) {
  const int n = rc.n();
  if (n <= 2) {
    ResidualReport rep;
    rep.name = "semihamiltonian";
    rep.vacuous = true;
    return rep;
  }
  // Precompute the symbolic residual for every ordered distinct triple.
  struct Triple {
    int i, j, k;
    Expr residual;
  };
  std::vector<Triple> triples;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        const Expr& aij = rc.at(i, j);
        Expr res = aij.derivative(k) -
                   (rc.at(i, k) * rc.at(k, j) + aij * rc.at(j, k) - aij * rc.at(i, k));
        triples.push_back({i, j, k, std::move(res)});
      }

  std::vector<double> worst(grid.size(), 0.0);
  std::vector<std::array<int, 3>> worst_idx(grid.size());
  parallel_for(grid.size(), [&](std::size_t p) {
    RPoint pt = grid.point_flat(p);
    double w = -1.0;
    std::array<int, 3> wi{0, 0, 0};
    for (const Triple& t : triples) {
      double v;
      try {
        v = std::abs(t.residual.eval(pt));
      } catch (const EvalError& e) {
        throw SingularityError("semihamiltonian residual singular at grid point: " +
                                   std::string(e.what()),
                               {pt}, 1);
      }
      if (v > w) {
        w = v;
        wi = {t.i, t.j, t.k};
      }
    }
    worst[p] = w;
    worst_idx[p] = wi;
  });

  ResidualStats stats;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    stats.add(worst[p], pt, worst_idx[p]);
  }
  return stats.finish("semihamiltonian");
}

ResidualReport semihamiltonian_residual(const DiagonalSystem& sys, const Grid& grid) {
  if (sys.n <= 2) {
    ResidualReport rep;
    rep.name = "semihamiltonian";
    rep.vacuous = true;
    return rep;
  }
  require_hyperbolic(sys, grid);
  return semihamiltonian_residual(rotation_coefficients(sys), grid);
}

// ---------------------------------------------------------------------------
// Eigenframes
// ---------------------------------------------------------------------------

namespace {

struct RawFrame {
  std::vector<double> lambda;  // ascending
  Eigen::MatrixXd xi;          // columns are eigenvectors
};

RawFrame raw_frame_at(const std::function<void(const RPoint&, std::vector<double>&)>& matrix,
                      int n, const RPoint& pt, const EigenFrameOptions& opts,
                      std::vector<double>& scratch) {
  matrix(pt, scratch);
  Eigen::MatrixXd v(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      v(i, j) = scratch[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                        static_cast<std::size_t>(j)];

  Eigen::EigenSolver<Eigen::MatrixXd> solver(v);
  if (solver.info() != Eigen::Success)
    throw EigenFrameError(EigenFrameError::Kind::ComplexEigenvalues,
                          "eigen-decomposition failed", pt);
  Eigen::VectorXcd ev = solver.eigenvalues();
  double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i)
    if (std::abs(ev(i).imag()) > opts.imag_tol * scale)
      throw EigenFrameError(EigenFrameError::Kind::ComplexEigenvalues,
                            "complex characteristic velocities", pt);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ev(a).real() < ev(b).real(); });

  RawFrame f;
  f.lambda.resize(static_cast<std::size_t>(n));
  f.xi.resize(n, n);
  for (int i = 0; i < n; ++i) {
    f.lambda[static_cast<std::size_t>(i)] = ev(order[static_cast<std::size_t>(i)]).real();
    f.xi.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]).real();
    f.xi.col(i).normalize();
  }
  for (int i = 0; i + 1 < n; ++i)
    if (f.lambda[static_cast<std::size_t>(i) + 1] - f.lambda[static_cast<std::size_t>(i)] <
        opts.collision_gap)
      throw EigenFrameError(EigenFrameError::Kind::EigenvalueCollision,
                            "eigenvalue collision (gap below threshold)", pt);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.xi);
  double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
  if (!(cond < opts.max_condition))
    throw EigenFrameError(EigenFrameError::Kind::IllConditioned,
                          "ill-conditioned eigenvector frame", pt);
  return f;
}

}  // namespace

EigenFrame build_eigen_frame(const Grid& grid,
                             const std::function<void(const RPoint&, std::vector<double>&)>& matrix,
                             int n, const EigenFrameOptions& opts) {
  if (grid.dim() != n) throw ValidationError("eigen frame: grid dimension != n");
  const std::size_t nn = static_cast<std::size_t>(n);

  // Freeze the normalization component per family from the grid center.
  std::vector<double> scratch(nn * nn);
  RawFrame center = raw_frame_at(matrix, n, grid.point(grid.center_index()), opts, scratch);
  std::vector<int> norm_component(nn);
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    center.xi.col(i).cwiseAbs().maxCoeff(&arg);
    norm_component[static_cast<std::size_t>(i)] = arg;
  }

  EigenFrame frame{grid, n, {}, {}, {}};
  frame.lambda.resize(grid.size() * nn);
  frame.xi.resize(grid.size() * nn * nn);
  frame.c.assign(grid.size() * nn * nn * nn, 0.0);

  parallel_for(grid.size(), [&, norm_component](std::size_t p) {
    std::vector<double> local(nn * nn);
    RPoint pt = grid.point_flat(p);
    RawFrame f = raw_frame_at(matrix, n, pt, opts, local);
    for (int i = 0; i < n; ++i) {
      double pivot = f.xi(norm_component[static_cast<std::size_t>(i)], i);
      if (std::abs(pivot) < 1e-12)
        throw EigenFrameError(EigenFrameError::Kind::IllConditioned,
                              "frame normalization component vanished", pt);
      f.xi.col(i) /= pivot;
      frame.lambda[p * nn + static_cast<std::size_t>(i)] = f.lambda[static_cast<std::size_t>(i)];
      for (int m = 0; m < n; ++m)
        frame.xi[(p * nn + static_cast<std::size_t>(i)) * nn + static_cast<std::size_t>(m)] =
            f.xi(m, i);
    }
  });

  // Commutators: [L_i, L_j]u^m = xi_i^k d_k xi_j^m - xi_j^k d_k xi_i^m,
  // solved against the frame matrix.
  FieldView xi_view(frame.grid, frame.xi, n * n);
  parallel_for(grid.size(), [&](std::size_t p) {
    std::vector<int> idx(nn);
    grid.unflatten(p, idx);
    Eigen::MatrixXd xi_mat(n, n);  // columns: eigenvectors
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m) xi_mat(m, i) = frame.xi_at(p, i, m);

    // dxi(k, i*n+m) = d_k xi_i^m at this point
    Eigen::MatrixXd dxi(n, n * n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m)
          dxi(k, i * n + m) = xi_view.axis_derivative(idx, k, opts.fd_order, i * n + m);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(xi_mat);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        Eigen::VectorXd w(n);
        for (int m = 0; m < n; ++m) {
          double acc = 0.0;
          for (int k = 0; k < n; ++k)
            acc += xi_mat(k, i) * dxi(k, j * n + m) - xi_mat(k, j) * dxi(k, i * n + m);
          w(m) = acc;
        }
        Eigen::VectorXd sol = lu.solve(w);
        for (int k = 0; k < n; ++k)
          frame.c[((p * nn + static_cast<std::size_t>(k)) * nn + static_cast<std::size_t>(i)) *
                      nn +
                  static_cast<std::size_t>(j)] = sol(k);
      }
  });
  return frame;
}

EigenFrame eigen_frame(const GeneralSystem& sys, const Grid& grid,
                       const EigenFrameOptions& opts) {
  sys.validate();
  auto jac = sys.jacobian();
  const int n = sys.n;
  auto matrix = [jac, n](const RPoint& pt, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(j)] =
            jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(pt);
  };
  return build_eigen_frame(grid, matrix, n, opts);
}

DiagonalizabilityReport diagonalizability_test(const EigenFrame& frame, double tol) {
  DiagonalizabilityReport rep;
  rep.tolerance = tol;
  rep.per_index.assign(static_cast<std::size_t>(frame.n), 0.0);
  ResidualStats stats;
  const int n = frame.n;
  if (n <= 2) {
    rep.diagonalizable = true;  // no distinct triples exist
    return rep;
  }
  for (std::size_t p = 0; p < frame.grid.size(); ++p) {
    RPoint pt = frame.grid.point_flat(p);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j || i == k || j == k) continue;
          double v = std::abs(frame.c_at(p, k, i, j));
          std::array<int, 3> which{k, i, j};
          stats.add(v, pt, which);
          rep.per_index[static_cast<std::size_t>(k)] =
              std::max(rep.per_index[static_cast<std::size_t>(k)], v);
        }
  }
  ResidualReport r = stats.finish("diagonalizability");
  rep.max_c_distinct = r.max_abs;
  rep.argmax_point = r.argmax_point;
  rep.argmax_indices = r.argmax_indices;
  rep.diagonalizable = r.max_abs <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Lame field
// ---------------------------------------------------------------------------

namespace {

// Simpson integral of a_ij along one grid step of axis `axis` starting at
// node index `i0`, with the other coordinates fixed to `pt`.
double step_integral(const Expr& aij, RPoint pt, int axis, double x0, double h) {
  auto f = [&](double x) {
    pt[static_cast<std::size_t>(axis)] = x;
    return aij.eval(pt);
  };
  return simpson(f, x0, x0 + h, 1);
}

}  // namespace

LameField lame_from_rotation(const RotationCoefficients& rc, const RPoint& base, const Grid& grid,
                             const LameOptions& opts) {
  const int n = rc.n();
  if (grid.dim() != n) throw ValidationError("lame field: grid dimension != n");

  ResidualReport semiham = semihamiltonian_residual(rc, grid);
  if (!semiham.pass(opts.semiham_tol))
    throw PathDependenceError(
        "semihamiltonian residual " + std::to_string(semiham.max_abs) +
            " exceeds tolerance; Lame integration would be path dependent",
        {semiham.argmax_point}, 1);

  auto base_idx_opt = grid.locate(base);
  if (!base_idx_opt)
    throw ValidationError("lame_from_rotation: base point must be a grid node");
  const std::vector<int> base_idx = *base_idx_opt;

  const std::size_t nn = static_cast<std::size_t>(n);
  LameField field{grid, n, std::vector<double>(grid.size() * nn, 0.0), 0.0, semiham};

  // ln h_i via staircase paths in axis order 0..n-1; axis i contributes zero.
  for (int i = 0; i < n; ++i) {
    std::vector<double> lnh(grid.size(), 0.0);

    for (int stage = 0; stage < n; ++stage) {
      // Extend the region {axes <= stage free, axes > stage at base} along
      // axis `stage` line by line.
      std::vector<int> cursor(base_idx);
      // enumerate all combinations of axes 0..stage-1 (full range), axes
      // >stage fixed at base
      std::function<void(int)> sweep = [&](int axis) {
        if (axis == stage) {
          // integrate along `stage` from base index outward
          int b = base_idx[static_cast<std::size_t>(stage)];
          double h = grid.spacing(stage);
          const bool gauge = (stage == i);
          RPoint pt = grid.point(cursor);
          // forward
          double acc_src = lnh[grid.flat_index(cursor)];
          double acc = acc_src;
          for (int s = b; s + 1 < grid.axis(stage).count; ++s) {
            if (!gauge) {
              double x0 = grid.axis(stage).coord(s);
              acc += step_integral(rc.at(i, stage), pt, stage, x0, h);
            }
            cursor[static_cast<std::size_t>(stage)] = s + 1;
            lnh[grid.flat_index(cursor)] = acc;
          }
          // backward
          cursor[static_cast<std::size_t>(stage)] = b;
          acc = acc_src;
          for (int s = b; s - 1 >= 0; --s) {
            if (!gauge) {
              double x1 = grid.axis(stage).coord(s);
              acc -= step_integral(rc.at(i, stage), pt, stage, x1 - h, h);
            }
            cursor[static_cast<std::size_t>(stage)] = s - 1;
            lnh[grid.flat_index(cursor)] = acc;
          }
          cursor[static_cast<std::size_t>(stage)] = b;
          return;
        }
        for (int s = 0; s < grid.axis(axis).count; ++s) {
          cursor[static_cast<std::size_t>(axis)] = s;
          sweep(axis + 1);
        }
        cursor[static_cast<std::size_t>(axis)] = base_idx[static_cast<std::size_t>(axis)];
      };
      sweep(0);
    }

    for (std::size_t p = 0; p < grid.size(); ++p)
      field.h[p * nn + static_cast<std::size_t>(i)] = std::exp(lnh[p]);
  }

  // Closed-loop residual on every elementary cell in axis pairs (j,k), both
  // different from i.
  double loop_max = 0.0;
  RPoint worst_pt;
  for (int i = 0; i < n; ++i) {
    for (int ja = 0; ja < n; ++ja) {
      for (int ka = ja + 1; ka < n; ++ka) {
        if (ja == i || ka == i) continue;
        std::vector<int> idx(nn, 0);
        // iterate all cells of the (ja,ka) plane across the full grid
        for (std::size_t p = 0; p < grid.size(); ++p) {
          grid.unflatten(p, idx);
          if (idx[static_cast<std::size_t>(ja)] + 1 >= grid.axis(ja).count ||
              idx[static_cast<std::size_t>(ka)] + 1 >= grid.axis(ka).count)
            continue;
          RPoint p00 = grid.point(idx);
          double hj = grid.spacing(ja), hk = grid.spacing(ka);
          double xj = p00[static_cast<std::size_t>(ja)], xk = p00[static_cast<std::size_t>(ka)];

          RPoint q = p00;
          double loop = 0.0;
          // bottom edge along ja at xk
          loop += step_integral(rc.at(i, ja), q, ja, xj, hj);
          // right edge along ka at xj + hj
          q = p00;
          q[static_cast<std::size_t>(ja)] = xj + hj;
          loop += step_integral(rc.at(i, ka), q, ka, xk, hk);
          // top edge along ja at xk + hk (reverse)
          q = p00;
          q[static_cast<std::size_t>(ka)] = xk + hk;
          loop -= step_integral(rc.at(i, ja), q, ja, xj, hj);
          // left edge along ka at xj (reverse)
          q = p00;
          loop -= step_integral(rc.at(i, ka), q, ka, xk, hk);

          if (std::abs(loop) > loop_max) {
            loop_max = std::abs(loop);
            worst_pt = p00;
          }
        }
      }
    }
  }
  field.loop_residual_max = loop_max;
  if (loop_max > opts.loop_tol)
    throw PathDependenceError("closed-loop integral of d ln h exceeds tolerance: " +
                                  std::to_string(loop_max),
                              {worst_pt}, 1);
  return field;
}

}  // namespace conglab
