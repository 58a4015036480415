#include "conglab/claws.hpp"

#include <array>
#include <cmath>
#include <functional>

#include "conglab/parallel.hpp"

namespace conglab {

namespace {

constexpr double kMuCollisionFraction = 0.10;  // mu-collision skip budget

double safe_fraction(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

const Expr& CommutingFlow::q_for(const std::string& density_name) const {
  auto it = q.find(density_name);
  if (it == q.end()) throw MissingFluxError(density_name);
  return it->second;
}

LawReport verify_law_diagonal(const DiagonalSystem& sys, const ConservationLaw& law,
                              const Grid& grid) {
  sys.validate();
  require_hyperbolic(sys, grid);
  const int n = sys.n;

  std::vector<Expr> first;  // d_i g - lambda^i d_i h
  for (int i = 0; i < n; ++i)
    first.push_back(law.g.derivative(i) - sys.lambda[static_cast<std::size_t>(i)] * law.h.derivative(i));

  RotationCoefficients a = rotation_coefficients(sys);
  struct Pair {
    int i, j;
    Expr residual;
  };
  std::vector<Pair> second;  // d_i d_j h - a_ij d_i h - a_ji d_j h
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      second.push_back({i, j,
                        law.h.derivative(i).derivative(j) - a.at(i, j) * law.h.derivative(i) -
                            a.at(j, i) * law.h.derivative(j)});

  ResidualStats s1, s2;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    try {
      for (int i = 0; i < n; ++i) {
        std::array<int, 1> which{i};
        s1.add(first[static_cast<std::size_t>(i)].eval(pt), pt, which);
      }
      for (const Pair& pr : second) {
        std::array<int, 2> which{pr.i, pr.j};
        s2.add(pr.residual.eval(pt), pt, which);
      }
    } catch (const EvalError& e) {
      throw SingularityError("law verification singular at grid point: " + std::string(e.what()),
                             {pt}, 1);
    }
  }
  LawReport rep;
  rep.first_order = s1.finish(law.name.empty() ? "law first-order" : law.name + " first-order");
  rep.second_order = s2.finish(law.name.empty() ? "law second-order" : law.name + " second-order");
  rep.second_order.vacuous = second.empty();
  return rep;
}

namespace {

// Directional derivatives L_i f = xi_i^k d_k f with symbolic gradient,
// evaluated on the frame grid; and FD outer derivatives of sampled fields.
struct DirectionalCalculus {
  const EigenFrame& frame;
  FdOrder order;

  // L_i f at flat point p given symbolic gradient values grad[k].
  double directional(std::size_t p, int i, std::span<const double> grad) const {
    double acc = 0.0;
    for (int k = 0; k < frame.n; ++k) acc += frame.xi_at(p, i, k) * grad[static_cast<std::size_t>(k)];
    return acc;
  }

  // L_i applied to a sampled scalar field (FD along grid axes).
  double directional_field(const FieldView& field, std::span<const int> idx, std::size_t p,
                           int i) const {
    double acc = 0.0;
    for (int k = 0; k < frame.n; ++k)
      acc += frame.xi_at(p, i, k) * field.axis_derivative(idx, k, order);
    return acc;
  }
};

}  // namespace

LawReport verify_law_general(const GeneralSystem& sys, const EigenFrame& frame,
                             const ConservationLaw& law, const Grid& grid, FdOrder order) {
  sys.validate();
  const int n = sys.n;
  const std::size_t N = grid.size();

  std::vector<Expr> dh, dg;
  for (int k = 0; k < n; ++k) {
    dh.push_back(law.h.derivative(k));
    dg.push_back(law.g.derivative(k));
  }

  DirectionalCalculus calc{frame, order};

  // Pass 1: L_i h, L_i g fields; first-order residuals.
  std::vector<double> Lh(N * static_cast<std::size_t>(n)), Lg(N * static_cast<std::size_t>(n));
  std::vector<double> gradh(static_cast<std::size_t>(n)), gradg(static_cast<std::size_t>(n));
  ResidualStats s1;
  for (std::size_t p = 0; p < N; ++p) {
    RPoint pt = grid.point_flat(p);
    for (int k = 0; k < n; ++k) {
      gradh[static_cast<std::size_t>(k)] = dh[static_cast<std::size_t>(k)].eval(pt);
      gradg[static_cast<std::size_t>(k)] = dg[static_cast<std::size_t>(k)].eval(pt);
    }
    for (int i = 0; i < n; ++i) {
      double lh = calc.directional(p, i, gradh);
      double lg = calc.directional(p, i, gradg);
      Lh[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = lh;
      Lg[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = lg;
      std::array<int, 1> which{i};
      s1.add(lg - frame.lambda_at(p, i) * lh, pt, which);
    }
  }

  // Pass 2: second-order system with FD outer derivative of the L_j h field.
  FieldView Lh_view(grid, Lh, n);
  FieldView lam_view(grid, frame.lambda, n);
  ResidualStats s2;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < N; ++p) {
    grid.unflatten(p, idx);
    RPoint pt = grid.point_flat(p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double LiLjh = 0.0;
        for (int k = 0; k < n; ++k)
          LiLjh += frame.xi_at(p, i, k) * Lh_view.axis_derivative(idx, k, order, j);
        double li = frame.lambda_at(p, i), lj = frame.lambda_at(p, j);
        double Lih = Lh[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
        double Ljh = Lh[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
        // L_j lambda^i and L_i lambda^j by FD of the eigenvalue fields.
        double Lj_li = 0.0, Li_lj = 0.0;
        for (int k = 0; k < n; ++k) {
          Lj_li += frame.xi_at(p, j, k) * lam_view.axis_derivative(idx, k, order, i);
          Li_lj += frame.xi_at(p, i, k) * lam_view.axis_derivative(idx, k, order, j);
        }
        double rhs = Lj_li / (lj - li) * Lih + Li_lj / (li - lj) * Ljh;
        for (int k = 0; k < n; ++k) {
          double lk = frame.lambda_at(p, k);
          rhs += frame.c_at(p, k, i, j) * (li - lk) / (li - lj) *
                 Lh[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
        }
        std::array<int, 2> which{i, j};
        s2.add(LiLjh - rhs, pt, which);
      }
  }

  LawReport rep;
  rep.first_order = s1.finish(law.name.empty() ? "law first-order" : law.name + " first-order");
  rep.second_order = s2.finish(law.name.empty() ? "law second-order" : law.name + " second-order");
  rep.second_order.vacuous = (n < 2);
  return rep;
}

PhiReport verify_phi(const DiagonalSystem& sys, const ConservationLaw& law, const Grid& grid,
                     double collision_threshold) {
  sys.validate();
  require_hyperbolic(sys, grid);
  const int n = sys.n;
  Expr phi = law.phi();

  // Pre-flight: h != 0 and phi != lambda^i on the grid.
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    double hval = law.h.eval(pt);
    if (hval == 0.0)
      throw SingularityError("phi calculus: density h vanishes at grid point", {pt}, 1);
    double phival = phi.eval(pt);
    for (int i = 0; i < n; ++i) {
      double li = sys.lambda[static_cast<std::size_t>(i)].eval(pt);
      if (std::abs(phival - li) < collision_threshold)
        throw SingularityError(
            "phi collision: |phi - lambda^" + std::to_string(i + 1) + "| below threshold " +
                std::to_string(collision_threshold) + " (focal regime)",
            {pt}, 1);
    }
  }

  RotationCoefficients a = rotation_coefficients(sys);

  // Gradient form: d_i ln h - d_i phi / (lambda^i - phi).
  std::vector<Expr> grad;
  for (int i = 0; i < n; ++i)
    grad.push_back(law.h.derivative(i) / law.h -
                   phi.derivative(i) / (sys.lambda[static_cast<std::size_t>(i)] - phi));

  // Full nonlinear second-order system for phi (diagonal case: c = 0).
  struct Pair {
    int i, j;
    Expr residual;
  };
  std::vector<Pair> nonlinear;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Expr& li = sys.lambda[static_cast<std::size_t>(i)];
      const Expr& lj = sys.lambda[static_cast<std::size_t>(j)];
      Expr dpi = phi.derivative(i);
      Expr dpj = phi.derivative(j);
      Expr rhs = (Expr::number(1.0) / (phi - li) + Expr::number(1.0) / (phi - lj)) * dpi * dpj +
                 (li.derivative(j) / (lj - li)) * ((phi - lj) / (phi - li)) * dpi +
                 (lj.derivative(i) / (li - lj)) * ((phi - li) / (phi - lj)) * dpj;
      nonlinear.push_back({i, j, dpi.derivative(j) - rhs});
    }

  ResidualStats s1, s2;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    for (int i = 0; i < n; ++i) {
      std::array<int, 1> which{i};
      s1.add(grad[static_cast<std::size_t>(i)].eval(pt), pt, which);
    }
    for (const Pair& pr : nonlinear) {
      std::array<int, 2> which{pr.i, pr.j};
      s2.add(pr.residual.eval(pt), pt, which);
    }
  }
  PhiReport rep;
  rep.gradient = s1.finish("phi gradient");
  rep.nonlinear = s2.finish("phi nonlinear");
  rep.nonlinear.vacuous = nonlinear.empty();
  return rep;
}

PhiReport verify_phi(const GeneralSystem& sys, const EigenFrame& frame, const ConservationLaw& law,
                     const Grid& grid, double collision_threshold, FdOrder order) {
  sys.validate();
  const int n = sys.n;
  const std::size_t N = grid.size();
  Expr phi = law.phi();

  std::vector<Expr> dphi, dh;
  for (int k = 0; k < n; ++k) {
    dphi.push_back(phi.derivative(k));
    dh.push_back(law.h.derivative(k));
  }

  DirectionalCalculus calc{frame, order};
  std::vector<double> Lphi(N * static_cast<std::size_t>(n));
  std::vector<double> phival(N);
  ResidualStats s1;
  std::vector<double> gradphi(static_cast<std::size_t>(n)), gradh(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < N; ++p) {
    RPoint pt = grid.point_flat(p);
    double hval = law.h.eval(pt);
    if (hval == 0.0)
      throw SingularityError("phi calculus: density h vanishes at grid point", {pt}, 1);
    phival[p] = phi.eval(pt);
    for (int i = 0; i < n; ++i)
      if (std::abs(phival[p] - frame.lambda_at(p, i)) < collision_threshold)
        throw SingularityError("phi collision with lambda^" + std::to_string(i + 1) +
                                   " (focal regime)",
                               {pt}, 1);
    for (int k = 0; k < n; ++k) {
      gradphi[static_cast<std::size_t>(k)] = dphi[static_cast<std::size_t>(k)].eval(pt);
      gradh[static_cast<std::size_t>(k)] = dh[static_cast<std::size_t>(k)].eval(pt);
    }
    for (int i = 0; i < n; ++i) {
      double lphi = calc.directional(p, i, gradphi);
      double lh = calc.directional(p, i, gradh);
      Lphi[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = lphi;
      std::array<int, 1> which{i};
      s1.add(lh / hval - lphi / (frame.lambda_at(p, i) - phival[p]), pt, which);
    }
  }

  FieldView Lphi_view(grid, Lphi, n);
  FieldView lam_view(grid, frame.lambda, n);
  ResidualStats s2;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < N; ++p) {
    grid.unflatten(p, idx);
    RPoint pt = grid.point_flat(p);
    double ph = phival[p];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double LiLjphi = 0.0;
        for (int k = 0; k < n; ++k)
          LiLjphi += frame.xi_at(p, i, k) * Lphi_view.axis_derivative(idx, k, order, j);
        double li = frame.lambda_at(p, i), lj = frame.lambda_at(p, j);
        double Lpi = Lphi[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
        double Lpj = Lphi[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
        double Lj_li = 0.0, Li_lj = 0.0;
        for (int k = 0; k < n; ++k) {
          Lj_li += frame.xi_at(p, j, k) * lam_view.axis_derivative(idx, k, order, i);
          Li_lj += frame.xi_at(p, i, k) * lam_view.axis_derivative(idx, k, order, j);
        }
        double rhs = (1.0 / (ph - li) + 1.0 / (ph - lj)) * Lpi * Lpj +
                     Lj_li / (lj - li) * (ph - lj) / (ph - li) * Lpi +
                     Li_lj / (li - lj) * (ph - li) / (ph - lj) * Lpj;
        for (int k = 0; k < n; ++k) {
          double lk = frame.lambda_at(p, k);
          rhs += frame.c_at(p, k, i, j) * (li - lk) / (li - lj) * (ph - lj) / (ph - lk) *
                 Lphi[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
        }
        std::array<int, 2> which{i, j};
        s2.add(LiLjphi - rhs, pt, which);
      }
  }

  PhiReport rep;
  rep.gradient = s1.finish("phi gradient");
  rep.nonlinear = s2.finish("phi nonlinear");
  rep.nonlinear.vacuous = (n < 2);
  return rep;
}

ResidualReport verify_commuting(const DiagonalSystem& sys, const CommutingFlow& flow,
                                const Grid& grid) {
  sys.validate();
  require_hyperbolic(sys, grid);
  const int n = sys.n;
  if (static_cast<int>(flow.mu.size()) != n)
    throw ValidationError("commuting flow: mu count != n");

  RotationCoefficients a = rotation_coefficients(sys);
  struct Pair {
    int i, j;
    Expr dmu;   // d_j mu^i
    Expr diff;  // mu^j - mu^i
    Expr aij;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      pairs.push_back({i, j, flow.mu[static_cast<std::size_t>(i)].derivative(j),
                       flow.mu[static_cast<std::size_t>(j)] - flow.mu[static_cast<std::size_t>(i)],
                       a.at(i, j)});
    }

  ResidualStats stats;
  std::size_t collisions = 0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    bool collided = false;
    for (const Pair& pr : pairs) {
      double diff = pr.diff.eval(pt);
      if (std::abs(diff) < 1e-10) {
        stats.skip();
        collided = true;
        continue;
      }
      std::array<int, 2> which{pr.i, pr.j};
      stats.add(pr.dmu.eval(pt) / diff - pr.aij.eval(pt), pt, which);
    }
    if (collided) ++collisions;
  }
  if (safe_fraction(collisions, grid.size()) > kMuCollisionFraction)
    throw SingularityError("mu-collision: |mu^i - mu^j| < 1e-10 on more than 10% of grid points",
                           {}, collisions);
  ResidualReport rep = stats.finish("commuting flow");
  return rep;
}

CommutingGeneralReport verify_commuting(const EigenFrame& frame, const GeneralFlowField& flow,
                                        const Grid& grid, FdOrder order) {
  const int n = frame.n;
  const std::size_t N = grid.size();
  if (flow.mu.size() != N * static_cast<std::size_t>(n))
    throw ValidationError("general flow field has wrong sample count");

  FieldView mu_view(grid, flow.mu, n);
  FieldView lam_view(grid, frame.lambda, n);
  ResidualStats s1, s2;
  std::size_t collisions = 0;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < N; ++p) {
    grid.unflatten(p, idx);
    RPoint pt = grid.point_flat(p);
    bool collided = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double mui = mu_view.value(p, i), muj = mu_view.value(p, j);
        if (std::abs(muj - mui) < 1e-10) {
          s1.skip();
          collided = true;
          continue;
        }
        double Lj_mui = 0.0, Lj_li = 0.0;
        for (int k = 0; k < n; ++k) {
          Lj_mui += frame.xi_at(p, j, k) * mu_view.axis_derivative(idx, k, order, i);
          Lj_li += frame.xi_at(p, j, k) * lam_view.axis_derivative(idx, k, order, i);
        }
        double li = frame.lambda_at(p, i), lj = frame.lambda_at(p, j);
        std::array<int, 2> which{i, j};
        s1.add(Lj_mui / (muj - mui) - Lj_li / (lj - li), pt, which);
        for (int k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          double muk = mu_view.value(p, k), lk = frame.lambda_at(p, k);
          std::array<int, 3> which3{i, j, k};
          s2.add(frame.c_at(p, k, i, j) *
                     ((mui - muk) / (mui - muj) - (li - lk) / (li - lj)),
                 pt, which3);
        }
      }
    if (collided) ++collisions;
  }
  if (safe_fraction(collisions, N) > kMuCollisionFraction)
    throw SingularityError("mu-collision: |mu^i - mu^j| < 1e-10 on more than 10% of grid points",
                           {}, collisions);
  CommutingGeneralReport rep;
  rep.comm1 = s1.finish("commuting first-order");
  rep.comm2 = s2.finish("commuting triple condition");
  rep.comm2.vacuous = (n <= 2);
  return rep;
}

ResidualReport verify_flow_flux(const CommutingFlow& flow, const Expr& u, const Expr& q,
                                const Grid& grid) {
  const int n = static_cast<int>(flow.mu.size());
  std::vector<Expr> residuals;
  for (int i = 0; i < n; ++i)
    residuals.push_back(q.derivative(i) - flow.mu[static_cast<std::size_t>(i)] * u.derivative(i));
  ResidualStats stats;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    for (int i = 0; i < n; ++i) {
      std::array<int, 1> which{i};
      stats.add(residuals[static_cast<std::size_t>(i)].eval(pt), pt, which);
    }
  }
  return stats.finish("flow flux");
}

FluxField flux_from_density(const DiagonalSystem& sys, const Expr& h, const RPoint& base,
                            const Grid& grid, double density_tol) {
  sys.validate();
  require_hyperbolic(sys, grid);
  const int n = sys.n;

  ConservationLaw probe{"density", h, Expr::number(0.0)};
  LawReport check = verify_law_diagonal(sys, probe, grid);
  if (!check.second_order.pass(density_tol))
    throw CompatibilityError(
        "density does not satisfy the second-order system (residual " +
            std::to_string(check.second_order.max_abs) + "); flux integral is path dependent",
        {check.second_order.argmax_point}, 1);

  auto base_idx_opt = grid.locate(base);
  if (!base_idx_opt) throw ValidationError("flux_from_density: base point must be a grid node");
  const std::vector<int> base_idx = *base_idx_opt;

  // Integrand along axis k: lambda^k d_k h.
  std::vector<Expr> integrand;
  for (int k = 0; k < n; ++k)
    integrand.push_back(sys.lambda[static_cast<std::size_t>(k)] * h.derivative(k));

  auto step = [&](int axis, RPoint at, double x0, double hstep) {
    auto f = [&](double x) {
      at[static_cast<std::size_t>(axis)] = x;
      return integrand[static_cast<std::size_t>(axis)].eval(at);
    };
    return simpson(f, x0, x0 + hstep, 1);
  };

  FluxField field{grid, std::vector<double>(grid.size(), 0.0), 0.0, check};

  // Staircase integration, axes in order.
  for (int stage = 0; stage < n; ++stage) {
    std::vector<int> cursor(base_idx);
    std::function<void(int)> sweep = [&](int axis) {
      if (axis == stage) {
        int b = base_idx[static_cast<std::size_t>(stage)];
        double hstep = grid.spacing(stage);
        RPoint pt = grid.point(cursor);
        double acc_src = field.g[grid.flat_index(cursor)];
        double acc = acc_src;
        for (int s = b; s + 1 < grid.axis(stage).count; ++s) {
          acc += step(stage, pt, grid.axis(stage).coord(s), hstep);
          cursor[static_cast<std::size_t>(stage)] = s + 1;
          field.g[grid.flat_index(cursor)] = acc;
        }
        cursor[static_cast<std::size_t>(stage)] = b;
        acc = acc_src;
        for (int s = b; s - 1 >= 0; --s) {
          acc -= step(stage, pt, grid.axis(stage).coord(s) - hstep, hstep);
          cursor[static_cast<std::size_t>(stage)] = s - 1;
          field.g[grid.flat_index(cursor)] = acc;
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

  // Loop residual over all elementary cells of every axis pair, plus the
  // magnitude scale for the tolerance.
  double max_integrand = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    for (int k = 0; k < n; ++k)
      max_integrand = std::max(max_integrand,
                               std::abs(integrand[static_cast<std::size_t>(k)].eval(pt)));
  }

  double loop_max = 0.0;
  RPoint worst;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int ja = 0; ja < n; ++ja)
    for (int ka = ja + 1; ka < n; ++ka)
      for (std::size_t p = 0; p < grid.size(); ++p) {
        grid.unflatten(p, idx);
        if (idx[static_cast<std::size_t>(ja)] + 1 >= grid.axis(ja).count ||
            idx[static_cast<std::size_t>(ka)] + 1 >= grid.axis(ka).count)
          continue;
        RPoint p00 = grid.point(idx);
        double hj = grid.spacing(ja), hk = grid.spacing(ka);
        double xj = p00[static_cast<std::size_t>(ja)], xk = p00[static_cast<std::size_t>(ka)];
        double loop = 0.0;
        RPoint q = p00;
        loop += step(ja, q, xj, hj);
        q = p00;
        q[static_cast<std::size_t>(ja)] = xj + hj;
        loop += step(ka, q, xk, hk);
        q = p00;
        q[static_cast<std::size_t>(ka)] = xk + hk;
        loop -= step(ja, q, xj, hj);
        loop -= step(ka, p00, xk, hk);
        if (std::abs(loop) > loop_max) {
          loop_max = std::abs(loop);
          worst = p00;
        }
      }
  field.loop_residual_max = loop_max;
  double tol = 1e-6 * grid.diameter() * std::max(max_integrand, 1e-300);
  if (loop_max > tol)
    throw CompatibilityError("flux loop residual " + std::to_string(loop_max) +
                                 " exceeds tolerance " + std::to_string(tol),
                             {worst}, 1);
  return field;
}

}  // namespace conglab
