#include "conglab/transforms.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>

namespace conglab {

namespace {

// Hard singularity guard: a denominator below 1e-10 relative to the local
// scale is a degeneracy, not a number.
void guard_denominators(const Expr& den, const Grid& grid, const std::string& what,
                        double local_scale = 1.0) {
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    double v = den.eval(pt);
    if (std::abs(v) < 1e-10 * local_scale)
      throw SingularityError(what + " vanishes on the working grid", {pt}, 1);
  }
}

bool law_is_kernel(const Expr& density, const Grid& grid) {
  double max_u = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    max_u = std::max(max_u, std::abs(density.eval(grid.point_flat(p))));
  return max_u <= 1e-12;
}

}  // namespace

DiagonalSystem TransformResult::transformed_system() const {
  if (!symbolic_velocities())
    throw ValidationError("transform has no symbolic velocities (Laplace is numeric-only)");
  DiagonalSystem sys;
  sys.n = n;
  sys.lambda = lambda;
  sys.lame = lame;
  sys.coords = coords;
  return sys;
}

double TransformResult::velocity_at(int i, const RPoint& pt, double degenerate_tol) const {
  if (symbolic_velocities()) return lambda[static_cast<std::size_t>(i)].eval(pt);
  double best = 0.0, best_du = 0.0;
  for (const TransformedLaw& l : laws) {
    double du = l.density.derivative(i).eval(pt);
    if (std::abs(du) > std::abs(best_du)) {
      best_du = du;
      best = l.flux.derivative(i).eval(pt) / du;
    }
  }
  if (std::abs(best_du) <= degenerate_tol)
    throw SingularityError("all transformed densities are degenerate along axis " +
                               std::to_string(i + 1),
                           {pt}, 1);
  return best;
}

TransformedLaw TransformResult::apply(const ConservationLaw& law) const {
  switch (kind) {
    case TransformKind::Levy: {
      Expr U = law.h - (gen_h / gen_h.derivative(alpha)) * law.h.derivative(alpha);
      Expr F = law.g - (gen_g / gen_g.derivative(alpha)) * law.g.derivative(alpha);
      return {law.name, U, F, false};
    }
    case TransformKind::Laplace: {
      Expr du = law.h.derivative(alpha);
      Expr U = law.h - du / gen_a_beta_alpha;
      Expr F = law.g - gen_lambda_beta * du / gen_a_beta_alpha;
      return {law.name, U, F, false};
    }
    default:
      throw ValidationError("this transformation needs the flow flux q of the density");
  }
}

TransformedLaw TransformResult::apply(const ConservationLaw& law, const Expr& q) const {
  if (kind != TransformKind::AdjointLevy)
    throw ValidationError("flux-carrying apply() is for the adjoint transformation");
  Expr U = law.h - q / gen_mu_alpha;
  Expr F = law.g - gen_lambda_alpha * q / gen_mu_alpha;
  return {law.name, U, F, false};
}

TransformResult levy(const DiagonalSystem& sys, const ConservationLaw& law, int alpha,
                     const Grid& grid) {
  sys.validate();
  if (alpha < 0 || alpha >= sys.n) throw ValidationError("levy: alpha out of range");
  require_hyperbolic(sys, grid);
  const int n = sys.n;
  RotationCoefficients a = rotation_coefficients(sys);

  const Expr& h = law.h;
  const Expr& g = law.g;
  Expr dah = h.derivative(alpha);
  guard_denominators(dah, grid, "d_alpha h");

  TransformResult out;
  out.kind = TransformKind::Levy;
  out.n = n;
  out.alpha = alpha;
  out.coords = sys.coords;
  out.gen_h = h;
  out.gen_g = g;

  out.lambda.resize(static_cast<std::size_t>(n));
  out.lambda[static_cast<std::size_t>(alpha)] = g / h;
  for (int i = 0; i < n; ++i) {
    if (i == alpha) continue;
    Expr den = dah - a.at(i, alpha) * h;
    guard_denominators(den, grid, "d_alpha h - a_{i alpha} h (i=" + std::to_string(i + 1) + ")");
    out.lambda[static_cast<std::size_t>(i)] =
        (sys.lambda[static_cast<std::size_t>(i)] * dah - a.at(i, alpha) * g) / den;
  }

  // Transformed coefficients.
  out.A.assign(static_cast<std::size_t>(n), std::vector<Expr>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i) {
    if (i == alpha) continue;
    Expr factor = Expr::number(1.0) - a.at(i, alpha) * h / dah;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      out.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          a.at(i, j) + factor.derivative(j) / factor;
    }
    out.A[static_cast<std::size_t>(alpha)][static_cast<std::size_t>(i)] =
        factor * h.derivative(i) / h;
  }

  // Lame factors when the source carries Lame data.
  if (!sys.lame.empty()) {
    out.lame.resize(static_cast<std::size_t>(n));
    out.lame[static_cast<std::size_t>(alpha)] =
        sys.lame[static_cast<std::size_t>(alpha)] * h / dah;
    for (int i = 0; i < n; ++i) {
      if (i == alpha) continue;
      out.lame[static_cast<std::size_t>(i)] =
          sys.lame[static_cast<std::size_t>(i)] *
          (Expr::number(1.0) - a.at(i, alpha) * h / dah);
    }
  }

  // The generating law itself maps into the kernel.
  TransformedLaw self = out.apply(law);
  self.kernel = law_is_kernel(self.density, grid);
  out.laws.push_back(std::move(self));
  return out;
}

TransformResult adjoint_levy(const DiagonalSystem& sys, const CommutingFlow& flow, int alpha,
                             const Grid& grid) {
  sys.validate();
  if (alpha < 0 || alpha >= sys.n) throw ValidationError("adjoint_levy: alpha out of range");
  if (static_cast<int>(flow.mu.size()) != sys.n)
    throw ValidationError("adjoint_levy: flow mu count != n");
  require_hyperbolic(sys, grid);
  const int n = sys.n;
  RotationCoefficients a = rotation_coefficients(sys);

  const Expr& mua = flow.mu[static_cast<std::size_t>(alpha)];
  Expr dmua = mua.derivative(alpha);
  guard_denominators(mua, grid, "mu^alpha");
  guard_denominators(dmua, grid, "d_alpha mu^alpha");
  for (int i = 0; i < n; ++i) {
    if (i == alpha) continue;
    guard_denominators(mua - flow.mu[static_cast<std::size_t>(i)], grid,
                       "mu^alpha - mu^" + std::to_string(i + 1));
  }

  const Expr& la = sys.lambda[static_cast<std::size_t>(alpha)];

  TransformResult out;
  out.kind = TransformKind::AdjointLevy;
  out.n = n;
  out.alpha = alpha;
  out.coords = sys.coords;
  out.gen_mu_alpha = mua;
  out.gen_lambda_alpha = la;

  out.lambda.resize(static_cast<std::size_t>(n));
  out.lambda[static_cast<std::size_t>(alpha)] = (la * dmua - mua * la.derivative(alpha)) / dmua;
  for (int i = 0; i < n; ++i) {
    if (i == alpha) continue;
    const Expr& mui = flow.mu[static_cast<std::size_t>(i)];
    out.lambda[static_cast<std::size_t>(i)] =
        (sys.lambda[static_cast<std::size_t>(i)] * mua - la * mui) / (mua - mui);
  }

  out.A.assign(static_cast<std::size_t>(n), std::vector<Expr>(static_cast<std::size_t>(n)));
  Expr ratio = dmua / mua;
  for (int i = 0; i < n; ++i) {
    if (i == alpha) continue;
    out.A[static_cast<std::size_t>(alpha)][static_cast<std::size_t>(i)] =
        a.at(alpha, i) + ratio.derivative(i) / ratio;
    Expr factor = Expr::number(1.0) - flow.mu[static_cast<std::size_t>(i)] / mua;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      out.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          a.at(i, j) + factor.derivative(j) / factor;
    }
  }

  if (!sys.lame.empty()) {
    out.lame.resize(static_cast<std::size_t>(n));
    out.lame[static_cast<std::size_t>(alpha)] = sys.lame[static_cast<std::size_t>(alpha)] * dmua / mua;
    for (int i = 0; i < n; ++i) {
      if (i == alpha) continue;
      out.lame[static_cast<std::size_t>(i)] =
          sys.lame[static_cast<std::size_t>(i)] *
          (Expr::number(1.0) - flow.mu[static_cast<std::size_t>(i)] / mua);
    }
  }
  return out;
}

TransformResult laplace(const DiagonalSystem& sys, int alpha, int beta,
                        std::span<const ConservationLaw> laws, const Grid& grid) {
  sys.validate();
  if (alpha == beta) throw ValidationError("laplace: alpha and beta must differ");
  if (alpha < 0 || alpha >= sys.n || beta < 0 || beta >= sys.n)
    throw ValidationError("laplace: index out of range");
  require_hyperbolic(sys, grid);
  RotationCoefficients a = rotation_coefficients(sys);
  Expr aba = a.at(beta, alpha);
  guard_denominators(aba, grid, "a_{beta alpha}");

  TransformResult out;
  out.kind = TransformKind::Laplace;
  out.n = sys.n;
  out.alpha = alpha;
  out.beta = beta;
  out.coords = sys.coords;
  out.gen_a_beta_alpha = aba;
  out.gen_lambda_beta = sys.lambda[static_cast<std::size_t>(beta)];

  bool any_nondegenerate = false;
  for (const ConservationLaw& l : laws) {
    TransformedLaw t = out.apply(l);
    t.kernel = law_is_kernel(t.density, grid);
    for (int i = 0; i < sys.n && !any_nondegenerate; ++i) {
      for (std::size_t p = 0; p < grid.size(); ++p)
        if (std::abs(t.density.derivative(i).eval(grid.point_flat(p))) > 1e-10) {
          any_nondegenerate = true;
          break;
        }
    }
    out.laws.push_back(std::move(t));
  }
  if (!laws.empty() && !any_nondegenerate)
    throw SingularityError("laplace: every transformed density is constant (degenerate laws)", {},
                           0);
  return out;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

double CompositionEvaluator::density_at(const RPoint& pt) const {
  const int m = n;
  Eigen::MatrixXd num(m + 1, m + 1), den(m, m);
  num(0, 0) = target_u.eval(pt);
  for (int j = 0; j < m; ++j) num(0, j + 1) = target_u.derivative(j).eval(pt);
  for (int i = 0; i < m; ++i) {
    const Expr& h = laws[static_cast<std::size_t>(i)].h;
    num(i + 1, 0) = h.eval(pt);
    for (int j = 0; j < m; ++j) {
      double d = h.derivative(j).eval(pt);
      num(i + 1, j + 1) = d;
      den(i, j) = d;
    }
  }
  double d = den.determinant();
  double scale = den.cwiseAbs().rowwise().maxCoeff().prod();
  if (std::abs(d) <= 1e-10 * std::max(scale, 1e-300))
    throw SingularityError("composition: density denominator determinant vanishes", {pt}, 1);
  return num.determinant() / d;
}

double CompositionEvaluator::flux_at(const RPoint& pt) const {
  const int m = n;
  Eigen::MatrixXd num(m + 1, m + 1), den(m, m);
  num(0, 0) = target_f.eval(pt);
  for (int j = 0; j < m; ++j) num(0, j + 1) = target_f.derivative(j).eval(pt);
  for (int i = 0; i < m; ++i) {
    const Expr& g = laws[static_cast<std::size_t>(i)].g;
    num(i + 1, 0) = g.eval(pt);
    for (int j = 0; j < m; ++j) {
      double d = g.derivative(j).eval(pt);
      num(i + 1, j + 1) = d;
      den(i, j) = d;
    }
  }
  double d = den.determinant();
  double scale = den.cwiseAbs().rowwise().maxCoeff().prod();
  if (std::abs(d) <= 1e-10 * std::max(scale, 1e-300))
    throw SingularityError("composition: flux denominator determinant vanishes", {pt}, 1);
  return num.determinant() / d;
}

CompositionEvaluator levy_composition(const DiagonalSystem& sys,
                                      std::span<const ConservationLaw> laws, const Expr& u,
                                      const Expr& f, const Grid& grid) {
  sys.validate();
  if (static_cast<int>(laws.size()) != sys.n)
    throw ValidationError("levy_composition needs exactly n generating laws");
  CompositionEvaluator ev;
  ev.n = sys.n;
  ev.laws.assign(laws.begin(), laws.end());
  ev.target_u = u;
  ev.target_f = f;
  // Preflight the denominators across the grid (detects duplicated laws).
  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    (void)ev.density_at(pt);
    (void)ev.flux_at(pt);
  }
  return ev;
}

SequentialComposition levy_sequential(const DiagonalSystem& sys,
                                      std::span<const ConservationLaw> laws,
                                      const ConservationLaw& target, const Grid& grid) {
  if (static_cast<int>(laws.size()) != sys.n)
    throw ValidationError("levy_sequential needs exactly n generating laws");
  DiagonalSystem current = sys;
  std::vector<ConservationLaw> pending(laws.begin(), laws.end());
  ConservationLaw tracked = target;

  for (std::size_t step = 0; step < pending.size(); ++step) {
    int alpha = static_cast<int>(step);
    TransformResult tr = levy(current, pending[step], alpha, grid);
    // Transform the target and every remaining generating law.
    TransformedLaw t = tr.apply(tracked);
    tracked = ConservationLaw{tracked.name, t.density, t.flux};
    for (std::size_t k = step + 1; k < pending.size(); ++k) {
      TransformedLaw lk = tr.apply(pending[k]);
      pending[k] = ConservationLaw{pending[k].name, lk.density, lk.flux};
    }
    current = tr.transformed_system();
  }
  return {current, tracked.h, tracked.g};
}

// ---------------------------------------------------------------------------
// Inversion and factorization identities
// ---------------------------------------------------------------------------

InversionReport verify_inversion(const DiagonalSystem& sys, const ConservationLaw& law, int alpha,
                                 const Grid& grid, const CommutingFlow* flow) {
  sys.validate();
  const int n = sys.n;
  RotationCoefficients a = rotation_coefficients(sys);
  InversionReport rep;

  {
    // Forward: Levy, then the adjoint generated by the shifted flow
    // (the g -> g+1 shift of the transformed velocities).
    TransformResult fwd = levy(sys, law, alpha, grid);
    CommutingFlow shifted;
    shifted.mu.resize(static_cast<std::size_t>(n));
    shifted.mu[static_cast<std::size_t>(alpha)] = Expr::number(1.0) / law.h;
    for (int i = 0; i < n; ++i) {
      if (i == alpha) continue;
      shifted.mu[static_cast<std::size_t>(i)] =
          a.at(i, alpha) / (a.at(i, alpha) * law.h - law.h.derivative(alpha));
    }
    TransformResult back = adjoint_levy(fwd.transformed_system(), shifted, alpha, grid);
    ResidualStats stats;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      RPoint pt = grid.point_flat(p);
      for (int i = 0; i < n; ++i) {
        std::array<int, 1> which{i};
        stats.add(back.lambda[static_cast<std::size_t>(i)].eval(pt) -
                      sys.lambda[static_cast<std::size_t>(i)].eval(pt),
                  pt, which);
      }
    }
    rep.levy_then_adjoint = stats.finish("adjoint(levy) round trip");
  }

  if (flow) {
    // Reverse: adjoint Levy, then the Levy generated by the shifted law
    // (the q -> q-1 shift).
    TransformResult fwd = adjoint_levy(sys, *flow, alpha, grid);
    const Expr& mua = flow->mu[static_cast<std::size_t>(alpha)];
    ConservationLaw shifted{"shifted", Expr::number(1.0) / mua,
                            sys.lambda[static_cast<std::size_t>(alpha)] / mua};
    // Levy velocities on the transformed system need its coefficients A,
    // which carry the adjoint closed form.
    DiagonalSystem mid = fwd.transformed_system();
    Expr dah = shifted.h.derivative(alpha);
    guard_denominators(dah, grid, "d_alpha of the shifted density");

    std::vector<Expr> back(static_cast<std::size_t>(n));
    back[static_cast<std::size_t>(alpha)] = shifted.g / shifted.h;
    for (int i = 0; i < n; ++i) {
      if (i == alpha) continue;
      const Expr& Aia = fwd.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(alpha)];
      Expr den = dah - Aia * shifted.h;
      guard_denominators(den, grid, "shifted-law Levy denominator");
      back[static_cast<std::size_t>(i)] =
          (mid.lambda[static_cast<std::size_t>(i)] * dah - Aia * shifted.g) / den;
    }

    ResidualStats stats;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      RPoint pt = grid.point_flat(p);
      for (int i = 0; i < n; ++i) {
        std::array<int, 1> which{i};
        stats.add(back[static_cast<std::size_t>(i)].eval(pt) -
                      sys.lambda[static_cast<std::size_t>(i)].eval(pt),
                  pt, which);
      }
    }
    rep.adjoint_then_levy = stats.finish("levy(adjoint) round trip");
  }
  return rep;
}

LaplaceLevyReport verify_laplace_levy_identity(const DiagonalSystem& sys,
                                               const ConservationLaw& law, int alpha, int beta,
                                               std::span<const ConservationLaw> targets,
                                               const Grid& grid) {
  if (alpha == beta) throw ValidationError("laplace-levy identity: alpha == beta");
  sys.validate();
  const int n = sys.n;

  // Direct path.
  TransformResult direct = levy(sys, law, alpha, grid);

  // Composed path: Levy at beta, then Laplace S_{alpha beta} on the
  // transformed system, applied to the Levy-transformed targets.
  TransformResult via = levy(sys, law, beta, grid);
  const Expr& A_ba = via.A[static_cast<std::size_t>(beta)][static_cast<std::size_t>(alpha)];
  guard_denominators(A_ba, grid, "transformed a_{beta alpha}");
  const Expr& L_beta = via.lambda[static_cast<std::size_t>(beta)];

  ResidualStats dens_stats, vel_stats;
  std::vector<std::pair<Expr, Expr>> composed;  // (U, F) along the composed path
  std::vector<std::pair<Expr, Expr>> straight;
  for (const ConservationLaw& t : targets) {
    TransformedLaw d = direct.apply(t);
    TransformedLaw v = via.apply(t);
    Expr du = v.density.derivative(alpha);
    Expr U2 = v.density - du / A_ba;
    Expr F2 = v.flux - L_beta * du / A_ba;
    straight.emplace_back(d.density, d.flux);
    composed.emplace_back(U2, F2);
  }

  for (std::size_t p = 0; p < grid.size(); ++p) {
    RPoint pt = grid.point_flat(p);
    for (std::size_t t = 0; t < straight.size(); ++t) {
      std::array<int, 1> which{static_cast<int>(t)};
      dens_stats.add(straight[t].first.eval(pt) - composed[t].first.eval(pt), pt, which);
      dens_stats.add(straight[t].second.eval(pt) - composed[t].second.eval(pt), pt, which);
    }
    // Velocities: composed-path dF/dU against the direct symbolic lambda.
    for (int i = 0; i < n; ++i) {
      double best_du = 0.0, vel = 0.0;
      for (const auto& [U2, F2] : composed) {
        double du = U2.derivative(i).eval(pt);
        if (std::abs(du) > std::abs(best_du)) {
          best_du = du;
          vel = F2.derivative(i).eval(pt) / du;
        }
      }
      if (std::abs(best_du) <= 1e-9) {
        vel_stats.skip();
        continue;
      }
      std::array<int, 1> which{i};
      vel_stats.add(vel - direct.lambda[static_cast<std::size_t>(i)].eval(pt), pt, which);
    }
  }

  LaplaceLevyReport rep;
  rep.densities = dens_stats.finish("laplace-levy densities");
  rep.velocities = vel_stats.finish("laplace-levy velocities");
  return rep;
}

}  // namespace conglab
