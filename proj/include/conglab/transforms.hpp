// Transformation calculus for semihamiltonian diagonal systems: Levy L_a,
// adjoint Levy L*_a, Laplace S_ab, n-fold composition, and the inversion and
// factorization identities relating them.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "conglab/claws.hpp"

namespace conglab {

enum class TransformKind { Levy, AdjointLevy, Laplace, Composition };

struct TransformedLaw {
  std::string name;
  Expr density;  // U
  Expr flux;     // F
  bool kernel = false;
};

// Result of one transformation applied to a DiagonalSystem.  Velocities,
// coefficients, and Lame factors are symbolic where a closed form exists
// (Levy and adjoint Levy); Laplace velocities are numeric ratios dF/dU.
struct TransformResult {
  TransformKind kind = TransformKind::Levy;
  int n = 0;
  int alpha = -1;
  int beta = -1;  // laplace only
  Coords coords;

  std::vector<Expr> lambda;             // empty for laplace
  std::vector<std::vector<Expr>> A;     // off-diagonal coefficients; empty for laplace
  std::vector<Expr> lame;               // transformed Lame H_i when source had lame
  std::vector<TransformedLaw> laws;     // transformed laws requested by the caller

  bool symbolic_velocities() const { return !lambda.empty(); }
  DiagonalSystem transformed_system() const;  // requires symbolic velocities

  // Numeric velocity: symbolic lambda when available, else dF/dU from the
  // transformed law with the largest |d_i U| at the point.
  double velocity_at(int i, const RPoint& pt, double degenerate_tol = 1e-12) const;

  // Apply the stored transformation to one more law.  Levy and Laplace need
  // (h, g); adjoint Levy additionally needs the flow flux q of the density.
  TransformedLaw apply(const ConservationLaw& law) const;
  TransformedLaw apply(const ConservationLaw& law, const Expr& q) const;

  // Generating data (kind-dependent), kept for apply():
  Expr gen_h, gen_g;        // levy
  Expr gen_mu_alpha;        // adjoint
  Expr gen_lambda_alpha;    // adjoint / laplace flux map
  Expr gen_a_beta_alpha;    // laplace
  Expr gen_lambda_beta;     // laplace
};

// --- Levy transformation generated by a conservation law ---
TransformResult levy(const DiagonalSystem& sys, const ConservationLaw& law, int alpha,
                     const Grid& grid);

// --- Adjoint Levy transformation generated by a commuting flow ---
TransformResult adjoint_levy(const DiagonalSystem& sys, const CommutingFlow& flow, int alpha,
                             const Grid& grid);

// --- Laplace transformation S_{alpha beta}; velocities numeric-only ---
TransformResult laplace(const DiagonalSystem& sys, int alpha, int beta,
                        std::span<const ConservationLaw> laws, const Grid& grid);

// --- n-fold Levy composition ---

// Determinant route: U and F as ratios of determinants built from the n
// generating laws, evaluated pointwise.
struct CompositionEvaluator {
  int n = 0;
  std::vector<ConservationLaw> laws;
  Expr target_u, target_f;

  double density_at(const RPoint& pt) const;
  double flux_at(const RPoint& pt) const;
};

CompositionEvaluator levy_composition(const DiagonalSystem& sys,
                                      std::span<const ConservationLaw> laws, const Expr& u,
                                      const Expr& f, const Grid& grid);

// Sequential route (the defining procedure): apply L_1, re-transform the
// remaining generating laws, continue.  Returns the final system and the
// transform of the target law.
struct SequentialComposition {
  DiagonalSystem system;
  Expr density;
  Expr flux;
};

SequentialComposition levy_sequential(const DiagonalSystem& sys,
                                      std::span<const ConservationLaw> laws,
                                      const ConservationLaw& target, const Grid& grid);

// --- Inversion round trips ---
struct InversionReport {
  ResidualReport levy_then_adjoint;                  // L*_a(L_a(lambda)) vs lambda
  std::optional<ResidualReport> adjoint_then_levy;   // L_a(L*_a(lambda)) vs lambda
};

InversionReport verify_inversion(const DiagonalSystem& sys, const ConservationLaw& law, int alpha,
                                 const Grid& grid, const CommutingFlow* flow = nullptr);

// --- Factorization L_a = S_ab o L_b ---
struct LaplaceLevyReport {
  ResidualReport densities;   // and fluxes
  ResidualReport velocities;  // where both sides define them
};

LaplaceLevyReport verify_laplace_levy_identity(const DiagonalSystem& sys,
                                               const ConservationLaw& law, int alpha, int beta,
                                               std::span<const ConservationLaw> targets,
                                               const Grid& grid);

}  // namespace conglab
