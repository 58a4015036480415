// Conservation laws, the phi = g/h calculus, commuting flows, and flux
// reconstruction by quadrature.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conglab/hydro.hpp"

namespace conglab {

struct ConservationLaw {
  std::string name;
  Expr h;
  Expr g;

  Expr phi() const { return g / h; }
};

struct CommutingFlow {
  std::vector<Expr> mu;
  // Flow fluxes keyed by the name of the density they belong to.
  std::map<std::string, Expr> q;

  const Expr& q_for(const std::string& density_name) const;
};

struct LawReport {
  ResidualReport first_order;
  ResidualReport second_order;
};

// Diagonal: d_i g - lambda^i d_i h and d_i d_j h - a_ij d_i h - a_ji d_j h.
LawReport verify_law_diagonal(const DiagonalSystem& sys, const ConservationLaw& law,
                              const Grid& grid);

// General: L_i g - lambda^i L_i h and the second-order density system with the
// frame's commutator coefficients (outer derivatives finite-differenced).
LawReport verify_law_general(const GeneralSystem& sys, const EigenFrame& frame,
                             const ConservationLaw& law, const Grid& grid,
                             FdOrder order = FdOrder::Second);

struct PhiReport {
  ResidualReport gradient;   // L_i ln h - L_i phi / (lambda^i - phi)
  ResidualReport nonlinear;  // full second-order system for phi
};

PhiReport verify_phi(const DiagonalSystem& sys, const ConservationLaw& law, const Grid& grid,
                     double collision_threshold = 1e-8);
PhiReport verify_phi(const GeneralSystem& sys, const EigenFrame& frame, const ConservationLaw& law,
                     const Grid& grid, double collision_threshold = 1e-8,
                     FdOrder order = FdOrder::Second);

// Diagonal commuting-flow check: d_j mu^i / (mu^j - mu^i) = a_ij.
ResidualReport verify_commuting(const DiagonalSystem& sys, const CommutingFlow& flow,
                                const Grid& grid);

// General systems: velocities sampled per grid point (mu[p*n + i]).
struct GeneralFlowField {
  std::vector<double> mu;
};

struct CommutingGeneralReport {
  ResidualReport comm1;
  ResidualReport comm2;
};

CommutingGeneralReport verify_commuting(const EigenFrame& frame, const GeneralFlowField& flow,
                                        const Grid& grid, FdOrder order = FdOrder::Second);

// Residual of d_i q = mu^i d_i u for a single density/flux pair of a flow.
ResidualReport verify_flow_flux(const CommutingFlow& flow, const Expr& u, const Expr& q,
                                const Grid& grid);

// Numeric flux field g with g(base) = 0 integrated from dg = sum lambda^i d_i h dR^i.
struct FluxField {
  Grid grid;
  std::vector<double> g;
  double loop_residual_max = 0.0;
  LawReport density_check;

  double at(std::size_t flat) const { return g[flat]; }
};

FluxField flux_from_density(const DiagonalSystem& sys, const Expr& h, const RPoint& base,
                            const Grid& grid, double density_tol = 1e-8);

}  // namespace conglab
