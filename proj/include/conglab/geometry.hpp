// Projective constructions attached to systems of conservation laws: line
// congruences, focal points, conjugate hypersurfaces, plane families and
// harmonic surfaces, congruence-level transforms, mesh export.
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "conglab/claws.hpp"
#include "conglab/transforms.hpp"

namespace conglab {

// n-parameter family of lines y^i = u^i y^0 - f^i in (n+1)-space, encoded by
// a conservative representation (u^i, f^i) of the underlying system.
struct Congruence {
  int n = 0;
  std::vector<Expr> u;
  std::vector<Expr> f;
  Coords coords;

  void validate() const;
};

struct LineSample {
  RPoint point;      // (0, -f^1, ..., -f^n)
  RPoint direction;  // (1, u^1, ..., u^n)
};

LineSample line_at(const Congruence& c, const RPoint& R);

// Jacobian rank of R -> (u, f); lines must vary independently.
ResidualReport congruence_rank_report(const Congruence& c, const Grid& grid);

struct FocalSet {
  std::vector<RPoint> points;  // n points, each n+1 coordinates
};

FocalSet focal_points(const Congruence& c, const DiagonalSystem& sys, const RPoint& R);

// Algebraic incidence: every focal point satisfies the line equations.
ResidualReport focal_line_incidence(const Congruence& c, const DiagonalSystem& sys,
                                    const Grid& grid);

// Angular deviation of the line direction from the focal sheet's tangent
// span (finite-difference tangents).  Degenerate (rank-deficient) sheets are
// skipped and counted.
ResidualReport focal_tangency(const Congruence& c, const DiagonalSystem& sys, const Grid& grid,
                              FdOrder order = FdOrder::Second);

// Parametrized mesh samples on a grid; ambient = number of y-coordinates.
struct SurfaceMesh {
  Grid param;
  int ambient = 0;
  std::vector<double> pts;  // [flat * ambient + k]

  double at(std::size_t flat, int k) const {
    return pts[flat * static_cast<std::size_t>(ambient) + static_cast<std::size_t>(k)];
  }
};

SurfaceMesh build_mesh(std::span<const Expr> components, const Grid& grid);

// Conjugacy residual of the parameter net on a mesh given by symbolic
// components: mixed second derivatives by finite differences, tangents
// symbolic, transverse component measured against the tangent span.
ResidualReport net_conjugacy_residual(std::span<const Expr> components, const Grid& grid,
                                      FdOrder second_derivative_order = FdOrder::Second);

struct ConjugateSurface {
  SurfaceMesh mesh;
  std::vector<Expr> components;
  ResidualReport conjugacy;
};

ConjugateSurface conjugate_hypersurface(const Congruence& c, const DiagonalSystem& sys,
                                        const ConservationLaw& law, const Grid& grid,
                                        double collision_threshold = 1e-8);

// Remark-3 check: tangent directions of the shifted family (g -> g + c) are
// shift independent.  Max angle over the grid, directions, and shift pairs.
ResidualReport parallel_family_check(const Congruence& c, const DiagonalSystem& sys,
                                     const ConservationLaw& law, std::span<const double> shifts,
                                     const Grid& grid);

// Surface harmonic to the congruence built from a commuting flow (n = 2).
struct HarmonicSurface {
  SurfaceMesh mesh;
  std::vector<Expr> components;    // y^0, y^1, y^2
  Congruence characteristic_l1;    // transformed congruences (characteristics)
  Congruence characteristic_l2;
  ResidualReport incidence;        // congruence line lies in the tangent plane
  ResidualReport conjugacy;        // parameter net conjugacy on the mesh
  ResidualReport characteristic_focal;  // l_i passes through the focal point r_i
  ResidualReport intersection;     // l_1 ^ l_2 equals the surface point
  ResidualReport envelope;         // tangent plane equals the family plane
};

HarmonicSurface harmonic_surface(const Congruence& c, const DiagonalSystem& sys,
                                 const CommutingFlow& flow, const Grid& grid);

// Congruence-level Levy transform: tangents to the R^alpha-curves of the
// conjugate hypersurface.
struct LevyCongruenceResult {
  Congruence congruence;
  bool degenerate = false;                 // some (U^k, F^k) pair vanished (hyperplane regime)
  std::vector<int> degenerate_components;
  ResidualReport velocity_match;           // dF/dU against the velocity-level transform
  ResidualReport tangency;                 // new line direction vs d_alpha of the mesh
};

LevyCongruenceResult levy_congruence(const Congruence& c, const DiagonalSystem& sys,
                                     const ConservationLaw& law, int alpha, const Grid& grid);

// Adjoint transform at congruence level: the characteristic congruence
// l_alpha of the plane family built from a commuting flow.
struct AdjointPlanesResult {
  Congruence l_alpha;
  ResidualReport focal_meet;       // l_alpha passes through the focal point r_alpha
  ResidualReport plane_incidence;  // l_alpha lies in the plane spanned by l and q
  ResidualReport velocity_match;   // dF/dU against the adjoint velocity transform
};

AdjointPlanesResult adjoint_plane_family(const Congruence& c, const DiagonalSystem& sys,
                                         const CommutingFlow& flow,
                                         std::span<const std::string> density_names, int alpha,
                                         const Grid& grid);

// Mesh export: OBJ quads for 2-parameter meshes in 3-space, CSV otherwise.
void export_obj(const SurfaceMesh& mesh, std::ostream& out);
void export_csv(const SurfaceMesh& mesh, std::span<const std::string> param_names,
                std::ostream& out);
void export_congruence_csv(const Congruence& c, const Grid& grid, std::ostream& out);

}  // namespace conglab
