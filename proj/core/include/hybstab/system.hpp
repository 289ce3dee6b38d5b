#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybstab/expr.hpp"
#include "hybstab/geometry.hpp"
#include "hybstab/tolerances.hpp"

namespace hybstab {

/// Switching manifold Sigma = h^{-1}(0) together with its jump map,
/// both given in ambient (x, y) coordinates.
struct ManifoldDef {
  std::string name;
  Expression h;
  std::array<Expression, 2> jump;

  // compiled caches, built by finalize()
  CompiledExpr h_c, hx_c, hy_c;
  std::array<CompiledExpr, 2> jump_c;
  std::array<std::array<CompiledExpr, 2>, 2> jump_jac_c;  // [component][d/dx, d/dy]

  void finalize();

  double h_at(const Vec2& p) const { return h_c.eval(p.x, p.y); }
  Vec2 grad_h(const Vec2& p) const { return {hx_c.eval(p.x, p.y), hy_c.eval(p.x, p.y)}; }
  Vec2 apply_jump(const Vec2& p) const {
    return {jump_c[0].eval(p.x, p.y), jump_c[1].eval(p.x, p.y)};
  }
  Mat2 jump_jacobian(const Vec2& p) const {
    return {jump_jac_c[0][0].eval(p.x, p.y), jump_jac_c[0][1].eval(p.x, p.y),
            jump_jac_c[1][0].eval(p.x, p.y), jump_jac_c[1][1].eval(p.x, p.y)};
  }
};

/// Smooth vector field matched to a region through a sign pattern over the
/// manifolds (entries -1, 0, +1; 0 matches either side).
struct FieldDef {
  std::vector<int> signs;
  std::array<Expression, 2> f;

  std::array<CompiledExpr, 2> f_c;

  void finalize();
  Vec2 eval(const Vec2& p) const { return {f_c[0].eval(p.x, p.y), f_c[1].eval(p.x, p.y)}; }
};

struct HybridSystemDef {
  std::vector<ManifoldDef> manifolds;
  std::vector<FieldDef> fields;
  std::map<std::string, double> params;
  Tolerances tol;
  std::vector<std::string> load_notes;  // non-fatal diagnostics from load time

  std::size_t manifold_index(const std::string& name) const;
};

/// First Lie derivative X h at p.
inline double lie_value(const FieldDef& field, const ManifoldDef& manifold, const Vec2& p) {
  return dot(field.eval(p), manifold.grad_h(p));
}

struct PointClass {
  enum class Kind { Interior, RegularBoundary, NonRegular };
  Kind kind = Kind::NonRegular;
  std::size_t index = 0;  // field index (Interior) or manifold index (RegularBoundary)
  Vec2 image;             // jump image, RegularBoundary only
  std::string reason;     // NonRegular only
};

struct BoundaryEventClass {
  enum class Kind { JumpCrossing, JumpSingularity, FieldVanishes };
  Kind kind = Kind::JumpSingularity;

  bool tangency_at_p = false;
  bool tangency_at_pbar = false;
  bool not_local_diffeo = false;

  // diagnostics
  int incoming_side = 0;
  int outgoing_side = 0;
  std::size_t incoming_field = 0;
  std::size_t outgoing_field = 0;
  double lie_in = 0.0;            // X_in h at p
  double lie_out = 0.0;           // X_out h at pbar
  double oriented_lie_product = 0.0;
  double chart_derivative = 0.0;  // d(jump)/d(chart) at p

  bool is_singularity() const { return kind == Kind::JumpSingularity; }
};

/// Parse and validate a config document (see README for the schema), parse
/// all expressions with params substituted, and sample-check that each jump
/// maps its manifold into itself.
HybridSystemDef load_system(const std::string& json_text);

/// The unique field whose sign pattern matches sign(h_i(p)) entrywise.
std::size_t region_of(const HybridSystemDef& sys, const Vec2& p);

/// Field matched at a point lying on manifold i, taking side `side` for i.
std::optional<std::size_t> field_on_side(const HybridSystemDef& sys, std::size_t manifold,
                                         const Vec2& p, int side);

PointClass classify_point(const HybridSystemDef& sys, const Vec2& p);

/// Classify a regular boundary point as jump crossing / jump singularity /
/// vanishing field. When the flow context knows the arrival side it passes
/// `incoming_side`; standalone calls resolve the side from the sign of X h.
BoundaryEventClass classify_boundary_event(const HybridSystemDef& sys, const Vec2& p,
                                           std::optional<int> incoming_side = {});

/// Chart used for jump expansions near a point of manifold i: the ambient
/// coordinate axis with the smaller |dh/d.|; the manifold is locally a graph
/// over it. Returns 0 for the x-axis, 1 for the y-axis.
int chart_axis(const ManifoldDef& m, const Vec2& p, double grad_tol);

/// Derivative of the jump map read chart-to-chart at p (see chart_axis).
double jump_chart_derivative(const HybridSystemDef& sys, std::size_t manifold, const Vec2& p,
                             const Vec2& pbar);

struct Departure {
  std::size_t field = 0;
  int side = 0;
  bool tangential = false;  // leaves along a tangency rather than transversally
  int contact_order = 1;    // first k with X^k h != 0 used for the decision
  double lie_value = 0.0;   // X^k h at the point
};

/// Resolve the side and field through which an orbit leaves the manifold at
/// q (typically a jump image). Transversal departures win; a tangency whose
/// first nonvanishing Lie derivative pushes into a matched region is
/// accepted. Returns nullopt when no orbit can leave.
std::optional<Departure> resolve_departure(const HybridSystemDef& sys, std::size_t manifold,
                                           const Vec2& q, int max_order = 8);

}  // namespace hybstab
