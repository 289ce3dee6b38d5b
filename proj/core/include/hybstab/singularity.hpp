#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hybstab/flow.hpp"
#include "hybstab/system.hpp"

namespace hybstab {

class NotASaddleError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Newton iteration on the field with its symbolic Jacobian.
Vec2 find_equilibrium(const FieldDef& field, Vec2 guess, double tol = 1e-12, int max_iter = 50);

struct SaddleInfo {
  Vec2 location;
  Mat2 jacobian;
  double nu = 0.0;      // negative eigenvalue
  double lambda = 0.0;  // positive eigenvalue
  Vec2 v_stable, v_unstable;
  double ratio = 0.0;  // |nu| / lambda
};

/// Eigen-analysis of the symbolic Jacobian at an equilibrium p.
/// Throws NotASaddleError unless nu < 0 < lambda.
SaddleInfo saddle_info(const FieldDef& field, const Vec2& p, double equilibrium_tol = 1e-9);

struct ContactOrder {
  std::optional<int> order;  // nullopt: every X^k h vanished up to max_order
  double lie_value = 0.0;    // X^m h at the point when the order is finite
};

/// First k <= max_order with X^k h != 0 at p (iterated symbolic Lie
/// derivatives). `nullopt` marks a candidate flat point.
ContactOrder contact_order(const FieldDef& field, const Expression& h, const Vec2& p,
                           int max_order, const Tolerances& tol);

struct PowerOrder {
  std::optional<int> k0;  // nullopt: all chart coefficients below threshold
  double a_k0 = 0.0;
  std::vector<double> coeffs;  // a_0 .. a_max_order; a_0 is the chart mismatch
  int chart_axis_p = 0;
  int chart_axis_pbar = 0;
};

/// Taylor order of the jump displacement in the manifold charts at p and
/// its image (see chart_axis). Coefficients come from symbolic
/// differentiation of the chart composition.
PowerOrder jump_power_order(const HybridSystemDef& sys, std::size_t manifold, const Vec2& p,
                            int max_order);

struct SingularityReport {
  enum class Kind { HyperbolicSaddle, JumpSingularity };
  Kind kind = Kind::HyperbolicSaddle;
  Vec2 location, image;

  // saddle data
  double nu = 0.0, lambda = 0.0;
  Vec2 v_stable, v_unstable;

  // jump data
  int n_s = 0, n_u = 0;
  std::optional<int> power_order;
  double leading_coeff = 0.0;
  std::size_t manifold = 0;
  int incoming_side = 0, outgoing_side = 0;

  double ratio = 0.0;
  bool ratio_is_infinite = false;
  bool ratio_indeterminate = false;
  double ratio_lower_bound = 0.0;  // set when the power order exceeded max_order
  std::vector<std::string> diagnostics;
};

struct SingularityQuery {
  enum class Type { Saddle, Jump };
  Type type = Type::Saddle;
  Vec2 point;  // saddle guess, or the boundary point p
  std::size_t manifold = 0;
  int incoming_side = 0;
  int outgoing_side = 0;
};

/// Full report for one polycycle vertex: saddle eigendata or contact
/// orders + power order, and the hyperbolicity ratio. With
/// `assume_flat`, a power order past max_order is treated as infinite
/// (ratio infinite); otherwise the ratio is marked indeterminate with a
/// lower bound.
SingularityReport analyze_singularity(const HybridSystemDef& sys, const SingularityQuery& query,
                                      int max_order, bool assume_flat = false);

struct TransitionFit {
  double exponent = 0.0;
  double residual = 0.0;  // rms residual of the log-log fit
  int discarded = 0;
  std::vector<std::pair<double, double>> samples;  // (s, T(s))
};

/// Numerical transition map through a tangency: flow a geometric grid of
/// section points past the tangency and fit the log-log slope.
TransitionFit empirical_transition_exponent(const FieldDef& field, const Expression& h,
                                            const Vec2& p, int samples, double x_min, double x_max,
                                            const Tolerances& tol);

struct DulacPoint {
  double x = 0.0;
  double value = 0.0;  // D(x)
  double lower = 0.0, upper = 0.0;
  double margin = 0.0;  // min(D/lower, upper/D)
};

struct DulacReport {
  double delta = 0.0;
  double eps = 0.0;
  double nu = 0.0, lambda = 0.0;
  std::vector<DulacPoint> points;
  bool all_hold = false;
  double min_margin = 0.0;
};

/// Numerical Dulac map across a hyperbolic saddle on sections built at
/// distance delta along the eigenvectors, checked against the sandwich
/// bounds with exponents |nu|/(lambda -+ eps).
DulacReport dulac_bounds_check(const FieldDef& field, const Vec2& saddle, double eps,
                               const std::vector<double>& x_grid, const HybridSystemDef& sys);

/// Backward-time helper: the same system with every field negated (jumps
/// untouched).
HybridSystemDef time_reversed_fields(const HybridSystemDef& sys);

}  // namespace hybstab
