#pragma once

#include <array>

#include "hybstab/expr.hpp"

namespace hybstab {

/// X g = f1 * dg/dx + f2 * dg/dy, built symbolically.
inline Expression lie_derivative(const std::array<Expression, 2>& f, const Expression& g,
                                 std::size_t node_budget = 1'000'000) {
  const Expression gx = g.differentiate("x", node_budget);
  const Expression gy = g.differentiate("y", node_budget);
  return Expression::add(Expression::mul(f[0], gx), Expression::mul(f[1], gy));
}

/// Builds X^1 g, X^2 g, ... lazily up to a requested order.
class LieSeries {
 public:
  LieSeries(std::array<Expression, 2> f, Expression g) : f_(std::move(f)), g_(std::move(g)) {}

  const Expression& order(int k) {
    while (static_cast<int>(powers_.size()) < k) {
      const Expression& prev = powers_.empty() ? g_ : powers_.back();
      powers_.push_back(lie_derivative(f_, prev));
    }
    return powers_[static_cast<std::size_t>(k) - 1];
  }

  double value_at(int k, double x, double y) { return order(k).evaluate_xy(x, y); }

 private:
  std::array<Expression, 2> f_;
  Expression g_;
  std::vector<Expression> powers_;
};

}  // namespace hybstab
