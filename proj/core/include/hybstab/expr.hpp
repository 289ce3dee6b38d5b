#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hybstab/errors.hpp"

namespace hybstab {

enum class ExprKind {
  Constant,   // nonnegative literal (negative values are Neg(Constant))
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,        // base ^ constant exponent
  Func,       // sin cos tan atan exp ln sqrt abs
};

enum class FuncId { Sin, Cos, Tan, Atan, Exp, Ln, Sqrt, Abs };

const char* func_name(FuncId f);

/// Immutable expression tree with value semantics. Subtrees are shared,
/// so copies are cheap and every operation is safe to run concurrently.
class Expression {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    ExprKind kind;
    double value = 0.0;        // Constant payload / Pow exponent
    std::string name;          // Variable payload
    FuncId func = FuncId::Sin;
    NodePtr left, right;       // unary ops use left only
    std::size_t size = 1;      // node count of this subtree
  };

  Expression() : Expression(constant(0.0)) {}

  static Expression constant(double v);
  static Expression variable(std::string name);
  static Expression from_node(NodePtr p) { return Expression(std::move(p)); }
  static Expression neg(Expression e);
  static Expression add(Expression a, Expression b);
  static Expression sub(Expression a, Expression b);
  static Expression mul(Expression a, Expression b);
  static Expression div(Expression a, Expression b);
  static Expression pow(Expression base, double exponent);
  static Expression apply(FuncId f, Expression arg);

  const Node& node() const { return *root_; }
  std::size_t node_count() const { return root_->size; }

  /// Canonical text form; reparsing it yields a structurally equal tree.
  std::string str() const;

  bool structurally_equal(const Expression& other) const;

  double evaluate(const std::map<std::string, double>& bindings) const;
  /// Fast path: variables "x" and "y" only.
  double evaluate_xy(double x, double y) const;

  /// Exact symbolic derivative. Light simplification only (constant
  /// folding plus the x*0, x*1, x+0 rules). `node_budget` caps the size
  /// of the result and of intermediates.
  Expression differentiate(const std::string& var, std::size_t node_budget = 1'000'000) const;

  /// Replace every occurrence of `var` by `replacement`.
  Expression substitute(const std::string& var, const Expression& replacement) const;

  std::set<std::string> free_variables() const;

 private:
  explicit Expression(NodePtr root) : root_(std::move(root)) {}
  NodePtr root_;
};

/// Parse source text against the expression grammar:
///   expr   := term (("+"|"-") term)* ;
///   term   := factor (("*"|"/") factor)* ;
///   factor := "-" factor | power ;
///   power  := atom ("^" number)? ;
///   atom   := number | ident | ident "(" expr ")" | "(" expr ")" ;
/// "pi" is a builtin constant; whitespace is insignificant.
Expression parse_expression(std::string_view text);

/// Taylor coefficients a_0..a_max_order of e around `point`:
/// a_k = e^(k)(point) / k!, with derivatives taken symbolically.
std::vector<double> taylor_coefficients(const Expression& e, const std::string& var, double point,
                                        int max_order);

/// Compiled form of an expression over a fixed variable list — a flat
/// postfix program evaluated with a small stack. Used by the flow engine
/// where tree-walk evaluation would dominate the profile.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expression& e, const std::vector<std::string>& variables);

  double eval(const double* args) const;
  double eval(double x, double y) const {
    const double a[2] = {x, y};
    return eval(a);
  }

 private:
  struct Instr {
    int op;        // ExprKind as int, Func offset by func id
    double value;  // constant / exponent
    int slot;      // variable slot
  };
  std::vector<Instr> code_;
  mutable std::vector<double> stack_;
  std::size_t depth_ = 0;
};

}  // namespace hybstab
