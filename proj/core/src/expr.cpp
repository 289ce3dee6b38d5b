#include "hybstab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>

namespace hybstab {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_integer(double v) { return std::isfinite(v) && v == std::rint(v); }

// A node carrying a plain constant value: Constant or Neg(Constant).
bool const_value(const Expression::Node& n, double* out) {
  if (n.kind == ExprKind::Constant) {
    *out = n.value;
    return true;
  }
  if (n.kind == ExprKind::Neg && n.left->kind == ExprKind::Constant) {
    *out = -n.left->value;
    return true;
  }
  return false;
}

double apply_func(FuncId f, double a) {
  switch (f) {
    case FuncId::Sin:
      return std::sin(a);
    case FuncId::Cos:
      return std::cos(a);
    case FuncId::Tan:
      return std::tan(a);
    case FuncId::Atan:
      return std::atan(a);
    case FuncId::Exp:
      return std::exp(a);
    case FuncId::Ln:
      if (a <= 0.0) throw DomainError("ln of nonpositive argument");
      return std::log(a);
    case FuncId::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(a);
    case FuncId::Abs:
      return std::fabs(a);
  }
  throw EvalError("unknown function id");
}

double apply_pow(double base, double exponent) {
  if (base == 0.0 && exponent < 0.0) throw DomainError("division by zero in power");
  if (base < 0.0 && !is_integer(exponent)) throw DomainError("fractional power of negative base");
  return std::pow(base, exponent);
}

}  // namespace

const char* func_name(FuncId f) {
  switch (f) {
    case FuncId::Sin:
      return "sin";
    case FuncId::Cos:
      return "cos";
    case FuncId::Tan:
      return "tan";
    case FuncId::Atan:
      return "atan";
    case FuncId::Exp:
      return "exp";
    case FuncId::Ln:
      return "ln";
    case FuncId::Sqrt:
      return "sqrt";
    case FuncId::Abs:
      return "abs";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// raw builders (no simplification; the parser and test generators use these)
// ---------------------------------------------------------------------------

namespace {

Expression::NodePtr make_node(Expression::Node n) {
  n.size = 1 + (n.left ? n.left->size : 0) + (n.right ? n.right->size : 0);
  return std::make_shared<const Expression::Node>(std::move(n));
}

}  // namespace

Expression Expression::constant(double v) {
  if (!(v >= 0.0)) {
    // keep literals nonnegative so printing stays within the grammar
    if (std::isnan(v)) throw EvalError("NaN constant");
    Node neg{ExprKind::Neg};
    Node c{ExprKind::Constant};
    c.value = -v;
    neg.left = make_node(std::move(c));
    return Expression(make_node(std::move(neg)));
  }
  Node c{ExprKind::Constant};
  c.value = v;
  return Expression(make_node(std::move(c)));
}

Expression Expression::variable(std::string name) {
  Node n{ExprKind::Variable};
  n.name = std::move(name);
  return Expression(make_node(std::move(n)));
}

Expression Expression::neg(Expression e) {
  Node n{ExprKind::Neg};
  n.left = e.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::add(Expression a, Expression b) {
  Node n{ExprKind::Add};
  n.left = a.root_;
  n.right = b.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::sub(Expression a, Expression b) {
  Node n{ExprKind::Sub};
  n.left = a.root_;
  n.right = b.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::mul(Expression a, Expression b) {
  Node n{ExprKind::Mul};
  n.left = a.root_;
  n.right = b.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::div(Expression a, Expression b) {
  Node n{ExprKind::Div};
  n.left = a.root_;
  n.right = b.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::pow(Expression base, double exponent) {
  Node n{ExprKind::Pow};
  n.value = exponent;
  n.left = base.root_;
  return Expression(make_node(std::move(n)));
}

Expression Expression::apply(FuncId f, Expression arg) {
  Node n{ExprKind::Func};
  n.func = f;
  n.left = arg.root_;
  return Expression(make_node(std::move(n)));
}

// ---------------------------------------------------------------------------
// folding builders — constant folding plus the x*0 / x*1 / x+0 rules.
// These are used by differentiate and substitute; never by the parser.
// ---------------------------------------------------------------------------

namespace {

using E = Expression;

bool is_zero(const E& e) {
  double v;
  return const_value(e.node(), &v) && v == 0.0;
}
bool is_one(const E& e) {
  double v;
  return const_value(e.node(), &v) && v == 1.0;
}

E f_neg(const E& a) {
  double v;
  if (const_value(a.node(), &v)) return E::constant(-v);
  return E::neg(a);
}

E f_add(const E& a, const E& b) {
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  double va, vb;
  if (const_value(a.node(), &va) && const_value(b.node(), &vb)) return E::constant(va + vb);
  return E::add(a, b);
}

E f_sub(const E& a, const E& b) {
  if (is_zero(b)) return a;
  double va, vb;
  if (const_value(a.node(), &va) && const_value(b.node(), &vb)) return E::constant(va - vb);
  if (is_zero(a)) return f_neg(b);
  return E::sub(a, b);
}

E f_mul(const E& a, const E& b) {
  if (is_zero(a) || is_zero(b)) return E::constant(0.0);
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  double va, vb;
  if (const_value(a.node(), &va) && const_value(b.node(), &vb)) return E::constant(va * vb);
  return E::mul(a, b);
}

E f_div(const E& a, const E& b) {
  double va, vb;
  const bool ca = const_value(a.node(), &va);
  const bool cb = const_value(b.node(), &vb);
  if (ca && cb && vb != 0.0) return E::constant(va / vb);
  if (cb && vb == 1.0) return a;
  return E::div(a, b);
}

E f_pow(const E& base, double exponent) {
  double vb;
  if (exponent == 1.0) return base;
  if (const_value(base.node(), &vb)) {
    try {
      return E::constant(apply_pow(vb, exponent));
    } catch (const DomainError&) {
      // leave unfolded; evaluation will report the domain error
    }
  }
  return E::pow(base, exponent);
}

E f_apply(FuncId f, const E& arg) {
  double v;
  if (const_value(arg.node(), &v)) {
    try {
      return E::constant(apply_func(f, v));
    } catch (const DomainError&) {
    }
  }
  return E::apply(f, arg);
}

}  // namespace

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

namespace {

// minimal digits that round-trip the double exactly
std::string format_double(double v) {
  char buf[48];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// precedence: add/sub 10, mul/div 20, unary minus 30, pow 40, atoms 100
int precedence(const Expression::Node& n) {
  switch (n.kind) {
    case ExprKind::Add:
    case ExprKind::Sub:
      return 10;
    case ExprKind::Mul:
    case ExprKind::Div:
      return 20;
    case ExprKind::Neg:
      return 30;
    case ExprKind::Pow:
      return 40;
    default:
      return 100;
  }
}

void render(const Expression::Node& n, int min_prec, std::string& out) {
  const bool parens = precedence(n) < min_prec;
  if (parens) out += '(';
  switch (n.kind) {
    case ExprKind::Constant:
      out += format_double(n.value);
      break;
    case ExprKind::Variable:
      out += n.name;
      break;
    case ExprKind::Neg:
      out += '-';
      render(*n.left, 30, out);
      break;
    case ExprKind::Add:
      render(*n.left, 10, out);
      out += " + ";
      render(*n.right, 11, out);
      break;
    case ExprKind::Sub:
      render(*n.left, 10, out);
      out += " - ";
      render(*n.right, 11, out);
      break;
    case ExprKind::Mul:
      render(*n.left, 20, out);
      out += '*';
      render(*n.right, 21, out);
      break;
    case ExprKind::Div:
      render(*n.left, 20, out);
      out += '/';
      render(*n.right, 21, out);
      break;
    case ExprKind::Pow:
      render(*n.left, 100, out);
      out += '^';
      out += format_double(n.value);
      break;
    case ExprKind::Func:
      out += func_name(n.func);
      out += '(';
      render(*n.left, 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

}  // namespace

std::string Expression::str() const {
  std::string out;
  render(*root_, 0, out);
  return out;
}

bool Expression::structurally_equal(const Expression& other) const {
  struct Cmp {
    static bool eq(const Node& a, const Node& b) {
      if (a.kind != b.kind) return false;
      switch (a.kind) {
        case ExprKind::Constant:
          return a.value == b.value;
        case ExprKind::Variable:
          return a.name == b.name;
        case ExprKind::Pow:
          return a.value == b.value && eq(*a.left, *b.left);
        case ExprKind::Func:
          return a.func == b.func && eq(*a.left, *b.left);
        case ExprKind::Neg:
          return eq(*a.left, *b.left);
        default:
          return eq(*a.left, *b.left) && eq(*a.right, *b.right);
      }
    }
  };
  return Cmp::eq(*root_, other.node());
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

namespace {

template <typename Lookup>
double eval_node(const Expression::Node& n, const Lookup& lookup) {
  switch (n.kind) {
    case ExprKind::Constant:
      return n.value;
    case ExprKind::Variable:
      return lookup(n.name);
    case ExprKind::Neg:
      return -eval_node(*n.left, lookup);
    case ExprKind::Add:
      return eval_node(*n.left, lookup) + eval_node(*n.right, lookup);
    case ExprKind::Sub:
      return eval_node(*n.left, lookup) - eval_node(*n.right, lookup);
    case ExprKind::Mul:
      return eval_node(*n.left, lookup) * eval_node(*n.right, lookup);
    case ExprKind::Div: {
      const double a = eval_node(*n.left, lookup);
      const double b = eval_node(*n.right, lookup);
      if (b == 0.0) throw DomainError("division by zero");
      return a / b;
    }
    case ExprKind::Pow:
      return apply_pow(eval_node(*n.left, lookup), n.value);
    case ExprKind::Func:
      return apply_func(n.func, eval_node(*n.left, lookup));
  }
  throw EvalError("corrupt expression node");
}

}  // namespace

double Expression::evaluate(const std::map<std::string, double>& bindings) const {
  return eval_node(*root_, [&](const std::string& name) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw EvalError("unbound variable: " + name);
    return it->second;
  });
}

double Expression::evaluate_xy(double x, double y) const {
  return eval_node(*root_, [&](const std::string& name) {
    if (name == "x") return x;
    if (name == "y") return y;
    throw EvalError("unbound variable: " + name);
  });
}

// ---------------------------------------------------------------------------
// differentiation
// ---------------------------------------------------------------------------

namespace {

struct DiffCtx {
  const std::string& var;
  std::size_t budget;
  std::unordered_map<const Expression::Node*, Expression> memo;

  void check(const Expression& e) const {
    if (e.node_count() > budget)
      throw ResourceError("derivative AST exceeds node budget of " + std::to_string(budget));
  }
};

Expression diff(const Expression::NodePtr& n, DiffCtx& ctx);

Expression diff_memo(const Expression::NodePtr& n, DiffCtx& ctx) {
  auto it = ctx.memo.find(n.get());
  if (it != ctx.memo.end()) return it->second;
  Expression d = diff(n, ctx);
  ctx.check(d);
  ctx.memo.emplace(n.get(), d);
  return d;
}

Expression diff(const Expression::NodePtr& np, DiffCtx& ctx) {
  const Expression::Node& n = *np;
  switch (n.kind) {
    case ExprKind::Constant:
      return E::constant(0.0);
    case ExprKind::Variable:
      return E::constant(n.name == ctx.var ? 1.0 : 0.0);
    case ExprKind::Neg:
      return f_neg(diff_memo(n.left, ctx));
    case ExprKind::Add:
      return f_add(diff_memo(n.left, ctx), diff_memo(n.right, ctx));
    case ExprKind::Sub:
      return f_sub(diff_memo(n.left, ctx), diff_memo(n.right, ctx));
    case ExprKind::Mul: {
      const Expression u = E::from_node(n.left), v = E::from_node(n.right);
      return f_add(f_mul(diff_memo(n.left, ctx), v), f_mul(u, diff_memo(n.right, ctx)));
    }
    case ExprKind::Div: {
      const Expression u = E::from_node(n.left), v = E::from_node(n.right);
      const Expression num =
          f_sub(f_mul(diff_memo(n.left, ctx), v), f_mul(u, diff_memo(n.right, ctx)));
      return f_div(num, f_pow(v, 2.0));
    }
    case ExprKind::Pow: {
      const Expression u = E::from_node(n.left);
      const Expression du = diff_memo(n.left, ctx);
      const double c = n.value;
      if (c == 0.0) return E::constant(0.0);
      // keep exponents nonnegative so the result prints within the grammar
      if (c - 1.0 >= 0.0) return f_mul(E::constant(c), f_mul(f_pow(u, c - 1.0), du));
      return f_div(f_mul(E::constant(c), du), f_pow(u, 1.0 - c));
    }
    case ExprKind::Func: {
      const Expression u = E::from_node(n.left);
      const Expression du = diff_memo(n.left, ctx);
      switch (n.func) {
        case FuncId::Sin:
          return f_mul(f_apply(FuncId::Cos, u), du);
        case FuncId::Cos:
          return f_neg(f_mul(f_apply(FuncId::Sin, u), du));
        case FuncId::Tan:
          return f_div(du, f_pow(f_apply(FuncId::Cos, u), 2.0));
        case FuncId::Atan:
          return f_div(du, f_add(E::constant(1.0), f_pow(u, 2.0)));
        case FuncId::Exp:
          return f_mul(f_apply(FuncId::Exp, u), du);
        case FuncId::Ln:
          return f_div(du, u);
        case FuncId::Sqrt:
          return f_div(du, f_mul(E::constant(2.0), f_apply(FuncId::Sqrt, u)));
        case FuncId::Abs:
          // sign(u) away from 0; evaluating its value at u == 0 is a domain error
          return f_mul(du, f_div(u, f_apply(FuncId::Abs, u)));
      }
      throw EvalError("unknown function id");
    }
  }
  throw EvalError("corrupt expression node");
}

}  // namespace

Expression Expression::differentiate(const std::string& var, std::size_t node_budget) const {
  DiffCtx ctx{var, node_budget, {}};
  Expression d = diff_memo(root_, ctx);
  ctx.check(d);
  return d;
}

Expression Expression::substitute(const std::string& var, const Expression& replacement) const {
  struct Subst {
    const std::string& var;
    const Expression& repl;
    Expression run(const Node& n) {
      switch (n.kind) {
        case ExprKind::Constant:
          return E::constant(n.value);
        case ExprKind::Variable:
          return n.name == var ? repl : E::variable(n.name);
        case ExprKind::Neg:
          return f_neg(run(*n.left));
        case ExprKind::Add:
          return f_add(run(*n.left), run(*n.right));
        case ExprKind::Sub:
          return f_sub(run(*n.left), run(*n.right));
        case ExprKind::Mul:
          return f_mul(run(*n.left), run(*n.right));
        case ExprKind::Div:
          return f_div(run(*n.left), run(*n.right));
        case ExprKind::Pow:
          return f_pow(run(*n.left), n.value);
        case ExprKind::Func:
          return f_apply(n.func, run(*n.left));
      }
      throw EvalError("corrupt expression node");
    }
  };
  Subst s{var, replacement};
  return s.run(*root_);
}

std::set<std::string> Expression::free_variables() const {
  std::set<std::string> vars;
  struct Walk {
    std::set<std::string>& vars;
    void run(const Node& n) {
      if (n.kind == ExprKind::Variable) vars.insert(n.name);
      if (n.left) run(*n.left);
      if (n.right) run(*n.right);
    }
  };
  Walk w{vars};
  w.run(*root_);
  return vars;
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

namespace {

struct Parser {
  std::string_view src;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool peek(char c) {
    skip_ws();
    return pos < src.size() && src[pos] == c;
  }

  bool consume(char c) {
    if (peek(c)) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos); }

  bool number_ahead() {
    skip_ws();
    if (pos >= src.size()) return false;
    const char c = src[pos];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

  double number() {
    skip_ws();
    const std::size_t start = pos;
    std::size_t i = pos;
    while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
    bool any = i > pos;
    if (i < src.size() && src[i] == '.') {
      ++i;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      any = any || i > pos + 1;
    }
    if (!any) fail("expected a number");
    if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
      if (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        i = j;
      }
    }
    const std::string text(src.substr(start, i - start));
    pos = i;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) fail("malformed number");
    return v;
  }

  std::string ident() {
    skip_ws();
    std::size_t i = pos;
    if (i >= src.size() ||
        !(std::isalpha(static_cast<unsigned char>(src[i])) || src[i] == '_'))
      fail("expected an identifier");
    ++i;
    while (i < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_'))
      ++i;
    std::string name(src.substr(pos, i - pos));
    pos = i;
    return name;
  }

  static bool lookup_func(const std::string& name, FuncId* out) {
    static const std::pair<const char*, FuncId> table[] = {
        {"sin", FuncId::Sin}, {"cos", FuncId::Cos},   {"tan", FuncId::Tan},
        {"atan", FuncId::Atan}, {"exp", FuncId::Exp}, {"ln", FuncId::Ln},
        {"sqrt", FuncId::Sqrt}, {"abs", FuncId::Abs},
    };
    for (const auto& [n, f] : table) {
      if (name == n) {
        *out = f;
        return true;
      }
    }
    return false;
  }

  Expression expr() {
    Expression lhs = term();
    for (;;) {
      if (consume('+'))
        lhs = Expression::add(lhs, term());
      else if (consume('-'))
        lhs = Expression::sub(lhs, term());
      else
        return lhs;
    }
  }

  Expression term() {
    Expression lhs = factor();
    for (;;) {
      if (consume('*'))
        lhs = Expression::mul(lhs, factor());
      else if (consume('/'))
        lhs = Expression::div(lhs, factor());
      else
        return lhs;
    }
  }

  Expression factor() {
    if (consume('-')) return Expression::neg(factor());
    return power();
  }

  Expression power() {
    Expression base = atom();
    if (consume('^')) {
      if (!number_ahead()) fail("exponent must be a numeric constant");
      return Expression::pow(base, number());
    }
    return base;
  }

  Expression atom() {
    skip_ws();
    if (pos >= src.size()) fail("unexpected end of input");
    if (consume('(')) {
      Expression e = expr();
      if (!consume(')')) fail("expected ')'");
      return e;
    }
    if (number_ahead()) return Expression::constant(number());
    const std::size_t id_pos = pos;
    const std::string name = ident();
    FuncId f;
    if (consume('(')) {
      if (!lookup_func(name, &f)) {
        pos = id_pos;
        fail("unknown function '" + name + "'");
      }
      Expression arg = expr();
      if (consume(',')) {
        pos = id_pos;
        fail("function '" + name + "' takes exactly one argument");
      }
      if (!consume(')')) fail("expected ')'");
      return Expression::apply(f, arg);
    }
    if (lookup_func(name, &f)) {
      pos = id_pos;
      fail("function '" + name + "' used without an argument");
    }
    if (name == "pi") return Expression::constant(kPi);
    return Expression::variable(name);
  }
};

}  // namespace

Expression parse_expression(std::string_view text) {
  Parser p{text};
  Expression e = p.expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("unexpected trailing input");
  return e;
}

// ---------------------------------------------------------------------------
// Taylor coefficients
// ---------------------------------------------------------------------------

std::vector<double> taylor_coefficients(const Expression& e, const std::string& var, double point,
                                        int max_order) {
  if (max_order < 1) throw EvalError("max_order must be at least 1");
  std::vector<double> coeffs;
  coeffs.reserve(static_cast<std::size_t>(max_order) + 1);
  const std::map<std::string, double> at{{var, point}};
  Expression d = e;
  coeffs.push_back(d.evaluate(at));
  double factorial = 1.0;
  for (int k = 1; k <= max_order; ++k) {
    d = d.differentiate(var);
    factorial *= k;
    coeffs.push_back(d.evaluate(at) / factorial);
  }
  return coeffs;
}

// ---------------------------------------------------------------------------
// compiled evaluation
// ---------------------------------------------------------------------------

namespace {
enum CompiledOp : int {
  kPushConst,
  kPushVar,
  kOpNeg,
  kOpAdd,
  kOpSub,
  kOpMul,
  kOpDiv,
  kOpPow,
  kOpFunc,  // kOpFunc + func id
};
}

CompiledExpr::CompiledExpr(const Expression& e, const std::vector<std::string>& variables) {
  struct Emit {
    std::vector<Instr>& code;
    const std::vector<std::string>& vars;
    std::size_t depth = 0, max_depth = 0;

    void push(Instr i, int net) {
      code.push_back(i);
      depth = static_cast<std::size_t>(static_cast<long>(depth) + net);
      max_depth = std::max(max_depth, depth);
    }
    void run(const Expression::Node& n) {
      switch (n.kind) {
        case ExprKind::Constant:
          push({kPushConst, n.value, 0}, +1);
          return;
        case ExprKind::Variable: {
          for (std::size_t i = 0; i < vars.size(); ++i) {
            if (vars[i] == n.name) {
              push({kPushVar, 0.0, static_cast<int>(i)}, +1);
              return;
            }
          }
          throw EvalError("unbound variable in compiled expression: " + n.name);
        }
        case ExprKind::Neg:
          run(*n.left);
          push({kOpNeg, 0.0, 0}, 0);
          return;
        case ExprKind::Pow:
          run(*n.left);
          push({kOpPow, n.value, 0}, 0);
          return;
        case ExprKind::Func:
          run(*n.left);
          push({kOpFunc + static_cast<int>(n.func), 0.0, 0}, 0);
          return;
        default:
          run(*n.left);
          run(*n.right);
          switch (n.kind) {
            case ExprKind::Add:
              push({kOpAdd, 0.0, 0}, -1);
              return;
            case ExprKind::Sub:
              push({kOpSub, 0.0, 0}, -1);
              return;
            case ExprKind::Mul:
              push({kOpMul, 0.0, 0}, -1);
              return;
            case ExprKind::Div:
              push({kOpDiv, 0.0, 0}, -1);
              return;
            default:
              throw EvalError("corrupt expression node");
          }
      }
    }
  };
  Emit emit{code_, variables};
  emit.run(e.node());
  depth_ = emit.max_depth;
}

double CompiledExpr::eval(const double* args) const {
  double local[64];
  std::vector<double> heap;
  double* st = local;
  if (depth_ > 64) {
    heap.resize(depth_);
    st = heap.data();
  }
  std::size_t top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case kPushConst:
        st[top++] = in.value;
        break;
      case kPushVar:
        st[top++] = args[in.slot];
        break;
      case kOpNeg:
        st[top - 1] = -st[top - 1];
        break;
      case kOpAdd:
        st[top - 2] += st[top - 1];
        --top;
        break;
      case kOpSub:
        st[top - 2] -= st[top - 1];
        --top;
        break;
      case kOpMul:
        st[top - 2] *= st[top - 1];
        --top;
        break;
      case kOpDiv:
        if (st[top - 1] == 0.0) throw DomainError("division by zero");
        st[top - 2] /= st[top - 1];
        --top;
        break;
      case kOpPow:
        st[top - 1] = apply_pow(st[top - 1], in.value);
        break;
      default:
        st[top - 1] = apply_func(static_cast<FuncId>(in.op - kOpFunc), st[top - 1]);
        break;
    }
  }
  return st[0];
}

}  // namespace hybstab
