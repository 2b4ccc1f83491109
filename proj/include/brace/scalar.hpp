#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace brace {

/// A scalar as seen by script expressions: a number, an agent key, or NIL.
/// Agent keys are object ids below 2^53 so they round-trip through a double.
struct Scalar {
  enum class Kind : std::uint8_t { Nil, Num, Key };

  Kind kind = Kind::Nil;
  double v = 0.0;

  static constexpr Scalar nil() { return {}; }
  static constexpr Scalar num(double x) { return {Kind::Num, x}; }
  static constexpr Scalar key(std::uint64_t oid) { return {Kind::Key, static_cast<double>(oid)}; }

  constexpr bool is_nil() const { return kind == Kind::Nil; }
  std::uint64_t oid() const { return static_cast<std::uint64_t>(v); }
};

bool same_bits(const Scalar &a, const Scalar &b);

/// Operators shared by every evaluator. Both the monad-algebra evaluator and
/// the runtime kernel call into these, so a given expression produces the same
/// bits on either route.
enum class ScalarOp : std::uint8_t {
  Add, Sub, Mul, Div, IDiv, Neg, Not,
  Lt, Le, Gt, Ge, Eq, Ne, And, Or,
  Abs, Min, Max, Sqrt, Trunc,
  Defined,  // 1 if the operand is not NIL (never NIL itself)
  Truthy,   // 1 if non-NIL and non-zero (never NIL itself)
  Falsy,    // complement of Truthy
  Coalesce, // first operand unless NIL, else the second
};

const char *op_name(ScalarOp op);

inline bool truthy(Scalar s) { return s.kind != Scalar::Kind::Nil && s.v != 0.0; }

inline int op_arity(ScalarOp op) {
  switch (op) {
    case ScalarOp::Neg:
    case ScalarOp::Not:
    case ScalarOp::Abs:
    case ScalarOp::Sqrt:
    case ScalarOp::Trunc:
    case ScalarOp::Defined:
    case ScalarOp::Truthy:
    case ScalarOp::Falsy:
      return 1;
    default:
      return 2;
  }
}

namespace detail {
constexpr Scalar boolean(bool b) { return Scalar::num(b ? 1.0 : 0.0); }

inline bool equal_values(Scalar a, Scalar b) { return a.kind == b.kind && a.v == b.v; }
}  // namespace detail

inline Scalar apply_op(ScalarOp op, Scalar a, Scalar b = Scalar::nil()) {
  using detail::boolean;
  using detail::equal_values;
  switch (op) {
    case ScalarOp::Defined: return boolean(!a.is_nil());
    case ScalarOp::Truthy: return boolean(truthy(a));
    case ScalarOp::Falsy: return boolean(!truthy(a));
    case ScalarOp::Coalesce: return a.is_nil() ? b : a;
    default: break;
  }
  if (a.is_nil()) return Scalar::nil();
  if (op_arity(op) == 2 && b.is_nil()) return Scalar::nil();

  const double x = a.v;
  const double y = b.v;
  switch (op) {
    case ScalarOp::Add: return Scalar::num(x + y);
    case ScalarOp::Sub: return Scalar::num(x - y);
    case ScalarOp::Mul: return Scalar::num(x * y);
    case ScalarOp::Div:
      if (y == 0.0) return Scalar::nil();
      return Scalar::num(x / y);
    case ScalarOp::IDiv:
      if (y == 0.0) return Scalar::nil();
      return Scalar::num(std::trunc(x / y));
    case ScalarOp::Neg: return Scalar::num(-x);
    case ScalarOp::Not: return boolean(x == 0.0);
    case ScalarOp::Lt: return boolean(x < y);
    case ScalarOp::Le: return boolean(x <= y);
    case ScalarOp::Gt: return boolean(x > y);
    case ScalarOp::Ge: return boolean(x >= y);
    case ScalarOp::Eq: return boolean(equal_values(a, b));
    case ScalarOp::Ne: return boolean(!equal_values(a, b));
    case ScalarOp::And: return boolean(x != 0.0 && y != 0.0);
    case ScalarOp::Or: return boolean(x != 0.0 || y != 0.0);
    case ScalarOp::Abs: return Scalar::num(std::fabs(x));
    case ScalarOp::Min: return Scalar::num(y < x ? y : x);
    case ScalarOp::Max: return Scalar::num(x < y ? y : x);
    case ScalarOp::Sqrt: return Scalar::num(std::sqrt(x));
    case ScalarOp::Trunc: return Scalar::num(std::trunc(x));
    default: break;
  }
  return Scalar::nil();
}


// Effect combinators.
enum class Combinator : std::uint8_t { Sum, Min, Max };

const char *combinator_name(Combinator c);
double idempotent_value(Combinator c);

/// Key under which contributions are ordered before folding: a total order on
/// doubles (negative values first, -0 before +0).
std::uint64_t canonical_order_key(double v);

/// Folds contributions starting from the combinator's identity, in canonical
/// order. The input is sorted in place.
double fold_canonical(Combinator c, std::span<double> values);

/// Clamp `proposed` into [old + lo, old + hi].
double crop_reachability(double lo, double hi, double old_value, double proposed);

}  // namespace brace
