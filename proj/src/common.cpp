#include "brace/error.hpp"
#include "brace/random.hpp"
#include "brace/scalar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace brace {

std::string to_string(const SourcePos &pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

LexError::LexError(SourcePos p, const std::string &what)
    : Error(to_string(p) + ": " + what), pos(p) {}

namespace {
std::string expected_list(const std::vector<std::string> &expected) {
  std::string out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) out += ", ";
    out += expected[i];
  }
  return out;
}
}  // namespace

ParseError::ParseError(SourcePos p, std::vector<std::string> exp, const std::string &found)
    : Error(to_string(p) + ": expected " + expected_list(exp) + " but found " + found),
      pos(p),
      expected(std::move(exp)),
      found(found) {}

// ---------------------------------------------------------------------------
// Scalars

bool same_bits(const Scalar &a, const Scalar &b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Scalar::Kind::Nil) return true;
  return std::bit_cast<std::uint64_t>(a.v) == std::bit_cast<std::uint64_t>(b.v);
}

const char *op_name(ScalarOp op) {
  switch (op) {
    case ScalarOp::Add: return "add";
    case ScalarOp::Sub: return "sub";
    case ScalarOp::Mul: return "mul";
    case ScalarOp::Div: return "div";
    case ScalarOp::IDiv: return "idiv";
    case ScalarOp::Neg: return "neg";
    case ScalarOp::Not: return "not";
    case ScalarOp::Lt: return "lt";
    case ScalarOp::Le: return "le";
    case ScalarOp::Gt: return "gt";
    case ScalarOp::Ge: return "ge";
    case ScalarOp::Eq: return "eq";
    case ScalarOp::Ne: return "ne";
    case ScalarOp::And: return "and";
    case ScalarOp::Or: return "or";
    case ScalarOp::Abs: return "abs";
    case ScalarOp::Min: return "min";
    case ScalarOp::Max: return "max";
    case ScalarOp::Sqrt: return "sqrt";
    case ScalarOp::Trunc: return "trunc";
    case ScalarOp::Defined: return "defined";
    case ScalarOp::Truthy: return "truthy";
    case ScalarOp::Falsy: return "falsy";
    case ScalarOp::Coalesce: return "coalesce";
  }
  return "?";
}

const char *combinator_name(Combinator c) {
  switch (c) {
    case Combinator::Sum: return "sum";
    case Combinator::Min: return "min";
    case Combinator::Max: return "max";
  }
  return "?";
}

double idempotent_value(Combinator c) {
  switch (c) {
    case Combinator::Sum: return 0.0;
    case Combinator::Min: return std::numeric_limits<double>::infinity();
    case Combinator::Max: return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

std::uint64_t canonical_order_key(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  constexpr std::uint64_t sign = 1ull << 63;
  return (bits & sign) ? ~bits : (bits | sign);
}

double fold_canonical(Combinator c, std::span<double> values) {
  std::sort(values.begin(), values.end(), [](double a, double b) {
    return canonical_order_key(a) < canonical_order_key(b);
  });
  double acc = idempotent_value(c);
  for (double v : values) {
    switch (c) {
      case Combinator::Sum: acc = acc + v; break;
      case Combinator::Min: acc = v < acc ? v : acc; break;
      case Combinator::Max: acc = acc < v ? v : acc; break;
    }
  }
  return acc;
}

double crop_reachability(double lo, double hi, double old_value, double proposed) {
  const double lower = old_value + lo;
  const double upper = old_value + hi;
  const double raised = proposed < lower ? lower : proposed;
  return upper < raised ? upper : raised;
}

// ---------------------------------------------------------------------------
// Random numbers

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t oid, std::uint64_t tick, RandPhase phase,
                       std::uint64_t stream, std::span<const std::uint64_t> loop_keys) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ oid);
  h = mix64(h ^ tick);
  h = mix64(h ^ static_cast<std::uint64_t>(phase));
  h = mix64(h ^ stream);
  for (auto k : loop_keys) h = mix64(h ^ k);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::uint64_t spawned_oid(std::uint64_t parent, std::uint64_t tick) {
  const std::uint64_t h = mix64(mix64(parent ^ 0x5bd1e995ull) ^ tick);
  return (h & ((1ull << 53) - 1)) | 1ull;
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

}  // namespace brace
