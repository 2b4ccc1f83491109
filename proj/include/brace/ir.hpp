#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "brace/agents.hpp"
#include "brace/random.hpp"
#include "brace/scalar.hpp"
#include "brace/sema.hpp"

namespace brace::ir {

// ---------------------------------------------------------------------------
// Values of the nested data model

/// Interned attribute name.
using Attr = std::uint32_t;

Attr attr(std::string_view name);
const std::string &attr_name(Attr a);

class Value;
using Field = std::pair<Attr, Value>;
using Fields = std::vector<Field>;
using Elems = std::vector<Value>;

class Value {
public:
  enum class Kind : std::uint8_t { Nil, Num, Key, Tuple, Set };

  Value() = default;
  static Value nil() { return {}; }
  static Value num(double v);
  static Value key(std::uint64_t oid);
  static Value scalar(const Scalar &s);
  static Value tuple(Fields fields);
  static Value set(Elems elems);
  static Value empty_set();

  Kind kind() const { return kind_; }
  bool is_nil() const { return kind_ == Kind::Nil; }
  bool is_scalar() const { return kind_ <= Kind::Key; }
  bool is_tuple() const { return kind_ == Kind::Tuple; }
  bool is_set() const { return kind_ == Kind::Set; }

  /// Throws EvalTypeError unless the value is NIL, a number or a key.
  Scalar as_scalar() const;
  double number() const { return num_; }

  const Fields &fields() const;
  const Elems &elems() const;
  const Value *find(Attr a) const;

  friend bool operator==(const Value &a, const Value &b);

private:
  Kind kind_ = Kind::Nil;
  double num_ = 0.0;
  std::shared_ptr<const Fields> tuple_;
  std::shared_ptr<const Elems> set_;
};

std::string to_string(const Value &v);

/// Builds the tuple ⟨#key, s_i...⟩ for an agent.
Value agent_value(const CheckedScript &script, const AgentRecord &a);

// ---------------------------------------------------------------------------
// Plans

enum class Op : std::uint8_t {
  Id, Compose, Tuple, Proj, Map, FlatMap, PairWith, Sng, Flatten, Nest, Select, Get,
  Const, Arith, Agg, Extend, EffectUnion, EffectId,
  Rand,         // counter-based draw keyed by the agent and enclosing loop keys
  RangeSelect,  // index probe: visible other agents of π1 inside π2
};

enum class AggKind : std::uint8_t { Sum, Count, Min, Max };

const char *op_label(Op op);

struct PlanNode;
using Plan = std::shared_ptr<const PlanNode>;

struct PlanNode {
  Op op = Op::Id;
  std::vector<Plan> kids;
  std::vector<Attr> attrs;   // Tuple: one per kid; Proj/PairWith/Nest/Extend: one
  ScalarOp sop = ScalarOp::Add;
  AggKind agg = AggKind::Sum;
  Value constant;
  int rho = 0;
  RandPhase phase = RandPhase::Query;
  int stream = 0;
  std::vector<AxisRange> axes;  // RangeSelect (field = attribute of the agent tuple)
  std::vector<Attr> axis_attrs;
};

// Builders.
Plan id();
Plan compose(std::vector<Plan> stages);
Plan tuple(std::vector<std::pair<std::string, Plan>> fields);
Plan tuple_attrs(std::vector<std::pair<Attr, Plan>> fields);
Plan proj(std::string_view a);
Plan path(std::initializer_list<std::string_view> attrs);
Plan map(Plan f);
Plan flatmap(Plan f);
Plan pairwith(std::string_view a);
Plan sng();
Plan flatten();
Plan nest(std::string_view a);
Plan select(Plan pred);
Plan get();
Plan constant(Value v);
Plan arith(ScalarOp op, std::vector<Plan> args);
Plan agg(AggKind k);
Plan extend(std::string_view a, Plan f);
Plan effect_union(Plan a, Plan b);
Plan effect_id(int rho);
Plan rand_draw(RandPhase phase, int stream, std::vector<Plan> keys);
Plan range_select(std::vector<AxisRange> axes, std::vector<Attr> axis_attrs);

/// Copy of `n` with different children.
Plan with_kids(const PlanNode &n, std::vector<Plan> kids);

/// Cartesian product f × g := ⟨1:f, 2:g⟩ ∘ PAIRWITH(1) ∘ FLATMAP(PAIRWITH(2)).
Plan product(Plan f, Plan g);

std::size_t node_count(const Plan &p);
bool same_plan(const Plan &a, const Plan &b);

/// Stable indented text form of a plan.
std::string print_plan(const Plan &p);

struct EvalContext {
  std::uint64_t seed = 0;
  std::uint64_t tick = 0;
};

/// Reference evaluator. COMPOSE reads left to right: (f ∘ g)(x) = g(f(x)).
Value eval_plan(const Plan &p, const Value &v, const EvalContext &ctx = {});

// ---------------------------------------------------------------------------
// Lowering of a checked script

struct LoweringOptions {
  VisibilityMode visibility = VisibilityMode::Restricted;
  /// Replace the visible-extent selection by a RANGE_SELECT index probe.
  bool range_index = true;
};

/// The whole tick is 𝔔(Q) ∘ ℜ ∘ 𝔈 ∘ 𝔘, with ℜ omitted for local-only scripts.
struct QueryPhasePlan {
  Plan q;             // run body over ⟨1: τ', 2: {τ}, 3: {ρ}⟩
  Plan q_hat;         // ⟨1: π1, 2: π2, 3: {}⟩ ∘ Q ∘ ⟨1: π1, 2: π3⟩
  Plan effect_gen;    // 𝔔(Q): {τ} → {⟨1: τ, 2: {ρ}⟩}
  Plan redistribute;  // ℜ
  Plan inline_effects;  // 𝔈
  Plan update;        // 𝔘
  bool non_local = false;

  Plan whole_tick() const;
};

QueryPhasePlan lower(const CheckedScript &script, const LoweringOptions &opts = {});

/// Plan for one statement list over ⟨1, 2, 3⟩ (used by tests and rewrites).
Plan lower_statements(const CheckedScript &script, const std::vector<dsl::Stmt> &body,
                      const LoweringOptions &opts = {});

// Names of the special attributes.
extern const std::string kKeyAttr;    // "#key"
extern const std::string kDieAttr;    // "#die"
extern const std::string kSpawnAttr;  // "#spawn"
std::string child_attr(const std::string &field);

/// Per-tick births and deaths observed by run_tick_sequential.
struct TickEvents {
  std::size_t births = 0;
  std::size_t deaths = 0;
  std::size_t clamps = 0;
};

/// The sequential oracle for one tick: evaluates the whole-tick plan over the
/// full population, applies world bounds, then deaths and births. Output is
/// sorted by oid with effects reset to θ.
std::vector<AgentRecord> run_tick_sequential(const CheckedScript &script,
                                             const std::vector<AgentRecord> &agents,
                                             VisibilityMode visibility, std::uint64_t seed,
                                             std::uint64_t tick, const WorldSpec &world,
                                             TickEvents *events = nullptr);

/// Same, with an already lowered plan.
std::vector<AgentRecord> run_tick_with_plan(const CheckedScript &script, const QueryPhasePlan &plan,
                                            const std::vector<AgentRecord> &agents,
                                            std::uint64_t seed, std::uint64_t tick,
                                            const WorldSpec &world, TickEvents *events = nullptr);

/// θ for every effect of the script.
std::vector<double> theta_vector(const CheckedScript &script);

}  // namespace brace::ir
