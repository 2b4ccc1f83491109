#pragma once

#include <optional>
#include <string>
#include <vector>

#include "brace/dsl.hpp"

namespace brace {

enum class Locality { LocalOnly, HasNonLocal };

const char *locality_name(Locality l);

/// Rules enforced on scripts. R1..R6 are the state-effect discipline; the last
/// two cover ordinary name resolution and typing.
enum class Rule {
  R1_StateWrite,        // run body never assigns a state field
  R2_EffectRead,        // effects are read only outside foreach, and only our own
  R3_EffectAssignOp,    // effects are written with `<-` only
  R4_UpdateReads,       // update rules read only the agent's own fields
  R5_RangeConstraint,   // #range only on float state fields
  R6_MemberTarget,      // member access through foreach var, this, or agent const
  Declaration,          // unknown or duplicate names, wrong class
  Typing,               // operand types
};

const char *rule_name(Rule r);

struct SemanticDiagnostic {
  Rule rule;
  SourcePos pos;
  std::string message;
};

class SemanticErrors : public Error {
public:
  explicit SemanticErrors(std::vector<SemanticDiagnostic> d);
  std::vector<SemanticDiagnostic> diagnostics;
};

struct StateFieldInfo {
  std::string name;
  dsl::ValueType type;
  int decl_index;  // position in ScriptAst::fields
  std::optional<dsl::Interval> range;
  int axis = -1;   // spatial axis when ranged
};

struct EffectFieldInfo {
  std::string name;
  dsl::ValueType type;
  int decl_index;
  int rho;  // effect id: position among effect fields
  Combinator combinator;
  double theta;
};

struct SpatialField {
  int state_index;
  dsl::Interval range;
};

struct CheckedScript {
  dsl::ScriptAst ast;  // annotated copy
  std::vector<StateFieldInfo> states;
  std::vector<EffectFieldInfo> effects;
  std::vector<SpatialField> spatial_fields;  // axis order = declaration order
  Locality locality = Locality::LocalOnly;
  int binding_slots = 0;  // consts and loop variables in the run body
  bool query_uses_rand = false;
  bool reads_effects_in_query = false;

  int state_index(const std::string &name) const;
  int effect_index(const std::string &name) const;
  int dimension() const { return static_cast<int>(spatial_fields.size()); }
};

/// Either a checked script or the full list of diagnostics.
struct CheckResult {
  std::optional<CheckedScript> script;
  std::vector<SemanticDiagnostic> diagnostics;
  bool ok() const { return script.has_value(); }
};

CheckResult check(const dsl::ScriptAst &ast);

/// Throws SemanticErrors when the script is rejected.
CheckedScript check_or_throw(const dsl::ScriptAst &ast);

/// Parse and check in one go.
CheckedScript compile_script(const dsl::ScriptSource &src);

}  // namespace brace
