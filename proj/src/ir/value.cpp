#include <charconv>
#include <deque>
#include <mutex>
#include <unordered_map>

#include "brace/ir.hpp"

namespace brace::ir {

namespace {

struct AttrTable {
  std::mutex mu;
  std::deque<std::string> names;
  std::unordered_map<std::string, Attr> ids;
};

AttrTable &attr_table() {
  static AttrTable t;
  return t;
}

}  // namespace

Attr attr(std::string_view name) {
  auto &t = attr_table();
  std::lock_guard lock(t.mu);
  auto it = t.ids.find(std::string(name));
  if (it != t.ids.end()) return it->second;
  const Attr id = static_cast<Attr>(t.names.size());
  t.names.emplace_back(name);
  t.ids.emplace(std::string(name), id);
  return id;
}

const std::string &attr_name(Attr a) {
  auto &t = attr_table();
  std::lock_guard lock(t.mu);
  return t.names.at(a);
}

Value Value::num(double v) {
  Value out;
  out.kind_ = Kind::Num;
  out.num_ = v;
  return out;
}

Value Value::key(std::uint64_t oid) {
  Value out;
  out.kind_ = Kind::Key;
  out.num_ = static_cast<double>(oid);
  return out;
}

Value Value::scalar(const Scalar &s) {
  Value out;
  switch (s.kind) {
    case Scalar::Kind::Nil: return out;
    case Scalar::Kind::Num: out.kind_ = Kind::Num; break;
    case Scalar::Kind::Key: out.kind_ = Kind::Key; break;
  }
  out.num_ = s.v;
  return out;
}

Value Value::tuple(Fields fields) {
  Value out;
  out.kind_ = Kind::Tuple;
  out.tuple_ = std::make_shared<const Fields>(std::move(fields));
  return out;
}

Value Value::set(Elems elems) {
  Value out;
  out.kind_ = Kind::Set;
  out.set_ = std::make_shared<const Elems>(std::move(elems));
  return out;
}

Value Value::empty_set() {
  static const auto empty = std::make_shared<const Elems>();
  Value out;
  out.kind_ = Kind::Set;
  out.set_ = empty;
  return out;
}

Scalar Value::as_scalar() const {
  switch (kind_) {
    case Kind::Nil: return Scalar::nil();
    case Kind::Num: return Scalar::num(num_);
    case Kind::Key: return Scalar{Scalar::Kind::Key, num_};
    default: throw EvalTypeError("expected a scalar, found " + to_string(*this));
  }
}

const Fields &Value::fields() const {
  if (kind_ != Kind::Tuple) throw EvalTypeError("expected a tuple, found " + to_string(*this));
  return *tuple_;
}

const Elems &Value::elems() const {
  if (kind_ != Kind::Set) throw EvalTypeError("expected a set, found " + to_string(*this));
  return *set_;
}

const Value *Value::find(Attr a) const {
  for (const auto &[name, v] : fields()) {
    if (name == a) return &v;
  }
  return nullptr;
}

bool operator==(const Value &a, const Value &b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Value::Kind::Nil: return true;
    case Value::Kind::Num:
    case Value::Kind::Key: return same_bits(a.as_scalar(), b.as_scalar());
    case Value::Kind::Tuple: {
      if (a.tuple_->size() != b.tuple_->size()) return false;
      for (const auto &[name, v] : *a.tuple_) {
        const Value *w = b.find(name);
        if (!w || !(v == *w)) return false;
      }
      return true;
    }
    case Value::Kind::Set: {
      // Multiset equality.
      const auto &x = *a.set_;
      const auto &y = *b.set_;
      if (x.size() != y.size()) return false;
      std::vector<bool> used(y.size(), false);
      for (const auto &v : x) {
        bool found = false;
        for (std::size_t j = 0; j < y.size(); ++j) {
          if (!used[j] && v == y[j]) {
            used[j] = found = true;
            break;
          }
        }
        if (!found) return false;
      }
      return true;
    }
  }
  return false;
}

namespace {

void append_number(std::string &out, double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

void render(std::string &out, const Value &v) {
  switch (v.kind()) {
    case Value::Kind::Nil: out += "nil"; return;
    case Value::Kind::Num: append_number(out, v.number()); return;
    case Value::Kind::Key:
      out += '#';
      append_number(out, v.number());
      return;
    case Value::Kind::Tuple: {
      out += '<';
      bool first = true;
      for (const auto &[name, x] : v.fields()) {
        if (!first) out += ", ";
        first = false;
        out += attr_name(name);
        out += ": ";
        render(out, x);
      }
      out += '>';
      return;
    }
    case Value::Kind::Set: {
      out += '{';
      bool first = true;
      for (const auto &x : v.elems()) {
        if (!first) out += ", ";
        first = false;
        render(out, x);
      }
      out += '}';
      return;
    }
  }
}

}  // namespace

std::string to_string(const Value &v) {
  std::string out;
  render(out, v);
  return out;
}

Value agent_value(const CheckedScript &script, const AgentRecord &a) {
  static const Attr key_attr = attr(kKeyAttr);
  Fields f;
  f.reserve(script.states.size() + 1);
  f.emplace_back(key_attr, Value::key(a.oid));
  for (std::size_t i = 0; i < script.states.size(); ++i) {
    f.emplace_back(attr(script.states[i].name),
                   Value::scalar(state_scalar(script, static_cast<int>(i), a.s[i])));
  }
  return Value::tuple(std::move(f));
}

}  // namespace brace::ir
