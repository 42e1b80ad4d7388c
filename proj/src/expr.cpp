#include "dspace/expr.hpp"

#include "dspace/error.hpp"

namespace dspace {

ValueExpr ValueExpr::ref(std::string field)
{
    ValueExpr e;
    e.op = Op::Field;
    e.field = std::move(field);
    return e;
}

ValueExpr ValueExpr::lit(FieldValue v)
{
    ValueExpr e;
    e.op = Op::Const;
    e.constant = std::move(v);
    return e;
}

namespace {

ValueExpr binary(ValueExpr::Op op, ValueExpr a, ValueExpr b)
{
    ValueExpr e;
    e.op = op;
    e.args = { std::move(a), std::move(b) };
    return e;
}

const char* symbol(ValueExpr::Op op)
{
    switch (op) {
    case ValueExpr::Op::Add: return "+";
    case ValueExpr::Op::Sub: return "-";
    case ValueExpr::Op::Mul: return "*";
    default: return "?";
    }
}

} // namespace

ValueExpr ValueExpr::add(ValueExpr a, ValueExpr b) { return binary(Op::Add, std::move(a), std::move(b)); }
ValueExpr ValueExpr::sub(ValueExpr a, ValueExpr b) { return binary(Op::Sub, std::move(a), std::move(b)); }
ValueExpr ValueExpr::mul(ValueExpr a, ValueExpr b) { return binary(Op::Mul, std::move(a), std::move(b)); }

void ValueExpr::collect_fields(std::set<std::string>& out) const
{
    if (op == Op::Field) out.insert(field);
    for (const auto& a : args) a.collect_fields(out);
}

std::string ValueExpr::to_string() const
{
    switch (op) {
    case Op::Field: return "[" + field + "]";
    case Op::Const: return constant.is_text() ? "'" + constant.as_text() + "'" : constant.to_string();
    default: return "(" + args[0].to_string() + " " + symbol(op) + " " + args[1].to_string() + ")";
    }
}

namespace {

FieldValue arith(ValueExpr::Op op, const FieldValue& a, const FieldValue& b)
{
    if (a.is_missing()) return a;
    if (b.is_missing()) return b;
    if (a.is_text() || b.is_text()) return FieldValue::missing("non-numeric operand");
    try {
        if (a.is_integer() && b.is_integer()) {
            std::int64_t out = 0;
            bool overflow = false;
            switch (op) {
            case ValueExpr::Op::Add: overflow = __builtin_add_overflow(a.as_integer(), b.as_integer(), &out); break;
            case ValueExpr::Op::Sub: overflow = __builtin_sub_overflow(a.as_integer(), b.as_integer(), &out); break;
            default: overflow = __builtin_mul_overflow(a.as_integer(), b.as_integer(), &out); break;
            }
            return overflow ? FieldValue::missing("overflow") : FieldValue(out);
        }
        const Decimal x = *a.numeric();
        const Decimal y = *b.numeric();
        if (a.is_quantity() || b.is_quantity()) {
            if (op == ValueExpr::Op::Mul) {
                std::string unit = a.is_quantity() && b.is_quantity() ? a.unit() + "*" + b.unit()
                                                                      : (a.is_quantity() ? a.unit() : b.unit());
                return FieldValue::quantity(x * y, std::move(unit));
            }
            if (!a.is_quantity() || !b.is_quantity() || a.unit() != b.unit()) {
                return FieldValue::missing("unit mismatch");
            }
            return FieldValue::quantity(op == ValueExpr::Op::Add ? x + y : x - y, a.unit());
        }
        switch (op) {
        case ValueExpr::Op::Add: return FieldValue(x + y);
        case ValueExpr::Op::Sub: return FieldValue(x - y);
        default: return FieldValue(x * y);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Overflow) return FieldValue::missing("overflow");
        throw;
    }
}

} // namespace

FieldValue evaluate(const ValueExpr& e, const Fields& row)
{
    switch (e.op) {
    case ValueExpr::Op::Field: {
        auto it = row.find(e.field);
        if (it == row.end()) {
            throw Error(ErrorCode::UnknownField, "expression references unknown field '" + e.field + "'");
        }
        return it->second;
    }
    case ValueExpr::Op::Const: return e.constant;
    default: return arith(e.op, evaluate(e.args[0], row), evaluate(e.args[1], row));
    }
}

std::optional<ValueType> result_type(const ValueExpr& e, const Schema& schema)
{
    switch (e.op) {
    case ValueExpr::Op::Field: {
        const Column* c = schema.find(e.field);
        return c ? std::optional(c->type) : std::nullopt;
    }
    case ValueExpr::Op::Const: return e.constant.type();
    default: {
        auto a = result_type(e.args[0], schema);
        auto b = result_type(e.args[1], schema);
        if (!a || !b || *a == ValueType::Text || *b == ValueType::Text) return std::nullopt;
        if (*a == ValueType::Quantity || *b == ValueType::Quantity) return ValueType::Quantity;
        if (*a == ValueType::Integer && *b == ValueType::Integer) return ValueType::Integer;
        return ValueType::Decimal;
    }
    }
}

std::optional<std::strong_ordering> compare_values(const FieldValue& a, const FieldValue& b)
{
    if (a.is_missing() || b.is_missing()) return std::nullopt;
    if (a.is_text() && b.is_text()) return a.as_text() <=> b.as_text();
    if (a.is_quantity() != b.is_quantity()) return std::nullopt;
    if (a.is_quantity() && a.unit() != b.unit()) return std::nullopt;
    auto x = a.numeric();
    auto y = b.numeric();
    if (!x || !y) return std::nullopt;
    return *x <=> *y;
}

Predicate Predicate::always() { return Predicate {}; }

Predicate Predicate::never()
{
    Predicate p;
    p.op = Op::False;
    return p;
}

Predicate Predicate::present(std::string field)
{
    Predicate p;
    p.op = Op::Present;
    p.lhs = ValueExpr::ref(std::move(field));
    return p;
}

Predicate Predicate::compare(Op op, ValueExpr lhs, ValueExpr rhs)
{
    Predicate p;
    p.op = op;
    p.lhs = std::move(lhs);
    p.rhs = std::move(rhs);
    return p;
}

Predicate Predicate::eq(std::string field, FieldValue v)
{
    return compare(Op::Eq, ValueExpr::ref(std::move(field)), ValueExpr::lit(std::move(v)));
}

Predicate Predicate::in(std::string field, std::vector<FieldValue> values)
{
    Predicate p;
    p.op = Op::In;
    p.lhs = ValueExpr::ref(std::move(field));
    p.values = std::move(values);
    return p;
}

Predicate Predicate::all_of(std::vector<Predicate> ps)
{
    Predicate p;
    p.op = Op::And;
    p.args = std::move(ps);
    return p;
}

Predicate Predicate::any_of(std::vector<Predicate> ps)
{
    Predicate p;
    p.op = Op::Or;
    p.args = std::move(ps);
    return p;
}

Predicate Predicate::negate(Predicate inner)
{
    Predicate p;
    p.op = Op::Not;
    p.args = { std::move(inner) };
    return p;
}

void Predicate::collect_fields(std::set<std::string>& out) const
{
    switch (op) {
    case Op::True:
    case Op::False: break;
    case Op::Present:
    case Op::In: lhs.collect_fields(out); break;
    case Op::And:
    case Op::Or:
    case Op::Not:
        for (const auto& a : args) a.collect_fields(out);
        break;
    default:
        lhs.collect_fields(out);
        rhs.collect_fields(out);
        break;
    }
}

namespace {

const char* cmp_symbol(Predicate::Op op)
{
    switch (op) {
    case Predicate::Op::Eq: return "=";
    case Predicate::Op::Ne: return "!=";
    case Predicate::Op::Lt: return "<";
    case Predicate::Op::Le: return "<=";
    case Predicate::Op::Gt: return ">";
    case Predicate::Op::Ge: return ">=";
    default: return "?";
    }
}

std::string join_args(const std::vector<Predicate>& args, const char* sep)
{
    std::string out = "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i != 0) out += sep;
        out += args[i].to_string();
    }
    return out + ")";
}

} // namespace

std::string Predicate::to_string() const
{
    switch (op) {
    case Op::True: return "true";
    case Op::False: return "false";
    case Op::Present: return "present" + lhs.to_string();
    case Op::In: {
        std::string out = lhs.to_string() + " in {";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i != 0) out += ", ";
            out += values[i].to_string();
        }
        return out + "}";
    }
    case Op::And: return join_args(args, " and ");
    case Op::Or: return join_args(args, " or ");
    case Op::Not: return "not " + args[0].to_string();
    default: return lhs.to_string() + " " + cmp_symbol(op) + " " + rhs.to_string();
    }
}

Truth evaluate(const Predicate& p, const Fields& row)
{
    using Op = Predicate::Op;
    switch (p.op) {
    case Op::True: return Truth::True;
    case Op::False: return Truth::False;
    case Op::Present: return evaluate(p.lhs, row).is_missing() ? Truth::False : Truth::True;
    case Op::In: {
        const FieldValue v = evaluate(p.lhs, row);
        if (v.is_missing()) return Truth::Unknown;
        for (const auto& candidate : p.values) {
            auto c = compare_values(v, candidate);
            if (c && *c == std::strong_ordering::equal) return Truth::True;
        }
        return Truth::False;
    }
    case Op::And: {
        Truth acc = Truth::True;
        for (const auto& a : p.args) {
            const Truth t = evaluate(a, row);
            if (t == Truth::False) return Truth::False;
            if (t == Truth::Unknown) acc = Truth::Unknown;
        }
        return acc;
    }
    case Op::Or: {
        Truth acc = Truth::False;
        for (const auto& a : p.args) {
            const Truth t = evaluate(a, row);
            if (t == Truth::True) return Truth::True;
            if (t == Truth::Unknown) acc = Truth::Unknown;
        }
        return acc;
    }
    case Op::Not: {
        const Truth t = evaluate(p.args.at(0), row);
        if (t == Truth::Unknown) return t;
        return t == Truth::True ? Truth::False : Truth::True;
    }
    default: break;
    }

    const FieldValue a = evaluate(p.lhs, row);
    const FieldValue b = evaluate(p.rhs, row);
    if (a.is_missing() || b.is_missing()) return Truth::Unknown;
    const auto c = compare_values(a, b);
    if (!c) return p.op == Op::Ne ? Truth::True : Truth::False;
    bool result = false;
    switch (p.op) {
    case Op::Eq: result = *c == 0; break;
    case Op::Ne: result = *c != 0; break;
    case Op::Lt: result = *c < 0; break;
    case Op::Le: result = *c <= 0; break;
    case Op::Gt: result = *c > 0; break;
    case Op::Ge: result = *c >= 0; break;
    default: break;
    }
    return result ? Truth::True : Truth::False;
}

} // namespace dspace
