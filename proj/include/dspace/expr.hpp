#pragma once

#include "dspace/relation.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace dspace {

/// Arithmetic over record fields. Evaluation is total: a Missing operand
/// propagates its reason, a text operand or unit clash yields a Missing
/// with a descriptive reason.
struct ValueExpr {
    enum class Op { Field, Const, Add, Sub, Mul };

    Op op = Op::Const;
    std::string field;
    FieldValue constant;
    std::vector<ValueExpr> args;

    static ValueExpr ref(std::string field);
    static ValueExpr lit(FieldValue v);
    static ValueExpr add(ValueExpr a, ValueExpr b);
    static ValueExpr sub(ValueExpr a, ValueExpr b);
    static ValueExpr mul(ValueExpr a, ValueExpr b);

    void collect_fields(std::set<std::string>& out) const;
    std::string to_string() const;

    bool operator==(const ValueExpr&) const = default;
};

FieldValue evaluate(const ValueExpr& e, const Fields& row);
/// Result type when every operand is present, or nullopt if the expression
/// cannot type-check against `schema`.
std::optional<ValueType> result_type(const ValueExpr& e, const Schema& schema);

enum class Truth { False, True, Unknown };

/// Row predicate in three-valued logic. Comparisons touching a Missing
/// operand are Unknown; Present is never Unknown.
struct Predicate {
    enum class Op { True, False, Present, Eq, Ne, Lt, Le, Gt, Ge, In, And, Or, Not };

    Op op = Op::True;
    ValueExpr lhs;
    ValueExpr rhs;
    std::vector<FieldValue> values;
    std::vector<Predicate> args;

    static Predicate always();
    static Predicate never();
    static Predicate present(std::string field);
    static Predicate compare(Op op, ValueExpr lhs, ValueExpr rhs);
    static Predicate eq(std::string field, FieldValue v);
    static Predicate in(std::string field, std::vector<FieldValue> values);
    static Predicate all_of(std::vector<Predicate> ps);
    static Predicate any_of(std::vector<Predicate> ps);
    static Predicate negate(Predicate p);

    void collect_fields(std::set<std::string>& out) const;
    std::string to_string() const;

    bool operator==(const Predicate&) const = default;
};

Truth evaluate(const Predicate& p, const Fields& row);

/// Ordering of two present values, when they are comparable: numbers with
/// numbers (quantities only within one unit), text with text.
std::optional<std::strong_ordering> compare_values(const FieldValue& a, const FieldValue& b);

} // namespace dspace
