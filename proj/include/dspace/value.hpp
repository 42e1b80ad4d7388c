#pragma once

#include "dspace/decimal.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dspace {

/// Amount tagged with a unit label ("tonne", "$", "USD").
struct Quantity {
    Decimal amount;
    std::string unit;

    auto operator<=>(const Quantity&) const = default;
};

/// Absent cell. The reason keeps the source's own wording ("unknown",
/// "closed", "priceless") so the distinction survives the pipeline.
struct Missing {
    std::string reason;

    auto operator<=>(const Missing&) const = default;
};

enum class ValueType { Integer, Decimal, Text, Quantity };

std::string_view to_string(ValueType type);
std::optional<ValueType> parse_value_type(std::string_view text);

class FieldValue {
public:
    using Storage = std::variant<std::int64_t, Decimal, std::string, Quantity, Missing>;

    FieldValue()
        : v_(Missing { "empty" })
    {
    }
    FieldValue(std::int64_t v)
        : v_(v)
    {
    }
    FieldValue(int v)
        : v_(static_cast<std::int64_t>(v))
    {
    }
    FieldValue(Decimal v)
        : v_(v)
    {
    }
    FieldValue(std::string v)
        : v_(std::move(v))
    {
    }
    FieldValue(const char* v)
        : v_(std::string(v))
    {
    }
    FieldValue(Quantity v);
    FieldValue(Missing v);

    static FieldValue missing(std::string reason) { return FieldValue(Missing { std::move(reason) }); }
    static FieldValue quantity(Decimal amount, std::string unit) { return FieldValue(Quantity { amount, std::move(unit) }); }

    bool is_missing() const { return std::holds_alternative<Missing>(v_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_decimal() const { return std::holds_alternative<Decimal>(v_); }
    bool is_text() const { return std::holds_alternative<std::string>(v_); }
    bool is_quantity() const { return std::holds_alternative<Quantity>(v_); }
    bool is_numeric() const { return is_integer() || is_decimal() || is_quantity(); }

    std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
    Decimal as_decimal() const { return std::get<Decimal>(v_); }
    const std::string& as_text() const { return std::get<std::string>(v_); }
    const Quantity& as_quantity() const { return std::get<Quantity>(v_); }
    const Missing& as_missing() const { return std::get<Missing>(v_); }

    /// Numeric payload of Integer, Decimal or Quantity cells.
    std::optional<Decimal> numeric() const;
    /// Unit label of a Quantity cell, empty otherwise.
    std::string unit() const;
    /// Type of a present value; nullopt for Missing.
    std::optional<ValueType> type() const;

    const Storage& storage() const { return v_; }

    /// Canonical rendering used for CSV output and set-of-id members.
    /// Missing renders as "<reason>" in angle brackets.
    std::string to_string() const;

    auto operator<=>(const FieldValue&) const = default;

private:
    Storage v_;
};

using Fields = std::map<std::string, FieldValue, std::less<>>;

std::string to_string(const Fields& fields);

struct Column {
    std::string name;
    ValueType type = ValueType::Text;
    /// Declared unit for Quantity columns whose unit is fixed; may be empty.
    std::string unit;

    bool operator==(const Column&) const = default;
};

/// Ordered column list. An open schema lists the columns every record must
/// carry but admits extra ones; tagged sums of differing schemas and error
/// traces are open.
class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<Column> columns, bool open = false);

    static Schema open_schema(std::vector<Column> columns = {}) { return Schema(std::move(columns), true); }
    /// Schema of a tagged union: shared columns (closed only when both sides
    /// agree), remembering both summands.
    static Schema tagged_sum(const Schema& left, const Schema& right);

    const std::vector<Column>& columns() const { return columns_; }
    bool open() const { return open_; }
    /// Left and right schemas when this is a tagged sum, else empty.
    const std::vector<Schema>& summands() const { return summands_; }
    /// Same columns, no summands.
    Schema without_summands() const { return Schema(columns_, open_); }
    bool empty() const { return columns_.empty(); }
    std::size_t size() const { return columns_.size(); }

    bool has(std::string_view name) const { return find(name) != nullptr; }
    const Column* find(std::string_view name) const;
    std::vector<std::string> names() const;

    /// True if every column of `required` is present here with the same type.
    bool covers(const Schema& required) const;

    /// Checks that a record's relevant field names fit this schema.
    bool admits(const Fields& relevant) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<Column> columns_;
    bool open_ = false;
    std::vector<Schema> summands_;
};

} // namespace dspace
