#include "dspace/value.hpp"

#include "dspace/error.hpp"

#include <set>

namespace dspace {

std::string_view to_string(ValueType type)
{
    switch (type) {
    case ValueType::Integer: return "integer";
    case ValueType::Decimal: return "decimal";
    case ValueType::Text: return "text";
    case ValueType::Quantity: return "quantity";
    }
    return "text";
}

std::optional<ValueType> parse_value_type(std::string_view text)
{
    if (text == "integer") return ValueType::Integer;
    if (text == "decimal" || text == "number") return ValueType::Decimal;
    if (text == "text") return ValueType::Text;
    if (text == "quantity") return ValueType::Quantity;
    return std::nullopt;
}

FieldValue::FieldValue(Quantity v)
    : v_(std::move(v))
{
    if (as_quantity().unit.empty()) {
        throw Error(ErrorCode::InvalidArgument, "quantity requires a unit label");
    }
}

FieldValue::FieldValue(Missing v)
    : v_(std::move(v))
{
    if (as_missing().reason.empty()) {
        throw Error(ErrorCode::InvalidArgument, "missing value requires a reason");
    }
}

std::optional<Decimal> FieldValue::numeric() const
{
    if (is_integer()) return Decimal::from_int(as_integer());
    if (is_decimal()) return as_decimal();
    if (is_quantity()) return as_quantity().amount;
    return std::nullopt;
}

std::string FieldValue::unit() const
{
    return is_quantity() ? as_quantity().unit : std::string();
}

std::optional<ValueType> FieldValue::type() const
{
    switch (v_.index()) {
    case 0: return ValueType::Integer;
    case 1: return ValueType::Decimal;
    case 2: return ValueType::Text;
    case 3: return ValueType::Quantity;
    default: return std::nullopt;
    }
}

std::string FieldValue::to_string() const
{
    struct Visitor {
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(Decimal v) const { return v.to_string(); }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(const Quantity& q) const { return q.amount.to_string() + " " + q.unit; }
        std::string operator()(const Missing& m) const { return "<" + m.reason + ">"; }
    };
    return std::visit(Visitor {}, v_);
}

std::string to_string(const Fields& fields)
{
    std::string out = "{";
    bool first = true;
    for (const auto& [name, value] : fields) {
        if (!first) out += ", ";
        first = false;
        out += name + "=" + value.to_string();
    }
    return out + "}";
}

Schema::Schema(std::vector<Column> columns, bool open)
    : columns_(std::move(columns))
    , open_(open)
{
    std::set<std::string_view> seen;
    for (const auto& c : columns_) {
        if (c.name.empty() || !seen.insert(c.name).second) {
            throw Error(ErrorCode::SchemaMismatch, "duplicate or empty column name '" + c.name + "'");
        }
    }
}

Schema Schema::tagged_sum(const Schema& left, const Schema& right)
{
    std::vector<Column> common;
    for (const auto& c : left.columns()) {
        const Column* other = right.find(c.name);
        if (other != nullptr && *other == c) common.push_back(c);
    }
    const bool same = left.without_summands() == right.without_summands();
    Schema out(std::move(common), same ? left.open() : true);
    out.summands_ = { left, right };
    return out;
}

const Column* Schema::find(std::string_view name) const
{
    for (const auto& c : columns_) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::vector<std::string> Schema::names() const
{
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

bool Schema::covers(const Schema& required) const
{
    for (const auto& c : required.columns()) {
        const Column* mine = find(c.name);
        if (mine == nullptr || mine->type != c.type) return false;
    }
    return true;
}

bool Schema::admits(const Fields& relevant) const
{
    for (const auto& c : columns_) {
        if (!relevant.contains(c.name)) return false;
    }
    return open_ || relevant.size() == columns_.size();
}

} // namespace dspace
