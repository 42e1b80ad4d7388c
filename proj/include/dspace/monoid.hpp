#pragma once

#include "dspace/decimal.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dspace {

enum class MonoidKind { Count, Sum, Min, Max, AvgPair, SetOfIds, Paccioli, Tuple };

std::string_view to_string(MonoidKind kind);

class MonoidElement;

namespace summary {

struct Count {
    std::int64_t n = 0;
    bool operator==(const Count&) const = default;
};

struct Sum {
    Decimal value;
    std::string unit;
    bool operator==(const Sum&) const = default;
};

/// nullopt is the +infinity unit.
struct Min {
    std::optional<Decimal> value;
    std::string unit;
    bool operator==(const Min&) const = default;
};

/// nullopt is the -infinity unit.
struct Max {
    std::optional<Decimal> value;
    std::string unit;
    bool operator==(const Max&) const = default;
};

struct AvgPair {
    Decimal sum;
    std::int64_t count = 0;
    bool operator==(const AvgPair&) const = default;
};

struct SetOfIds {
    std::set<std::string> ids;
    bool operator==(const SetOfIds&) const = default;
};

/// Double-entry pair over R+ x R+.
struct Paccioli {
    Decimal debit;
    Decimal credit;
    bool operator==(const Paccioli&) const = default;
};

struct Tuple {
    std::vector<MonoidElement> items;
    bool operator==(const Tuple&) const;
};

} // namespace summary

/// One value of an information monoid. Construct through the named
/// factories, which enforce the per-kind invariants.
class MonoidElement {
public:
    using Storage = std::variant<summary::Count, summary::Sum, summary::Min, summary::Max, summary::AvgPair,
        summary::SetOfIds, summary::Paccioli, summary::Tuple>;

    static MonoidElement count(std::int64_t n);
    static MonoidElement sum(Decimal value, std::string unit = {});
    static MonoidElement min(Decimal value, std::string unit = {});
    static MonoidElement min_unit(std::string unit = {});
    static MonoidElement max(Decimal value, std::string unit = {});
    static MonoidElement max_unit(std::string unit = {});
    static MonoidElement avg(Decimal sum, std::int64_t count);
    static MonoidElement ids(std::set<std::string> ids = {});
    static MonoidElement paccioli(Decimal debit, Decimal credit);
    /// Signed amount embedded as (x, 0) or (0, -x).
    static MonoidElement paccioli_of(Decimal signed_amount);
    static MonoidElement tuple(std::vector<MonoidElement> items);

    MonoidKind kind() const { return static_cast<MonoidKind>(v_.index()); }
    const Storage& storage() const { return v_; }

    template <typename T>
    const T& as() const { return std::get<T>(v_); }

    /// Unit label of Sum/Min/Max, empty for other kinds.
    std::string unit() const;

    /// Same kind, unit label and (for tuples) component shape.
    bool compatible_with(const MonoidElement& other) const;

    std::string to_string() const;

    bool operator==(const MonoidElement&) const = default;

private:
    explicit MonoidElement(Storage v)
        : v_(std::move(v))
    {
    }

    Storage v_;
};

/// Structural fusion (the built-in operation of each kind). Throws
/// KindMismatch on incompatible operands.
MonoidElement fuse_elements(const MonoidElement& a, const MonoidElement& b);

/// (unit, fusion, order) triple. `order` is a partial order on elements;
/// when `derived_order` is set it is the order induced by fusion itself
/// (a <= b iff a = b * c for some c), so fusion is a lower bound.
struct InformationMonoid {
    std::string name;
    MonoidElement unit = MonoidElement::count(0);
    std::function<MonoidElement(const MonoidElement&, const MonoidElement&)> fuse;
    std::function<bool(const MonoidElement&, const MonoidElement&)> order;
    bool derived_order = false;
};

MonoidElement fuse(const InformationMonoid& m, const MonoidElement& a, const MonoidElement& b);
bool leq(const InformationMonoid& m, const MonoidElement& a, const MonoidElement& b);

/// Fold of `items` under `m`, starting from the unit.
MonoidElement fuse_all(const InformationMonoid& m, const std::vector<MonoidElement>& items);

namespace monoids {

InformationMonoid count();
/// Natural numeric order; signed payloads make the induced order trivial.
InformationMonoid sum(std::string unit = {});
InformationMonoid min(std::string unit = {});
InformationMonoid max(std::string unit = {});
InformationMonoid avg();
/// Union with the induced order (superset is smaller).
InformationMonoid ids();
/// Union ordered by inclusion, as used by the identity data space.
InformationMonoid ids_by_inclusion();
InformationMonoid paccioli();
/// Componentwise fusion and order over the given monoids.
InformationMonoid product(std::vector<InformationMonoid> parts);

} // namespace monoids

} // namespace dspace
