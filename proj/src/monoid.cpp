#include "dspace/monoid.hpp"

#include "dspace/error.hpp"

#include <algorithm>

namespace dspace {

std::string_view to_string(MonoidKind kind)
{
    switch (kind) {
    case MonoidKind::Count: return "count";
    case MonoidKind::Sum: return "sum";
    case MonoidKind::Min: return "min";
    case MonoidKind::Max: return "max";
    case MonoidKind::AvgPair: return "avg";
    case MonoidKind::SetOfIds: return "set";
    case MonoidKind::Paccioli: return "paccioli";
    case MonoidKind::Tuple: return "tuple";
    }
    return "?";
}

bool summary::Tuple::operator==(const Tuple& other) const
{
    return items == other.items;
}

MonoidElement MonoidElement::count(std::int64_t n)
{
    if (n < 0) {
        throw Error(ErrorCode::InvalidArgument, "count must be non-negative");
    }
    return MonoidElement(summary::Count { n });
}

MonoidElement MonoidElement::sum(Decimal value, std::string unit)
{
    return MonoidElement(summary::Sum { value, std::move(unit) });
}

MonoidElement MonoidElement::min(Decimal value, std::string unit)
{
    return MonoidElement(summary::Min { value, std::move(unit) });
}

MonoidElement MonoidElement::min_unit(std::string unit)
{
    return MonoidElement(summary::Min { std::nullopt, std::move(unit) });
}

MonoidElement MonoidElement::max(Decimal value, std::string unit)
{
    return MonoidElement(summary::Max { value, std::move(unit) });
}

MonoidElement MonoidElement::max_unit(std::string unit)
{
    return MonoidElement(summary::Max { std::nullopt, std::move(unit) });
}

MonoidElement MonoidElement::avg(Decimal sum, std::int64_t count)
{
    if (count < 0 || (count == 0 && !sum.is_zero())) {
        throw Error(ErrorCode::InvalidArgument, "avg pair requires count >= 0 and zero sum when empty");
    }
    return MonoidElement(summary::AvgPair { sum, count });
}

MonoidElement MonoidElement::ids(std::set<std::string> ids)
{
    return MonoidElement(summary::SetOfIds { std::move(ids) });
}

MonoidElement MonoidElement::paccioli(Decimal debit, Decimal credit)
{
    if (debit.is_negative() || credit.is_negative()) {
        throw Error(ErrorCode::InvalidArgument, "paccioli components must be non-negative");
    }
    return MonoidElement(summary::Paccioli { debit, credit });
}

MonoidElement MonoidElement::paccioli_of(Decimal signed_amount)
{
    return signed_amount.is_negative() ? paccioli(Decimal {}, -signed_amount) : paccioli(signed_amount, Decimal {});
}

MonoidElement MonoidElement::tuple(std::vector<MonoidElement> items)
{
    return MonoidElement(summary::Tuple { std::move(items) });
}

std::string MonoidElement::unit() const
{
    switch (kind()) {
    case MonoidKind::Sum: return as<summary::Sum>().unit;
    case MonoidKind::Min: return as<summary::Min>().unit;
    case MonoidKind::Max: return as<summary::Max>().unit;
    default: return {};
    }
}

bool MonoidElement::compatible_with(const MonoidElement& other) const
{
    if (kind() != other.kind() || unit() != other.unit()) {
        return false;
    }
    if (kind() != MonoidKind::Tuple) {
        return true;
    }
    const auto& xs = as<summary::Tuple>().items;
    const auto& ys = other.as<summary::Tuple>().items;
    if (xs.size() != ys.size()) {
        return false;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i].compatible_with(ys[i])) return false;
    }
    return true;
}

namespace {

std::string with_unit(const std::string& text, const std::string& unit)
{
    return unit.empty() ? text : text + " " + unit;
}

} // namespace

std::string MonoidElement::to_string() const
{
    switch (kind()) {
    case MonoidKind::Count: return std::to_string(as<summary::Count>().n);
    case MonoidKind::Sum: {
        const auto& s = as<summary::Sum>();
        return with_unit(s.value.to_string(), s.unit);
    }
    case MonoidKind::Min: {
        const auto& m = as<summary::Min>();
        return with_unit(m.value ? m.value->to_string() : "+inf", m.unit);
    }
    case MonoidKind::Max: {
        const auto& m = as<summary::Max>();
        return with_unit(m.value ? m.value->to_string() : "-inf", m.unit);
    }
    case MonoidKind::AvgPair: {
        const auto& a = as<summary::AvgPair>();
        return "(" + a.sum.to_string() + ", " + std::to_string(a.count) + ")";
    }
    case MonoidKind::SetOfIds: {
        std::string out = "{";
        bool first = true;
        for (const auto& id : as<summary::SetOfIds>().ids) {
            if (!first) out += ",";
            first = false;
            out += id;
        }
        return out + "}";
    }
    case MonoidKind::Paccioli: {
        const auto& p = as<summary::Paccioli>();
        return "(" + p.debit.to_string() + ", " + p.credit.to_string() + ")";
    }
    case MonoidKind::Tuple: {
        std::string out = "(";
        bool first = true;
        for (const auto& item : as<summary::Tuple>().items) {
            if (!first) out += ", ";
            first = false;
            out += item.to_string();
        }
        return out + ")";
    }
    }
    return {};
}

namespace {

void require_compatible(const MonoidElement& a, const MonoidElement& b)
{
    if (!a.compatible_with(b)) {
        throw Error(ErrorCode::KindMismatch,
            "cannot combine " + std::string(to_string(a.kind())) + "[" + a.unit() + "] with "
                + std::string(to_string(b.kind())) + "[" + b.unit() + "]");
    }
}

} // namespace

MonoidElement fuse_elements(const MonoidElement& a, const MonoidElement& b)
{
    require_compatible(a, b);
    switch (a.kind()) {
    case MonoidKind::Count:
        return MonoidElement::count(a.as<summary::Count>().n + b.as<summary::Count>().n);
    case MonoidKind::Sum:
        return MonoidElement::sum(a.as<summary::Sum>().value + b.as<summary::Sum>().value, a.unit());
    case MonoidKind::Min: {
        const auto& x = a.as<summary::Min>().value;
        const auto& y = b.as<summary::Min>().value;
        if (!x) return b;
        if (!y) return a;
        return MonoidElement::min(std::min(*x, *y), a.unit());
    }
    case MonoidKind::Max: {
        const auto& x = a.as<summary::Max>().value;
        const auto& y = b.as<summary::Max>().value;
        if (!x) return b;
        if (!y) return a;
        return MonoidElement::max(std::max(*x, *y), a.unit());
    }
    case MonoidKind::AvgPair: {
        const auto& x = a.as<summary::AvgPair>();
        const auto& y = b.as<summary::AvgPair>();
        return MonoidElement::avg(x.sum + y.sum, x.count + y.count);
    }
    case MonoidKind::SetOfIds: {
        auto ids = a.as<summary::SetOfIds>().ids;
        const auto& more = b.as<summary::SetOfIds>().ids;
        ids.insert(more.begin(), more.end());
        return MonoidElement::ids(std::move(ids));
    }
    case MonoidKind::Paccioli: {
        const auto& x = a.as<summary::Paccioli>();
        const auto& y = b.as<summary::Paccioli>();
        return MonoidElement::paccioli(x.debit + y.debit, x.credit + y.credit);
    }
    case MonoidKind::Tuple: {
        const auto& xs = a.as<summary::Tuple>().items;
        const auto& ys = b.as<summary::Tuple>().items;
        std::vector<MonoidElement> out;
        out.reserve(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out.push_back(fuse_elements(xs[i], ys[i]));
        }
        return MonoidElement::tuple(std::move(out));
    }
    }
    throw Error(ErrorCode::KindMismatch, "unknown monoid kind");
}

MonoidElement fuse(const InformationMonoid& m, const MonoidElement& a, const MonoidElement& b)
{
    require_compatible(m.unit, a);
    require_compatible(m.unit, b);
    return m.fuse(a, b);
}

bool leq(const InformationMonoid& m, const MonoidElement& a, const MonoidElement& b)
{
    require_compatible(m.unit, a);
    require_compatible(m.unit, b);
    return m.order(a, b);
}

MonoidElement fuse_all(const InformationMonoid& m, const std::vector<MonoidElement>& items)
{
    MonoidElement acc = m.unit;
    for (const auto& item : items) {
        acc = fuse(m, acc, item);
    }
    return acc;
}

namespace monoids {

namespace {

InformationMonoid make(std::string name, MonoidElement unit,
    std::function<bool(const MonoidElement&, const MonoidElement&)> order, bool derived)
{
    return InformationMonoid { std::move(name), std::move(unit), fuse_elements, std::move(order), derived };
}

} // namespace

InformationMonoid count()
{
    return make("count", MonoidElement::count(0),
        [](const MonoidElement& a, const MonoidElement& b) {
            return a.as<summary::Count>().n >= b.as<summary::Count>().n;
        },
        true);
}

InformationMonoid sum(std::string unit)
{
    return make("sum[" + unit + "]", MonoidElement::sum(Decimal {}, unit),
        [](const MonoidElement& a, const MonoidElement& b) {
            return a.as<summary::Sum>().value <= b.as<summary::Sum>().value;
        },
        false);
}

InformationMonoid min(std::string unit)
{
    return make("min[" + unit + "]", MonoidElement::min_unit(unit),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::Min>().value;
            const auto& y = b.as<summary::Min>().value;
            if (!y) return true; // +inf is the top
            return x.has_value() && *x <= *y;
        },
        true);
}

InformationMonoid max(std::string unit)
{
    return make("max[" + unit + "]", MonoidElement::max_unit(unit),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::Max>().value;
            const auto& y = b.as<summary::Max>().value;
            if (!y) return true; // -inf is the top
            return x.has_value() && *x >= *y;
        },
        true);
}

InformationMonoid avg()
{
    return make("avg", MonoidElement::avg(Decimal {}, 0),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::AvgPair>();
            const auto& y = b.as<summary::AvgPair>();
            return x == y || x.count > y.count;
        },
        true);
}

InformationMonoid ids()
{
    return make("set", MonoidElement::ids(),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::SetOfIds>().ids;
            const auto& y = b.as<summary::SetOfIds>().ids;
            return std::includes(x.begin(), x.end(), y.begin(), y.end());
        },
        true);
}

InformationMonoid ids_by_inclusion()
{
    return make("identity", MonoidElement::ids(),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::SetOfIds>().ids;
            const auto& y = b.as<summary::SetOfIds>().ids;
            return std::includes(y.begin(), y.end(), x.begin(), x.end());
        },
        false);
}

InformationMonoid paccioli()
{
    return make("paccioli", MonoidElement::paccioli(Decimal {}, Decimal {}),
        [](const MonoidElement& a, const MonoidElement& b) {
            const auto& x = a.as<summary::Paccioli>();
            const auto& y = b.as<summary::Paccioli>();
            return x.debit <= y.debit && x.credit <= y.credit;
        },
        false);
}

InformationMonoid product(std::vector<InformationMonoid> parts)
{
    std::string name = "(";
    std::vector<MonoidElement> units;
    bool derived = true;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i != 0) name += " x ";
        name += parts[i].name;
        units.push_back(parts[i].unit);
        derived = derived && parts[i].derived_order;
    }
    name += ")";

    auto fuse_parts = [parts](const MonoidElement& a, const MonoidElement& b) {
        const auto& xs = a.as<summary::Tuple>().items;
        const auto& ys = b.as<summary::Tuple>().items;
        std::vector<MonoidElement> out;
        out.reserve(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) {
            out.push_back(fuse(parts[i], xs[i], ys[i]));
        }
        return MonoidElement::tuple(std::move(out));
    };
    auto order_parts = [parts](const MonoidElement& a, const MonoidElement& b) {
        const auto& xs = a.as<summary::Tuple>().items;
        const auto& ys = b.as<summary::Tuple>().items;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (!leq(parts[i], xs[i], ys[i])) return false;
        }
        return true;
    };
    return InformationMonoid { std::move(name), MonoidElement::tuple(std::move(units)), std::move(fuse_parts),
        std::move(order_parts), derived };
}

} // namespace monoids

} // namespace dspace
