#include "dspace/space.hpp"

#include "dspace/error.hpp"

#include <map>

namespace dspace {

namespace {

void require_field(const Schema& schema, const std::string& field)
{
    if (!schema.has(field)) {
        throw Error(ErrorCode::SchemaMismatch, "carrier has no field '" + field + "'");
    }
}

std::optional<Decimal> numeric_of(const Record& r, const std::string& field)
{
    const FieldValue* v = r.find(field);
    return v ? v->numeric() : std::nullopt;
}

} // namespace

bool structurally_equal(const DataSpaceDescriptor& a, const DataSpaceDescriptor& b)
{
    if (a.name != b.name || !(a.schema == b.schema) || !(a.monoid.unit == b.monoid.unit)
        || a.monoid.name != b.monoid.name || a.monoid.derived_order != b.monoid.derived_order
        || a.product != b.product || a.components.size() != b.components.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.components.size(); ++i) {
        if (!structurally_equal(a.components[i], b.components[i])) return false;
    }
    return true;
}

MonoidElement measure_records(const DataSpaceDescriptor& space, const std::vector<const Record*>& records)
{
    MonoidElement acc = space.monoid.unit;
    for (const Record* r : records) {
        acc = fuse(space.monoid, acc, space.per_record_measure(*r));
    }
    return acc;
}

MonoidElement measure(const DataSpaceDescriptor& space, const Relation& rel)
{
    if (!rel.schema.covers(space.schema)) {
        throw Error(ErrorCode::SchemaMismatch, "relation does not conform to carrier of space '" + space.name + "'");
    }
    std::vector<const Record*> records;
    records.reserve(rel.rows.size());
    for (const auto& r : rel.rows) records.push_back(&r);
    return measure_records(space, records);
}

bool leq(const DataSpaceDescriptor& space, const MonoidElement& a, const MonoidElement& b)
{
    return leq(space.monoid, a, b);
}

MonoidElement fuse(const DataSpaceDescriptor& space, const MonoidElement& a, const MonoidElement& b)
{
    return fuse(space.monoid, a, b);
}

std::string record_token(const Record& r)
{
    std::string out = "#";
    for (std::size_t i = 0; i < r.pids.size(); ++i) {
        if (i != 0) out += "+";
        out += std::to_string(r.pids[i]);
    }
    return out + to_string(r.relevant);
}

DataSpaceDescriptor identity_space(const Schema& schema)
{
    return DataSpaceDescriptor { "identity", schema, monoids::ids_by_inclusion(),
        [](const Record& r) { return MonoidElement::ids({ record_token(r) }); } };
}

DataSpaceDescriptor count_space(const Schema& schema)
{
    return DataSpaceDescriptor { "count", schema, monoids::count(),
        [](const Record&) { return MonoidElement::count(1); } };
}

std::string unit_label(const Record& r, const std::string& field, const std::string& unit_field)
{
    if (const FieldValue* v = r.find(field); v && v->is_quantity()) {
        return v->unit();
    }
    if (unit_field.empty()) {
        return {};
    }
    const FieldValue* u = r.find(unit_field);
    if (u == nullptr || u->is_missing()) {
        return "(blank)";
    }
    return u->to_string();
}

DataSpaceDescriptor sum_space(
    const Schema& schema, const std::string& field, const std::string& unit, const std::string& unit_field)
{
    require_field(schema, field);
    if (!unit_field.empty()) require_field(schema, unit_field);
    return DataSpaceDescriptor { "sum(" + field + ")[" + unit + "]", schema, monoids::sum(unit),
        [field, unit, unit_field](const Record& r) {
            auto v = numeric_of(r, field);
            if (!v || unit_label(r, field, unit_field) != unit) {
                return MonoidElement::sum(Decimal {}, unit);
            }
            return MonoidElement::sum(*v, unit);
        } };
}

DataSpaceDescriptor min_space(const Schema& schema, const std::string& field, const std::string& unit)
{
    require_field(schema, field);
    return DataSpaceDescriptor { "min(" + field + ")", schema, monoids::min(unit), [field, unit](const Record& r) {
                                    auto v = numeric_of(r, field);
                                    return v ? MonoidElement::min(*v, unit) : MonoidElement::min_unit(unit);
                                } };
}

DataSpaceDescriptor max_space(const Schema& schema, const std::string& field, const std::string& unit)
{
    require_field(schema, field);
    return DataSpaceDescriptor { "max(" + field + ")", schema, monoids::max(unit), [field, unit](const Record& r) {
                                    auto v = numeric_of(r, field);
                                    return v ? MonoidElement::max(*v, unit) : MonoidElement::max_unit(unit);
                                } };
}

DataSpaceDescriptor avg_space(const Schema& schema, const std::string& field)
{
    require_field(schema, field);
    return DataSpaceDescriptor { "avg(" + field + ")", schema, monoids::avg(), [field](const Record& r) {
                                    auto v = numeric_of(r, field);
                                    return v ? MonoidElement::avg(*v, 1) : MonoidElement::avg(Decimal {}, 0);
                                } };
}

DataSpaceDescriptor ids_space(const Schema& schema, const std::string& field)
{
    require_field(schema, field);
    return DataSpaceDescriptor { "ids(" + field + ")", schema, monoids::ids(), [field](const Record& r) {
                                    const FieldValue* v = r.find(field);
                                    if (v == nullptr || v->is_missing()) return MonoidElement::ids();
                                    return MonoidElement::ids({ v->to_string() });
                                } };
}

DataSpaceDescriptor paccioli_space(const Schema& schema, const std::string& field)
{
    require_field(schema, field);
    return DataSpaceDescriptor { "paccioli(" + field + ")", schema, monoids::paccioli(), [field](const Record& r) {
                                    auto v = numeric_of(r, field);
                                    return MonoidElement::paccioli_of(v.value_or(Decimal {}));
                                } };
}

DataSpaceDescriptor sum_per_unit_space(const Relation& rel, const std::string& field, const std::string& unit_field)
{
    std::set<std::string> units;
    for (const auto& r : rel.rows) {
        units.insert(unit_label(r, field, unit_field));
    }
    std::vector<DataSpaceDescriptor> parts;
    for (const auto& u : units) {
        parts.push_back(sum_space(rel.schema, field, u, unit_field));
    }
    return parallel_product(parts, rel.schema);
}

namespace {

DataSpaceDescriptor combine(std::string name, Schema carrier, ProductKind kind, std::vector<DataSpaceDescriptor> parts)
{
    std::vector<InformationMonoid> monoid_parts;
    std::vector<std::function<MonoidElement(const Record&)>> measures;
    for (const auto& p : parts) {
        monoid_parts.push_back(p.monoid);
        measures.push_back(p.per_record_measure);
    }
    DataSpaceDescriptor out;
    out.name = std::move(name);
    out.schema = std::move(carrier);
    out.monoid = monoids::product(std::move(monoid_parts));
    out.per_record_measure = [measures](const Record& r) {
        std::vector<MonoidElement> items;
        items.reserve(measures.size());
        for (const auto& m : measures) items.push_back(m(r));
        return MonoidElement::tuple(std::move(items));
    };
    out.product = kind;
    out.components = std::move(parts);
    return out;
}

} // namespace

DataSpaceDescriptor disjoint_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2)
{
    std::vector<Column> cols = d1.schema.columns();
    for (const auto& c : d2.schema.columns()) {
        if (d1.schema.has(c.name)) {
            throw Error(ErrorCode::SchemaMismatch, "disjoint product carriers share field '" + c.name + "'");
        }
        cols.push_back(c);
    }
    return combine("(" + d1.name + " (+) " + d2.name + ")", Schema(std::move(cols)), ProductKind::Disjoint, { d1, d2 });
}

DataSpaceDescriptor parallel_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2)
{
    if (!(d1.schema == d2.schema)) {
        throw Error(ErrorCode::SchemaMismatch, "parallel product needs one shared carrier");
    }
    return combine("(" + d1.name + " || " + d2.name + ")", d1.schema, ProductKind::Parallel, { d1, d2 });
}

DataSpaceDescriptor parallel_product(const std::vector<DataSpaceDescriptor>& parts, const Schema& carrier)
{
    std::string name = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!(parts[i].schema == carrier)) {
            throw Error(ErrorCode::SchemaMismatch, "parallel product needs one shared carrier");
        }
        if (i != 0) name += " || ";
        name += parts[i].name;
    }
    return combine(name + ")", carrier, ProductKind::Parallel, parts);
}

DataSpaceDescriptor recons_product(const DataSpaceDescriptor& d1, const DataSpaceDescriptor& d2)
{
    if (!(d1.schema == d2.schema)) {
        throw Error(ErrorCode::SchemaMismatch, "reconstruction product needs one shared carrier");
    }
    if (d1.monoid.name == d2.monoid.name && d1.name == d2.name) {
        throw Error(ErrorCode::SchemaMismatch, "reconstruction product needs distinct information carriers");
    }
    return combine("(" + d1.name + " (x) " + d2.name + ")", d1.schema, ProductKind::Reconstruction, { d1, d2 });
}

DataSpaceDescriptor project_info(const DataSpaceDescriptor& space, InfoSide side)
{
    if (space.product == ProductKind::None || space.components.size() != 2) {
        throw Error(ErrorCode::SchemaMismatch, "space '" + space.name + "' is not a binary product");
    }
    return space.components[side == InfoSide::Left ? 0 : 1];
}

} // namespace dspace
