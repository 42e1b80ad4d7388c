#include "dspace/ops.hpp"

#include "dspace/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace dspace {

namespace {

Relation like(const Relation& rel)
{
    return Relation(rel.schema);
}

void append_irrelevant(Record& into, const Record& from)
{
    into.irrelevant.insert(into.irrelevant.end(), from.irrelevant.begin(), from.irrelevant.end());
}

} // namespace

void throw_missing_tag()
{
    throw Error(ErrorCode::MissingTag, "disjoint function product applied to an untagged record");
}

PartitionResult partition(const Relation& rel, const Predicate& pred)
{
    PartitionResult out { like(rel), like(rel), {} };
    for (const auto& r : rel.rows) {
        switch (evaluate(pred, r.relevant)) {
        case Truth::True: out.accepted.rows.push_back(r); break;
        case Truth::False:
            out.rejected.rows.push_back(r);
            out.reasons.emplace_back("predicate false");
            break;
        case Truth::Unknown:
            out.rejected.rows.push_back(r);
            out.reasons.emplace_back("predicate unknown on missing value");
            break;
        }
    }
    return out;
}

PartitionResult partition(const Relation& rel, const std::function<bool(const Record&)>& pred)
{
    PartitionResult out { like(rel), like(rel), {} };
    for (const auto& r : rel.rows) {
        if (pred(r)) {
            out.accepted.rows.push_back(r);
        } else {
            out.rejected.rows.push_back(r);
            out.reasons.emplace_back("predicate false");
        }
    }
    return out;
}

PartitionResult null_partition(const Relation& rel, const std::vector<std::string>& columns)
{
    for (const auto& c : columns) {
        if (!rel.schema.has(c)) {
            throw Error(ErrorCode::UnknownField, "null partition on unknown column '" + c + "'");
        }
    }
    PartitionResult out { like(rel), like(rel), {} };
    for (const auto& r : rel.rows) {
        auto missing = std::find_if(columns.begin(), columns.end(), [&](const std::string& c) {
            const FieldValue* v = r.find(c);
            return v == nullptr || v->is_missing();
        });
        if (missing == columns.end()) {
            out.accepted.rows.push_back(r);
        } else {
            out.rejected.rows.push_back(r);
            out.reasons.push_back("missing " + *missing);
        }
    }
    return out;
}

PartitionResult dedup_partition(const Relation& rel)
{
    PartitionResult out { like(rel), like(rel), {} };
    std::set<Fields> seen;
    for (const auto& r : rel.rows) {
        if (seen.insert(r.relevant).second) {
            out.accepted.rows.push_back(r);
        } else {
            out.rejected.rows.push_back(r);
            out.reasons.emplace_back("duplicate");
        }
    }
    return out;
}

Relation dedup_merge(const Relation& rel)
{
    Relation out = like(rel);
    std::map<Fields, std::size_t> index;
    for (const auto& r : rel.rows) {
        auto [it, fresh] = index.try_emplace(r.relevant, out.rows.size());
        if (fresh) {
            out.rows.push_back(r);
            continue;
        }
        Record& kept = out.rows[it->second];
        kept.pids = merge_pids(kept.pids, r.pids);
        append_irrelevant(kept, r);
    }
    return out;
}

SetPartition set_partition(const Relation& left, const Relation& right)
{
    std::set<Fields> left_rows;
    std::set<Fields> right_rows;
    for (const auto& r : left.rows) left_rows.insert(r.relevant);
    for (const auto& r : right.rows) right_rows.insert(r.relevant);

    SetPartition out { like(left), like(left), like(right), like(right) };
    for (const auto& r : left.rows) {
        (right_rows.contains(r.relevant) ? out.left_shared : out.left_only).rows.push_back(r);
    }
    for (const auto& r : right.rows) {
        (left_rows.contains(r.relevant) ? out.right_shared : out.right_only).rows.push_back(r);
    }
    return out;
}

namespace {

Relation tag_all(Relation rel, Side side, const std::string& label)
{
    for (auto& r : rel.rows) {
        r.tags.push_back(PathTag { side, label });
    }
    return rel;
}

} // namespace

Relation tagged_union(const Relation& r1, const Relation& r2, const std::string& label)
{
    Relation out(Schema::tagged_sum(r1.schema, r2.schema));
    out.rows.reserve(r1.size() + r2.size());
    for (auto& r : tag_all(r1, Side::Inl, label).rows) out.rows.push_back(std::move(r));
    for (auto& r : tag_all(r2, Side::Inr, label).rows) out.rows.push_back(std::move(r));
    return out;
}

Stream tagged_union(const Stream& s1, const Stream& s2, const std::string& label)
{
    Relation errors(error_schema());
    for (auto& r : tag_all(s1.errors, Side::Inl, label).rows) errors.rows.push_back(std::move(r));
    for (auto& r : tag_all(s2.errors, Side::Inr, label).rows) errors.rows.push_back(std::move(r));
    return Stream(tagged_union(s1.correct, s2.correct, label), std::move(errors));
}

std::pair<Relation, Relation> untag(const Relation& rel)
{
    const auto& summands = rel.schema.summands();
    Relation left(summands.size() == 2 ? summands[0] : rel.schema);
    Relation right(summands.size() == 2 ? summands[1] : rel.schema);
    for (const auto& r : rel.rows) {
        if (r.tags.empty()) {
            throw Error(ErrorCode::UntagMissing, "record without a tag cannot be untagged");
        }
        Record plain = r;
        const Side side = plain.tags.back().side;
        plain.tags.pop_back();
        (side == Side::Inl ? left : right).rows.push_back(std::move(plain));
    }
    return { std::move(left), std::move(right) };
}

std::pair<Relation, Relation> split_by_origin(const Relation& rel, const std::function<Side(const Record&)>& origin)
{
    Relation left = like(rel);
    Relation right = like(rel);
    for (const auto& r : rel.rows) {
        (origin(r) == Side::Inl ? left : right).rows.push_back(r);
    }
    return { std::move(left), std::move(right) };
}

Relation strip_tags(const Relation& rel)
{
    Relation out(rel.schema.without_summands());
    out.rows.reserve(rel.size());
    for (const auto& r : rel.rows) {
        if (r.tags.empty()) {
            throw Error(ErrorCode::UntagMissing, "record without a tag cannot be stripped");
        }
        Record plain = r;
        plain.tags.pop_back();
        out.rows.push_back(std::move(plain));
    }
    return out;
}

namespace {

Record combine(const Record& x, const Record& y)
{
    Record out = x;
    out.pids = merge_pids(x.pids, y.pids);
    for (const auto& [name, value] : y.relevant) {
        out.relevant.insert_or_assign(name, value);
    }
    append_irrelevant(out, y);
    return out;
}

Schema joined_schema(const Schema& a, const Schema& b, const std::set<std::string>& shared_ok)
{
    std::vector<Column> cols = a.columns();
    for (const auto& c : b.columns()) {
        if (a.has(c.name)) {
            if (!shared_ok.contains(c.name)) {
                throw Error(ErrorCode::SchemaMismatch, "joined relations both carry field '" + c.name + "'");
            }
            continue;
        }
        cols.push_back(c);
    }
    return Schema(std::move(cols), a.open() || b.open());
}

} // namespace

JoinResult outer_join(const Relation& r1, const Relation& r2, const JoinCondition& cond)
{
    std::set<std::string> natural;
    for (const auto& [l, r] : cond.on) {
        if (!r1.schema.has(l)) {
            throw Error(ErrorCode::JoinColumnMissing, "left relation has no join column '" + l + "'");
        }
        if (!r2.schema.has(r)) {
            throw Error(ErrorCode::JoinColumnMissing, "right relation has no join column '" + r + "'");
        }
        if (l == r) natural.insert(l);
    }

    JoinResult out { like(r1), Relation(joined_schema(r1.schema, r2.schema, natural)), like(r2) };
    std::vector<bool> right_used(r2.size(), false);

    auto matches = [&](const Record& x, const Record& y) {
        for (const auto& [l, r] : cond.on) {
            const FieldValue& a = x.at(l);
            const FieldValue& b = y.at(r);
            if (a.is_missing() || b.is_missing()) return false;
            auto c = compare_values(a, b);
            if (!c || *c != 0) return false;
        }
        return !cond.extra || cond.extra(x, y);
    };

    for (const auto& x : r1.rows) {
        bool matched = false;
        for (std::size_t j = 0; j < r2.rows.size(); ++j) {
            if (matches(x, r2.rows[j])) {
                matched = true;
                right_used[j] = true;
                out.inner.rows.push_back(combine(x, r2.rows[j]));
            }
        }
        if (!matched) out.left.rows.push_back(x);
    }
    for (std::size_t j = 0; j < r2.rows.size(); ++j) {
        if (!right_used[j]) out.right.rows.push_back(r2.rows[j]);
    }
    return out;
}

Relation cartesian(const Relation& r1, const Relation& r2)
{
    Relation out(joined_schema(r1.schema, r2.schema, {}));
    out.rows.reserve(r1.size() * r2.size());
    for (const auto& x : r1.rows) {
        for (const auto& y : r2.rows) {
            out.rows.push_back(combine(x, y));
        }
    }
    return out;
}

Relation lossless_project(const Relation& rel, const std::vector<std::string>& keep)
{
    std::set<std::string, std::less<>> kept(keep.begin(), keep.end());
    for (const auto& k : kept) {
        if (!rel.schema.has(k)) {
            throw Error(ErrorCode::UnknownField, "cannot project unknown field '" + k + "'");
        }
    }
    std::vector<Column> cols;
    for (const auto& c : rel.schema.columns()) {
        if (kept.contains(c.name)) cols.push_back(c);
    }
    Relation out(Schema(std::move(cols)));
    out.rows.reserve(rel.size());
    for (const auto& r : rel.rows) {
        Record p = r;
        p.relevant.clear();
        IrrelevantRow dropped { r.pids, {} };
        for (const auto& [name, value] : r.relevant) {
            if (kept.contains(name)) {
                p.relevant.emplace(name, value);
            } else {
                dropped.fields.emplace(name, value);
            }
        }
        if (!dropped.fields.empty()) {
            p.irrelevant.push_back(std::move(dropped));
        }
        out.rows.push_back(std::move(p));
    }
    return out;
}

Relation rename(const Relation& rel, const std::vector<std::pair<std::string, std::string>>& mapping)
{
    std::map<std::string, std::string, std::less<>> m;
    std::set<std::string> targets;
    for (const auto& [from, to] : mapping) {
        if (!rel.schema.has(from)) {
            throw Error(ErrorCode::UnknownField, "cannot rename unknown field '" + from + "'");
        }
        if (!m.emplace(from, to).second || !targets.insert(to).second) {
            throw Error(ErrorCode::CollisionAfterRename, "rename mapping is not injective at '" + to + "'");
        }
    }
    std::vector<Column> cols;
    std::set<std::string> names;
    for (const auto& c : rel.schema.columns()) {
        Column renamed = c;
        if (auto it = m.find(c.name); it != m.end()) renamed.name = it->second;
        if (!names.insert(renamed.name).second) {
            throw Error(ErrorCode::CollisionAfterRename, "rename produces duplicate field '" + renamed.name + "'");
        }
        cols.push_back(std::move(renamed));
    }
    Relation out(Schema(std::move(cols), rel.schema.open()));
    out.rows.reserve(rel.size());
    for (const auto& r : rel.rows) {
        Record n = r;
        n.relevant.clear();
        for (const auto& [name, value] : r.relevant) {
            auto it = m.find(name);
            n.relevant.emplace(it == m.end() ? name : it->second, value);
        }
        out.rows.push_back(std::move(n));
    }
    return out;
}

Stream fmap(const Stream& stream, const Enrichment& fn, const std::vector<Column>& new_fields)
{
    std::vector<Column> cols = stream.correct.schema.columns();
    for (const auto& c : new_fields) {
        if (stream.correct.schema.has(c.name)) {
            throw Error(ErrorCode::SchemaMismatch, "enrichment would overwrite field '" + c.name + "'");
        }
        cols.push_back(c);
    }
    Relation out(Schema(std::move(cols), stream.correct.schema.open()));
    out.rows.reserve(stream.correct.size());
    for (const auto& r : stream.correct.rows) {
        Fields added;
        try {
            added = fn(r);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::FnNotTotal, std::string("enrichment failed: ") + e.what());
        }
        if (added.size() != new_fields.size()) {
            throw Error(ErrorCode::FnNotTotal, "enrichment did not produce every declared field");
        }
        Record n = r;
        for (const auto& c : new_fields) {
            auto it = added.find(c.name);
            if (it == added.end()) {
                throw Error(ErrorCode::FnNotTotal, "enrichment produced no value for '" + c.name + "'");
            }
            const auto type = it->second.type();
            if (type && *type != c.type) {
                throw Error(ErrorCode::SchemaMismatch, "enrichment value for '" + c.name + "' has the wrong type");
            }
            n.relevant.insert_or_assign(c.name, it->second);
        }
        out.rows.push_back(std::move(n));
    }
    return Stream(std::move(out), stream.errors);
}

Stream fmap(const Stream& stream, const std::string& name, const ValueExpr& expr)
{
    const auto type = result_type(expr, stream.correct.schema);
    if (!type) {
        throw Error(ErrorCode::TypeError, "expression " + expr.to_string() + " does not type-check");
    }
    return fmap(
        stream, [&](const Record& r) { return Fields { { name, evaluate(expr, r.relevant) } }; },
        { Column { name, *type, {} } });
}

Stream emap(const Stream& stream, const Enrichment& fn)
{
    Relation errors = stream.errors;
    for (auto& r : errors.rows) {
        Fields added = fn(r);
        for (auto& [name, value] : added) {
            if (r.relevant.contains(name) || name == kErrorStage || name == kErrorReason) {
                throw Error(ErrorCode::ForbiddenFieldWrite, "error enrichment may not write '" + name + "'");
            }
            r.notes.insert_or_assign(name, std::move(value));
        }
    }
    return Stream(stream.correct, std::move(errors));
}

Side side_of(const TotalResult& r)
{
    return std::holds_alternative<Defined>(r) ? Side::Inr : Side::Inl;
}

std::function<TotalResult(const Record&)> totalize(PartialFn fn, std::function<bool(const Record&)> domain)
{
    return [fn = std::move(fn), domain = std::move(domain)](const Record& r) -> TotalResult {
        if (!domain(r)) {
            return Passthrough { r };
        }
        FieldValue v;
        try {
            v = fn(r);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::DomainPredUnsound, std::string("partial function failed inside its domain: ") + e.what());
        }
        if (v.is_missing()) {
            throw Error(ErrorCode::DomainPredUnsound, "partial function returned a missing value inside its domain");
        }
        return Defined { std::move(v) };
    };
}

std::pair<Relation, Relation> totalize_relation(const Relation& rel, const Column& name, const PartialFn& fn,
    const std::function<bool(const Record&)>& domain)
{
    if (rel.schema.has(name.name)) {
        throw Error(ErrorCode::SchemaMismatch, "totalized value would overwrite field '" + name.name + "'");
    }
    auto total = totalize(fn, domain);
    std::vector<Column> cols = rel.schema.columns();
    cols.push_back(name);
    Relation defined(Schema(std::move(cols), rel.schema.open()));
    Relation passthrough = like(rel);
    for (const auto& r : rel.rows) {
        TotalResult t = total(r);
        if (auto* d = std::get_if<Defined>(&t)) {
            Record n = r;
            n.relevant.insert_or_assign(name.name, std::move(d->value));
            defined.rows.push_back(std::move(n));
        } else {
            passthrough.rows.push_back(std::move(std::get<Passthrough>(t).record));
        }
    }
    return { std::move(defined), std::move(passthrough) };
}

std::pair<Relation, Relation> totalize_expr(const Relation& rel, const std::string& name, const ValueExpr& expr)
{
    const auto type = result_type(expr, rel.schema);
    if (!type) {
        throw Error(ErrorCode::TypeError, "expression " + expr.to_string() + " does not type-check");
    }
    std::set<std::string> operands;
    expr.collect_fields(operands);
    auto domain = [operands](const Record& r) {
        return std::all_of(operands.begin(), operands.end(), [&](const std::string& f) { return !r.at(f).is_missing(); });
    };
    auto fn = [expr](const Record& r) { return evaluate(expr, r.relevant); };
    return totalize_relation(rel, Column { name, *type, {} }, fn, domain);
}

std::string_view to_string(AggKind kind)
{
    switch (kind) {
    case AggKind::Count: return "count";
    case AggKind::Sum: return "sum";
    case AggKind::Min: return "min";
    case AggKind::Max: return "max";
    case AggKind::Avg: return "avg";
    case AggKind::Ids: return "ids";
    }
    return "sum";
}

std::optional<AggKind> parse_agg_kind(std::string_view text)
{
    for (AggKind k : { AggKind::Count, AggKind::Sum, AggKind::Min, AggKind::Max, AggKind::Avg, AggKind::Ids }) {
        if (to_string(k) == text) return k;
    }
    if (text == "set") return AggKind::Ids;
    return std::nullopt;
}

std::string AggSpec::output_name() const
{
    return as.empty() ? std::string(to_string(kind)) + "_" + field : as;
}

InformationMonoid agg_monoid(AggKind kind, const std::string& unit)
{
    switch (kind) {
    case AggKind::Count: return monoids::count();
    case AggKind::Sum: return monoids::sum(unit);
    case AggKind::Min: return monoids::min(unit);
    case AggKind::Max: return monoids::max(unit);
    case AggKind::Avg: return monoids::avg();
    case AggKind::Ids: return monoids::ids();
    }
    return monoids::count();
}

MonoidElement agg_element(AggKind kind, const FieldValue& value, const std::string& unit)
{
    const auto n = value.numeric();
    switch (kind) {
    case AggKind::Count: return MonoidElement::count(value.is_missing() ? 0 : 1);
    case AggKind::Sum: return MonoidElement::sum(n.value_or(Decimal {}), unit);
    case AggKind::Min: return n ? MonoidElement::min(*n, unit) : MonoidElement::min_unit(unit);
    case AggKind::Max: return n ? MonoidElement::max(*n, unit) : MonoidElement::max_unit(unit);
    case AggKind::Avg: return n ? MonoidElement::avg(*n, 1) : MonoidElement::avg(Decimal {}, 0);
    case AggKind::Ids: return value.is_missing() ? MonoidElement::ids() : MonoidElement::ids({ value.to_string() });
    }
    return MonoidElement::count(0);
}

namespace {

FieldValue typed_number(Decimal v, ValueType type, const std::string& unit)
{
    switch (type) {
    case ValueType::Integer: return FieldValue(v.truncated());
    case ValueType::Quantity: return unit.empty() ? FieldValue::missing("no unit") : FieldValue::quantity(v, unit);
    default: return FieldValue(v);
    }
}

ValueType spec_type(AggKind kind, ValueType column)
{
    switch (kind) {
    case AggKind::Count: return ValueType::Integer;
    case AggKind::Ids: return ValueType::Text;
    case AggKind::Avg: return column == ValueType::Quantity ? ValueType::Quantity : ValueType::Decimal;
    default: return column;
    }
}

} // namespace

FieldValue present_element(AggKind kind, const MonoidElement& m, ValueType column_type, const std::string& unit)
{
    switch (kind) {
    case AggKind::Count: return FieldValue(m.as<summary::Count>().n);
    case AggKind::Sum: return typed_number(m.as<summary::Sum>().value, column_type, unit);
    case AggKind::Min: {
        const auto& v = m.as<summary::Min>().value;
        return v ? typed_number(*v, column_type, unit) : FieldValue::missing("empty");
    }
    case AggKind::Max: {
        const auto& v = m.as<summary::Max>().value;
        return v ? typed_number(*v, column_type, unit) : FieldValue::missing("empty");
    }
    case AggKind::Avg: {
        const auto& a = m.as<summary::AvgPair>();
        if (a.count == 0) return FieldValue::missing("empty");
        const Decimal mean = a.sum.divided_by(a.count);
        return column_type == ValueType::Quantity ? typed_number(mean, column_type, unit) : FieldValue(mean);
    }
    case AggKind::Ids: return FieldValue(m.to_string());
    }
    return FieldValue::missing("empty");
}

Schema aggregate_schema(const Schema& input, const std::vector<std::string>& group_by, const std::vector<AggSpec>& specs)
{
    std::vector<Column> cols;
    for (const auto& g : group_by) {
        const Column* c = input.find(g);
        if (c == nullptr) {
            throw Error(ErrorCode::UnknownField, "cannot group by unknown field '" + g + "'");
        }
        cols.push_back(*c);
    }
    for (const auto& s : specs) {
        const Column* c = input.find(s.field);
        if (c == nullptr) {
            throw Error(ErrorCode::UnknownField, "cannot aggregate unknown field '" + s.field + "'");
        }
        const bool numeric_kind = s.kind == AggKind::Sum || s.kind == AggKind::Min || s.kind == AggKind::Max
            || s.kind == AggKind::Avg;
        if (numeric_kind && c->type == ValueType::Text) {
            throw Error(ErrorCode::KindMismatch,
                std::string(to_string(s.kind)) + " needs a numeric field, '" + s.field + "' is text");
        }
        cols.push_back(Column { s.output_name(), spec_type(s.kind, c->type), {} });
    }
    cols.push_back(Column { kCountColumn, ValueType::Integer, {} });
    return Schema(std::move(cols));
}

Relation aggregate(const Relation& rel, const std::vector<std::string>& group_by, const std::vector<AggSpec>& specs)
{
    Relation out(aggregate_schema(rel.schema, group_by, specs));
    const std::set<std::string, std::less<>> key_fields(group_by.begin(), group_by.end());

    std::vector<std::size_t> unit_specs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (rel.schema.find(specs[i].field)->type == ValueType::Quantity && specs[i].kind != AggKind::Count
            && specs[i].kind != AggKind::Ids) {
            unit_specs.push_back(i);
        }
    }

    struct Group {
        Fields key;
        std::vector<std::string> units;
        std::vector<MonoidElement> acc;
        std::vector<InformationMonoid> monoids;
        Record summary;
        std::int64_t count = 0;
    };
    std::vector<Group> groups;
    std::map<std::pair<Fields, std::vector<std::string>>, std::size_t> index;

    auto unit_of_spec = [&](const Group& g, std::size_t spec) -> std::string {
        auto it = std::find(unit_specs.begin(), unit_specs.end(), spec);
        return it == unit_specs.end() ? std::string() : g.units[static_cast<std::size_t>(it - unit_specs.begin())];
    };

    auto open_group = [&](Fields key, std::vector<std::string> units) -> Group& {
        Group g;
        g.key = std::move(key);
        g.units = std::move(units);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            g.monoids.push_back(agg_monoid(specs[i].kind, unit_of_spec(g, i)));
            g.acc.push_back(g.monoids.back().unit);
        }
        groups.push_back(std::move(g));
        return groups.back();
    };

    for (const auto& r : rel.rows) {
        Fields key;
        for (const auto& g : group_by) key.emplace(g, r.at(g));
        std::vector<std::string> units;
        for (std::size_t i : unit_specs) units.push_back(r.at(specs[i].field).unit());

        auto [it, fresh] = index.try_emplace({ key, units }, groups.size());
        Group& g = fresh ? open_group(std::move(key), std::move(units)) : groups[it->second];
        for (std::size_t i = 0; i < specs.size(); ++i) {
            g.acc[i] = fuse(g.monoids[i], g.acc[i], agg_element(specs[i].kind, r.at(specs[i].field), unit_of_spec(g, i)));
        }
        ++g.count;
        g.summary.pids = merge_pids(g.summary.pids, r.pids);
        IrrelevantRow rest { r.pids, {} };
        for (const auto& [name, value] : r.relevant) {
            if (!key_fields.contains(name)) rest.fields.emplace(name, value);
        }
        if (!rest.fields.empty()) g.summary.irrelevant.push_back(std::move(rest));
        append_irrelevant(g.summary, r);
    }

    if (groups.empty() && group_by.empty()) {
        open_group({}, std::vector<std::string>(unit_specs.size()));
    }

    for (auto& g : groups) {
        Record r = std::move(g.summary);
        r.relevant = g.key;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const ValueType column = rel.schema.find(specs[i].field)->type;
            r.relevant.insert_or_assign(
                specs[i].output_name(), present_element(specs[i].kind, g.acc[i], column, unit_of_spec(g, i)));
        }
        r.relevant.insert_or_assign(kCountColumn, FieldValue(g.count));
        out.rows.push_back(std::move(r));
    }
    return out;
}

PidSet drill_down(const Relation& summary, const Fields& key)
{
    PidSet out;
    bool found = false;
    for (const auto& r : summary.rows) {
        const bool match = std::all_of(key.begin(), key.end(), [&](const auto& kv) {
            const FieldValue* v = r.find(kv.first);
            return v != nullptr && *v == kv.second;
        });
        if (match) {
            found = true;
            out.insert(r.pids.begin(), r.pids.end());
        }
    }
    if (!found) {
        throw Error(ErrorCode::UnknownGroup, "no summary group matches " + to_string(key));
    }
    return out;
}

} // namespace dspace
