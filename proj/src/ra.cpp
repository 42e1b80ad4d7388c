#include "dspace/ra.hpp"

#include "dspace/error.hpp"

#include <algorithm>
#include <set>

namespace dspace {

namespace {

struct KindName {
    RAExpr::Kind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    { RAExpr::Kind::Base, "base" },
    { RAExpr::Kind::Project, "project" },
    { RAExpr::Kind::Select, "select" },
    { RAExpr::Kind::Rename, "rename" },
    { RAExpr::Kind::CrossProduct, "cross" },
    { RAExpr::Kind::NaturalJoin, "natural_join" },
    { RAExpr::Kind::OuterJoin, "outer_join" },
    { RAExpr::Kind::Union, "union" },
    { RAExpr::Kind::UnionAll, "union_all" },
    { RAExpr::Kind::Minus, "minus" },
    { RAExpr::Kind::Intersect, "intersect" },
    { RAExpr::Kind::Aggregate, "aggregate" },
    { RAExpr::Kind::Map, "map" },
};

RAExpr node(RAExpr::Kind kind, std::vector<RAExpr> args)
{
    RAExpr e;
    e.kind = kind;
    e.args = std::move(args);
    return e;
}

} // namespace

std::string_view to_string(RAExpr::Kind kind)
{
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "base";
}

std::optional<RAExpr::Kind> parse_ra_kind(std::string_view text)
{
    for (const auto& k : kKindNames) {
        if (text == k.name) return k.kind;
    }
    return std::nullopt;
}

RAExpr RAExpr::base(std::string name)
{
    RAExpr e;
    e.name = std::move(name);
    return e;
}

RAExpr RAExpr::project(RAExpr in, std::vector<std::string> fields)
{
    RAExpr e = node(Kind::Project, { std::move(in) });
    e.fields = std::move(fields);
    return e;
}

RAExpr RAExpr::select(RAExpr in, Predicate p)
{
    RAExpr e = node(Kind::Select, { std::move(in) });
    e.predicate = std::move(p);
    return e;
}

RAExpr RAExpr::rename(RAExpr in, std::vector<std::pair<std::string, std::string>> mapping)
{
    RAExpr e = node(Kind::Rename, { std::move(in) });
    e.pairs = std::move(mapping);
    return e;
}

RAExpr RAExpr::cross(RAExpr l, RAExpr r) { return node(Kind::CrossProduct, { std::move(l), std::move(r) }); }
RAExpr RAExpr::natural_join(RAExpr l, RAExpr r) { return node(Kind::NaturalJoin, { std::move(l), std::move(r) }); }

RAExpr RAExpr::outer_join(RAExpr l, RAExpr r, std::vector<std::pair<std::string, std::string>> on)
{
    RAExpr e = node(Kind::OuterJoin, { std::move(l), std::move(r) });
    e.pairs = std::move(on);
    return e;
}

RAExpr RAExpr::set_union(RAExpr l, RAExpr r) { return node(Kind::Union, { std::move(l), std::move(r) }); }
RAExpr RAExpr::union_all(RAExpr l, RAExpr r) { return node(Kind::UnionAll, { std::move(l), std::move(r) }); }
RAExpr RAExpr::minus(RAExpr l, RAExpr r) { return node(Kind::Minus, { std::move(l), std::move(r) }); }
RAExpr RAExpr::intersect(RAExpr l, RAExpr r) { return node(Kind::Intersect, { std::move(l), std::move(r) }); }

RAExpr RAExpr::aggregate(RAExpr in, std::vector<std::string> group_by, std::vector<AggSpec> specs)
{
    RAExpr e = node(Kind::Aggregate, { std::move(in) });
    e.group_by = std::move(group_by);
    e.specs = std::move(specs);
    return e;
}

RAExpr RAExpr::map(RAExpr in, std::vector<std::pair<std::string, ValueExpr>> exprs)
{
    RAExpr e = node(Kind::Map, { std::move(in) });
    e.exprs = std::move(exprs);
    return e;
}

std::size_t RAExpr::depth() const
{
    std::size_t d = 0;
    for (const auto& a : args) d = std::max(d, a.depth());
    return d + 1;
}

std::string RAExpr::to_string() const
{
    auto list = [](const std::vector<std::string>& xs) {
        std::string out;
        for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
        return out;
    };
    auto pair_list = [](const std::vector<std::pair<std::string, std::string>>& ps, const char* sep) {
        std::string out;
        for (std::size_t i = 0; i < ps.size(); ++i) out += (i ? "," : "") + ps[i].first + sep + ps[i].second;
        return out;
    };
    std::string head(dspace::to_string(kind));
    switch (kind) {
    case Kind::Base: return name;
    case Kind::Project: head += "[" + list(fields) + "]"; break;
    case Kind::Select: head += "[" + predicate.to_string() + "]"; break;
    case Kind::Rename: head += "[" + pair_list(pairs, "->") + "]"; break;
    case Kind::OuterJoin: head += "[" + pair_list(pairs, "=") + "]"; break;
    case Kind::Aggregate: {
        std::vector<std::string> specs_text;
        for (const auto& s : specs) specs_text.push_back(s.output_name());
        head += "[" + list(group_by) + ";" + list(specs_text) + "]";
        break;
    }
    case Kind::Map: {
        std::string out;
        for (std::size_t i = 0; i < exprs.size(); ++i) out += (i ? "," : "") + exprs[i].first + "=" + exprs[i].second.to_string();
        head += "[" + out + "]";
        break;
    }
    default: break;
    }
    std::string out = head + "(";
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? ", " : "") + args[i].to_string();
    return out + ")";
}

// ---------------------------------------------------------------------------
// Typing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void type_error(const std::string& path, const RAExpr& e, const std::string& msg)
{
    throw Error(ErrorCode::TypeError, path + ":" + std::string(to_string(e.kind)) + ": " + msg);
}

Schema concat(const Schema& a, const Schema& b)
{
    std::vector<Column> cols = a.columns();
    cols.insert(cols.end(), b.columns().begin(), b.columns().end());
    return Schema(std::move(cols));
}

bool disjoint(const Schema& a, const Schema& b)
{
    return std::none_of(a.columns().begin(), a.columns().end(), [&](const Column& c) { return b.has(c.name); });
}

std::vector<std::string> shared_columns(const Schema& a, const Schema& b)
{
    std::vector<std::string> out;
    for (const auto& c : a.columns()) {
        if (b.has(c.name)) out.push_back(c.name);
    }
    return out;
}

bool numeric_type(ValueType t) { return t != ValueType::Text; }

Schema type_of(const RAExpr& e, const std::map<std::string, Schema>& inputs, const std::string& path)
{
    std::vector<Schema> in;
    for (std::size_t i = 0; i < e.args.size(); ++i) {
        in.push_back(type_of(e.args[i], inputs, path + "/" + std::to_string(i)));
    }
    const std::size_t arity = e.kind == RAExpr::Kind::Base ? 0
        : (e.kind == RAExpr::Kind::Project || e.kind == RAExpr::Kind::Select || e.kind == RAExpr::Kind::Rename
              || e.kind == RAExpr::Kind::Aggregate || e.kind == RAExpr::Kind::Map)
        ? 1
        : 2;
    if (in.size() != arity) type_error(path, e, "expects " + std::to_string(arity) + " operands");

    switch (e.kind) {
    case RAExpr::Kind::Base: {
        auto it = inputs.find(e.name);
        if (it == inputs.end()) type_error(path, e, "unknown relation '" + e.name + "'");
        return it->second.without_summands();
    }
    case RAExpr::Kind::Project: {
        if (e.fields.empty()) type_error(path, e, "projection keeps no field");
        std::set<std::string> keep(e.fields.begin(), e.fields.end());
        if (keep.size() != e.fields.size()) type_error(path, e, "projection repeats a field");
        std::vector<Column> cols;
        for (const auto& f : e.fields) {
            if (!in[0].has(f)) type_error(path, e, "unknown field '" + f + "'");
        }
        for (const auto& c : in[0].columns()) {
            if (keep.contains(c.name)) cols.push_back(c);
        }
        return Schema(std::move(cols));
    }
    case RAExpr::Kind::Select: {
        std::set<std::string> fs;
        e.predicate.collect_fields(fs);
        for (const auto& f : fs) {
            if (!in[0].has(f)) type_error(path, e, "unknown field '" + f + "'");
        }
        return in[0];
    }
    case RAExpr::Kind::Rename: {
        std::map<std::string, std::string> m;
        for (const auto& [from, to] : e.pairs) {
            if (!in[0].has(from)) type_error(path, e, "unknown field '" + from + "'");
            if (!m.emplace(from, to).second) type_error(path, e, "field '" + from + "' renamed twice");
        }
        std::vector<Column> cols;
        std::set<std::string> names;
        for (auto c : in[0].columns()) {
            if (auto it = m.find(c.name); it != m.end()) c.name = it->second;
            if (!names.insert(c.name).second) type_error(path, e, "rename collides on '" + c.name + "'");
            cols.push_back(std::move(c));
        }
        return Schema(std::move(cols));
    }
    case RAExpr::Kind::CrossProduct:
        if (!disjoint(in[0], in[1])) type_error(path, e, "operands share field names");
        return concat(in[0], in[1]);
    case RAExpr::Kind::NaturalJoin: {
        std::vector<Column> cols = in[0].columns();
        for (const auto& c : in[1].columns()) {
            const Column* l = in[0].find(c.name);
            if (l == nullptr) {
                cols.push_back(c);
            } else if (l->type != c.type) {
                type_error(path, e, "shared field '" + c.name + "' differs in type");
            }
        }
        return Schema(std::move(cols));
    }
    case RAExpr::Kind::OuterJoin: {
        if (!disjoint(in[0], in[1])) type_error(path, e, "operands share field names");
        if (e.pairs.empty()) type_error(path, e, "outer join needs a condition");
        for (const auto& [l, r] : e.pairs) {
            const Column* a = in[0].find(l);
            const Column* b = in[1].find(r);
            if (a == nullptr || b == nullptr) type_error(path, e, "unknown join field " + l + "=" + r);
            if (a->type != b->type) type_error(path, e, "join fields " + l + "=" + r + " differ in type");
        }
        return concat(in[0], in[1]);
    }
    case RAExpr::Kind::Union:
    case RAExpr::Kind::UnionAll:
    case RAExpr::Kind::Minus:
    case RAExpr::Kind::Intersect:
        if (in[0].columns() != in[1].columns()) type_error(path, e, "operands have different schemas");
        return in[0];
    case RAExpr::Kind::Aggregate: {
        std::vector<Column> cols;
        std::set<std::string> names;
        auto add = [&](Column c) {
            if (!names.insert(c.name).second) type_error(path, e, "output field '" + c.name + "' repeats");
            cols.push_back(std::move(c));
        };
        for (const auto& g : e.group_by) {
            const Column* c = in[0].find(g);
            if (c == nullptr) type_error(path, e, "unknown group field '" + g + "'");
            add(*c);
        }
        for (const auto& s : e.specs) {
            const Column* c = in[0].find(s.field);
            if (c == nullptr) type_error(path, e, "unknown aggregated field '" + s.field + "'");
            ValueType t = c->type;
            switch (s.kind) {
            case AggKind::Count: t = ValueType::Integer; break;
            case AggKind::Ids: t = ValueType::Text; break;
            case AggKind::Avg:
                if (!numeric_type(c->type)) type_error(path, e, "avg of text field");
                t = c->type == ValueType::Quantity ? ValueType::Quantity : ValueType::Decimal;
                break;
            default:
                if (!numeric_type(c->type)) type_error(path, e, "numeric aggregate of text field");
                break;
            }
            add(Column { s.output_name(), t, {} });
        }
        add(Column { kCountColumn, ValueType::Integer, {} });
        return Schema(std::move(cols));
    }
    case RAExpr::Kind::Map: {
        std::vector<Column> cols = in[0].columns();
        Schema acc = in[0];
        for (const auto& [name, expr] : e.exprs) {
            if (acc.has(name)) type_error(path, e, "field '" + name + "' already exists");
            auto t = result_type(expr, acc);
            if (!t) type_error(path, e, "expression " + expr.to_string() + " does not type-check");
            cols.push_back(Column { name, *t, {} });
            acc = Schema(cols);
        }
        return acc;
    }
    }
    type_error(path, e, "unknown node");
}

} // namespace

Schema ra_schema(const RAExpr& expr, const std::map<std::string, Schema>& inputs)
{
    return type_of(expr, inputs, "root");
}

// ---------------------------------------------------------------------------
// Translation
// ---------------------------------------------------------------------------

namespace {

class Translator {
public:
    Translator(const std::map<std::string, Schema>& inputs, const TranslateOptions& options)
        : inputs_(inputs)
        , options_(options)
    {
    }

    PipelineGraph finish(const RAExpr& expr)
    {
        const PortRef out = emit(expr);
        g_.sinks.insert(g_.sinks.begin(), SinkDecl { kResultSink, SinkRole::Report, { out }, {} });
        if (options_.declare_measures) {
            for (const auto& name : used_) {
                const Schema& s = inputs_.at(name);
                g_.measures.push_back(MeasureDecl { name, MeasureKind::Count, {}, {} });
                for (const auto& c : s.columns()) {
                    if (c.type == ValueType::Text) continue;
                    g_.measures.push_back(MeasureDecl { name, MeasureKind::SumPerUnit, c.name, {} });
                    if (c.type != ValueType::Quantity) {
                        g_.measures.push_back(MeasureDecl { name, MeasureKind::Paccioli, c.name, {} });
                    }
                }
            }
        }
        return std::move(g_);
    }

private:
    Node& add(NodeKind kind, const std::string& hint, std::map<std::string, PortRef> inputs)
    {
        Node n;
        n.name = "n" + std::to_string(++counter_) + "_" + hint;
        n.kind = kind;
        n.inputs = std::move(inputs);
        g_.nodes.push_back(std::move(n));
        return g_.nodes.back();
    }

    void aux(const Node& n, const std::string& port)
    {
        g_.sinks.push_back(SinkDecl { "aux_" + n.name + "_" + port, SinkRole::Error, { PortRef { n.name, port } }, port });
    }

    static PortRef at(const Node& n, const std::string& port) { return PortRef { n.name, port }; }

    Schema schema_of(const RAExpr& e) const { return ra_schema(e, inputs_); }

    /// tagged_union followed by strip_tags.
    PortRef concat_all(PortRef a, PortRef b, const std::string& hint)
    {
        const std::string u = add(NodeKind::TaggedUnion, hint, { { "left", a }, { "right", b } }).name;
        const std::string s = add(NodeKind::StripTags, "strip", { { "in", PortRef { u, "out" } } }).name;
        return PortRef { s, "out" };
    }

    PortRef emit(const RAExpr& e)
    {
        using K = RAExpr::Kind;
        switch (e.kind) {
        case K::Base: {
            auto it = sources_.find(e.name);
            if (it != sources_.end()) {
                throw Error(ErrorCode::TypeError, "relation '" + e.name + "' is referenced twice");
            }
            Node& n = add(NodeKind::Source, e.name, {});
            n.input = e.name;
            n.schema = inputs_.at(e.name);
            used_.push_back(e.name);
            sources_.insert(e.name);
            return at(n, "out");
        }
        case K::Project: {
            PortRef in = emit(e.args[0]);
            Node& n = add(NodeKind::Project, "project", { { "in", in } });
            n.columns = e.fields;
            return at(n, "out");
        }
        case K::Select: {
            PortRef in = emit(e.args[0]);
            Node& n = add(NodeKind::Partition, "select", { { "in", in } });
            n.predicate = e.predicate;
            aux(n, "rejected");
            return at(n, "accepted");
        }
        case K::Rename: {
            PortRef in = emit(e.args[0]);
            Node& n = add(NodeKind::Rename, "rename", { { "in", in } });
            n.mapping = e.pairs;
            return at(n, "out");
        }
        case K::CrossProduct: {
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            Node& n = add(NodeKind::Cartesian, "cross", { { "left", l }, { "right", r } });
            aux(n, "unpaired");
            return at(n, "out");
        }
        case K::NaturalJoin: {
            const auto shared = shared_columns(schema_of(e.args[0]), schema_of(e.args[1]));
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            if (shared.empty()) {
                Node& n = add(NodeKind::Cartesian, "cross", { { "left", l }, { "right", r } });
                aux(n, "unpaired");
                return at(n, "out");
            }
            Node& nl = add(NodeKind::NullPartition, "nonnull_left", { { "in", l } });
            nl.columns = shared;
            aux(nl, "missing");
            const std::string left_name = nl.name;
            Node& nr = add(NodeKind::NullPartition, "nonnull_right", { { "in", r } });
            nr.columns = shared;
            aux(nr, "missing");
            const std::string right_name = nr.name;
            Node& j = add(NodeKind::OuterJoin, "join", { { "left", PortRef { left_name, "present" } }, { "right", PortRef { right_name, "present" } } });
            for (const auto& c : shared) j.on.emplace_back(c, c);
            aux(j, "left");
            aux(j, "right");
            return at(j, "inner");
        }
        case K::OuterJoin: {
            const Schema ls = schema_of(e.args[0]);
            const Schema rs = schema_of(e.args[1]);
            std::vector<std::string> order = ls.names();
            for (const auto& c : rs.names()) order.push_back(c);
            std::vector<std::string> lkeys;
            std::vector<std::string> rkeys;
            for (const auto& [a, b] : e.pairs) {
                lkeys.push_back(a);
                rkeys.push_back(b);
            }
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            Node& nl = add(NodeKind::NullPartition, "nonnull_left", { { "in", l } });
            nl.columns = lkeys;
            const std::string left_name = nl.name;
            Node& nr = add(NodeKind::NullPartition, "nonnull_right", { { "in", r } });
            nr.columns = rkeys;
            const std::string right_name = nr.name;
            Node& j = add(NodeKind::OuterJoin, "outer", { { "left", PortRef { left_name, "present" } }, { "right", PortRef { right_name, "present" } } });
            j.on = e.pairs;
            const std::string join_name = j.name;

            PortRef lonly = concat_all(PortRef { join_name, "left" }, PortRef { left_name, "missing" }, "left_rows");
            Node& pl = add(NodeKind::Pad, "pad_left", { { "in", lonly } });
            pl.pad = rs.columns();
            pl.columns = order;
            const std::string pad_left = pl.name;

            PortRef ronly = concat_all(PortRef { join_name, "right" }, PortRef { right_name, "missing" }, "right_rows");
            Node& pr = add(NodeKind::Pad, "pad_right", { { "in", ronly } });
            pr.pad = ls.columns();
            pr.columns = order;
            const std::string pad_right = pr.name;

            PortRef inner_left = concat_all(PortRef { join_name, "inner" }, PortRef { pad_left, "out" }, "with_left");
            return concat_all(inner_left, PortRef { pad_right, "out" }, "with_right");
        }
        case K::Union: {
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            Node& u = add(NodeKind::TaggedUnion, "union", { { "left", l }, { "right", r } });
            PortRef tagged = at(u, "out");
            if (!options_.mutant_union_without_dedup) {
                Node& d = add(NodeKind::DedupPartition, "dedup", { { "in", tagged } });
                aux(d, "duplicates");
                tagged = at(d, "distinct");
            }
            Node& s = add(NodeKind::StripTags, "strip", { { "in", tagged } });
            return at(s, "out");
        }
        case K::UnionAll: {
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            return concat_all(l, r, "union_all");
        }
        case K::Minus:
        case K::Intersect: {
            PortRef l = emit(e.args[0]);
            PortRef r = emit(e.args[1]);
            const bool minus = e.kind == K::Minus;
            Node& n = add(NodeKind::SetPartition, minus ? "minus" : "intersect", { { "left", l }, { "right", r } });
            for (const char* p : { "left_only", "left_shared", "right_shared", "right_only" }) {
                if (std::string(p) != (minus ? "left_only" : "left_shared")) aux(n, p);
            }
            return at(n, minus ? "left_only" : "left_shared");
        }
        case K::Aggregate: {
            PortRef in = emit(e.args[0]);
            Node& n = add(NodeKind::Aggregate, "aggregate", { { "in", in } });
            n.group_by = e.group_by;
            n.specs = e.specs;
            return at(n, "out");
        }
        case K::Map: {
            PortRef in = emit(e.args[0]);
            Node& n = add(NodeKind::Fmap, "map", { { "in", in } });
            n.exprs = e.exprs;
            return at(n, "out");
        }
        }
        throw Error(ErrorCode::TypeError, "unknown expression kind");
    }

    const std::map<std::string, Schema>& inputs_;
    TranslateOptions options_;
    PipelineGraph g_;
    std::vector<std::string> used_;
    std::set<std::string> sources_;
    int counter_ = 0;
};

} // namespace

PipelineGraph translate(const RAExpr& expr, const std::map<std::string, Schema>& inputs, const TranslateOptions& options)
{
    ra_schema(expr, inputs);
    return Translator(inputs, options).finish(expr);
}

// ---------------------------------------------------------------------------
// Reference evaluator. Deliberately written against plain row maps with its
// own expression and predicate semantics, sharing nothing with the operators.
// ---------------------------------------------------------------------------

namespace {

using Row = Fields;
using Rows = std::vector<Row>;

enum class Tri { F, T, U };

std::optional<int> ref_compare(const FieldValue& a, const FieldValue& b)
{
    const auto& x = a.storage();
    const auto& y = b.storage();
    if (std::holds_alternative<Missing>(x) || std::holds_alternative<Missing>(y)) return std::nullopt;
    if (std::holds_alternative<std::string>(x) || std::holds_alternative<std::string>(y)) {
        if (!std::holds_alternative<std::string>(x) || !std::holds_alternative<std::string>(y)) return std::nullopt;
        const int c = std::get<std::string>(x).compare(std::get<std::string>(y));
        return (c > 0) - (c < 0);
    }
    auto raw = [](const FieldValue::Storage& s) -> std::int64_t {
        if (auto* i = std::get_if<std::int64_t>(&s)) return *i * Decimal::kScale;
        if (auto* d = std::get_if<Decimal>(&s)) return d->raw();
        return std::get<Quantity>(s).amount.raw();
    };
    const bool qx = std::holds_alternative<Quantity>(x);
    const bool qy = std::holds_alternative<Quantity>(y);
    if (qx != qy) return std::nullopt;
    if (qx && std::get<Quantity>(x).unit != std::get<Quantity>(y).unit) return std::nullopt;
    const std::int64_t l = raw(x);
    const std::int64_t r = raw(y);
    return (l > r) - (l < r);
}

bool join_equal(const FieldValue& a, const FieldValue& b)
{
    auto c = ref_compare(a, b);
    return c && *c == 0;
}

FieldValue ref_value(const ValueExpr& e, const Row& row);

FieldValue ref_arith(ValueExpr::Op op, const FieldValue& a, const FieldValue& b)
{
    if (a.is_missing()) return a;
    if (b.is_missing()) return b;
    if (a.is_text() || b.is_text()) return FieldValue::missing("non-numeric operand");
    if (a.is_integer() && b.is_integer()) {
        const __int128 x = a.as_integer();
        const __int128 y = b.as_integer();
        const __int128 r = op == ValueExpr::Op::Add ? x + y : op == ValueExpr::Op::Sub ? x - y : x * y;
        if (r > INT64_MAX || r < INT64_MIN) return FieldValue::missing("overflow");
        return FieldValue(static_cast<std::int64_t>(r));
    }
    auto dec = [](const FieldValue& v) {
        if (v.is_integer()) return Decimal::from_int(v.as_integer());
        if (v.is_decimal()) return v.as_decimal();
        return v.as_quantity().amount;
    };
    try {
        const Decimal x = dec(a);
        const Decimal y = dec(b);
        if (op == ValueExpr::Op::Mul) {
            if (a.is_quantity() && b.is_quantity()) {
                return FieldValue::quantity(x * y, a.as_quantity().unit + "*" + b.as_quantity().unit);
            }
            if (a.is_quantity()) return FieldValue::quantity(x * y, a.as_quantity().unit);
            if (b.is_quantity()) return FieldValue::quantity(x * y, b.as_quantity().unit);
            return FieldValue(x * y);
        }
        const Decimal r = op == ValueExpr::Op::Add ? x + y : x - y;
        if (a.is_quantity() || b.is_quantity()) {
            if (!(a.is_quantity() && b.is_quantity() && a.as_quantity().unit == b.as_quantity().unit)) {
                return FieldValue::missing("unit mismatch");
            }
            return FieldValue::quantity(r, a.as_quantity().unit);
        }
        return FieldValue(r);
    } catch (const Error&) {
        return FieldValue::missing("overflow");
    }
}

FieldValue ref_value(const ValueExpr& e, const Row& row)
{
    switch (e.op) {
    case ValueExpr::Op::Field: return row.at(e.field);
    case ValueExpr::Op::Const: return e.constant;
    default: return ref_arith(e.op, ref_value(e.args[0], row), ref_value(e.args[1], row));
    }
}

Tri ref_truth(const Predicate& p, const Row& row)
{
    using Op = Predicate::Op;
    switch (p.op) {
    case Op::True: return Tri::T;
    case Op::False: return Tri::F;
    case Op::Present: return ref_value(p.lhs, row).is_missing() ? Tri::F : Tri::T;
    case Op::In: {
        const FieldValue v = ref_value(p.lhs, row);
        if (v.is_missing()) return Tri::U;
        return std::any_of(p.values.begin(), p.values.end(), [&](const FieldValue& c) { return join_equal(v, c); })
            ? Tri::T
            : Tri::F;
    }
    case Op::And: {
        bool unknown = false;
        for (const auto& a : p.args) {
            const Tri t = ref_truth(a, row);
            if (t == Tri::F) return Tri::F;
            unknown = unknown || t == Tri::U;
        }
        return unknown ? Tri::U : Tri::T;
    }
    case Op::Or: {
        bool unknown = false;
        for (const auto& a : p.args) {
            const Tri t = ref_truth(a, row);
            if (t == Tri::T) return Tri::T;
            unknown = unknown || t == Tri::U;
        }
        return unknown ? Tri::U : Tri::F;
    }
    case Op::Not: {
        const Tri t = ref_truth(p.args[0], row);
        return t == Tri::U ? Tri::U : (t == Tri::T ? Tri::F : Tri::T);
    }
    default: break;
    }
    const FieldValue a = ref_value(p.lhs, row);
    const FieldValue b = ref_value(p.rhs, row);
    if (a.is_missing() || b.is_missing()) return Tri::U;
    const auto c = ref_compare(a, b);
    if (!c) return p.op == Op::Ne ? Tri::T : Tri::F;
    bool r = false;
    switch (p.op) {
    case Op::Eq: r = *c == 0; break;
    case Op::Ne: r = *c != 0; break;
    case Op::Lt: r = *c < 0; break;
    case Op::Le: r = *c <= 0; break;
    case Op::Gt: r = *c > 0; break;
    case Op::Ge: r = *c >= 0; break;
    default: break;
    }
    return r ? Tri::T : Tri::F;
}

Row merged(const Row& a, const Row& b)
{
    Row out = a;
    for (const auto& [k, v] : b) out[k] = v;
    return out;
}

FieldValue typed(Decimal v, ValueType t, const std::string& unit)
{
    if (t == ValueType::Integer) return FieldValue(v.raw() / Decimal::kScale);
    if (t == ValueType::Quantity) return unit.empty() ? FieldValue::missing("no unit") : FieldValue::quantity(v, unit);
    return FieldValue(v);
}

Rows ref_aggregate(const RAExpr& e, const Rows& rows, const Schema& in)
{
    struct Key {
        Row group;
        std::vector<std::string> units;
        auto operator<=>(const Key&) const = default;
    };
    auto split_by_unit = [&](const AggSpec& s) {
        return in.find(s.field)->type == ValueType::Quantity && s.kind != AggKind::Count && s.kind != AggKind::Ids;
    };
    std::map<Key, std::vector<const Row*>> groups;
    std::vector<Key> order;
    for (const auto& r : rows) {
        Key k;
        for (const auto& g : e.group_by) k.group[g] = r.at(g);
        for (const auto& s : e.specs) {
            if (split_by_unit(s)) {
                const FieldValue& v = r.at(s.field);
                k.units.push_back(v.is_quantity() ? v.as_quantity().unit : "");
            }
        }
        auto [it, fresh] = groups.try_emplace(k);
        if (fresh) order.push_back(k);
        it->second.push_back(&r);
    }
    if (rows.empty() && e.group_by.empty()) {
        Key k;
        for (const auto& s : e.specs) {
            if (split_by_unit(s)) k.units.emplace_back();
        }
        groups[k];
        order.push_back(k);
    }

    Rows out;
    for (const auto& k : order) {
        const auto& members = groups.at(k);
        Row row = k.group;
        std::size_t unit_index = 0;
        for (const auto& s : e.specs) {
            const ValueType t = in.find(s.field)->type;
            const std::string unit = split_by_unit(s) ? k.units[unit_index++] : std::string();
            std::vector<Decimal> nums;
            std::set<std::string> ids;
            std::int64_t present = 0;
            for (const Row* m : members) {
                const FieldValue& v = m->at(s.field);
                if (v.is_missing()) continue;
                ++present;
                ids.insert(v.to_string());
                if (v.is_integer()) nums.push_back(Decimal::from_int(v.as_integer()));
                if (v.is_decimal()) nums.push_back(v.as_decimal());
                if (v.is_quantity()) nums.push_back(v.as_quantity().amount);
            }
            Decimal total;
            for (const auto& n : nums) total = total + n;
            FieldValue result;
            switch (s.kind) {
            case AggKind::Count: result = FieldValue(present); break;
            case AggKind::Sum: result = typed(total, t, unit); break;
            case AggKind::Min:
                result = nums.empty() ? FieldValue::missing("empty") : typed(*std::min_element(nums.begin(), nums.end()), t, unit);
                break;
            case AggKind::Max:
                result = nums.empty() ? FieldValue::missing("empty") : typed(*std::max_element(nums.begin(), nums.end()), t, unit);
                break;
            case AggKind::Avg: {
                if (nums.empty()) {
                    result = FieldValue::missing("empty");
                    break;
                }
                const Decimal mean = total.divided_by(static_cast<std::int64_t>(nums.size()));
                result = t == ValueType::Quantity ? typed(mean, t, unit) : FieldValue(mean);
                break;
            }
            case AggKind::Ids: {
                std::string text = "{";
                for (const auto& id : ids) text += (text.size() > 1 ? "," : "") + id;
                result = FieldValue(text + "}");
                break;
            }
            }
            row[s.output_name()] = result;
        }
        row[kCountColumn] = FieldValue(static_cast<std::int64_t>(members.size()));
        out.push_back(std::move(row));
    }
    return out;
}

struct Evaluated {
    Schema schema;
    Rows rows;
};

Evaluated ref_eval(const RAExpr& e, const std::map<std::string, Relation>& inputs, const std::map<std::string, Schema>& schemas)
{
    using K = RAExpr::Kind;
    std::vector<Evaluated> in;
    for (const auto& a : e.args) in.push_back(ref_eval(a, inputs, schemas));
    const Schema schema = ra_schema(e, schemas);
    Rows out;
    switch (e.kind) {
    case K::Base:
        for (const auto& r : inputs.at(e.name).rows) out.push_back(r.relevant);
        break;
    case K::Project:
        for (const auto& r : in[0].rows) {
            Row p;
            for (const auto& f : e.fields) p[f] = r.at(f);
            out.push_back(std::move(p));
        }
        break;
    case K::Select:
        for (const auto& r : in[0].rows) {
            if (ref_truth(e.predicate, r) == Tri::T) out.push_back(r);
        }
        break;
    case K::Rename:
        for (const auto& r : in[0].rows) {
            Row n;
            for (const auto& [k, v] : r) {
                std::string name = k;
                for (const auto& [from, to] : e.pairs) {
                    if (from == k) name = to;
                }
                n[name] = v;
            }
            out.push_back(std::move(n));
        }
        break;
    case K::CrossProduct:
        for (const auto& a : in[0].rows) {
            for (const auto& b : in[1].rows) out.push_back(merged(a, b));
        }
        break;
    case K::NaturalJoin: {
        const auto shared = shared_columns(in[0].schema, in[1].schema);
        for (const auto& a : in[0].rows) {
            for (const auto& b : in[1].rows) {
                const bool match = std::all_of(shared.begin(), shared.end(), [&](const std::string& c) { return join_equal(a.at(c), b.at(c)); });
                if (match) out.push_back(merged(a, b));
            }
        }
        break;
    }
    case K::OuterJoin: {
        const FieldValue null = FieldValue::missing("null");
        std::vector<bool> right_hit(in[1].rows.size(), false);
        for (const auto& a : in[0].rows) {
            bool hit = false;
            for (std::size_t j = 0; j < in[1].rows.size(); ++j) {
                const auto& b = in[1].rows[j];
                const bool match = std::all_of(e.pairs.begin(), e.pairs.end(),
                    [&](const auto& p) { return join_equal(a.at(p.first), b.at(p.second)); });
                if (match) {
                    hit = true;
                    right_hit[j] = true;
                    out.push_back(merged(a, b));
                }
            }
            if (!hit) {
                Row padded = a;
                for (const auto& c : in[1].schema.columns()) padded[c.name] = null;
                out.push_back(std::move(padded));
            }
        }
        for (std::size_t j = 0; j < in[1].rows.size(); ++j) {
            if (right_hit[j]) continue;
            Row padded = in[1].rows[j];
            for (const auto& c : in[0].schema.columns()) padded[c.name] = null;
            out.push_back(std::move(padded));
        }
        break;
    }
    case K::Union:
        for (const auto* side : { &in[0].rows, &in[1].rows }) {
            for (const auto& r : *side) {
                if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
            }
        }
        break;
    case K::UnionAll:
        out = in[0].rows;
        out.insert(out.end(), in[1].rows.begin(), in[1].rows.end());
        break;
    case K::Minus:
    case K::Intersect:
        for (const auto& a : in[0].rows) {
            const bool found = std::find(in[1].rows.begin(), in[1].rows.end(), a) != in[1].rows.end();
            if (found == (e.kind == K::Intersect)) out.push_back(a);
        }
        break;
    case K::Aggregate: out = ref_aggregate(e, in[0].rows, in[0].schema); break;
    case K::Map:
        for (const auto& r : in[0].rows) {
            Row n = r;
            for (const auto& [name, expr] : e.exprs) n[name] = ref_value(expr, n);
            out.push_back(std::move(n));
        }
        break;
    }
    return Evaluated { schema, std::move(out) };
}

} // namespace

Relation reference_eval(const RAExpr& expr, const std::map<std::string, Relation>& inputs)
{
    std::map<std::string, Schema> schemas;
    for (const auto& [name, rel] : inputs) schemas.emplace(name, rel.schema);
    Evaluated ev = ref_eval(expr, inputs, schemas);
    Relation out(ev.schema);
    for (auto& r : ev.rows) {
        Record rec;
        rec.relevant = std::move(r);
        out.rows.push_back(std::move(rec));
    }
    return out;
}

Equivalence equivalence_check(
    const RAExpr& expr, const std::map<std::string, Relation>& inputs, const TranslateOptions& options, RunResult* run_out)
{
    Equivalence v;
    std::vector<Fields> expected;
    std::vector<Fields> actual;
    try {
        expected = relevant_multiset(reference_eval(expr, inputs));
        std::map<std::string, Schema> schemas;
        for (const auto& [name, rel] : inputs) schemas.emplace(name, rel.schema);
        RunResult result = run(translate(expr, schemas, options), inputs);
        actual = relevant_multiset(result.sinks.at(kResultSink).correct);
        if (run_out != nullptr) *run_out = std::move(result);
    } catch (const std::exception& e) {
        v.ok = false;
        v.message = std::string("evaluation failed: ") + e.what();
        return v;
    }
    v.expected_rows = expected.size();
    v.actual_rows = actual.size();
    if (expected == actual) return v;

    v.ok = false;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < expected.size() && j < actual.size() && expected[i] == actual[j]) {
        ++i;
        ++j;
    }
    if (j == actual.size() || (i < expected.size() && expected[i] < actual[j])) {
        v.message = "reference row missing from pipeline result: " + to_string(expected[i]);
    } else {
        v.message = "pipeline result has unexpected row: " + to_string(actual[j]);
    }
    v.message += " (expected " + std::to_string(expected.size()) + " rows, got " + std::to_string(actual.size()) + ")";
    return v;
}

} // namespace dspace
