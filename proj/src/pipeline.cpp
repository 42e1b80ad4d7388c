#include "dspace/pipeline.hpp"

#include "dspace/error.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

namespace dspace {

namespace {

struct KindInfo {
    NodeKind kind;
    const char* name;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    bool row_preserving;
};

const std::vector<KindInfo>& kind_table()
{
    static const std::vector<KindInfo> table = {
        { NodeKind::Source, "source", {}, { "out" }, true },
        { NodeKind::Partition, "partition", { "in" }, { "accepted", "rejected" }, true },
        { NodeKind::NullPartition, "null_partition", { "in" }, { "present", "missing" }, true },
        { NodeKind::TaggedUnion, "tagged_union", { "left", "right" }, { "out" }, true },
        { NodeKind::Untag, "untag", { "in" }, { "left", "right" }, true },
        { NodeKind::StripTags, "strip_tags", { "in" }, { "out" }, true },
        { NodeKind::OuterJoin, "outer_join", { "left", "right" }, { "inner", "left", "right" }, false },
        { NodeKind::Lookup, "lookup", { "left", "right" }, { "inner", "missing", "unused" }, false },
        { NodeKind::Project, "project", { "in" }, { "out" }, true },
        { NodeKind::Dedup, "dedup", { "in" }, { "out" }, false },
        { NodeKind::DedupPartition, "dedup_partition", { "in" }, { "distinct", "duplicates" }, true },
        { NodeKind::SetPartition, "set_partition", { "left", "right" },
            { "left_only", "left_shared", "right_shared", "right_only" }, true },
        { NodeKind::Rename, "rename", { "in" }, { "out" }, true },
        { NodeKind::Fmap, "fmap", { "in" }, { "out" }, true },
        { NodeKind::Emap, "emap", { "in" }, { "out" }, true },
        { NodeKind::Totalize, "totalize", { "in" }, { "defined", "passthrough" }, true },
        { NodeKind::Aggregate, "aggregate", { "in" }, { "out" }, false },
        { NodeKind::Cartesian, "cartesian", { "left", "right" }, { "out", "unpaired" }, false },
        { NodeKind::Divert, "divert", { "in" }, { "out" }, true },
        { NodeKind::Pad, "pad", { "in" }, { "out" }, true },
    };
    return table;
}

const KindInfo& info(NodeKind kind)
{
    for (const auto& k : kind_table()) {
        if (k.kind == kind) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown node kind");
}

void append(Relation& into, Relation from)
{
    into.rows.insert(into.rows.end(), std::make_move_iterator(from.rows.begin()), std::make_move_iterator(from.rows.end()));
}

using PortMap = std::map<std::string, Stream>;

/// Runs one stage. `in` holds one stream per input port; a source reads its
/// stream from the pseudo-port "in".
PortMap execute(const Node& n, PortMap in)
{
    if (n.kind == NodeKind::Source) {
        return { { "out", std::move(in.at("in")) } };
    }

    Relation errors(error_schema());
    for (const auto& p : input_ports(n.kind)) append(errors, std::move(in.at(p).errors));

    std::vector<std::pair<std::string, Relation>> ports;
    auto correct = [&](const char* port) -> Relation& { return in.at(port).correct; };

    switch (n.kind) {
    case NodeKind::Partition: {
        for (const auto& f : [&] {
                 std::set<std::string> fs;
                 n.predicate.collect_fields(fs);
                 return fs;
             }()) {
            if (!correct("in").schema.has(f)) {
                throw Error(ErrorCode::UnknownField, "predicate references unknown field '" + f + "'");
            }
        }
        auto r = partition(correct("in"), n.predicate);
        ports = { { "accepted", std::move(r.accepted) }, { "rejected", std::move(r.rejected) } };
        break;
    }
    case NodeKind::NullPartition: {
        auto r = null_partition(correct("in"), n.columns);
        ports = { { "present", std::move(r.accepted) }, { "missing", std::move(r.rejected) } };
        break;
    }
    case NodeKind::TaggedUnion:
        ports = { { "out", tagged_union(correct("left"), correct("right"), n.label.empty() ? n.name : n.label) } };
        break;
    case NodeKind::Untag: {
        auto [l, r] = untag(correct("in"));
        ports = { { "left", std::move(l) }, { "right", std::move(r) } };
        break;
    }
    case NodeKind::StripTags: ports = { { "out", strip_tags(correct("in")) } }; break;
    case NodeKind::OuterJoin:
    case NodeKind::Lookup: {
        auto r = outer_join(correct("left"), correct("right"), JoinCondition { n.on, {} });
        if (n.kind == NodeKind::OuterJoin) {
            ports = { { "inner", std::move(r.inner) }, { "left", std::move(r.left) }, { "right", std::move(r.right) } };
        } else {
            ports = { { "inner", std::move(r.inner) }, { "missing", std::move(r.left) }, { "unused", std::move(r.right) } };
        }
        break;
    }
    case NodeKind::Project: ports = { { "out", lossless_project(correct("in"), n.columns) } }; break;
    case NodeKind::Dedup: ports = { { "out", dedup_merge(correct("in")) } }; break;
    case NodeKind::DedupPartition: {
        auto r = dedup_partition(correct("in"));
        ports = { { "distinct", std::move(r.accepted) }, { "duplicates", std::move(r.rejected) } };
        break;
    }
    case NodeKind::SetPartition: {
        const auto& l = correct("left");
        const auto& r = correct("right");
        if (l.schema.columns() != r.schema.columns()) {
            throw Error(ErrorCode::SchemaMismatch, "set partition needs identical schemas on both sides");
        }
        auto s = set_partition(l, r);
        ports = { { "left_only", std::move(s.left_only) }, { "left_shared", std::move(s.left_shared) },
            { "right_shared", std::move(s.right_shared) }, { "right_only", std::move(s.right_only) } };
        break;
    }
    case NodeKind::Rename: ports = { { "out", rename(correct("in"), n.mapping) } }; break;
    case NodeKind::Fmap: {
        Stream s(std::move(correct("in")));
        for (const auto& [name, expr] : n.exprs) s = fmap(s, name, expr);
        ports = { { "out", std::move(s.correct) } };
        break;
    }
    case NodeKind::Emap: {
        Stream s(std::move(correct("in")), std::move(errors));
        s = emap(s, [&](const Record&) { return n.notes; });
        errors = std::move(s.errors);
        ports = { { "out", std::move(s.correct) } };
        break;
    }
    case NodeKind::Totalize: {
        if (n.exprs.size() != 1) {
            throw Error(ErrorCode::InvalidArgument, "totalize needs exactly one expression");
        }
        auto [d, p] = totalize_expr(correct("in"), n.exprs[0].first, n.exprs[0].second);
        ports = { { "defined", std::move(d) }, { "passthrough", std::move(p) } };
        break;
    }
    case NodeKind::Aggregate: ports = { { "out", aggregate(correct("in"), n.group_by, n.specs) } }; break;
    case NodeKind::Cartesian: {
        const auto& l = correct("left");
        const auto& r = correct("right");
        Relation product = cartesian(Relation(l.schema), Relation(r.schema));
        Relation unpaired;
        if (l.empty() || r.empty()) {
            unpaired = tagged_union(l, r, n.name);
        } else {
            product = cartesian(l, r);
            unpaired = tagged_union(Relation(l.schema), Relation(r.schema), n.name);
        }
        ports = { { "out", std::move(product) }, { "unpaired", std::move(unpaired) } };
        break;
    }
    case NodeKind::Divert: {
        const std::string why = n.reason.empty() ? n.inputs.at("in").port : n.reason;
        append(errors, to_errors(correct("in"), n.name, why));
        ports = { { "out", Relation(correct("in").schema) } };
        break;
    }
    case NodeKind::Pad: {
        const FieldValue filler = FieldValue::missing(n.reason.empty() ? "null" : n.reason);
        Stream s = fmap(Stream(std::move(correct("in"))), [&](const Record&) {
            Fields f;
            for (const auto& c : n.pad) f.emplace(c.name, filler);
            return f;
        }, n.pad);
        if (!n.columns.empty()) {
            std::vector<Column> ordered;
            for (const auto& name : n.columns) {
                const Column* c = s.correct.schema.find(name);
                if (c == nullptr) throw Error(ErrorCode::UnknownField, "pad order names unknown field '" + name + "'");
                ordered.push_back(*c);
            }
            if (ordered.size() != s.correct.schema.size()) {
                throw Error(ErrorCode::SchemaMismatch, "pad order must list every output column");
            }
            s.correct.schema = Schema(std::move(ordered), s.correct.schema.open());
        }
        ports = { { "out", std::move(s.correct) } };
        break;
    }
    case NodeKind::Source: break;
    }

    PortMap out;
    for (std::size_t i = 0; i < ports.size(); ++i) {
        Stream s(std::move(ports[i].second));
        if (i == 0) s.errors = std::move(errors);
        out.emplace(ports[i].first, std::move(s));
    }
    return out;
}

struct Plan {
    std::vector<std::vector<std::size_t>> levels;
    std::vector<std::size_t> unplaced;
};

/// Topological levels in declaration order; nodes left over sit on a cycle.
Plan plan(const PipelineGraph& g)
{
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].name, i);

    std::vector<int> level(g.nodes.size(), -1);
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (level[i] >= 0) continue;
            int lv = 0;
            bool ready = true;
            for (const auto& [port, ref] : g.nodes[i].inputs) {
                auto it = index.find(ref.node);
                if (it == index.end()) continue;
                if (level[it->second] < 0) {
                    ready = false;
                    break;
                }
                lv = std::max(lv, level[it->second] + 1);
            }
            if (ready) {
                level[i] = lv;
                progress = true;
            }
        }
    }
    Plan p;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (level[i] < 0) {
            p.unplaced.push_back(i);
            continue;
        }
        if (p.levels.size() <= static_cast<std::size_t>(level[i])) p.levels.resize(level[i] + 1);
        p.levels[level[i]].push_back(i);
    }
    return p;
}

/// Schema inference by dry run; reports the failing stage.
std::map<PortRef, Schema> infer(const PipelineGraph& g, std::string& failing)
{
    std::map<PortRef, Schema> schemas;
    const Plan p = plan(g);
    for (const auto& lv : p.levels) {
        for (std::size_t i : lv) {
            const Node& n = g.nodes[i];
            failing = n.name;
            PortMap in;
            if (n.kind == NodeKind::Source) {
                if (!n.schema) {
                    throw Error(ErrorCode::SchemaMismatch, "source has no declared schema");
                }
                in.emplace("in", Stream(Relation(*n.schema)));
            } else {
                for (const auto& [port, ref] : n.inputs) {
                    in.emplace(port, Stream(Relation(schemas.at(ref))));
                }
            }
            for (auto& [port, s] : execute(n, std::move(in))) {
                schemas.emplace(PortRef { n.name, port }, std::move(s.correct.schema));
            }
        }
    }
    failing.clear();
    return schemas;
}

std::vector<const Record*> all_records(const Stream& s)
{
    std::vector<const Record*> out;
    out.reserve(s.correct.size() + s.errors.size());
    for (const auto& r : s.correct.rows) out.push_back(&r);
    for (const auto& r : s.errors.rows) out.push_back(&r);
    return out;
}

PidSet unite(const std::map<std::string, PidSet>& m)
{
    PidSet out;
    for (const auto& [k, v] : m) out.insert(v.begin(), v.end());
    return out;
}

/// Declared measures keyed by kind and fields (the input name does not
/// matter for stage balances).
std::vector<MeasureDecl> distinct_spaces(const std::vector<MeasureDecl>& decls)
{
    std::vector<MeasureDecl> out;
    std::set<std::tuple<MeasureKind, std::string, std::string>> seen;
    for (const auto& d : decls) {
        if (seen.insert({ d.kind, d.field, d.unit_field }).second) out.push_back(d);
    }
    return out;
}

bool carries(const Schema& s, const MeasureDecl& d)
{
    if (d.kind == MeasureKind::Count) return true;
    return s.has(d.field) && (d.unit_field.empty() || s.has(d.unit_field));
}

StageLedger ledger_for(const Node& n, const PortMap& in, const PortMap& out, const std::vector<MeasureDecl>& spaces)
{
    StageLedger l;
    l.stage = n.name;
    l.kind = n.kind;
    l.row_preserving = info(n.kind).row_preserving;
    std::vector<const Record*> rin;
    std::vector<const Record*> rout;
    for (const auto& [port, s] : in) {
        l.in.emplace(port, pids(s));
        l.rows_in += s.correct.size() + s.errors.size();
        auto rs = all_records(s);
        rin.insert(rin.end(), rs.begin(), rs.end());
    }
    for (const auto& [port, s] : out) {
        l.out.emplace(port, pids(s));
        l.rows_out += s.correct.size() + s.errors.size();
        auto rs = all_records(s);
        rout.insert(rout.end(), rs.begin(), rs.end());
    }
    if (!l.row_preserving) return l;

    for (const auto& d : spaces) {
        bool applies = true;
        for (const auto& [port, s] : in) applies = applies && carries(s.correct.schema, d);
        for (const auto& [port, s] : out) applies = applies && carries(s.correct.schema, d);
        if (!applies) continue;
        std::vector<const Record*> both = rin;
        both.insert(both.end(), rout.begin(), rout.end());
        const DataSpaceDescriptor space = measure_space(d, both);
        l.balances.push_back(Balance { d.label(), measure_records(space, rin), measure_records(space, rout) });
    }
    return l;
}

Schema sink_schema(const std::vector<const Relation*>& parts)
{
    if (parts.empty()) return Schema();
    bool same = std::all_of(parts.begin(), parts.end(),
        [&](const Relation* r) { return r->schema.columns() == parts.front()->schema.columns(); });
    if (same) return parts.front()->schema.without_summands();
    std::vector<Column> cols;
    std::set<std::string> names;
    for (const Relation* r : parts) {
        for (const auto& c : r->schema.columns()) {
            if (names.insert(c.name).second) cols.push_back(c);
        }
    }
    return Schema::open_schema(std::move(cols));
}

} // namespace

std::string_view to_string(NodeKind kind) { return info(kind).name; }

std::optional<NodeKind> parse_node_kind(std::string_view text)
{
    for (const auto& k : kind_table()) {
        if (text == k.name) return k.kind;
    }
    return std::nullopt;
}

std::vector<std::string> input_ports(NodeKind kind) { return info(kind).inputs; }
std::vector<std::string> output_ports(NodeKind kind) { return info(kind).outputs; }

std::optional<PortRef> PortRef::parse(std::string_view text)
{
    const auto dot = text.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) return std::nullopt;
    return PortRef { std::string(text.substr(0, dot)), std::string(text.substr(dot + 1)) };
}

std::string_view to_string(SinkRole role) { return role == SinkRole::Report ? "report" : "error"; }

std::string_view to_string(MeasureKind kind)
{
    switch (kind) {
    case MeasureKind::Count: return "count";
    case MeasureKind::SumPerUnit: return "sum_per_unit";
    case MeasureKind::Paccioli: return "paccioli";
    }
    return "count";
}

std::optional<MeasureKind> parse_measure_kind(std::string_view text)
{
    for (auto k : { MeasureKind::Count, MeasureKind::SumPerUnit, MeasureKind::Paccioli }) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::string MeasureDecl::label() const
{
    switch (kind) {
    case MeasureKind::Count: return "count";
    case MeasureKind::SumPerUnit: return "sum(" + field + (unit_field.empty() ? "" : " by " + unit_field) + ")";
    case MeasureKind::Paccioli: return "paccioli(" + field + ")";
    }
    return "count";
}

const Node* PipelineGraph::find(std::string_view name) const
{
    for (const auto& n : nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

PipelineGraph expand_macros(const PipelineGraph& graph)
{
    PipelineGraph g = graph;
    std::set<PortRef> consumed;
    for (const auto& n : g.nodes) {
        for (const auto& [port, ref] : n.inputs) consumed.insert(ref);
    }
    for (const auto& s : g.sinks) consumed.insert(s.ports.begin(), s.ports.end());
    for (const auto& n : graph.nodes) {
        if (n.kind != NodeKind::Lookup) continue;
        for (const char* port : { "missing", "unused" }) {
            PortRef ref { n.name, port };
            if (!consumed.contains(ref)) {
                g.sinks.push_back(SinkDecl { n.name + "_" + port, SinkRole::Error, { ref }, port });
            }
        }
    }
    return g;
}

std::string_view to_string(ViolationKind kind)
{
    switch (kind) {
    case ViolationKind::UnconsumedPort: return "UnconsumedPort";
    case ViolationKind::DuplicateConsumer: return "DuplicateConsumer";
    case ViolationKind::UnknownPort: return "UnknownPort";
    case ViolationKind::UnwiredInput: return "UnwiredInput";
    case ViolationKind::DuplicateName: return "DuplicateName";
    case ViolationKind::Cycle: return "Cycle";
    case ViolationKind::SchemaMismatch: return "SchemaMismatch";
    }
    return "Violation";
}

std::string Violation::to_string() const
{
    return std::string(dspace::to_string(kind)) + "(" + where + "): " + message;
}

std::vector<Violation> validate(const PipelineGraph& graph)
{
    const PipelineGraph g = expand_macros(graph);
    std::vector<Violation> out;
    auto report = [&](ViolationKind k, std::string where, std::string msg) {
        out.push_back(Violation { k, std::move(where), std::move(msg) });
    };

    std::map<std::string, const Node*> nodes;
    for (const auto& n : g.nodes) {
        if (n.name.empty() || !nodes.emplace(n.name, &n).second) {
            report(ViolationKind::DuplicateName, n.name, "stage names must be unique and non-empty");
        }
    }
    std::set<std::string> sink_names;
    for (const auto& s : g.sinks) {
        if (s.name.empty() || !sink_names.insert(s.name).second) {
            report(ViolationKind::DuplicateName, s.name, "sink names must be unique and non-empty");
        }
    }

    std::map<PortRef, int> consumers;
    for (const auto& n : g.nodes) {
        for (const auto& p : output_ports(n.kind)) consumers.emplace(PortRef { n.name, p }, 0);
    }
    auto consume = [&](const PortRef& ref, const std::string& by) {
        auto it = consumers.find(ref);
        if (it == consumers.end()) {
            report(ViolationKind::UnknownPort, by, "no output port " + ref.str());
            return;
        }
        ++it->second;
    };

    for (const auto& n : g.nodes) {
        const auto expected = input_ports(n.kind);
        for (const auto& p : expected) {
            if (!n.inputs.contains(p)) {
                report(ViolationKind::UnwiredInput, n.name + "." + p, "input port is not wired");
            }
        }
        for (const auto& [port, ref] : n.inputs) {
            if (std::find(expected.begin(), expected.end(), port) == expected.end()) {
                report(ViolationKind::UnknownPort, n.name + "." + port,
                    std::string(to_string(n.kind)) + " has no input port '" + port + "'");
                continue;
            }
            consume(ref, n.name + "." + port);
        }
        if (n.kind == NodeKind::Source && n.input.empty()) {
            report(ViolationKind::UnwiredInput, n.name, "source names no input relation");
        }
    }
    for (const auto& s : g.sinks) {
        if (s.ports.empty()) {
            report(ViolationKind::UnwiredInput, s.name, "sink has no ports");
        }
        for (const auto& ref : s.ports) consume(ref, "sink " + s.name);
    }
    for (const auto& [ref, count] : consumers) {
        if (count == 0) {
            report(ViolationKind::UnconsumedPort, ref.str(), "output is neither consumed nor declared as a sink");
        } else if (count > 1) {
            report(ViolationKind::DuplicateConsumer, ref.str(),
                "output is consumed " + std::to_string(count) + " times");
        }
    }

    const Plan p = plan(g);
    for (std::size_t i : p.unplaced) {
        report(ViolationKind::Cycle, g.nodes[i].name, "stage lies on a cycle");
    }

    if (out.empty()) {
        std::string failing;
        try {
            infer(g, failing);
        } catch (const std::exception& e) {
            report(ViolationKind::SchemaMismatch, failing, e.what());
        }
    }
    for (const auto& r : g.reports) {
        for (const auto& s : r.sinks) {
            if (!sink_names.contains(s)) {
                report(ViolationKind::UnknownPort, "report " + r.title, "no sink named '" + s + "'");
            }
        }
    }
    return out;
}

std::map<PortRef, Schema> infer_schemas(const PipelineGraph& graph)
{
    std::string failing;
    try {
        return infer(expand_macros(graph), failing);
    } catch (const Error& e) {
        throw Error(e.code(), "stage '" + failing + "': " + e.what());
    }
}

std::map<Pid, std::string> RunAudit::owners() const
{
    std::map<Pid, std::string> out;
    for (const auto& s : sinks) {
        auto it = sink_pids.find(s.name);
        if (it == sink_pids.end()) continue;
        for (Pid p : it->second) out.emplace(p, s.name);
    }
    return out;
}

DataSpaceDescriptor measure_space(const MeasureDecl& decl, const std::vector<const Record*>& records)
{
    switch (decl.kind) {
    case MeasureKind::Count: return count_space(Schema::open_schema());
    case MeasureKind::Paccioli:
        return paccioli_space(Schema::open_schema({ Column { decl.field, ValueType::Decimal, {} } }), decl.field);
    case MeasureKind::SumPerUnit: {
        std::vector<Column> cols { Column { decl.field, ValueType::Decimal, {} } };
        if (!decl.unit_field.empty()) cols.push_back(Column { decl.unit_field, ValueType::Text, {} });
        const Schema carrier = Schema::open_schema(cols);
        std::set<std::string> units;
        for (const Record* r : records) units.insert(unit_label(*r, decl.field, decl.unit_field));
        std::vector<DataSpaceDescriptor> parts;
        for (const auto& u : units) parts.push_back(sum_space(carrier, decl.field, u, decl.unit_field));
        return parallel_product(parts, carrier);
    }
    }
    return count_space(Schema::open_schema());
}

RunResult run(const PipelineGraph& graph, const std::map<std::string, Stream>& inputs, const RunOptions& options)
{
    if (auto violations = validate(graph); !violations.empty()) {
        throw Error(ErrorCode::InvalidArgument, "invalid pipeline: " + violations.front().to_string());
    }
    const PipelineGraph g = expand_macros(graph);

    RunResult result;
    RunAudit& audit = result.audit;
    audit.sinks = g.sinks;
    audit.measures = g.measures;
    audit.reports = g.reports;

    for (const auto& n : g.nodes) {
        if (n.kind != NodeKind::Source) continue;
        auto it = inputs.find(n.input);
        if (it == inputs.end()) {
            throw Error(ErrorCode::MissingInput, "no input relation '" + n.input + "' for stage '" + n.name + "'");
        }
        if (!it->second.correct.schema.covers(*n.schema)) {
            throw Error(ErrorCode::SchemaMismatch, "input '" + n.input + "' does not match the schema of stage '" + n.name + "'");
        }
        audit.sources.emplace(n.input, it->second);
    }

    const std::vector<MeasureDecl> spaces = distinct_spaces(g.measures);
    std::map<PortRef, Stream> wires;

    struct Done {
        PortMap out;
        StageLedger ledger;
        double ms = 0;
    };
    auto stage = [&spaces](const Node& n, PortMap in) {
        const auto start = std::chrono::steady_clock::now();
        PortMap copy = in;
        Done d;
        d.out = execute(n, std::move(in));
        d.ledger = ledger_for(n, copy, d.out, spaces);
        d.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return d;
    };

    for (const auto& level : plan(g).levels) {
        std::vector<PortMap> ins;
        for (std::size_t i : level) {
            const Node& n = g.nodes[i];
            PortMap in;
            if (n.kind == NodeKind::Source) {
                in.emplace("in", inputs.at(n.input));
            } else {
                for (const auto& [port, ref] : n.inputs) {
                    auto w = wires.find(ref);
                    in.emplace(port, std::move(w->second));
                    wires.erase(w);
                }
            }
            ins.push_back(std::move(in));
        }

        std::vector<Done> done;
        if (options.parallel && level.size() > 1) {
            std::vector<std::future<Done>> futures;
            for (std::size_t k = 0; k < level.size(); ++k) {
                futures.push_back(std::async(std::launch::async, stage, std::cref(g.nodes[level[k]]), std::move(ins[k])));
            }
            for (auto& f : futures) done.push_back(f.get());
        } else {
            for (std::size_t k = 0; k < level.size(); ++k) done.push_back(stage(g.nodes[level[k]], std::move(ins[k])));
        }

        for (std::size_t k = 0; k < level.size(); ++k) {
            const Node& n = g.nodes[level[k]];
            if (n.kind == NodeKind::Source) {
                done[k].ledger.in = { { "input", pids(inputs.at(n.input)) } };
            }
            for (auto& [port, s] : done[k].out) wires.emplace(PortRef { n.name, port }, std::move(s));
            audit.timing_ms[n.name] = done[k].ms;
            audit.stages.push_back(std::move(done[k].ledger));
        }
    }

    for (const auto& l : audit.stages) {
        for (const auto& [port, ps] : l.out) {
            for (Pid p : ps) audit.trace[p].push_back(PortRef { l.stage, port });
        }
    }

    for (const auto& decl : g.sinks) {
        std::vector<Stream> parts;
        for (const auto& ref : decl.ports) {
            auto w = wires.find(ref);
            parts.push_back(std::move(w->second));
            wires.erase(w);
        }
        Stream s;
        if (decl.role == SinkRole::Report) {
            std::vector<const Relation*> rels;
            for (const auto& p : parts) rels.push_back(&p.correct);
            s.correct = Relation(sink_schema(rels));
        } else {
            s.correct = Relation(error_schema());
        }
        for (std::size_t i = 0; i < parts.size(); ++i) {
            append(s.errors, std::move(parts[i].errors));
            if (decl.role == SinkRole::Report) {
                append(s.correct, std::move(parts[i].correct));
            } else {
                const PortRef& ref = decl.ports[i];
                append(s.errors, to_errors(parts[i].correct, ref.node, decl.reason.empty() ? ref.port : decl.reason));
            }
        }
        audit.sink_pids[decl.name] = pids(s);
        result.sinks.emplace(decl.name, std::move(s));
    }
    return result;
}

RunResult run(const PipelineGraph& graph, const std::map<std::string, Relation>& inputs, const RunOptions& options)
{
    std::map<std::string, Stream> streams;
    for (const auto& [name, rel] : inputs) streams.emplace(name, Stream(rel));
    return run(graph, streams, options);
}

namespace {

std::string pid_list(const PidSet& s, std::size_t limit = 5)
{
    std::string out;
    std::size_t n = 0;
    for (Pid p : s) {
        if (n == limit) {
            out += ", ...";
            break;
        }
        if (n++ != 0) out += ", ";
        out += std::to_string(p);
    }
    return out;
}

PidSet minus(const PidSet& a, const PidSet& b)
{
    PidSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
}

/// Source records of `input` grouped by owning sink (unowned under "").
std::map<std::string, std::vector<const Record*>> by_owner(
    const RunAudit& audit, const std::string& input, const std::map<Pid, std::string>& owners)
{
    std::map<std::string, std::vector<const Record*>> out;
    auto it = audit.sources.find(input);
    if (it == audit.sources.end()) return out;
    for (const Record* r : all_records(it->second)) {
        std::string owner;
        for (Pid p : r->pids) {
            if (auto o = owners.find(p); o != owners.end()) {
                owner = o->second;
                break;
            }
        }
        out[owner].push_back(r);
    }
    return out;
}

} // namespace

Verdict conservation_check(const RunAudit& audit)
{
    Verdict v;
    auto fail = [&](std::string msg) {
        v.ok = false;
        v.violations.push_back(std::move(msg));
    };

    for (const auto& l : audit.stages) {
        const PidSet in = unite(l.in);
        const PidSet out = unite(l.out);
        if (auto lost = minus(in, out); !lost.empty()) {
            fail("stage '" + l.stage + "' lost pids {" + pid_list(lost) + "}");
        }
        if (auto extra = minus(out, in); !extra.empty()) {
            fail("stage '" + l.stage + "' produced unknown pids {" + pid_list(extra) + "}");
        }
        if (l.row_preserving && l.rows_in != l.rows_out) {
            fail("stage '" + l.stage + "' received " + std::to_string(l.rows_in) + " records but emitted "
                + std::to_string(l.rows_out));
        }
        for (const auto& b : l.balances) {
            if (!(b.in == b.out)) {
                fail("stage '" + l.stage + "' changed " + b.space + " from " + b.in.to_string() + " to "
                    + b.out.to_string());
            }
        }
    }

    std::map<Pid, std::string> source_of;
    for (const auto& [name, s] : audit.sources) {
        for (Pid p : pids(s)) source_of.emplace(p, name);
    }
    PidSet sunk;
    for (const auto& [name, ps] : audit.sink_pids) sunk.insert(ps.begin(), ps.end());
    for (const auto& [p, name] : source_of) {
        if (!sunk.contains(p)) {
            std::string last = "ingestion";
            if (auto t = audit.trace.find(p); t != audit.trace.end() && !t->second.empty()) last = t->second.back().str();
            fail("pid " + std::to_string(p) + " of input '" + name + "' reaches no sink (last seen at " + last + ")");
        }
    }
    for (Pid p : sunk) {
        if (!source_of.contains(p)) fail("sink holds pid " + std::to_string(p) + " that no input ingested");
    }

    const auto owners = audit.owners();
    for (const auto& decl : audit.measures) {
        auto src = audit.sources.find(decl.input);
        if (src == audit.sources.end()) {
            fail("measure " + decl.label() + " names unknown input '" + decl.input + "'");
            continue;
        }
        const auto records = all_records(src->second);
        const DataSpaceDescriptor space = measure_space(decl, records);
        const MonoidElement total = measure_records(space, records);
        MonoidElement fused = space.monoid.unit;
        for (const auto& [owner, recs] : by_owner(audit, decl.input, owners)) {
            if (!owner.empty()) fused = fuse(space, fused, measure_records(space, recs));
        }
        if (!(fused == total)) {
            fail("measure " + decl.label() + " of input '" + decl.input + "': sinks fuse to " + fused.to_string()
                + ", source measures " + total.to_string());
        }
    }
    return v;
}

Dashboard render_dashboard(const RunResult& result)
{
    const RunAudit& audit = result.audit;
    Dashboard d;
    PidSet ingested;
    for (const auto& [name, s] : audit.sources) {
        const PidSet ps = pids(s);
        ingested.insert(ps.begin(), ps.end());
    }
    d.total_ingested = ingested.size();

    const auto owners = audit.owners();
    std::map<std::string, std::map<std::string, std::vector<const Record*>>> owned;
    for (const auto& [name, s] : audit.sources) owned[name] = by_owner(audit, name, owners);

    for (const auto& decl : audit.sinks) {
        const Stream& s = result.sinks.at(decl.name);
        SinkSummary sum;
        sum.name = decl.name;
        sum.role = decl.role;
        sum.rows = s.correct.size() + s.errors.size();
        sum.error_rows = s.errors.size();
        sum.distinct_pids = audit.sink_pids.at(decl.name).size();
        sum.attributed_pids = static_cast<std::size_t>(std::count_if(
            owners.begin(), owners.end(), [&](const auto& kv) { return kv.second == decl.name; }));
        for (const auto& m : audit.measures) {
            const auto& src = owned[m.input];
            auto it = src.find(decl.name);
            const std::vector<const Record*> recs = it == src.end() ? std::vector<const Record*> {} : it->second;
            const auto space = measure_space(m, recs);
            sum.measures.emplace_back(m.input + " " + m.label(), measure_records(space, recs).to_string());
        }
        d.sinks.push_back(std::move(sum));
    }

    std::map<std::pair<std::string, std::string>, std::vector<const Record*>> groups;
    for (const auto& decl : audit.sinks) {
        for (const auto& r : result.sinks.at(decl.name).errors.rows) {
            auto note = [&](const char* key) {
                auto it = r.notes.find(key);
                return it == r.notes.end() ? std::string("(unstamped)") : it->second.to_string();
            };
            groups[{ note(kErrorStage), note(kErrorReason) }].push_back(&r);
        }
    }
    const auto sums = distinct_spaces(audit.measures);
    for (const auto& [key, recs] : groups) {
        ErrorGroup g { key.first, key.second, static_cast<std::int64_t>(recs.size()), {}, {} };
        for (const Record* r : recs) g.pids.insert(r->pids.begin(), r->pids.end());
        for (const auto& m : sums) {
            if (m.kind != MeasureKind::SumPerUnit) continue;
            std::map<std::string, Decimal> by_unit;
            for (const Record* r : recs) {
                const FieldValue* v = r->find(m.field);
                if (v == nullptr || !v->numeric()) continue;
                by_unit[unit_label(*r, m.field, m.unit_field)] += *v->numeric();
            }
            for (const auto& [unit, total] : by_unit) {
                g.sums.emplace_back("sum(" + m.field + ")" + (unit.empty() ? "" : "[" + unit + "]"), total.to_string());
            }
        }
        d.errors.push_back(std::move(g));
    }

    for (const auto& rep : audit.reports) {
        ReportListing listing { rep.title, {}, {} };
        PidSet reached;
        for (const auto& name : rep.sinks) {
            auto it = result.sinks.find(name);
            if (it == result.sinks.end()) continue;
            const PidSet ps = pids(it->second.correct);
            reached.insert(ps.begin(), ps.end());
        }
        auto src = audit.sources.find(rep.input);
        if (src != audit.sources.end()) {
            for (const Record* r : all_records(src->second)) {
                const FieldValue* label = r->find(rep.label_field);
                const std::string name = label ? label->to_string() : "#" + std::to_string(r->pids.front());
                const bool hit = std::any_of(r->pids.begin(), r->pids.end(), [&](Pid p) { return reached.contains(p); });
                (hit ? listing.accounted : listing.unaccounted).push_back(name);
            }
        }
        d.reports.push_back(std::move(listing));
    }
    return d;
}

std::string dashboard_text(const Dashboard& d)
{
    std::ostringstream os;
    os << "Ingested records: " << d.total_ingested << "\n\n";
    os << std::left << std::setw(28) << "Sink" << std::setw(8) << "Role" << std::right << std::setw(8) << "Rows"
       << std::setw(8) << "Errors" << std::setw(8) << "Pids" << std::setw(8) << "Owned" << "\n";
    std::size_t owned = 0;
    for (const auto& s : d.sinks) {
        os << std::left << std::setw(28) << s.name << std::setw(8) << to_string(s.role) << std::right << std::setw(8)
           << s.rows << std::setw(8) << s.error_rows << std::setw(8) << s.distinct_pids << std::setw(8)
           << s.attributed_pids << "\n";
        for (const auto& [label, value] : s.measures) os << "    " << label << " = " << value << "\n";
        owned += s.attributed_pids;
    }
    os << std::left << std::setw(28) << "total owned" << std::right << std::setw(40) << owned << "\n";

    os << "\nError groups\n";
    if (d.errors.empty()) os << "  (none)\n";
    for (const auto& g : d.errors) {
        os << "  " << std::left << std::setw(26) << g.stage << std::setw(32) << g.reason << std::right << std::setw(6)
           << g.count << "  pids {" << pid_list(g.pids, 12) << "}\n";
        for (const auto& [label, value] : g.sums) os << "      " << label << " = " << value << "\n";
    }

    for (const auto& r : d.reports) {
        auto join = [](const std::vector<std::string>& xs) {
            std::string out;
            for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + xs[i];
            return out.empty() ? std::string("(none)") : out;
        };
        os << "\nReport: " << r.title << "\n";
        os << "  accounted:   " << join(r.accounted) << "\n";
        os << "  unaccounted: " << join(r.unaccounted) << "\n";
    }
    return os.str();
}

} // namespace dspace
