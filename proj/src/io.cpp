#include "dspace/io.hpp"

#include "dspace/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dspace {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool cell_started = false;
    auto end_cell = [&] {
        row.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&] {
        end_cell();
        if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!cell_started || cell.empty()) {
                quoted = true;
                cell_started = true;
            } else {
                cell += c;
            }
            break;
        case ',': end_cell(); break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_row();
            break;
        case '\n': end_row(); break;
        default:
            cell += c;
            cell_started = true;
        }
    }
    if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted CSV field");
    if (cell_started || !cell.empty() || !row.empty()) end_row();
    return rows;
}

std::string csv_escape(std::string_view cell)
{
    if (cell.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string write_csv(const std::vector<std::vector<std::string>>& rows)
{
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i != 0) out += ',';
            out += csv_escape(row[i]);
        }
        out += '\n';
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool numeric_char(char c) { return (c >= '0' && c <= '9') || c == '.' || c == ',' || c == '-' || c == '+'; }

} // namespace

std::optional<FieldValue> parse_cell(
    std::string_view raw, const Column& column, std::string_view unit_cell, const std::vector<std::string>& sentinels)
{
    const std::string_view text = trim(raw);
    for (const auto& s : sentinels) {
        if (text == s) return FieldValue::missing(s.empty() ? "blank" : s);
    }
    switch (column.type) {
    case ValueType::Text: return FieldValue(std::string(text));
    case ValueType::Integer: {
        auto d = Decimal::parse(text);
        if (!d || !d->is_integral()) return std::nullopt;
        return FieldValue(d->truncated());
    }
    case ValueType::Decimal: {
        auto d = Decimal::parse(text);
        if (!d) return std::nullopt;
        return FieldValue(*d);
    }
    case ValueType::Quantity: {
        std::size_t b = 0;
        while (b < text.size() && !numeric_char(text[b])) ++b;
        std::size_t e = text.size();
        while (e > b && !numeric_char(text[e - 1])) --e;
        auto d = Decimal::parse(trim(text.substr(b, e - b)));
        if (!d) return std::nullopt;
        std::string unit = std::string(trim(text.substr(0, b))) + std::string(trim(text.substr(e)));
        if (unit.empty()) unit = std::string(trim(unit_cell));
        if (unit.empty()) unit = column.unit;
        if (unit.empty()) return std::nullopt;
        return FieldValue::quantity(*d, unit);
    }
    }
    return std::nullopt;
}

CsvSchema csv_schema_from_json(const json& j)
{
    try {
        CsvSchema out;
        std::vector<Column> cols;
        for (const auto& c : j.at("columns")) {
            Column col;
            col.name = c.at("name").get<std::string>();
            const std::string type = c.value("type", "text");
            auto t = parse_value_type(type);
            if (!t) throw Error(ErrorCode::ParseError, "column '" + col.name + "' has unknown type '" + type + "'");
            col.type = *t;
            col.unit = c.value("unit", "");
            if (c.contains("unit_column")) out.unit_columns[col.name] = c.at("unit_column").get<std::string>();
            cols.push_back(std::move(col));
        }
        out.schema = Schema(std::move(cols));
        for (const auto& [name, unit_col] : out.unit_columns) {
            if (!out.schema.has(unit_col)) {
                throw Error(ErrorCode::ParseError, "unit column '" + unit_col + "' of '" + name + "' is not declared");
            }
        }
        if (j.contains("missing")) out.sentinels = j.at("missing").get<std::vector<std::string>>();
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("schema document: ") + e.what());
    }
}

json to_json(const CsvSchema& s)
{
    json cols = json::array();
    for (const auto& c : s.schema.columns()) {
        json col { { "name", c.name }, { "type", to_string(c.type) } };
        if (!c.unit.empty()) col["unit"] = c.unit;
        if (auto it = s.unit_columns.find(c.name); it != s.unit_columns.end()) col["unit_column"] = it->second;
        cols.push_back(std::move(col));
    }
    return json { { "columns", cols }, { "missing", s.sentinels } };
}

Stream ingest_csv(const std::string& name, std::string_view text, const CsvSchema& cs, PidAllocator& pids)
{
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::ParseError, "input '" + name + "' has no header row");
    const auto& header = rows.front();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index.emplace(std::string(trim(header[i])), i);
    for (const auto& c : cs.schema.columns()) {
        if (!index.contains(c.name)) {
            throw Error(ErrorCode::ParseError, "input '" + name + "' has no column '" + c.name + "'");
        }
    }
    if (index.size() != cs.schema.size()) {
        throw Error(ErrorCode::ParseError, "input '" + name + "' header does not match its schema");
    }

    Stream out(Relation(cs.schema));
    const std::string stage = "ingest:" + name;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        Record rec;
        rec.pids = { pids.next() };
        std::string failure;
        if (cells.size() != header.size()) {
            failure = "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size());
        }
        for (const auto& c : cs.schema.columns()) {
            const std::size_t i = index.at(c.name);
            const std::string raw = i < cells.size() ? cells[i] : std::string();
            if (!failure.empty()) {
                rec.relevant.emplace(c.name, FieldValue(raw));
                continue;
            }
            std::string unit_cell;
            if (auto u = cs.unit_columns.find(c.name); u != cs.unit_columns.end()) unit_cell = cells[index.at(u->second)];
            auto v = parse_cell(raw, c, unit_cell, cs.sentinels);
            if (!v) {
                failure = "cannot parse " + c.name + " as " + std::string(to_string(c.type));
                rec.relevant.clear();
                for (const auto& c2 : cs.schema.columns()) {
                    const std::size_t k = index.at(c2.name);
                    rec.relevant.emplace(c2.name, FieldValue(k < cells.size() ? cells[k] : std::string()));
                }
                break;
            }
            rec.relevant.emplace(c.name, std::move(*v));
        }
        if (failure.empty()) {
            out.correct.rows.push_back(std::move(rec));
        } else {
            rec.notes.insert_or_assign(kErrorStage, FieldValue(stage));
            rec.notes.insert_or_assign(kErrorReason, FieldValue(failure));
            out.errors.rows.push_back(std::move(rec));
        }
    }
    return out;
}

namespace {

std::string pid_text(const PidList& pids)
{
    std::string out;
    for (std::size_t i = 0; i < pids.size(); ++i) out += (i ? " " : "") + std::to_string(pids[i]);
    return out;
}

// Missing cells are written as their reason so that the default sentinels
// read back as the same Missing value.
std::string cell_text(const FieldValue& v)
{
    if (!v.is_missing()) return v.to_string();
    return v.as_missing().reason == "blank" ? std::string() : v.as_missing().reason;
}

std::string cell_text(const FieldValue* v) { return v == nullptr ? std::string() : cell_text(*v); }

} // namespace

std::string relation_csv(const Relation& rel)
{
    std::vector<std::string> cols = rel.schema.names();
    std::set<std::string> known(cols.begin(), cols.end());
    for (const auto& r : rel.rows) {
        for (const auto& [k, v] : r.relevant) {
            if (known.insert(k).second) cols.push_back(k);
        }
    }
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> header = cols;
    header.emplace_back("pids");
    out.push_back(std::move(header));
    for (const auto& r : rel.rows) {
        std::vector<std::string> line;
        for (const auto& c : cols) line.push_back(cell_text(r.find(c)));
        line.push_back(pid_text(r.pids));
        out.push_back(std::move(line));
    }
    return write_csv(out);
}

std::string errors_csv(const Relation& errors)
{
    std::vector<std::string> cols;
    std::set<std::string> known;
    std::vector<std::string> notes { kErrorStage, kErrorReason };
    std::set<std::string> known_notes(notes.begin(), notes.end());
    for (const auto& r : errors.rows) {
        for (const auto& [k, v] : r.relevant) {
            if (known.insert(k).second) cols.push_back(k);
        }
        for (const auto& [k, v] : r.notes) {
            if (known_notes.insert(k).second) notes.push_back(k);
        }
    }
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> header = notes;
    header.insert(header.end(), cols.begin(), cols.end());
    header.emplace_back("pids");
    out.push_back(std::move(header));
    for (const auto& r : errors.rows) {
        std::vector<std::string> line;
        for (const auto& n : notes) {
            auto it = r.notes.find(n);
            line.push_back(it == r.notes.end() ? std::string() : cell_text(it->second));
        }
        for (const auto& c : cols) line.push_back(cell_text(r.find(c)));
        line.push_back(pid_text(r.pids));
        out.push_back(std::move(line));
    }
    return write_csv(out);
}

// ---------------------------------------------------------------------------
// Values, expressions, predicates
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void bad(const std::string& what, const json& j)
{
    throw Error(ErrorCode::ParseError, what + ": " + j.dump());
}

Decimal decimal_from(const json& j)
{
    std::optional<Decimal> d;
    if (j.is_string()) d = Decimal::parse(j.get<std::string>());
    if (j.is_number_integer()) d = Decimal::from_int(j.get<std::int64_t>());
    if (j.is_number_float()) d = Decimal::parse(j.dump());
    if (!d) bad("not a decimal", j);
    return *d;
}

} // namespace

json to_json(const FieldValue& v)
{
    if (v.is_integer()) return v.as_integer();
    if (v.is_text()) return v.as_text();
    if (v.is_decimal()) return json { { "decimal", v.as_decimal().to_string() } };
    if (v.is_quantity()) return json { { "quantity", v.as_quantity().amount.to_string() }, { "unit", v.as_quantity().unit } };
    return json { { "missing", v.as_missing().reason } };
}

FieldValue value_from_json(const json& j)
{
    if (j.is_number_integer()) return FieldValue(j.get<std::int64_t>());
    if (j.is_number_float()) return FieldValue(decimal_from(j));
    if (j.is_string()) return FieldValue(j.get<std::string>());
    if (j.is_object()) {
        if (j.contains("decimal")) return FieldValue(decimal_from(j.at("decimal")));
        if (j.contains("integer")) return FieldValue(j.at("integer").get<std::int64_t>());
        if (j.contains("quantity")) return FieldValue::quantity(decimal_from(j.at("quantity")), j.at("unit").get<std::string>());
        if (j.contains("missing")) return FieldValue::missing(j.at("missing").get<std::string>());
    }
    bad("not a value", j);
}

json to_json(const ValueExpr& e)
{
    switch (e.op) {
    case ValueExpr::Op::Field: return json { { "field", e.field } };
    case ValueExpr::Op::Const: return json { { "const", to_json(e.constant) } };
    default: {
        const char* op = e.op == ValueExpr::Op::Add ? "add" : e.op == ValueExpr::Op::Sub ? "sub" : "mul";
        return json { { "op", op }, { "args", { to_json(e.args[0]), to_json(e.args[1]) } } };
    }
    }
}

ValueExpr value_expr_from_json(const json& j)
{
    if (j.is_string()) return ValueExpr::ref(j.get<std::string>());
    if (!j.is_object()) bad("not an expression", j);
    if (j.contains("field")) return ValueExpr::ref(j.at("field").get<std::string>());
    if (j.contains("const")) return ValueExpr::lit(value_from_json(j.at("const")));
    const std::string op = j.at("op").get<std::string>();
    const auto& args = j.at("args");
    if (args.size() != 2) bad("arithmetic takes two arguments", j);
    ValueExpr a = value_expr_from_json(args[0]);
    ValueExpr b = value_expr_from_json(args[1]);
    if (op == "add") return ValueExpr::add(std::move(a), std::move(b));
    if (op == "sub") return ValueExpr::sub(std::move(a), std::move(b));
    if (op == "mul") return ValueExpr::mul(std::move(a), std::move(b));
    bad("unknown arithmetic op", j);
}

namespace {

constexpr std::pair<Predicate::Op, const char*> kPredOps[] = {
    { Predicate::Op::True, "true" },
    { Predicate::Op::False, "false" },
    { Predicate::Op::Present, "present" },
    { Predicate::Op::Eq, "eq" },
    { Predicate::Op::Ne, "ne" },
    { Predicate::Op::Lt, "lt" },
    { Predicate::Op::Le, "le" },
    { Predicate::Op::Gt, "gt" },
    { Predicate::Op::Ge, "ge" },
    { Predicate::Op::In, "in" },
    { Predicate::Op::And, "and" },
    { Predicate::Op::Or, "or" },
    { Predicate::Op::Not, "not" },
};

} // namespace

json to_json(const Predicate& p)
{
    std::string op;
    for (const auto& [k, name] : kPredOps) {
        if (k == p.op) op = name;
    }
    json j { { "op", op } };
    switch (p.op) {
    case Predicate::Op::True:
    case Predicate::Op::False: break;
    case Predicate::Op::Present: j["expr"] = to_json(p.lhs); break;
    case Predicate::Op::In: {
        j["expr"] = to_json(p.lhs);
        json values = json::array();
        for (const auto& v : p.values) values.push_back(to_json(v));
        j["values"] = values;
        break;
    }
    case Predicate::Op::And:
    case Predicate::Op::Or:
    case Predicate::Op::Not: {
        json args = json::array();
        for (const auto& a : p.args) args.push_back(to_json(a));
        j["args"] = args;
        break;
    }
    default:
        j["left"] = to_json(p.lhs);
        j["right"] = to_json(p.rhs);
        break;
    }
    return j;
}

Predicate predicate_from_json(const json& j)
{
    if (!j.is_object()) bad("not a predicate", j);
    const std::string op = j.at("op").get<std::string>();
    std::optional<Predicate::Op> kind;
    for (const auto& [k, name] : kPredOps) {
        if (op == name) kind = k;
    }
    if (!kind) bad("unknown predicate op", j);
    auto subject = [&] { return value_expr_from_json(j.contains("field") ? j.at("field") : j.at("expr")); };
    Predicate p;
    p.op = *kind;
    switch (*kind) {
    case Predicate::Op::True:
    case Predicate::Op::False: break;
    case Predicate::Op::Present: p.lhs = subject(); break;
    case Predicate::Op::In:
        p.lhs = subject();
        for (const auto& v : j.at("values")) p.values.push_back(value_from_json(v));
        break;
    case Predicate::Op::And:
    case Predicate::Op::Or:
    case Predicate::Op::Not:
        for (const auto& a : j.at("args")) p.args.push_back(predicate_from_json(a));
        if (*kind == Predicate::Op::Not && p.args.size() != 1) bad("not takes one argument", j);
        break;
    default:
        p.lhs = value_expr_from_json(j.at("left"));
        p.rhs = j.at("right").is_object() && (j.at("right").contains("field") || j.at("right").contains("op") || j.at("right").contains("const"))
            ? value_expr_from_json(j.at("right"))
            : ValueExpr::lit(value_from_json(j.at("right")));
        break;
    }
    return p;
}

json to_json(const Schema& s)
{
    json cols = json::array();
    for (const auto& c : s.columns()) {
        json col { { "name", c.name }, { "type", to_string(c.type) } };
        if (!c.unit.empty()) col["unit"] = c.unit;
        cols.push_back(std::move(col));
    }
    return json { { "columns", cols } };
}

Schema schema_from_json(const json& j) { return csv_schema_from_json(j).schema; }

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

namespace {

json pairs_json(const std::vector<std::pair<std::string, std::string>>& ps)
{
    json out = json::array();
    for (const auto& [a, b] : ps) out.push_back({ a, b });
    return out;
}

std::vector<std::pair<std::string, std::string>> pairs_from(const json& j)
{
    std::vector<std::pair<std::string, std::string>> out;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) out.emplace_back(k, v.get<std::string>());
        return out;
    }
    for (const auto& p : j) {
        if (p.is_string()) {
            out.emplace_back(p.get<std::string>(), p.get<std::string>());
        } else {
            out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        }
    }
    return out;
}

json exprs_json(const std::vector<std::pair<std::string, ValueExpr>>& es)
{
    json out = json::array();
    for (const auto& [name, e] : es) out.push_back({ { "name", name }, { "expr", to_json(e) } });
    return out;
}

std::vector<std::pair<std::string, ValueExpr>> exprs_from(const json& j)
{
    std::vector<std::pair<std::string, ValueExpr>> out;
    for (const auto& e : j) out.emplace_back(e.at("name").get<std::string>(), value_expr_from_json(e.at("expr")));
    return out;
}

json specs_json(const std::vector<AggSpec>& specs)
{
    json out = json::array();
    for (const auto& s : specs) {
        json spec { { "field", s.field }, { "kind", to_string(s.kind) } };
        if (!s.as.empty()) spec["as"] = s.as;
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<AggSpec> specs_from(const json& j)
{
    std::vector<AggSpec> out;
    for (const auto& s : j) {
        const std::string kind = s.value("kind", "sum");
        auto k = parse_agg_kind(kind);
        if (!k) bad("unknown aggregate kind", s);
        out.push_back(AggSpec { s.at("field").get<std::string>(), *k, s.value("as", "") });
    }
    return out;
}

PortRef port_from(const json& j)
{
    auto p = PortRef::parse(j.get<std::string>());
    if (!p) bad("port references are written node.port", j);
    return *p;
}

} // namespace

json to_json(const PipelineGraph& g)
{
    json nodes = json::array();
    for (const auto& n : g.nodes) {
        json j { { "name", n.name }, { "kind", to_string(n.kind) } };
        if (!n.inputs.empty()) {
            json in = json::object();
            for (const auto& [port, ref] : n.inputs) in[port] = ref.str();
            j["inputs"] = in;
        }
        switch (n.kind) {
        case NodeKind::Source:
            j["input"] = n.input;
            if (n.schema) j["schema"] = to_json(*n.schema);
            break;
        case NodeKind::Partition: j["predicate"] = to_json(n.predicate); break;
        case NodeKind::NullPartition:
        case NodeKind::Project: j["columns"] = n.columns; break;
        case NodeKind::OuterJoin:
        case NodeKind::Lookup: j["on"] = pairs_json(n.on); break;
        case NodeKind::Rename: j["mapping"] = pairs_json(n.mapping); break;
        case NodeKind::Fmap:
        case NodeKind::Totalize: j["exprs"] = exprs_json(n.exprs); break;
        case NodeKind::Emap: {
            json notes = json::object();
            for (const auto& [k, v] : n.notes) notes[k] = to_json(v);
            j["notes"] = notes;
            break;
        }
        case NodeKind::Aggregate:
            j["group_by"] = n.group_by;
            j["specs"] = specs_json(n.specs);
            break;
        case NodeKind::TaggedUnion:
        case NodeKind::Cartesian:
            if (!n.label.empty()) j["label"] = n.label;
            break;
        case NodeKind::Divert:
            if (!n.reason.empty()) j["reason"] = n.reason;
            break;
        case NodeKind::Pad: {
            j["pad"] = to_json(Schema(n.pad)).at("columns");
            if (!n.columns.empty()) j["columns"] = n.columns;
            if (!n.reason.empty()) j["reason"] = n.reason;
            break;
        }
        default: break;
        }
        nodes.push_back(std::move(j));
    }
    json sinks = json::array();
    for (const auto& s : g.sinks) {
        json ports = json::array();
        for (const auto& p : s.ports) ports.push_back(p.str());
        json j { { "name", s.name }, { "role", to_string(s.role) }, { "ports", ports } };
        if (!s.reason.empty()) j["reason"] = s.reason;
        sinks.push_back(std::move(j));
    }
    json doc { { "nodes", nodes }, { "sinks", sinks } };
    if (!g.measures.empty()) {
        json ms = json::array();
        for (const auto& m : g.measures) {
            json j { { "input", m.input }, { "kind", to_string(m.kind) } };
            if (!m.field.empty()) j["field"] = m.field;
            if (!m.unit_field.empty()) j["unit_field"] = m.unit_field;
            ms.push_back(std::move(j));
        }
        doc["measures"] = ms;
    }
    if (!g.reports.empty()) {
        json rs = json::array();
        for (const auto& r : g.reports) {
            rs.push_back({ { "title", r.title }, { "input", r.input }, { "label_field", r.label_field }, { "sinks", r.sinks } });
        }
        doc["reports"] = rs;
    }
    return doc;
}

PipelineGraph pipeline_from_json(const json& doc)
{
    PipelineGraph g;
    std::string context = "pipeline";
    try {
        for (const auto& j : doc.at("nodes")) {
            Node n;
            n.name = j.at("name").get<std::string>();
            context = "stage '" + n.name + "'";
            const std::string kind = j.at("kind").get<std::string>();
            auto k = parse_node_kind(kind);
            if (!k) throw Error(ErrorCode::ParseError, "unknown kind '" + kind + "'");
            n.kind = *k;
            if (j.contains("inputs")) {
                for (const auto& [port, ref] : j.at("inputs").items()) n.inputs.emplace(port, port_from(ref));
            }
            n.input = j.value("input", n.kind == NodeKind::Source ? n.name : "");
            if (j.contains("schema")) n.schema = schema_from_json(j.at("schema"));
            if (j.contains("predicate")) n.predicate = predicate_from_json(j.at("predicate"));
            if (j.contains("columns")) n.columns = j.at("columns").get<std::vector<std::string>>();
            if (j.contains("on")) n.on = pairs_from(j.at("on"));
            if (j.contains("mapping")) n.mapping = pairs_from(j.at("mapping"));
            if (j.contains("exprs")) n.exprs = exprs_from(j.at("exprs"));
            if (j.contains("notes")) {
                for (const auto& [key, v] : j.at("notes").items()) n.notes.emplace(key, value_from_json(v));
            }
            if (j.contains("group_by")) n.group_by = j.at("group_by").get<std::vector<std::string>>();
            if (j.contains("specs")) n.specs = specs_from(j.at("specs"));
            n.label = j.value("label", "");
            n.reason = j.value("reason", "");
            if (j.contains("pad")) n.pad = schema_from_json(json { { "columns", j.at("pad") } }).columns();
            g.nodes.push_back(std::move(n));
        }
        context = "sinks";
        for (const auto& j : doc.value("sinks", json::array())) {
            SinkDecl s;
            s.name = j.at("name").get<std::string>();
            context = "sink '" + s.name + "'";
            const std::string role = j.value("role", "report");
            if (role != "report" && role != "error") throw Error(ErrorCode::ParseError, "unknown role '" + role + "'");
            s.role = role == "report" ? SinkRole::Report : SinkRole::Error;
            for (const auto& p : j.at("ports")) s.ports.push_back(port_from(p));
            s.reason = j.value("reason", "");
            g.sinks.push_back(std::move(s));
        }
        context = "measures";
        for (const auto& j : doc.value("measures", json::array())) {
            MeasureDecl m;
            m.input = j.at("input").get<std::string>();
            const std::string kind = j.at("kind").get<std::string>();
            auto k = parse_measure_kind(kind);
            if (!k) throw Error(ErrorCode::ParseError, "unknown measure kind '" + kind + "'");
            m.kind = *k;
            m.field = j.value("field", "");
            m.unit_field = j.value("unit_field", "");
            if (m.kind != MeasureKind::Count && m.field.empty()) {
                throw Error(ErrorCode::ParseError, "measure " + kind + " needs a field");
            }
            g.measures.push_back(std::move(m));
        }
        context = "reports";
        for (const auto& j : doc.value("reports", json::array())) {
            g.reports.push_back(ReportDecl { j.at("title").get<std::string>(), j.at("input").get<std::string>(),
                j.at("label_field").get<std::string>(), j.at("sinks").get<std::vector<std::string>>() });
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, context + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ParseError && e.code() != ErrorCode::InvalidArgument) throw;
        throw Error(ErrorCode::ParseError, context + ": " + e.what());
    }
    return g;
}

std::map<std::string, InputFiles> input_files(const json& doc, const PipelineGraph& g)
{
    std::map<std::string, InputFiles> out;
    for (const auto& n : g.nodes) {
        if (n.kind != NodeKind::Source) continue;
        InputFiles f { n.input + ".csv", n.input + ".schema.json" };
        if (doc.contains("inputs") && doc.at("inputs").contains(n.input)) {
            const auto& j = doc.at("inputs").at(n.input);
            f.csv = j.value("csv", f.csv);
            f.schema = j.value("schema", f.schema);
        }
        out.emplace(n.input, f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relational-algebra expressions
// ---------------------------------------------------------------------------

json to_json(const RAExpr& e)
{
    json j { { "kind", to_string(e.kind) } };
    switch (e.kind) {
    case RAExpr::Kind::Base: j["name"] = e.name; break;
    case RAExpr::Kind::Project: j["fields"] = e.fields; break;
    case RAExpr::Kind::Select: j["predicate"] = to_json(e.predicate); break;
    case RAExpr::Kind::Rename: j["mapping"] = pairs_json(e.pairs); break;
    case RAExpr::Kind::OuterJoin: j["on"] = pairs_json(e.pairs); break;
    case RAExpr::Kind::Aggregate:
        j["group_by"] = e.group_by;
        j["specs"] = specs_json(e.specs);
        break;
    case RAExpr::Kind::Map: j["exprs"] = exprs_json(e.exprs); break;
    default: break;
    }
    if (!e.args.empty()) {
        json args = json::array();
        for (const auto& a : e.args) args.push_back(to_json(a));
        j["args"] = args;
    }
    return j;
}

RAExpr ra_from_json(const json& j)
{
    try {
        const std::string kind = j.at("kind").get<std::string>();
        auto k = parse_ra_kind(kind);
        if (!k) bad("unknown expression kind", j);
        RAExpr e;
        e.kind = *k;
        e.name = j.value("name", "");
        if (j.contains("fields")) e.fields = j.at("fields").get<std::vector<std::string>>();
        if (j.contains("predicate")) e.predicate = predicate_from_json(j.at("predicate"));
        if (j.contains("mapping")) e.pairs = pairs_from(j.at("mapping"));
        if (j.contains("on")) e.pairs = pairs_from(j.at("on"));
        if (j.contains("group_by")) e.group_by = j.at("group_by").get<std::vector<std::string>>();
        if (j.contains("specs")) e.specs = specs_from(j.at("specs"));
        if (j.contains("exprs")) e.exprs = exprs_from(j.at("exprs"));
        for (const auto& a : j.value("args", json::array())) e.args.push_back(ra_from_json(a));
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ParseError, std::string("expression: ") + ex.what());
    }
}

// ---------------------------------------------------------------------------
// Dashboard and audit
// ---------------------------------------------------------------------------

namespace {

json pid_array(const PidSet& s) { return json(std::vector<Pid>(s.begin(), s.end())); }

json pairs_object(const std::vector<std::pair<std::string, std::string>>& ps)
{
    json out = json::object();
    for (const auto& [k, v] : ps) out[k] = v;
    return out;
}

} // namespace

json to_json(const Dashboard& d)
{
    json sinks = json::array();
    for (const auto& s : d.sinks) {
        sinks.push_back({ { "name", s.name }, { "role", to_string(s.role) }, { "rows", s.rows },
            { "error_rows", s.error_rows }, { "distinct_pids", s.distinct_pids }, { "owned_pids", s.attributed_pids },
            { "measures", pairs_object(s.measures) } });
    }
    json errors = json::array();
    for (const auto& g : d.errors) {
        errors.push_back({ { "stage", g.stage }, { "reason", g.reason }, { "count", g.count },
            { "pids", pid_array(g.pids) }, { "sums", pairs_object(g.sums) } });
    }
    json reports = json::array();
    for (const auto& r : d.reports) {
        reports.push_back({ { "title", r.title }, { "accounted", r.accounted }, { "unaccounted", r.unaccounted } });
    }
    return json { { "ingested", d.total_ingested }, { "sinks", sinks }, { "errors", errors }, { "reports", reports } };
}

json to_json(const RunAudit& a)
{
    json sources = json::object();
    for (const auto& [name, s] : a.sources) {
        sources[name] = { { "records", s.correct.size() + s.errors.size() }, { "ingestion_errors", s.errors.size() },
            { "pids", pid_array(pids(s)) } };
    }
    json stages = json::array();
    for (const auto& l : a.stages) {
        json in = json::object();
        for (const auto& [p, ps] : l.in) in[p] = pid_array(ps);
        json out = json::object();
        for (const auto& [p, ps] : l.out) out[p] = pid_array(ps);
        json balances = json::array();
        for (const auto& b : l.balances) {
            balances.push_back({ { "space", b.space }, { "in", b.in.to_string() }, { "out", b.out.to_string() } });
        }
        stages.push_back({ { "stage", l.stage }, { "kind", to_string(l.kind) }, { "rows_in", l.rows_in },
            { "rows_out", l.rows_out }, { "row_preserving", l.row_preserving }, { "in", in }, { "out", out },
            { "balances", balances } });
    }
    json sinks = json::array();
    for (const auto& s : a.sinks) {
        auto it = a.sink_pids.find(s.name);
        sinks.push_back({ { "name", s.name }, { "role", to_string(s.role) },
            { "pids", it == a.sink_pids.end() ? json::array() : pid_array(it->second) } });
    }
    json trace = json::object();
    for (const auto& [pid, visits] : a.trace) {
        json v = json::array();
        for (const auto& p : visits) v.push_back(p.str());
        trace[std::to_string(pid)] = v;
    }
    const Verdict verdict = conservation_check(a);
    return json { { "sources", sources }, { "stages", stages }, { "sinks", sinks }, { "trace", trace },
        { "conservation", { { "ok", verdict.ok }, { "violations", verdict.violations } } } };
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingInput, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace dspace
