#include "dspace/cli.hpp"

#include "dspace/error.hpp"

#include <functional>
#include <ostream>
#include <set>

namespace dspace::cli {

namespace fs = std::filesystem;

std::optional<Format> parse_format(std::string_view text)
{
    if (text == "text") return Format::Text;
    if (text == "structured" || text == "json") return Format::Structured;
    return std::nullopt;
}

namespace {

json parse_json_file(const fs::path& path)
{
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

fs::path data_dir_for(const fs::path& pipeline, const fs::path& data)
{
    if (!data.empty()) return data;
    return pipeline.has_parent_path() ? pipeline.parent_path() : fs::path(".");
}

} // namespace

LoadedPipeline load_pipeline(const fs::path& pipeline_file, const fs::path& data_dir)
{
    LoadedPipeline p;
    p.document = parse_json_file(pipeline_file);
    p.graph = pipeline_from_json(p.document);
    p.files = input_files(p.document, p.graph);
    for (auto& n : p.graph.nodes) {
        if (n.kind != NodeKind::Source) continue;
        const InputFiles& f = p.files.at(n.input);
        if (!p.schemas.contains(n.input)) {
            const fs::path sidecar = data_dir / f.schema;
            if (n.schema && !fs::exists(sidecar)) {
                p.schemas.emplace(n.input, CsvSchema { *n.schema });
            } else {
                if (!fs::exists(sidecar)) {
                    throw Error(ErrorCode::MissingInput,
                        "source '" + n.name + "' has no inline schema and no sidecar " + sidecar.string());
                }
                p.schemas.emplace(n.input, csv_schema_from_json(parse_json_file(sidecar)));
            }
        }
        if (!n.schema) n.schema = p.schemas.at(n.input).schema;
    }
    return p;
}

std::map<std::string, Stream> load_inputs(const LoadedPipeline& p, const fs::path& data_dir)
{
    std::map<std::string, Stream> inputs;
    PidAllocator pids;
    for (const auto& [name, files] : p.files) {
        inputs.emplace(name, ingest_csv(name, read_file(data_dir / files.csv), p.schemas.at(name), pids));
    }
    return inputs;
}

namespace {

int report_violations(const std::vector<Violation>& violations, std::ostream& err)
{
    for (const auto& v : violations) err << v.to_string() << '\n';
    return violations.empty() ? kExitOk : kExitInvalid;
}

} // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err)
{
    const fs::path data = data_dir_for(args.pipeline, args.data);
    RunResult result;
    try {
        const LoadedPipeline p = load_pipeline(args.pipeline, data);
        if (report_violations(validate(p.graph), err) != kExitOk) return kExitInvalid;
        result = run(p.graph, load_inputs(p, data), RunOptions { args.parallel });
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInvalid;
    }

    const Dashboard dashboard = render_dashboard(result);
    const std::string text = dashboard_text(dashboard);
    const std::string structured = to_json(dashboard).dump(2) + "\n";
    try {
        for (const auto& sink : result.audit.sinks) {
            const Stream& s = result.sinks.at(sink.name);
            const fs::path dir = args.out / "sinks";
            if (sink.role == SinkRole::Error) {
                write_file_atomic(dir / (sink.name + ".csv"), errors_csv(s.errors));
            } else {
                write_file_atomic(dir / (sink.name + ".csv"), relation_csv(s.correct));
                if (!s.errors.empty()) write_file_atomic(dir / (sink.name + ".errors.csv"), errors_csv(s.errors));
            }
        }
        write_file_atomic(args.out / "dashboard.txt", text);
        write_file_atomic(args.out / "dashboard.json", structured);
        write_file_atomic(args.out / "audit.json", to_json(result.audit).dump(2) + "\n");
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitInvalid;
    }
    out << (args.format == Format::Text ? text : structured);

    const Verdict verdict = conservation_check(result.audit);
    if (!verdict.ok) {
        err << "conservation check failed:\n";
        for (const auto& v : verdict.violations) err << "  " << v << '\n';
        return kExitConservation;
    }
    return kExitOk;
}

int cmd_check(const fs::path& pipeline, const fs::path& data, std::ostream& out, std::ostream& err)
{
    try {
        const LoadedPipeline p = load_pipeline(pipeline, data_dir_for(pipeline, data));
        const int code = report_violations(validate(p.graph), err);
        if (code == kExitOk) {
            const PipelineGraph g = expand_macros(p.graph);
            out << "ok: " << g.nodes.size() << " stages, " << g.sinks.size() << " sinks\n";
        }
        return code;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInvalid;
    }
}

namespace {

void count_kinds(const RAExpr& e, std::map<std::string, std::size_t>& counts)
{
    ++counts[std::string(to_string(e.kind))];
    for (const auto& a : e.args) count_kinds(a, counts);
}

std::string describe_inputs(const std::map<std::string, Relation>& inputs)
{
    std::string s;
    for (const auto& [name, rel] : inputs) s += "-- " + name + "\n" + relation_csv(rel);
    return s;
}

} // namespace

int cmd_fuzz(const FuzzArgs& args, std::ostream& out, std::ostream& err)
{
    CaseGenerator gen(args.seed);
    TranslateOptions options;
    options.mutant_union_without_dedup = args.mutant;
    std::map<std::string, std::size_t> kinds;
    std::size_t checked = 0;
    std::size_t rows = 0;
    std::string failure;
    RandomCase failing;
    for (std::size_t i = 0; i < args.iterations; ++i) {
        RandomCase c = gen.next();
        count_kinds(c.expr, kinds);
        ++checked;
        try {
            RunResult run;
            const Equivalence eq = equivalence_check(c.expr, c.inputs, options, &run);
            rows += eq.expected_rows;
            if (!eq.ok) {
                failure = "case " + std::to_string(i) + ": " + eq.message;
            } else if (const Verdict v = conservation_check(run.audit); !v.ok) {
                failure = "case " + std::to_string(i) + ": conservation: " + v.violations.front();
            }
        } catch (const std::exception& e) {
            failure = "case " + std::to_string(i) + ": " + e.what();
        }
        if (!failure.empty()) {
            failing = std::move(c);
            break;
        }
    }

    if (args.format == Format::Structured) {
        json j { { "seed", args.seed }, { "iterations", args.iterations }, { "checked", checked },
            { "result_rows", rows }, { "kinds", kinds }, { "ok", failure.empty() } };
        if (!failure.empty()) {
            j["failure"] = failure;
            j["expression"] = to_json(failing.expr);
        }
        out << j.dump(2) << '\n';
    } else {
        out << "seed " << args.seed << ": " << checked << " of " << args.iterations << " cases checked, " << rows
            << " result rows\n";
        out << "kinds:";
        for (const auto& [k, n] : kinds) out << ' ' << k << '=' << n;
        out << '\n';
        out << (failure.empty() ? "ok\n" : "DIVERGENCE\n");
    }
    if (failure.empty()) return kExitOk;
    err << failure << '\n' << "expression: " << failing.expr.to_string() << '\n' << describe_inputs(failing.inputs);
    return kExitDivergence;
}

int cmd_translate(const fs::path& expr_file, const fs::path& data, std::ostream& out, std::ostream& err)
{
    try {
        const RAExpr expr = ra_from_json(parse_json_file(expr_file));
        std::set<std::string> names;
        std::function<void(const RAExpr&)> collect = [&](const RAExpr& e) {
            if (e.kind == RAExpr::Kind::Base) names.insert(e.name);
            for (const auto& a : e.args) collect(a);
        };
        collect(expr);
        const fs::path dir = data_dir_for(expr_file, data);
        std::map<std::string, Schema> schemas;
        for (const auto& n : names) {
            const fs::path sidecar = dir / (n + ".schema.json");
            if (!fs::exists(sidecar)) throw Error(ErrorCode::MissingInput, "no schema sidecar " + sidecar.string());
            schemas.emplace(n, csv_schema_from_json(parse_json_file(sidecar)).schema);
        }
        out << to_json(translate(expr, schemas)).dump(2) << '\n';
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInvalid;
    }
}

} // namespace dspace::cli
