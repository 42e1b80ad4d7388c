#include "support.hpp"

#include "dspace/cli.hpp"
#include "dspace/error.hpp"
#include "dspace/ra.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <unistd.h>

using namespace dspace;
namespace fs = std::filesystem;
using dspace::testing::data_path;

namespace {

/// Fresh scratch directory removed at scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("dspace_" + tag + "_" + std::to_string(::getpid())))
    {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.emplace(fs::relative(e.path(), root).string(), read_file(e.path()));
    }
    return out;
}

struct Captured {
    int code;
    std::string out;
    std::string err;
};

Captured run_cli(const fs::path& pipeline, const fs::path& out_dir, cli::Format format = cli::Format::Text, bool parallel = false)
{
    std::ostringstream out, err;
    const int code = cli::cmd_run(cli::RunArgs { pipeline, {}, out_dir, format, parallel }, out, err);
    return { code, out.str(), err.str() };
}

Captured fuzz_cli(cli::FuzzArgs args)
{
    std::ostringstream out, err;
    const int code = cli::cmd_fuzz(args, out, err);
    return { code, out.str(), err.str() };
}

Captured check_cli(const fs::path& pipeline, const fs::path& data = {})
{
    std::ostringstream out, err;
    const int code = cli::cmd_check(pipeline, data, out, err);
    return { code, out.str(), err.str() };
}

/// Copies a bundled example directory into `dst` and replaces its pipeline
/// document with `doc`.
fs::path staged(const TempDir& dst, const std::string& example, const std::string& file, const json& doc)
{
    fs::copy(data_path(example), dst.path(), fs::copy_options::recursive);
    write_file_atomic(dst.path() / file, doc.dump(2));
    return dst.path() / file;
}

const Column kText { "c", ValueType::Text, {} };
const Column kInt { "c", ValueType::Integer, {} };
const Column kQty { "c", ValueType::Quantity, "kg" };
const std::vector<std::string> kSentinels { "unknown", "" };

} // namespace

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

TEST(Csv, ParsesQuotingAndLineEnds)
{
    const auto rows = parse_csv("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n\"two\nlines\",\n");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1], (std::vector<std::string> { "x, y", "he said \"hi\"" }));
    EXPECT_EQ(rows[2], (std::vector<std::string> { "two\nlines", "" }));
}

TEST(Csv, EscapeRoundTrip)
{
    const std::vector<std::vector<std::string>> rows { { "plain", "with,comma", "q\"uote", "line\nbreak", "" } };
    EXPECT_EQ(parse_csv(write_csv(rows)), rows);
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
}

TEST(Csv, ParseCell)
{
    EXPECT_EQ(parse_cell("unknown", kInt, "", kSentinels), FieldValue::missing("unknown"));
    EXPECT_EQ(parse_cell("  ", kText, "", kSentinels), FieldValue::missing("blank"));
    EXPECT_EQ(parse_cell("20,000,000", kInt, "", kSentinels), FieldValue(std::int64_t { 20'000'000 }));
    EXPECT_EQ(parse_cell("ten", kInt, "", kSentinels), std::nullopt);
    EXPECT_EQ(parse_cell("1.5", kInt, "", kSentinels), std::nullopt);
    EXPECT_EQ(parse_cell("10$", kQty, "", kSentinels), FieldValue::quantity(Decimal::from_int(10), "$"));
    EXPECT_EQ(parse_cell("$10", kQty, "", kSentinels), FieldValue::quantity(Decimal::from_int(10), "$"));
    EXPECT_EQ(parse_cell("3", kQty, "l", kSentinels), FieldValue::quantity(Decimal::from_int(3), "l"));
    EXPECT_EQ(parse_cell("3", kQty, "", kSentinels), FieldValue::quantity(Decimal::from_int(3), "kg"));
}

TEST(Csv, IngestKeepsUnparseableRowsOnTheErrorTrace)
{
    PidAllocator alloc;
    const Stream s = dspace::testing::load_csv("orders", "order_details", alloc);
    EXPECT_EQ(s.correct.size() + s.errors.size(), 12u);
    ASSERT_EQ(s.errors.size(), 1u);
    const Record& bad = s.errors.rows[0];
    EXPECT_EQ(bad.notes.at(kErrorStage).to_string(), "ingest:order_details");
    EXPECT_NE(bad.notes.at(kErrorReason).to_string().find("quantity"), std::string::npos);
    EXPECT_EQ(bad.at("quantity"), FieldValue("ten"));

    const CsvSchema schema = csv_schema_from_json(json::parse(R"({"columns":[{"name":"a","type":"integer"}]})"));
    const Stream short_row = ingest_csv("t", "a\n1\n2,3\n", schema, alloc);
    ASSERT_EQ(short_row.errors.size(), 1u);
    EXPECT_NE(short_row.errors.rows[0].notes.at(kErrorReason).to_string().find("expected 1 cells"), std::string::npos);
    EXPECT_THROW(ingest_csv("t", "b\n1\n", schema, alloc), Error);
}

TEST(Csv, RelationOutputCarriesPids)
{
    const Relation items = dspace::testing::ship_items();
    const auto rows = parse_csv(relation_csv(items));
    ASSERT_EQ(rows.size(), items.size() + 1);
    EXPECT_EQ(rows[0].back(), "pids");
    EXPECT_EQ(rows[1][0], "Sailors");
    EXPECT_EQ(rows[1][1], "priceless");
    EXPECT_EQ(rows[1].back(), "1");
}

// ---------------------------------------------------------------------------
// Structured documents
// ---------------------------------------------------------------------------

TEST(Json, ValuesAndExpressionsRoundTrip)
{
    for (const FieldValue& v : { FieldValue(std::int64_t { -4 }), FieldValue("x"), FieldValue(Decimal::from_raw(12345)),
             FieldValue::quantity(Decimal::from_int(2), "kg"), FieldValue::missing("null") }) {
        EXPECT_EQ(value_from_json(to_json(v)), v);
    }
    const Predicate p = Predicate::all_of({ Predicate::in("u", { FieldValue("a"), FieldValue("b") }),
        Predicate::negate(Predicate::present("v")),
        Predicate::compare(Predicate::Op::Lt, ValueExpr::mul(ValueExpr::ref("q"), ValueExpr::lit(FieldValue(std::int64_t { 2 }))),
            ValueExpr::lit(FieldValue(std::int64_t { 9 }))) });
    EXPECT_EQ(predicate_from_json(to_json(p)), p);
}

TEST(Json, PipelineAndExpressionRoundTrip)
{
    for (const char* rel : { "ship/insured_value.pipeline.json", "ship/weight.pipeline.json", "orders/summary.pipeline.json",
             "ledger/balances.pipeline.json", "lookup/lookup.pipeline.json" }) {
        const PipelineGraph g = pipeline_from_json(json::parse(read_file(data_path(rel))));
        EXPECT_EQ(to_json(pipeline_from_json(to_json(g))), to_json(g)) << rel;
    }
    CaseGenerator gen(3);
    for (int i = 0; i < 200; ++i) {
        const RAExpr e = gen.next().expr;
        ASSERT_EQ(ra_from_json(to_json(e)), e) << e.to_string();
    }
}

TEST(Json, MalformedDocumentsAreParseErrors)
{
    auto code = [](const char* text) {
        try {
            (void)pipeline_from_json(json::parse(text));
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Overflow;
    };
    EXPECT_EQ(code(R"({"nodes":[{"name":"a","kind":"teleport"}]})"), ErrorCode::ParseError);
    EXPECT_EQ(code(R"({"nodes":[{"kind":"source"}]})"), ErrorCode::ParseError);
    EXPECT_EQ(code(R"({"nodes":[],"sinks":[{"name":"s","role":"report","ports":["nodot"]}]})"), ErrorCode::ParseError);
}

// ---------------------------------------------------------------------------
// run / check
// ---------------------------------------------------------------------------

TEST(CliRun, WritesSinksDashboardAndAudit)
{
    TempDir tmp("run");
    const Captured c = run_cli(data_path("ship/insured_value.pipeline.json"), tmp.path());
    ASSERT_EQ(c.code, cli::kExitOk) << c.err;
    EXPECT_NE(c.out.find("unaccounted: Cat, Nut oil"), std::string::npos);
    for (const char* f : { "dashboard.txt", "dashboard.json", "audit.json", "sinks/insured_value.csv", "sinks/no_commodity.csv",
             "sinks/price_lookup_missing.csv", "sinks/price_lookup_unused.csv" }) {
        EXPECT_TRUE(fs::exists(tmp.path() / f)) << f;
    }
    EXPECT_EQ(read_file(tmp.path() / "dashboard.txt"), c.out);
    const json audit = json::parse(read_file(tmp.path() / "audit.json"));
    EXPECT_TRUE(audit.at("conservation").at("ok").get<bool>());
    const json dash = json::parse(read_file(tmp.path() / "dashboard.json"));
    EXPECT_EQ(dash.at("ingested").get<int>(), 11);

    const auto missing = parse_csv(read_file(tmp.path() / "sinks/price_lookup_missing.csv"));
    ASSERT_EQ(missing.size(), 2u);
    EXPECT_EQ(missing[0][0], "error_stage");
    EXPECT_EQ(missing[1][0], "price_lookup");
}

TEST(CliRun, StructuredFormatPrintsJson)
{
    TempDir tmp("json");
    const Captured c = run_cli(data_path("lookup/lookup.pipeline.json"), tmp.path(), cli::Format::Structured);
    ASSERT_EQ(c.code, cli::kExitOk) << c.err;
    EXPECT_EQ(json::parse(c.out), json::parse(read_file(tmp.path() / "dashboard.json")));
}

TEST(CliRun, UnconsumedPortIsRejectedBeforeRunning)
{
    TempDir tmp("unwired");
    json doc = json::parse(read_file(data_path("ship/weight.pipeline.json")));
    auto& sinks = doc.at("sinks");
    sinks.erase(std::remove_if(sinks.begin(), sinks.end(), [](const json& s) { return s.at("name") == "not_weighed"; }), sinks.end());
    auto& reports = doc.at("reports");
    for (auto& r : reports) {
        auto& names = r.at("sinks");
        names.erase(std::remove(names.begin(), names.end(), json("not_weighed")), names.end());
    }
    const fs::path p = staged(tmp, "ship", "broken.pipeline.json", doc);
    const Captured c = run_cli(p, tmp.path() / "out");
    EXPECT_EQ(c.code, cli::kExitInvalid);
    EXPECT_NE(c.err.find("UnconsumedPort"), std::string::npos) << c.err;
    EXPECT_NE(c.err.find("living.accepted"), std::string::npos) << c.err;
    EXPECT_FALSE(fs::exists(tmp.path() / "out" / "dashboard.txt"));
}

TEST(CliRun, MissingInputFileIsInvalid)
{
    TempDir tmp("missing");
    const json doc = json::parse(read_file(data_path("lookup/lookup.pipeline.json")));
    const fs::path p = staged(tmp, "lookup", "lookup.pipeline.json", doc);
    fs::remove(tmp.path() / "reference.csv");
    EXPECT_EQ(run_cli(p, tmp.path() / "out").code, cli::kExitInvalid);
    fs::remove(tmp.path() / "reference.schema.json");
    EXPECT_EQ(check_cli(p).code, cli::kExitInvalid);
}

TEST(CliCheck, Verdicts)
{
    const Captured ok = check_cli(data_path("ship/insured_value.pipeline.json"));
    EXPECT_EQ(ok.code, cli::kExitOk);
    EXPECT_EQ(ok.out.rfind("ok:", 0), 0u) << ok.out;

    TempDir tmp("cycle");
    json doc = json::parse(read_file(data_path("lookup/lookup.pipeline.json")));
    doc["nodes"].push_back(json::parse(R"({"name":"a","kind":"strip_tags","inputs":{"in":"b.out"}})"));
    doc["nodes"].push_back(json::parse(R"({"name":"b","kind":"strip_tags","inputs":{"in":"a.out"}})"));
    const Captured cyc = check_cli(staged(tmp, "lookup", "cycle.pipeline.json", doc));
    EXPECT_EQ(cyc.code, cli::kExitInvalid);
    EXPECT_NE(cyc.err.find("Cycle"), std::string::npos) << cyc.err;
}

TEST(CliRun, ParallelOutputIsIdentical)
{
    TempDir a("serial");
    TempDir b("parallel");
    ASSERT_EQ(run_cli(data_path("ship/replacement_cost.pipeline.json"), a.path()).code, cli::kExitOk);
    ASSERT_EQ(run_cli(data_path("ship/replacement_cost.pipeline.json"), b.path(), cli::Format::Text, true).code, cli::kExitOk);
    EXPECT_EQ(tree(a.path()), tree(b.path()));
}

TEST(CliRun, RepeatedRunsAreByteIdentical)
{
    for (const char* rel : { "ship/insured_value.pipeline.json", "orders/summary.pipeline.json", "ledger/balances.pipeline.json" }) {
        TempDir a("rep_a");
        TempDir b("rep_b");
        const Captured x = run_cli(data_path(rel), a.path());
        const Captured y = run_cli(data_path(rel), b.path());
        EXPECT_EQ(x.out, y.out) << rel;
        EXPECT_EQ(tree(a.path()), tree(b.path())) << rel;
    }
}

// ---------------------------------------------------------------------------
// fuzz / translate
// ---------------------------------------------------------------------------

TEST(CliFuzz, ExitCodes)
{
    const Captured none = fuzz_cli({ 1, 0, false, cli::Format::Text });
    EXPECT_EQ(none.code, cli::kExitOk);
    const Captured some = fuzz_cli({ 5, 200, false, cli::Format::Text });
    EXPECT_EQ(some.code, cli::kExitOk) << some.err;
    EXPECT_NE(some.out.find("200 of 200"), std::string::npos) << some.out;
    const Captured mutant = fuzz_cli({ 1, 1000, true, cli::Format::Text });
    EXPECT_EQ(mutant.code, cli::kExitDivergence);
    EXPECT_NE(mutant.err.find("union"), std::string::npos) << mutant.err;
}

TEST(CliFuzz, SameSeedSameOutput)
{
    const Captured a = fuzz_cli({ 11, 150, false, cli::Format::Structured });
    const Captured b = fuzz_cli({ 11, 150, false, cli::Format::Structured });
    EXPECT_EQ(a.out, b.out);
    EXPECT_TRUE(json::accept(a.out));
}

TEST(CliTranslate, OutputRunsAndMatchesTheReference)
{
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_translate(data_path("ship/commodity_join.ra.json"), data_path("ship"), out, err), cli::kExitOk) << err.str();
    const PipelineGraph g = pipeline_from_json(json::parse(out.str()));
    EXPECT_TRUE(validate(g).empty());

    PidAllocator alloc;
    std::map<std::string, Relation> in;
    in.emplace("current_prices", dspace::testing::load_csv("ship", "current_prices", alloc).correct);
    in.emplace("items", dspace::testing::load_csv("ship", "items", alloc).correct);
    const RunResult r = run(g, in);
    const RAExpr e = ra_from_json(json::parse(read_file(data_path("ship/commodity_join.ra.json"))));
    EXPECT_EQ(relevant_multiset(r.sinks.at(kResultSink).correct), relevant_multiset(reference_eval(e, in)));
    // Grain against both spot wheat quotes (one of them closed), Milk against the milk quote.
    EXPECT_EQ(r.sinks.at(kResultSink).correct.size(), 3u);
}
