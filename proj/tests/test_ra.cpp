#include "support.hpp"

#include "dspace/error.hpp"
#include "dspace/ra.hpp"

#include <gtest/gtest.h>

using namespace dspace;

namespace {

using K = RAExpr::Kind;

const Schema kA({ { "k", ValueType::Integer, {} }, { "v", ValueType::Text, {} } });
const Schema kB({ { "k", ValueType::Integer, {} }, { "w", ValueType::Text, {} } });

Fields row(FieldValue k, std::string_view col, std::string text)
{
    Fields f;
    f.emplace("k", std::move(k));
    f.emplace(std::string(col), FieldValue(std::move(text)));
    return f;
}

/// A = {(1,a), (1,a), (2,b), (?,c)}, B = {(1,x), (3,y)}, C = {(1,a)}, A2 = copy of A.
std::map<std::string, Relation> small_inputs()
{
    PidAllocator alloc;
    const std::vector<Fields> a { row(FieldValue(std::int64_t { 1 }), "v", "a"), row(FieldValue(std::int64_t { 1 }), "v", "a"),
        row(FieldValue(std::int64_t { 2 }), "v", "b"), row(FieldValue::missing("null"), "v", "c") };
    std::map<std::string, Relation> in;
    in.emplace("A", ingest(kA, a, alloc));
    in.emplace("A2", ingest(kA, a, alloc));
    in.emplace("B", ingest(kB, { row(FieldValue(std::int64_t { 1 }), "w", "x"), row(FieldValue(std::int64_t { 3 }), "w", "y") }, alloc));
    in.emplace("C", ingest(kA, { row(FieldValue(std::int64_t { 1 }), "v", "a") }, alloc));
    return in;
}

std::map<std::string, Schema> schemas_of(const std::map<std::string, Relation>& in)
{
    std::map<std::string, Schema> out;
    for (const auto& [name, rel] : in) out.emplace(name, rel.schema);
    return out;
}

void collect_kinds(const RAExpr& e, std::set<K>& out)
{
    if (e.kind != K::Base) out.insert(e.kind);
    for (const auto& a : e.args) collect_kinds(a, out);
}

std::size_t count_nodes(const PipelineGraph& g, NodeKind kind)
{
    return static_cast<std::size_t>(std::count_if(g.nodes.begin(), g.nodes.end(), [&](const Node& n) { return n.kind == kind; }));
}

std::size_t error_sinks(const PipelineGraph& g)
{
    return static_cast<std::size_t>(
        std::count_if(g.sinks.begin(), g.sinks.end(), [](const SinkDecl& s) { return s.role == SinkRole::Error; }));
}

} // namespace

// ---------------------------------------------------------------------------
// Translation shape
// ---------------------------------------------------------------------------

TEST(Translate, SelectionBecomesAPartitionWithAnErrorSink)
{
    const auto g = translate(RAExpr::select(RAExpr::base("A"), Predicate::eq("v", FieldValue("a"))), { { "A", kA } });
    EXPECT_EQ(count_nodes(g, NodeKind::Partition), 1u);
    EXPECT_EQ(error_sinks(g), 1u);
    EXPECT_EQ(g.sinks.front().name, kResultSink);
    EXPECT_EQ(g.sinks.front().ports.front().port, "accepted");
    EXPECT_TRUE(validate(g).empty());
}

TEST(Translate, ProjectionNeedsNoErrorSink)
{
    const auto g = translate(RAExpr::project(RAExpr::base("A"), { "v" }), { { "A", kA } });
    EXPECT_EQ(count_nodes(g, NodeKind::Project), 1u);
    EXPECT_EQ(error_sinks(g), 0u);
    EXPECT_TRUE(validate(g).empty());
}

TEST(Translate, SetOperationsUseSetPartition)
{
    for (const RAExpr& e : { RAExpr::minus(RAExpr::base("A"), RAExpr::base("C")), RAExpr::intersect(RAExpr::base("A"), RAExpr::base("C")) }) {
        const auto g = translate(e, { { "A", kA }, { "C", kA } });
        EXPECT_EQ(count_nodes(g, NodeKind::SetPartition), 1u);
        EXPECT_EQ(error_sinks(g), 3u);
        EXPECT_TRUE(validate(g).empty());
    }
}

TEST(Translate, UnionDeduplicatesUnlessMutated)
{
    const RAExpr e = RAExpr::set_union(RAExpr::base("A"), RAExpr::base("A2"));
    const std::map<std::string, Schema> s { { "A", kA }, { "A2", kA } };
    EXPECT_EQ(count_nodes(translate(e, s), NodeKind::DedupPartition), 1u);
    EXPECT_EQ(count_nodes(translate(e, s, TranslateOptions { true }), NodeKind::DedupPartition), 0u);
}

TEST(Translate, MeasuresCoverEveryInput)
{
    const auto g = translate(RAExpr::natural_join(RAExpr::base("A"), RAExpr::base("B")), { { "A", kA }, { "B", kB } });
    std::set<std::pair<std::string, MeasureKind>> seen;
    for (const auto& m : g.measures) seen.emplace(m.input, m.kind);
    EXPECT_TRUE(seen.contains({ "A", MeasureKind::Count }));
    EXPECT_TRUE(seen.contains({ "B", MeasureKind::Paccioli }));
    EXPECT_TRUE(seen.contains({ "B", MeasureKind::SumPerUnit }));
}

TEST(Translate, TypeErrorsNameTheNode)
{
    const std::map<std::string, Schema> s { { "A", kA }, { "B", kB } };
    auto fails = [&](const RAExpr& e) {
        try {
            (void)translate(e, s);
        } catch (const Error& err) {
            EXPECT_EQ(err.code(), ErrorCode::TypeError);
            return std::string(err.what());
        }
        return std::string();
    };
    EXPECT_NE(fails(RAExpr::project(RAExpr::base("A"), { "nope" })).find("root"), std::string::npos);
    EXPECT_NE(fails(RAExpr::set_union(RAExpr::base("A"), RAExpr::base("B"))).find("root"), std::string::npos);
    EXPECT_NE(fails(RAExpr::cross(RAExpr::base("A"), RAExpr::base("B"))).find("root"), std::string::npos);
    EXPECT_NE(fails(RAExpr::base("Z")).find("Z"), std::string::npos);
    EXPECT_FALSE(fails(RAExpr::set_union(RAExpr::base("A"), RAExpr::base("A"))).empty());
}

// ---------------------------------------------------------------------------
// Reference evaluator on hand-checked cases
// ---------------------------------------------------------------------------

TEST(Reference, SmallExamples)
{
    const auto in = small_inputs();
    auto size = [&](const RAExpr& e) { return reference_eval(e, in).size(); };
    const auto A = RAExpr::base("A");
    const auto B = RAExpr::base("B");
    const auto C = RAExpr::base("C");
    EXPECT_EQ(size(RAExpr::cross(A, RAExpr::rename(B, { { "k", "k2" } }))), 8u);
    EXPECT_EQ(size(RAExpr::natural_join(A, B)), 2u);
    EXPECT_EQ(size(RAExpr::set_union(A, A)), 3u);
    EXPECT_EQ(size(RAExpr::union_all(A, A)), 8u);
    EXPECT_EQ(size(RAExpr::minus(A, C)), 2u);
    EXPECT_EQ(size(RAExpr::intersect(A, C)), 2u);
    EXPECT_EQ(size(RAExpr::select(A, Predicate::eq("k", FieldValue(std::int64_t { 1 })))), 2u);
    EXPECT_EQ(size(RAExpr::select(A, Predicate::negate(Predicate::eq("k", FieldValue(std::int64_t { 1 }))))), 1u);
    EXPECT_EQ(size(RAExpr::outer_join(A, RAExpr::rename(B, { { "k", "kb" } }), { { "k", "kb" } })), 5u);
    EXPECT_EQ(size(RAExpr::project(A, { "v" })), 4u);
    const Relation agg = reference_eval(RAExpr::aggregate(A, { "v" }, {}), in);
    EXPECT_EQ(agg.size(), 3u);
}

TEST(Reference, ShipItemsJoinPrices)
{
    PidAllocator alloc;
    std::map<std::string, Relation> in;
    in.emplace("items", dspace::testing::load_csv("ship", "items", alloc).correct);
    const Relation prices = dspace::testing::load_csv("ship", "current_prices", alloc).correct;
    in.emplace("prices", prices);
    // Grain matches three wheat quotes and Milk one; nothing else carries a
    // commodity that appears in the price list.
    std::size_t brute = 0;
    for (const auto& item : in.at("items").rows) {
        for (const auto& p : prices.rows) {
            const auto& a = item.at("Commodity");
            const auto& b = p.at("Commodity");
            brute += !a.is_missing() && !b.is_missing() && a == b ? 1 : 0;
        }
    }
    const RAExpr e = RAExpr::natural_join(RAExpr::base("items"), RAExpr::base("prices"));
    EXPECT_EQ(reference_eval(e, in).size(), brute);
    EXPECT_EQ(brute, 4u);
    const Equivalence v = equivalence_check(e, in);
    EXPECT_TRUE(v.ok) << v.message;
}

// ---------------------------------------------------------------------------
// Translation against the reference
// ---------------------------------------------------------------------------

TEST(Equivalence, SmallExamples)
{
    const auto in = small_inputs();
    const auto A = RAExpr::base("A");
    const auto A2 = RAExpr::base("A2");
    const auto B = RAExpr::base("B");
    const auto C = RAExpr::base("C");
    const std::vector<RAExpr> cases {
        RAExpr::cross(A, RAExpr::rename(B, { { "k", "k2" } })),
        RAExpr::natural_join(A, B),
        RAExpr::set_union(A, A2),
        RAExpr::union_all(A, A2),
        RAExpr::minus(A, C),
        RAExpr::intersect(A, C),
        RAExpr::select(A, Predicate::eq("k", FieldValue(std::int64_t { 1 }))),
        RAExpr::outer_join(A, RAExpr::rename(B, { { "k", "kb" } }), { { "k", "kb" } }),
        RAExpr::project(A, { "v" }),
        RAExpr::aggregate(A, { "v" }, { AggSpec { "k", AggKind::Sum, {} } }),
        RAExpr::map(A, { { "k2", ValueExpr::add(ValueExpr::ref("k"), ValueExpr::ref("k")) } }),
    };
    for (const auto& e : cases) {
        RunResult r;
        const Equivalence v = equivalence_check(e, in, {}, &r);
        EXPECT_TRUE(v.ok) << e.to_string() << ": " << v.message;
        EXPECT_TRUE(conservation_check(r.audit).ok) << e.to_string();
    }
}

TEST(Equivalence, EmptyRelations)
{
    std::map<std::string, Relation> in { { "A", Relation(kA) }, { "A2", Relation(kA) }, { "B", Relation(kB) } };
    const auto A = RAExpr::base("A");
    for (const auto& e : { RAExpr::natural_join(A, RAExpr::base("B")), RAExpr::set_union(A, RAExpr::base("A2")),
             RAExpr::minus(A, RAExpr::base("A2")), RAExpr::aggregate(A, {}, { AggSpec { "k", AggKind::Max, {} } }),
             RAExpr::aggregate(A, { "v" }, {}) }) {
        const Equivalence v = equivalence_check(e, in);
        EXPECT_TRUE(v.ok) << e.to_string() << ": " << v.message;
        EXPECT_EQ(v.actual_rows, v.expected_rows);
    }
}

TEST(Equivalence, RandomCases)
{
    CaseGenerator gen(7);
    std::set<K> kinds;
    for (int i = 0; i < 400; ++i) {
        const RandomCase c = gen.next();
        collect_kinds(c.expr, kinds);
        const auto g = translate(c.expr, schemas_of(c.inputs));
        const auto vs = validate(g);
        ASSERT_TRUE(vs.empty()) << c.expr.to_string() << ": " << vs.front().to_string();
        RunResult r;
        const Equivalence v = equivalence_check(c.expr, c.inputs, {}, &r);
        ASSERT_TRUE(v.ok) << c.expr.to_string() << ": " << v.message;
        const Verdict cv = conservation_check(r.audit);
        ASSERT_TRUE(cv.ok) << c.expr.to_string() << ": " << cv.violations.front();
    }
    EXPECT_EQ(kinds.size(), 12u);
}

TEST(Equivalence, GeneratorIsSeeded)
{
    CaseGenerator a(99);
    CaseGenerator b(99);
    for (int i = 0; i < 50; ++i) {
        const RandomCase x = a.next();
        const RandomCase y = b.next();
        ASSERT_EQ(x.expr, y.expr);
        ASSERT_EQ(x.inputs, y.inputs);
    }
}

TEST(Equivalence, MutantUnionIsDetected)
{
    const auto in = small_inputs();
    const Equivalence v = equivalence_check(RAExpr::set_union(RAExpr::base("A"), RAExpr::base("A2")), in, TranslateOptions { true });
    EXPECT_FALSE(v.ok);
    EXPECT_EQ(v.expected_rows, 3u);
    EXPECT_EQ(v.actual_rows, 8u);

    CaseGenerator gen(1);
    bool caught = false;
    for (int i = 0; i < 1000 && !caught; ++i) {
        const RandomCase c = gen.next();
        caught = !equivalence_check(c.expr, c.inputs, TranslateOptions { true }).ok;
    }
    EXPECT_TRUE(caught);
}

TEST(Generator, RespectsItsBounds)
{
    CaseGenerator gen(1);
    for (int i = 0; i < 1000; ++i) {
        const RandomCase c = gen.next();
        ASSERT_LE(c.expr.depth(), 4u) << c.expr.to_string();
        std::set<std::string> referenced;
        std::vector<const RAExpr*> todo { &c.expr };
        while (!todo.empty()) {
            const RAExpr* e = todo.back();
            todo.pop_back();
            if (e->kind == K::Base) referenced.insert(e->name);
            for (const auto& a : e->args) todo.push_back(&a);
        }
        std::set<std::string> given;
        for (const auto& [name, rel] : c.inputs) {
            given.insert(name);
            ASSERT_LE(rel.size(), 50u);
            ASSERT_LE(rel.schema.size(), 5u);
        }
        ASSERT_EQ(given, referenced) << c.expr.to_string();
    }
}
