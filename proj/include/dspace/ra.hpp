#pragma once

#include "dspace/expr.hpp"
#include "dspace/ops.hpp"
#include "dspace/pipeline.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace dspace {

/// Classical relational-algebra expression tree.
struct RAExpr {
    enum class Kind {
        Base,
        Project,
        Select,
        Rename,
        CrossProduct,
        NaturalJoin,
        OuterJoin,
        Union,
        UnionAll,
        Minus,
        Intersect,
        Aggregate,
        Map,
    };

    Kind kind = Kind::Base;
    /// Base: input relation name.
    std::string name;
    /// Project
    std::vector<std::string> fields;
    /// Select
    Predicate predicate;
    /// Rename: (old, new); OuterJoin: (left column, right column).
    std::vector<std::pair<std::string, std::string>> pairs;
    /// Aggregate
    std::vector<std::string> group_by;
    std::vector<AggSpec> specs;
    /// Map: new columns in order.
    std::vector<std::pair<std::string, ValueExpr>> exprs;
    std::vector<RAExpr> args;

    static RAExpr base(std::string name);
    static RAExpr project(RAExpr in, std::vector<std::string> fields);
    static RAExpr select(RAExpr in, Predicate p);
    static RAExpr rename(RAExpr in, std::vector<std::pair<std::string, std::string>> mapping);
    static RAExpr cross(RAExpr l, RAExpr r);
    static RAExpr natural_join(RAExpr l, RAExpr r);
    static RAExpr outer_join(RAExpr l, RAExpr r, std::vector<std::pair<std::string, std::string>> on);
    static RAExpr set_union(RAExpr l, RAExpr r);
    static RAExpr union_all(RAExpr l, RAExpr r);
    static RAExpr minus(RAExpr l, RAExpr r);
    static RAExpr intersect(RAExpr l, RAExpr r);
    static RAExpr aggregate(RAExpr in, std::vector<std::string> group_by, std::vector<AggSpec> specs);
    static RAExpr map(RAExpr in, std::vector<std::pair<std::string, ValueExpr>> exprs);

    std::size_t depth() const;
    std::string to_string() const;
    bool operator==(const RAExpr&) const = default;
};

std::string_view to_string(RAExpr::Kind kind);
std::optional<RAExpr::Kind> parse_ra_kind(std::string_view text);

/// Output schema of `expr`. Throws TypeError naming the offending node path
/// (e.g. "root/0/1:select").
Schema ra_schema(const RAExpr& expr, const std::map<std::string, Schema>& inputs);

struct TranslateOptions {
    /// Negative control: translate Union without the duplicate partition.
    bool mutant_union_without_dedup = false;
    /// Declare count, per-unit sum and Paccioli measures for every input.
    bool declare_measures = true;
};

inline constexpr const char* kResultSink = "result";

/// Pipeline whose "result" sink carries the classical answer; complementary
/// records go to auxiliary error sinks named after the producing port.
PipelineGraph translate(const RAExpr& expr, const std::map<std::string, Schema>& inputs, const TranslateOptions& options = {});

/// Textbook multiset semantics by direct enumeration over plain rows. Union
/// deduplicates, Minus and Intersect keep the left multiplicity, Missing never
/// satisfies a join or a selection.
Relation reference_eval(const RAExpr& expr, const std::map<std::string, Relation>& inputs);

struct Equivalence {
    bool ok = true;
    std::string message;
    std::size_t expected_rows = 0;
    std::size_t actual_rows = 0;
};

/// Runs the translation and compares its result sink with the reference
/// answer as multisets of relevant rows. The pipeline run is handed back
/// through `run` when given.
Equivalence equivalence_check(const RAExpr& expr, const std::map<std::string, Relation>& inputs,
    const TranslateOptions& options = {}, RunResult* run = nullptr);

struct RandomCase {
    RAExpr expr;
    std::map<std::string, Relation> inputs;
};

struct GeneratorOptions {
    std::size_t max_depth = 4;
    std::size_t max_rows = 50;
    std::size_t max_columns = 5;
    /// Upper bound on rows any intermediate result may reach.
    std::size_t max_intermediate = 4000;
};

/// Seeded generator of well-typed expressions over random relations. Each
/// leaf is a fresh input with fresh column names; set operations draw their
/// right operand with the left operand's schema. Values come from small
/// domains so keys repeat often.
class CaseGenerator {
public:
    explicit CaseGenerator(std::uint64_t seed, GeneratorOptions options = {});

    RandomCase next();

private:
    struct Impl;
    std::mt19937_64 rng_;
    GeneratorOptions options_;
};

} // namespace dspace
