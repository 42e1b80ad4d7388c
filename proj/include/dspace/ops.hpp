#pragma once

#include "dspace/expr.hpp"
#include "dspace/monoid.hpp"
#include "dspace/relation.hpp"

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dspace {

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

struct PartitionResult {
    Relation accepted;
    Relation rejected;
    /// Why each rejected record was rejected, index-aligned with `rejected`.
    std::vector<std::string> reasons;
};

/// Accepts records where `pred` is True. False and Unknown both reject; the
/// reason records which one it was.
PartitionResult partition(const Relation& rel, const Predicate& pred);
PartitionResult partition(const Relation& rel, const std::function<bool(const Record&)>& pred);

/// Splits on whether every listed column is present (non-Missing).
PartitionResult null_partition(const Relation& rel, const std::vector<std::string>& columns);

/// First occurrence of each relevant row is accepted, repeats rejected.
PartitionResult dedup_partition(const Relation& rel);

/// Merges records with equal relevant fields: pids and irrelevant
/// subrelations of the duplicates are unioned into the first occurrence.
Relation dedup_merge(const Relation& rel);

struct SetPartition {
    Relation left_only;
    Relation left_shared;
    Relation right_shared;
    Relation right_only;
};

/// Membership partition of both sides on full relevant rows.
SetPartition set_partition(const Relation& left, const Relation& right);

// ---------------------------------------------------------------------------
// Tagged union
// ---------------------------------------------------------------------------

/// Tags every record of `r1` inl and of `r2` inr with `label`. The result's
/// schema is the tagged sum: common columns, open unless both sides agree,
/// with both summands kept for untag.
Relation tagged_union(const Relation& r1, const Relation& r2, const std::string& label = "union");
Stream tagged_union(const Stream& s1, const Stream& s2, const std::string& label = "union");

/// Pops the top tag of every record; throws UntagMissing on untagged input.
std::pair<Relation, Relation> untag(const Relation& rel);

/// Splits without tags when an origin function can tell the sides apart.
std::pair<Relation, Relation> split_by_origin(const Relation& rel, const std::function<Side(const Record&)>& origin);

/// Pops the top tag without splitting (tags that have served their purpose).
Relation strip_tags(const Relation& rel);

// ---------------------------------------------------------------------------
// Joins and products
// ---------------------------------------------------------------------------

/// Equality on column pairs, optionally refined by an extra test that may
/// only look at join columns. Missing never matches.
struct JoinCondition {
    std::vector<std::pair<std::string, std::string>> on;
    std::function<bool(const Record&, const Record&)> extra;
};

struct JoinResult {
    Relation left;
    Relation inner;
    Relation right;
};

/// Three-way outer join. Inner tuples merge relevant fields (a shared name
/// is only allowed as a same-named equality column) and carry both pid
/// lists. Unmatched rows of either side come out unchanged.
JoinResult outer_join(const Relation& r1, const Relation& r2, const JoinCondition& cond);

/// All pairs; schemas must be disjoint.
Relation cartesian(const Relation& r1, const Relation& r2);

[[noreturn]] void throw_missing_tag();

/// (f (+) g): dispatches on the top tag, inr to `f` and inl to `g`, with the
/// tag popped. Throws MissingTag for untagged input.
template <typename F, typename G>
auto disjoint_apply(const F& f, const G& g)
{
    return [f, g](const Record& r) {
        if (r.tags.empty()) {
            throw_missing_tag();
        }
        Record inner = r;
        inner.tags.pop_back();
        return r.tags.back().side == Side::Inr ? f(inner) : g(inner);
    };
}

/// (f || g): both results side by side.
template <typename F, typename G>
auto parallel_apply(const F& f, const G& g)
{
    return [f, g](const Record& r) { return std::make_pair(f(r), g(r)); };
}


// ---------------------------------------------------------------------------
// Column operations
// ---------------------------------------------------------------------------

/// Keeps `keep` as relevant fields and moves the rest into each record's
/// irrelevant subrelation. Throws UnknownField.
Relation lossless_project(const Relation& rel, const std::vector<std::string>& keep);

/// Renames relevant fields. Throws UnknownField or CollisionAfterRename.
Relation rename(const Relation& rel, const std::vector<std::pair<std::string, std::string>>& mapping);

// ---------------------------------------------------------------------------
// Enrichment
// ---------------------------------------------------------------------------

using Enrichment = std::function<Fields(const Record&)>;

/// Adds `new_fields` to every happy-path record. The function must return a
/// value (possibly Missing) for each declared field; anything else, or an
/// exception, is FnNotTotal. The error trace is untouched.
Stream fmap(const Stream& stream, const Enrichment& fn, const std::vector<Column>& new_fields);
/// Adds one computed column from an expression.
Stream fmap(const Stream& stream, const std::string& name, const ValueExpr& expr);

/// Annotates error-trace records. Writing a business field or the stamped
/// error_stage/error_reason is ForbiddenFieldWrite. The happy path is untouched.
Stream emap(const Stream& stream, const Enrichment& fn);

// ---------------------------------------------------------------------------
// Totalization
// ---------------------------------------------------------------------------

struct Defined {
    FieldValue value;
};
struct Passthrough {
    Record record;
};
/// Passthrough is the inl branch, Defined the inr branch.
using TotalResult = std::variant<Passthrough, Defined>;

Side side_of(const TotalResult& r);

using PartialFn = std::function<FieldValue(const Record&)>;

/// Extends `fn` to every record: inside `domain` it must succeed with a
/// present value (else DomainPredUnsound), outside the record passes through.
std::function<TotalResult(const Record&)> totalize(PartialFn fn, std::function<bool(const Record&)> domain);

/// Applies a totalized function to a relation: defined records gain `name`.
std::pair<Relation, Relation> totalize_relation(const Relation& rel, const Column& name, const PartialFn& fn,
    const std::function<bool(const Record&)>& domain);

/// Value expression as a partial function defined where every operand is present.
std::pair<Relation, Relation> totalize_expr(const Relation& rel, const std::string& name, const ValueExpr& expr);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

enum class AggKind { Count, Sum, Min, Max, Avg, Ids };

std::string_view to_string(AggKind kind);
std::optional<AggKind> parse_agg_kind(std::string_view text);

struct AggSpec {
    std::string field;
    AggKind kind = AggKind::Sum;
    /// Output column; defaults to "<kind>_<field>".
    std::string as;

    std::string output_name() const;
    bool operator==(const AggSpec&) const = default;
};

inline constexpr const char* kCountColumn = "count";

/// Output schema of `aggregate` (group columns, one per spec, then count).
Schema aggregate_schema(const Schema& input, const std::vector<std::string>& group_by, const std::vector<AggSpec>& specs);

/// One record per group with the group key, one presented monoid value per
/// spec and the mandatory record count. Quantity specs split groups by unit.
/// Every member pid lands in the group record, and non-key fields move to
/// its irrelevant subrelation, so the summary drills back to its inputs.
Relation aggregate(const Relation& rel, const std::vector<std::string>& group_by, const std::vector<AggSpec>& specs);

/// Contributing pids of the summary record(s) matching `key`. Throws UnknownGroup.
PidSet drill_down(const Relation& summary, const Fields& key);

/// Monoid used for one aggregation spec over a column (unit-specific for sums).
InformationMonoid agg_monoid(AggKind kind, const std::string& unit);
MonoidElement agg_element(AggKind kind, const FieldValue& value, const std::string& unit);
FieldValue present_element(AggKind kind, const MonoidElement& m, ValueType column_type, const std::string& unit);

} // namespace dspace
