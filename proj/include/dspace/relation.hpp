#pragma once

#include "dspace/value.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace dspace {

using Pid = std::uint64_t;
/// Sorted provenance ids of a record. Ingested rows carry one id; join
/// tuples and merged duplicates carry every contributor (repeats kept).
using PidList = std::vector<Pid>;
using PidSet = std::set<Pid>;

PidList merge_pids(const PidList& a, const PidList& b);

enum class Side { Inl, Inr };

struct PathTag {
    Side side = Side::Inl;
    /// Operation site, "stage.port".
    std::string label;

    bool operator==(const PathTag&) const = default;
    auto operator<=>(const PathTag&) const = default;
};

/// Values of de-selected fields, attributed to the record they came from.
struct IrrelevantRow {
    PidList pids;
    Fields fields;

    bool operator==(const IrrelevantRow&) const = default;
    auto operator<=>(const IrrelevantRow&) const = default;
};

/// Reserved error-metadata names stamped when a record leaves the happy path.
inline constexpr const char* kErrorStage = "error_stage";
inline constexpr const char* kErrorReason = "error_reason";

struct Record {
    PidList pids;
    Fields relevant;
    std::vector<IrrelevantRow> irrelevant;
    std::vector<PathTag> tags;
    /// Error-specific annotations (error_stage, error_reason, emap output).
    /// Empty on the correct path.
    Fields notes;

    const FieldValue& at(std::string_view field) const;
    const FieldValue* find(std::string_view field) const;

    bool operator==(const Record&) const = default;
    auto operator<=>(const Record&) const = default;
};

struct Relation {
    Schema schema;
    std::vector<Record> rows;

    Relation() = default;
    explicit Relation(Schema s, std::vector<Record> r = {})
        : schema(std::move(s))
        , rows(std::move(r))
    {
    }

    bool empty() const { return rows.empty(); }
    std::size_t size() const { return rows.size(); }

    bool operator==(const Relation&) const = default;
};

/// Schema for error traces: open, so diverted records keep their frozen fields.
Schema error_schema();

/// Railroad pair: records still on the happy path and the error trace.
struct Stream {
    Relation correct;
    Relation errors { error_schema() };

    Stream() = default;
    explicit Stream(Relation c)
        : correct(std::move(c))
    {
    }
    Stream(Relation c, Relation e)
        : correct(std::move(c))
        , errors(std::move(e))
    {
    }

    bool operator==(const Stream&) const = default;
};

/// Hands out provenance ids; one allocator per run keeps ids unique across
/// every ingested input.
class PidAllocator {
public:
    explicit PidAllocator(Pid next = 1)
        : next_(next)
    {
    }
    Pid next() { return next_++; }

private:
    Pid next_;
};

/// Builds a relation from in-memory rows. Each row must carry exactly the
/// schema's fields with values of the declared type (or Missing); otherwise
/// SchemaMismatch names the row index. Pids are assigned sequentially.
Relation ingest(const Schema& schema, const std::vector<Fields>& rows, PidAllocator& pids);
Relation ingest(const Schema& schema, const std::vector<Fields>& rows);

PidSet pids(const Relation& rel);
PidSet pids(const Stream& stream);
/// Every pid occurrence (with multiplicity across rows).
PidList pid_occurrences(const Relation& rel);

/// Converts happy-path records into error-trace records, stamping
/// error_stage and error_reason. Relevant fields are frozen as they are.
Relation to_errors(const Relation& rel, const std::string& stage, const std::string& reason);

/// Sorted multiset of relevant-field maps; the comparison basis for
/// "same answer" checks.
std::vector<Fields> relevant_multiset(const Relation& rel);

} // namespace dspace
