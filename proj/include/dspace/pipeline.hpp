#pragma once

#include "dspace/expr.hpp"
#include "dspace/ops.hpp"
#include "dspace/relation.hpp"
#include "dspace/space.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dspace {

enum class NodeKind {
    Source,
    Partition,
    NullPartition,
    TaggedUnion,
    Untag,
    StripTags,
    OuterJoin,
    Lookup,
    Project,
    Dedup,
    DedupPartition,
    SetPartition,
    Rename,
    Fmap,
    Emap,
    Totalize,
    Aggregate,
    Cartesian,
    Divert,
    Pad,
};

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);

/// Input port names a node of this kind expects, in order.
std::vector<std::string> input_ports(NodeKind kind);
/// Output port names; the first one also carries the incoming error trace.
std::vector<std::string> output_ports(NodeKind kind);

/// One end of a wire, written "node.port".
struct PortRef {
    std::string node;
    std::string port;

    std::string str() const { return node + "." + port; }
    static std::optional<PortRef> parse(std::string_view text);

    auto operator<=>(const PortRef&) const = default;
};

/// An operation instance. Only the parameters relevant to `kind` are read.
struct Node {
    std::string name;
    NodeKind kind = NodeKind::Source;
    /// Input port -> producing port.
    std::map<std::string, PortRef> inputs;

    /// source: name of the input relation and its declared schema.
    std::string input;
    std::optional<Schema> schema;
    /// partition
    Predicate predicate;
    /// null_partition: columns that must be present; project: columns kept;
    /// pad: output column order.
    std::vector<std::string> columns;
    /// outer_join, lookup: equality column pairs (left, right).
    std::vector<std::pair<std::string, std::string>> on;
    /// rename
    std::vector<std::pair<std::string, std::string>> mapping;
    /// fmap: new columns in order; totalize: exactly one.
    std::vector<std::pair<std::string, ValueExpr>> exprs;
    /// emap: annotations added to every error record.
    Fields notes;
    /// aggregate
    std::vector<std::string> group_by;
    std::vector<AggSpec> specs;
    /// tagged_union: tag label (defaults to the node name).
    std::string label;
    /// divert: error reason (defaults to the upstream port name);
    /// pad: reason of the Missing values added (defaults to "null").
    std::string reason;
    /// pad: columns added to every record as Missing. When `columns` is
    /// also set the output columns are reordered to match it.
    std::vector<Column> pad;
};

enum class SinkRole { Report, Error };

std::string_view to_string(SinkRole role);

/// Declared pipeline output. Several ports may feed one sink. Correct
/// records arriving at an error sink are moved to the error trace, stamped
/// with the producing node and `reason` (or the port name).
struct SinkDecl {
    std::string name;
    SinkRole role = SinkRole::Report;
    std::vector<PortRef> ports;
    std::string reason;
};

enum class MeasureKind { Count, SumPerUnit, Paccioli };

std::string_view to_string(MeasureKind kind);
std::optional<MeasureKind> parse_measure_kind(std::string_view text);

/// A data space whose measure must be conserved for the records of one input.
struct MeasureDecl {
    std::string input;
    MeasureKind kind = MeasureKind::Count;
    std::string field;
    std::string unit_field;

    std::string label() const;
};

/// Accounted/unaccounted listing: records of `input` reaching any of `sinks`
/// are accounted, the rest are not. Records are named by `label_field`.
struct ReportDecl {
    std::string title;
    std::string input;
    std::string label_field;
    std::vector<std::string> sinks;
};

struct PipelineGraph {
    std::vector<Node> nodes;
    std::vector<SinkDecl> sinks;
    std::vector<MeasureDecl> measures;
    std::vector<ReportDecl> reports;

    const Node* find(std::string_view name) const;
};

/// Adds the implicit sinks of macro nodes: a lookup's unconsumed `missing`
/// and `unused` ports become error sinks "<node>_missing" / "<node>_unused".
PipelineGraph expand_macros(const PipelineGraph& graph);

enum class ViolationKind {
    UnconsumedPort,
    DuplicateConsumer,
    UnknownPort,
    UnwiredInput,
    DuplicateName,
    Cycle,
    SchemaMismatch,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    /// Stage, port or sink the violation is attached to.
    std::string where;
    std::string message;

    std::string to_string() const;
};

/// Empty iff the (macro-expanded) graph is well formed: unique names, every
/// input wired to an existing port, every output port consumed exactly once,
/// acyclic, and schemas consistent along every wire. Never throws.
std::vector<Violation> validate(const PipelineGraph& graph);

/// Output schema of every port, computed by running each stage on empty
/// relations of its input schemas. Throws on the first inconsistency.
std::map<PortRef, Schema> infer_schemas(const PipelineGraph& graph);

struct Balance {
    std::string space;
    MonoidElement in;
    MonoidElement out;
};

struct StageLedger {
    std::string stage;
    NodeKind kind = NodeKind::Source;
    /// Pids seen per input and output port (correct and error records).
    std::map<std::string, PidSet> in;
    std::map<std::string, PidSet> out;
    std::size_t rows_in = 0;
    std::size_t rows_out = 0;
    /// Every input record reappears exactly once in some output port.
    bool row_preserving = false;
    /// Declared measures over all records entering and leaving the stage;
    /// only recorded for row-preserving stages.
    std::vector<Balance> balances;
};

struct RunAudit {
    /// Ingested records per input name (correct and ingestion errors).
    std::map<std::string, Stream> sources;
    std::vector<StageLedger> stages;
    std::vector<SinkDecl> sinks;
    std::map<std::string, PidSet> sink_pids;
    std::vector<MeasureDecl> measures;
    std::vector<ReportDecl> reports;
    /// pid -> (stage, port) visits in execution order.
    std::map<Pid, std::vector<PortRef>> trace;
    /// Wall-clock per stage in milliseconds; informational only.
    std::map<std::string, double> timing_ms;

    /// Sink a source pid is attributed to: the first declared sink holding it.
    std::map<Pid, std::string> owners() const;
};

struct RunResult {
    std::map<std::string, Stream> sinks;
    RunAudit audit;
};

struct RunOptions {
    /// Execute independent stages of one topological level concurrently.
    bool parallel = false;
};

/// Executes a valid graph. Inputs are ingested relations, optionally with
/// ingestion errors already on their error trace. Throws InvalidArgument on
/// an invalid graph, MissingInput for an absent input and SchemaMismatch when
/// an input does not carry its source's declared schema.
RunResult run(const PipelineGraph& graph, const std::map<std::string, Stream>& inputs, const RunOptions& options = {});
RunResult run(const PipelineGraph& graph, const std::map<std::string, Relation>& inputs, const RunOptions& options = {});

struct Verdict {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Checks per-stage pid, row and measure balance, source-to-sink pid
/// conservation, and for every declared measure that the fusion of sink
/// measures (records attributed to their owning sink) equals the source measure.
Verdict conservation_check(const RunAudit& audit);

/// Data space for a declared measure over the given records.
DataSpaceDescriptor measure_space(const MeasureDecl& decl, const std::vector<const Record*>& records);

struct SinkSummary {
    std::string name;
    SinkRole role = SinkRole::Report;
    std::size_t rows = 0;
    std::size_t error_rows = 0;
    std::size_t distinct_pids = 0;
    /// Source pids owned by this sink; these add up to the ingested total.
    std::size_t attributed_pids = 0;
    /// Declared measures over the owned source records, rendered.
    std::vector<std::pair<std::string, std::string>> measures;
};

struct ErrorGroup {
    std::string stage;
    std::string reason;
    std::int64_t count = 0;
    PidSet pids;
    /// Per-unit sums of the declared sum measures over the grouped records.
    std::vector<std::pair<std::string, std::string>> sums;
};

struct ReportListing {
    std::string title;
    std::vector<std::string> accounted;
    std::vector<std::string> unaccounted;
};

struct Dashboard {
    std::size_t total_ingested = 0;
    std::vector<SinkSummary> sinks;
    std::vector<ErrorGroup> errors;
    std::vector<ReportListing> reports;
};

Dashboard render_dashboard(const RunResult& result);
std::string dashboard_text(const Dashboard& dashboard);

} // namespace dspace
