#pragma once

#include "dspace/pipeline.hpp"
#include "dspace/ra.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dspace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Parses comma-separated text with double-quote quoting ("" escapes a
/// quote, quoted fields may span lines). Accepts LF and CRLF line ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Quotes a cell when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view cell);
std::string write_csv(const std::vector<std::vector<std::string>>& rows);

/// Column typing for a CSV file, read from its sidecar document.
struct CsvSchema {
    Schema schema;
    /// Quantity columns whose unit is taken from another column's cell.
    std::map<std::string, std::string> unit_columns;
    /// Cells equal to one of these (after trimming) ingest as Missing with
    /// the sentinel as reason; the empty string reads as Missing("blank").
    std::vector<std::string> sentinels { "unknown", "closed", "priceless", "" };
};

CsvSchema csv_schema_from_json(const json& j);
json to_json(const CsvSchema& s);

/// Parses one cell. Quantity cells may carry their unit as a prefix or
/// suffix ("10$", "$10"); otherwise the declared unit or the unit cell is
/// used. Returns nullopt when the text does not fit the column type.
std::optional<FieldValue> parse_cell(std::string_view text, const Column& column, std::string_view unit_cell,
    const std::vector<std::string>& sentinels);

/// Ingests CSV rows (header first). Rows that fail to parse are not
/// dropped: they keep a pid and land on the error trace with their raw text,
/// stamped error_stage "ingest:<name>".
Stream ingest_csv(const std::string& name, std::string_view text, const CsvSchema& schema, PidAllocator& pids);

/// Renders a relation (correct rows) or an error trace as CSV. Each row ends
/// with its pids; error rows also carry their notes.
std::string relation_csv(const Relation& rel);
std::string errors_csv(const Relation& errors);

// ---------------------------------------------------------------------------
// Structured documents
// ---------------------------------------------------------------------------

json to_json(const FieldValue& v);
FieldValue value_from_json(const json& j);

json to_json(const ValueExpr& e);
ValueExpr value_expr_from_json(const json& j);

json to_json(const Predicate& p);
Predicate predicate_from_json(const json& j);

json to_json(const Schema& s);
Schema schema_from_json(const json& j);

json to_json(const PipelineGraph& g);
/// Throws ParseError naming the offending element.
PipelineGraph pipeline_from_json(const json& j);

json to_json(const RAExpr& e);
RAExpr ra_from_json(const json& j);

json to_json(const Dashboard& d);
json to_json(const RunAudit& audit);

/// Where a pipeline's inputs live, relative to the data directory.
struct InputFiles {
    std::string csv;
    std::string schema;
};

/// "inputs" section of a pipeline document; missing entries default to
/// "<name>.csv" and "<name>.schema.json".
std::map<std::string, InputFiles> input_files(const json& pipeline_doc, const PipelineGraph& g);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and a rename, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace dspace
