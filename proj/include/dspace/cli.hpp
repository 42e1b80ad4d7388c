#pragma once

#include "dspace/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace dspace::cli {

enum class Format { Text, Structured };

std::optional<Format> parse_format(std::string_view text);

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDivergence = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitConservation = 3;

/// A pipeline document with every source schema resolved, either inline or
/// from its sidecar file in the data directory.
struct LoadedPipeline {
    json document;
    PipelineGraph graph;
    std::map<std::string, InputFiles> files;
    std::map<std::string, CsvSchema> schemas;
};

/// Throws ParseError or MissingInput.
LoadedPipeline load_pipeline(const std::filesystem::path& pipeline_file, const std::filesystem::path& data_dir);

/// Reads every input CSV of a loaded pipeline. Pids are allocated input by
/// input in name order, so identical files always get identical pids.
std::map<std::string, Stream> load_inputs(const LoadedPipeline& p, const std::filesystem::path& data_dir);

struct RunArgs {
    std::filesystem::path pipeline;
    /// Defaults to the pipeline file's directory.
    std::filesystem::path data;
    std::filesystem::path out;
    Format format = Format::Text;
    bool parallel = false;
};

/// Writes sinks/<sink>.csv (plus <sink>.errors.csv when a report sink also
/// carries error records), dashboard.txt, dashboard.json and audit.json under
/// `out`, and prints the dashboard. Exit 0, 2 on a parse or validation
/// error, 3 when the conservation check fails.
int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

/// Validates a pipeline without reading any CSV. Exit 0 or 2.
int cmd_check(const std::filesystem::path& pipeline, const std::filesystem::path& data, std::ostream& out,
    std::ostream& err);

struct FuzzArgs {
    std::uint64_t seed = 1;
    std::size_t iterations = 1000;
    /// Translate Union without removing duplicates; expected to diverge.
    bool mutant = false;
    Format format = Format::Text;
};

/// Generates random expressions, runs each translation against the
/// reference evaluator and the conservation check. Prints the first
/// counterexample and exits 1 on divergence.
int cmd_fuzz(const FuzzArgs& args, std::ostream& out, std::ostream& err);

/// Prints the pipeline document a relational-algebra document translates
/// to. The expression's base relations are typed by sidecars in `data`.
int cmd_translate(const std::filesystem::path& expr_file, const std::filesystem::path& data, std::ostream& out,
    std::ostream& err);

} // namespace dspace::cli
