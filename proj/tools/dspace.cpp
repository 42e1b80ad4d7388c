// Command-line front end: run, check, fuzz and translate.

#include "dspace/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

dspace::cli::Format format_of(const std::string& text)
{
    return dspace::cli::parse_format(text).value_or(dspace::cli::Format::Text);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Lossless data-pipeline engine" };
    app.require_subcommand(1);

    std::string format = "text";
    const auto formats = CLI::IsMember({ "text", "structured", "json" });

    dspace::cli::RunArgs run_args;
    run_args.out = "out";
    auto* run = app.add_subcommand("run", "Execute a pipeline document over CSV inputs");
    run->add_option("pipeline", run_args.pipeline, "Pipeline document")->required()->check(CLI::ExistingFile);
    run->add_option("--data", run_args.data, "Directory holding the input CSVs and schema sidecars");
    run->add_option("--out", run_args.out, "Output directory")->capture_default_str();
    run->add_option("--format", format, "Dashboard format on stdout")->check(formats)->capture_default_str();
    run->add_flag("--parallel", run_args.parallel, "Run independent stages concurrently");

    std::string check_pipeline;
    std::string check_data;
    auto* check = app.add_subcommand("check", "Validate a pipeline document");
    check->add_option("pipeline", check_pipeline, "Pipeline document")->required()->check(CLI::ExistingFile);
    check->add_option("--data", check_data, "Directory holding the schema sidecars");

    dspace::cli::FuzzArgs fuzz_args;
    auto* fuzz = app.add_subcommand("fuzz", "Compare translated pipelines with the reference evaluator");
    fuzz->add_option("--seed", fuzz_args.seed, "Generator seed")->capture_default_str();
    fuzz->add_option("--iterations", fuzz_args.iterations, "Number of random cases")->capture_default_str();
    fuzz->add_flag("--mutant", fuzz_args.mutant, "Translate Union without duplicate removal");
    fuzz->add_option("--format", format, "Report format")->check(formats)->capture_default_str();

    std::string expr_file;
    std::string expr_data;
    auto* translate = app.add_subcommand("translate", "Print the pipeline for a relational-algebra document");
    translate->add_option("expression", expr_file, "Expression document")->required()->check(CLI::ExistingFile);
    translate->add_option("--data", expr_data, "Directory holding the schema sidecars");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dspace::cli::kExitInvalid;
    }

    if (run->parsed()) {
        run_args.format = format_of(format);
        return dspace::cli::cmd_run(run_args, std::cout, std::cerr);
    }
    if (check->parsed()) return dspace::cli::cmd_check(check_pipeline, check_data, std::cout, std::cerr);
    if (fuzz->parsed()) {
        fuzz_args.format = format_of(format);
        return dspace::cli::cmd_fuzz(fuzz_args, std::cout, std::cerr);
    }
    return dspace::cli::cmd_translate(expr_file, expr_data, std::cout, std::cerr);
}
