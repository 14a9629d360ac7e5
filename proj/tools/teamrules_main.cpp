// Command-line front end for the advising pipeline. One JSON config drives
// every subcommand; flags override the variant, alpha, seed, worker count,
// and output directory.

#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "teamrules/kernels.hpp"
#include "teamrules/pipeline.hpp"

namespace {

using teamrules::Error;
using teamrules::ErrorKind;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigError:
            return 2;
        case ErrorKind::MissingLabelColumn:
        case ErrorKind::NonBinaryLabel:
        case ErrorKind::ParseError:
        case ErrorKind::CountsExceedSize:
        case ErrorKind::SchemaMismatch:
        case ErrorKind::IoError:
            return 3;
        case ErrorKind::EmptyPool:
        case ErrorKind::InvalidRule:
        case ErrorKind::ZeroCoverage:
        case ErrorKind::SingleClassTrainingSet:
        case ErrorKind::NonConvergence:
        case ErrorKind::InsufficientRecords:
        case ErrorKind::SingleClassRecords:
            return 4;
        case ErrorKind::NoMatchingRule:
        case ErrorKind::ConfidenceOutOfRange:
        case ErrorKind::NoCoveringRule:
            return 5;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interpretable rule-set advisors for human decision-makers"};
    app.require_subcommand(1);

    std::string config_path;
    std::string variant_name = "TR";
    std::optional<double> alpha;
    uint64_t seed = 0;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    std::string out_override;
    std::string split = "train";

    app.add_option("--config", config_path, "pipeline config (JSON)")->required();
    app.add_option("--out", out_override, "override the config's output directory");

    auto* prepare = app.add_subcommand("prepare", "load, split, and binarize the dataset");
    auto* simulate = app.add_subcommand("simulate-human", "export one draw of the simulated human");
    simulate->add_option("--split", split, "train | val | test");
    simulate->add_option("--seed", seed, "repetition index");
    auto* collect = app.add_subcommand("collect-interactions", "generate the contradiction log");
    collect->add_option("--seed", seed, "repetition index");
    auto* fit_disc = app.add_subcommand("fit-discretion", "fit the acceptance model from interactions");
    fit_disc->add_option("--seed", seed, "repetition index");
    auto* train = app.add_subcommand("train", "train one advisor");
    train->add_option("--variant", variant_name, "TR | TR_no_ADB | TR_no_Cost | TR_no_ADB_Cost | task_only");
    train->add_option("--alpha", alpha, "override the config's advising cost");
    train->add_option("--seed", seed, "repetition index");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a trained advisor bundle on the test split");
    evaluate->add_option("--variant", variant_name, "variant of the bundle");
    evaluate->add_option("--alpha", alpha, "alpha of the bundle");
    evaluate->add_option("--seed", seed, "repetition index of the bundle");
    auto* sweep = app.add_subcommand("sweep", "train and evaluate across the alpha grid and variants");
    sweep->add_option("--workers", workers, "parallel workers");
    auto* case_study = app.add_subcommand("case-study", "group-broken advising-strategy tables");
    case_study->add_option("--workers", workers, "parallel workers");
    auto* degrade = app.add_subcommand("degrade-adb", "acceptance-noise robustness study");

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = teamrules::PipelineConfig::from_json_file(config_path);
        if (!out_override.empty()) config.out_dir = out_override;

        if (prepare->parsed()) return teamrules::cmd_prepare(config);
        if (simulate->parsed()) return teamrules::cmd_simulate_human(config, split, seed);
        if (collect->parsed()) return teamrules::cmd_collect_interactions(config, seed);
        if (fit_disc->parsed()) return teamrules::cmd_fit_discretion(config, seed);
        if (train->parsed())
            return teamrules::cmd_train(config, teamrules::variant_from_name(variant_name), alpha, seed);
        if (evaluate->parsed())
            return teamrules::cmd_evaluate(config, teamrules::variant_from_name(variant_name), alpha, seed);
        if (sweep->parsed()) return teamrules::cmd_sweep(config, workers);
        if (case_study->parsed()) return teamrules::cmd_case_study(config, workers);
        if (degrade->parsed()) return teamrules::cmd_degrade_adb(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
