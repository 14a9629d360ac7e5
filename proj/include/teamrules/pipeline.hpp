#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "teamrules/advisor.hpp"
#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/eval.hpp"
#include "teamrules/trainer.hpp"

namespace teamrules {

struct DatasetConfig {
    std::string csv_path;
    std::string label_column;
    SplitCounts splits;
    uint64_t split_seed = 0;
    int bins_per_numeric = 5;
    std::map<std::string, FeatureKind> schema_overrides;
};

struct EstimatorConfig {
    double interaction_fraction = 0.5;
    int outcome_cv_folds = 5;
    std::vector<GbtParams> outcome_grid;  // defaults filled at parse time
    GbtParams discretion;
};

struct SweepConfig {
    std::vector<double> alphas;
    int train_repetitions = 10;
};

struct DegradeConfig {
    std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    size_t min_events = 2000;
};

struct PipelineConfig {
    DatasetConfig dataset;
    HumanProfile human;
    EstimatorConfig estimators;
    MiningConfig miner;
    TrainerConfig trainer;
    CostSpec costs;
    std::vector<Variant> variants{Variant::TR};
    EvalConfig eval;
    bool gate_enabled = false;
    SweepConfig sweep;
    DegradeConfig degrade;
    uint64_t seed = 0;
    std::string out_dir = "out";

    static PipelineConfig from_json_file(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text, const std::string& base_dir = ".");
    std::string canonical_json() const;
    uint64_t config_hash() const { return fnv1a64(canonical_json()); }
};

/// Derived, purpose-labeled seed streams so every stage draws independently
/// and deterministically.
uint64_t stream_seed(uint64_t master, const char* label, uint64_t index);

struct PreparedData {
    Dataset dataset;
    BinarizedView view;
    std::vector<size_t> train_rows, val_rows, test_rows;
};

PreparedData prepare_data(const PipelineConfig& config);

struct SimulatorBundle {
    HumanSimulator simulator;
    ProbabilisticClassifier difficulty_model;
};

/// Difficulty model (logistic on the train split) plus the bound simulator.
SimulatorBundle build_simulator(const PipelineConfig& config, const PreparedData& prepared);

/// Per-repetition artifacts shared by every variant and alpha of that
/// repetition: interaction/advisor row split, bootstrap model, interaction
/// log, learned discretion model, outcome model, candidate pool, and the
/// drawn training panel.
struct SeedArtifacts {
    std::vector<size_t> interaction_rows;
    std::vector<size_t> advisor_rows;
    ProbabilisticClassifier bootstrap;
    std::vector<InteractionRecord> records;
    DiscretionModel discretion;
    ProbabilisticClassifier outcome;
    CandidatePool pool;
    TrainPanel panel;
};

SeedArtifacts build_seed_artifacts(const PipelineConfig& config, const PreparedData& prepared,
                                   const HumanSimulator& simulator, uint64_t repetition);

struct TrainedAdvisor {
    Advisor advisor;
    AnnealResult anneal_result;
    Variant variant;
    double alpha;
    uint64_t repetition;
};

TrainedAdvisor train_one(const PipelineConfig& config, const PreparedData& prepared,
                         const SeedArtifacts& artifacts, Variant variant, double alpha, uint64_t repetition);

/// One curve point: a variant trained and evaluated at one alpha, averaged
/// over training repetitions.
struct SweepPoint {
    double alpha;
    Variant variant;
    double value_added_mean = 0.0;
    double value_added_se = 0.0;
    std::vector<double> per_rep_value_added;
    std::vector<MetricsReport> reports;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // alpha-major, variant-minor order
    std::string to_csv() const;
};

/// When bundle_root is non-empty, the first repetition's advisor for each
/// grid point is persisted there as a bundle directory.
SweepResult sweep_alpha(const PipelineConfig& config, const PreparedData& prepared,
                        const SimulatorBundle& sim_bundle, const std::vector<double>& alphas,
                        const std::vector<Variant>& variants, int train_repetitions, int workers,
                        const std::string& bundle_root = "");

/// Bounded deterministic parallel map; results only depend on the index.
void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn);

// ---- CLI-facing commands; each writes its artifacts under config.out_dir ----

int cmd_prepare(const PipelineConfig& config);
int cmd_simulate_human(const PipelineConfig& config, const std::string& split, uint64_t repetition);
int cmd_collect_interactions(const PipelineConfig& config, uint64_t repetition);
int cmd_fit_discretion(const PipelineConfig& config, uint64_t repetition);
int cmd_train(const PipelineConfig& config, Variant variant, std::optional<double> alpha_override,
              uint64_t repetition);
int cmd_evaluate(const PipelineConfig& config, Variant variant, std::optional<double> alpha_override,
                 uint64_t repetition);
int cmd_sweep(const PipelineConfig& config, int workers);
int cmd_case_study(const PipelineConfig& config, int workers);
int cmd_degrade_adb(const PipelineConfig& config);

std::string advisor_bundle_dir(const PipelineConfig& config, Variant variant, double alpha,
                               uint64_t repetition);

/// Two-tailed paired t-test. Returns {t, p}; p computed from the incomplete
/// beta function.
struct PairedTTest {
    double t = 0.0;
    double p = 1.0;
    size_t n = 0;
};
PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace teamrules
