#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teamrules/advisor.hpp"
#include "teamrules/common.hpp"
#include "teamrules/estimators.hpp"
#include "teamrules/rules.hpp"

namespace teamrules {

enum class Variant { TR, TR_no_ADB, TR_no_Cost, TR_no_ADB_Cost, task_only };

const char* variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

enum class AcceptanceRule { printed, metropolis };

struct TrainerConfig {
    int iterations = 2000;       // T
    double cooling = 0.01;       // C0, temperature at the final iteration
    double beta0 = 0.05;         // recorded for provenance; the pool cap is configured in MiningConfig
    Variant variant = Variant::TR;
    uint64_t seed = 0;
    AcceptanceRule acceptance_rule = AcceptanceRule::printed;
    bool cross_check = false;  // verify incremental state against full recomputation every iteration

    void validate() const {
        if (iterations < 1) throw Error(ErrorKind::ConfigError, "iterations must be >= 1");
        if (!(cooling > 0.0 && cooling < 1.0))
            throw Error(ErrorKind::ConfigError, "cooling base must be in (0,1)");
    }
};

/// One draw of the simulated human over the advisor-training rows, plus the
/// outcome-model probabilities the value test needs.
struct TrainPanel {
    std::vector<size_t> rows;  // dataset instance indices
    std::vector<int> y;
    std::vector<int> h;
    std::vector<double> human_confidence;
    std::vector<double> outcome_p1;

    size_t size() const { return rows.size(); }
};

/// Component overrides realizing a variant: which discretion model the
/// advisor believes, the alpha it optimizes (and advises) with, and the
/// inference mode. Evaluation always charges the context's true alpha.
struct VariantPlan {
    DiscretionModel discretion;
    CostSpec costs;
    AdvisorMode mode;
};

VariantPlan apply_variant(Variant variant, const CostSpec& context_costs, const DiscretionModel& learned);

struct TraceRow {
    int t;
    double ttl_current;
    double ttl_best;
    std::string edit_kind;  // add | cut | replace | none
    bool accepted;
};

struct AnnealResult {
    RuleSet best;
    double ttl_best_total = 0.0;
    double ttl_best_mean = 0.0;
    double ttl_empty_total = 0.0;  // loss of the empty rule set (train HDL for selective modes)
    std::vector<TraceRow> trace;
    bool stopped_early = false;
    int iterations_run = 0;
};

struct TtlBreakdown {
    double total = 0.0;
    double mean = 0.0;
};

/// Empirical total team loss of a rule set on a panel: full recomputation of
/// the selective-advising (or task-only) decisions and the three-term loss.
TtlBreakdown empirical_ttl(const RuleSet& rule_set, const TrainPanel& panel, const DiscretionModel& discretion,
                           const CostSpec& costs, AdvisorMode mode);

/// Weighted error-instance draw: probability proportional to the loss with
/// the advising cost excluded for cost-effective contradictions. Returns
/// nothing when the adjusted total is zero (converged).
std::optional<size_t> sample_error_instance(const std::vector<double>& adjusted_losses, Rng& rng);

/// Simulated annealing over rule sets (the rules-generator loop). Tracks the
/// best set visited; the result never loses to the empty set on the panel.
AnnealResult anneal(const TrainerConfig& config, const TrainPanel& panel, const CandidatePool& pool,
                    const DiscretionModel& discretion, const CostSpec& training_costs, AdvisorMode mode);

std::string trace_to_csv(const std::vector<TraceRow>& trace);

/// Task-only pooled confidence for uncovered instances: the fraction of
/// panel rows predicted 0 whose label is 0.
double negative_prediction_confidence(const RuleSet& rule_set, const TrainPanel& panel);

}  // namespace teamrules
