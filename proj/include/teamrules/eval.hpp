#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teamrules/advisor.hpp"
#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/estimators.hpp"
#include "teamrules/humansim.hpp"

namespace teamrules {

struct GroupSpec {
    std::string name;
    std::optional<Condition> condition;
    std::optional<int> label_equals;  // group by outcome, e.g. instances with the condition present

    bool matches(const Dataset& dataset, size_t instance) const {
        if (label_equals && dataset.instances[instance].label != *label_equals) return false;
        if (condition && !condition->holds(dataset, instance)) return false;
        return true;
    }
};

/// Mean and standard error over the repetitions where the metric was
/// defined; a metric with no defined repetition is reported as absent.
struct MetricValue {
    double mean = 0.0;
    double se = 0.0;
    size_t defined_reps = 0;

    bool present() const { return defined_reps > 0; }
};

struct GroupMetrics {
    std::string name;
    size_t group_size = 0;
    MetricValue hdl, tdl, al, ttl, value_added;
    MetricValue accuracy_improvement;  // corrected decisions / total instances
    MetricValue tdl_improvement;       // corrected decisions weighted by avoided loss / total instances
    MetricValue advising_costs_incurred;  // contradictory advice / total instances
    MetricValue advising_costs_au;        // alpha x advising rate
    MetricValue advising_confidence;      // mean confidence of contradictory advice
    MetricValue advising_accuracy;        // correct advice / advice, within the group
    MetricValue advising_rate;            // advice / instances in the group
    MetricValue acceptance_rate;          // accepted / offered, within the group
    MetricValue errors_avoided_pct;       // corrected / incorrect human decisions in the group
};

/// Full evaluation output. The decomposition identities TTL = TDL + AL and
/// Value Added = HDL - TTL hold exactly on the report means by construction.
struct MetricsReport {
    size_t repetitions = 0;
    GroupMetrics overall;
    std::vector<GroupMetrics> groups;

    std::string to_json() const;
    std::string to_csv() const;
};

struct EvalConfig {
    int repetitions = 50;
    std::vector<GroupSpec> groups;
    uint64_t seed = 0;  // offset into the simulator's repetition stream
};

/**
 * Runs stochastic repetitions of the human over the given rows, pairs each
 * draw with the advisor, and aggregates the advising metrics. All behavior
 * draws (decisions, confidence, acceptance) come from the simulator's ground
 * truth; the advisor's learned discretion model is used only inside its own
 * value test. Advice metrics count contradictory advice (advice that agrees
 * with the human cannot change the outcome and carries no cost).
 */
MetricsReport evaluate(const Advisor& advisor, const Dataset& dataset, const BinarizedView& view,
                       const std::vector<size_t>& rows, const HumanSimulator& simulator,
                       const CostSpec& context_costs, const EvalConfig& config);

/// The human-alone policy (what a gated-off advisor deploys to).
MetricsReport evaluate_human_alone(const Dataset& dataset, const std::vector<size_t>& rows,
                                   const HumanSimulator& simulator, const CostSpec& context_costs,
                                   const EvalConfig& config);

enum class GateDecision { deploy, human_alone };

/// Pre-deployment check on validation data: an advisor that diminishes the
/// human's value is not used.
GateDecision robustness_gate(const Advisor& advisor, const Dataset& dataset, const BinarizedView& view,
                             const std::vector<size_t>& validation_rows, const HumanSimulator& simulator,
                             const CostSpec& context_costs, const EvalConfig& config);

/// Profiles with increasing acceptance-behavior noise, one per level.
std::vector<HumanProfile> degrade_adb(const HumanProfile& profile, const std::vector<double>& levels);

/// AUC of a discretion model against a (possibly perturbed) simulated human:
/// contradiction events are generated with the bootstrap model until at
/// least min_events accumulate, then scored.
double discretion_auc_against(const DiscretionModel& model, const HumanSimulator& simulator,
                              const ProbabilisticClassifier& bootstrap, const Dataset& dataset,
                              const std::vector<size_t>& rows, size_t min_events, Rng& rng);

}  // namespace teamrules
