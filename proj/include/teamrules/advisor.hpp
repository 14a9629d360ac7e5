#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/estimators.hpp"
#include "teamrules/rules.hpp"

namespace teamrules {

/// Context trade-offs: alpha is the loss charged per contradictory advice,
/// lambda0/lambda1 weight false positives / false negatives.
struct CostSpec {
    double alpha = 0.0;
    double lambda0 = 1.0;
    double lambda1 = 1.0;

    void validate() const {
        if (alpha < 0.0) throw Error(ErrorKind::ConfigError, "alpha must be >= 0");
        if (lambda0 <= 0.0 || lambda1 <= 0.0)
            throw Error(ErrorKind::ConfigError, "lambda0 and lambda1 must be > 0");
    }
};

/// V(y, d): 0 when correct, lambda0 on a false positive, lambda1 on a false
/// negative.
inline double decision_loss(const CostSpec& costs, int y, int d) {
    if (y == d) return 0.0;
    return y == 0 ? costs.lambda0 : costs.lambda1;
}

/// Expected loss of one advice over the human's discretion:
///   p(a)·V(y, advice) + (1−p(a))·V(y, h) + alpha·1{advice ≠ h}.
/// Exactly V(y, h) when advice == h, by construction.
inline double expected_team_loss(const CostSpec& costs, int y, int advice, int h, double p_accept) {
    if (advice == h) return decision_loss(costs, y, h);
    return p_accept * decision_loss(costs, y, advice) + (1.0 - p_accept) * decision_loss(costs, y, h) +
           costs.alpha;
}

/// The value test: does candidate advice beat withholding in expectation
/// over the outcome model? Strict inequality; a candidate equal to h never
/// passes.
bool psi(const CostSpec& costs, double outcome_p1, int candidate, int h, double p_accept);

/// Advice, or the decision to withhold it. When withheld the human's own
/// judgment stands downstream.
struct Advice {
    bool offered = false;
    int recommendation = 0;
    double confidence = 0.0;
    int rule_id = -1;  // index within the invoked side of the rule set
};

enum class AdvisorMode { teamrules, task_only };

/**
 * The deployable object: rule set plus the discretion, outcome, and cost
 * models it was assembled with. Immutable after assembly; advise() is pure.
 */
class Advisor {
public:
    Advisor(RuleSet rule_set, DiscretionModel discretion, ProbabilisticClassifier outcome, CostSpec costs,
            AdvisorMode mode, double negative_confidence = 0.0);

    const RuleSet& rule_set() const { return rule_set_; }
    const DiscretionModel& discretion() const { return discretion_; }
    const ProbabilisticClassifier& outcome() const { return outcome_; }
    const CostSpec& costs() const { return costs_; }
    AdvisorMode mode() const { return mode_; }
    double negative_confidence() const { return negative_confidence_; }

    /// Highest precision among rules of the given side covering the
    /// instance; errors if nothing covers.
    struct RuleMatch {
        double confidence;
        int rule_id;
    };
    RuleMatch rule_confidence(bool positive_side, const Dataset& dataset, size_t instance,
                              const BinarizedView& view) const;

    /// Selective advising: positive side first, negative side only when the
    /// positive side does not cover, withhold otherwise or when the value
    /// test fails.
    Advice advise(const Dataset& dataset, size_t instance, const BinarizedView& view, int h,
                  double human_confidence) const;

    /// Full-coverage advising: 1 iff covered, with the pooled negative
    /// precision as confidence for uncovered instances.
    Advice advise_task_only(const Dataset& dataset, size_t instance, const BinarizedView& view) const;

    /// Dispatches on mode().
    Advice advise_instance(const Dataset& dataset, size_t instance, const BinarizedView& view, int h,
                           double human_confidence) const;

    void save(const std::string& directory, const BinarizedView& view, const std::string& manifest_json) const;
    static Advisor load(const std::string& directory, const BinarizedView& view);

private:
    RuleSet rule_set_;
    DiscretionModel discretion_;
    ProbabilisticClassifier outcome_;
    CostSpec costs_;
    AdvisorMode mode_;
    double negative_confidence_;
};

std::string rule_set_to_json(const RuleSet& rule_set, const BinarizedView& view);
RuleSet rule_set_from_json(const std::string& text, const BinarizedView& view);

const char* advisor_mode_name(AdvisorMode mode);
AdvisorMode advisor_mode_from_name(const std::string& name);

}  // namespace teamrules
