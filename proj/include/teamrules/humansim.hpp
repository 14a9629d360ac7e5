#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"

namespace teamrules {

enum class BehaviorKind { difficulty_biased, group_biased, custom_group };

struct BehaviorRule {
    std::optional<Condition> condition;  // empty condition always matches
    std::optional<int> label_equals;     // optional label atom, for expertise tied to the outcome
    double value = 0.0;                  // accuracy or confidence, per context

    bool matches(const Dataset& dataset, size_t instance, int label) const;
};

/// How often the simulated human is right, as a function of instance
/// difficulty or of a feature-based group.
struct DecisionBehavior {
    BehaviorKind kind = BehaviorKind::difficulty_biased;
    double difficulty_threshold = 0.6;
    double low_accuracy = 0.60;
    double high_accuracy = 1.00;  // 0.95 is the usual group-biased value
    std::optional<Condition> condition;
    std::vector<BehaviorRule> custom;  // first match wins
};

/// Self-reported confidence; either tracks the probability of being correct
/// (offset by kappa) or follows difficulty/group rules.
struct ConfidenceBehavior {
    BehaviorKind kind = BehaviorKind::difficulty_biased;  // doubles as accuracy_biased here
    double kappa = 0.05;
    double difficulty_threshold = 0.6;
    double easy_confidence = 0.9;
    double low_confidence = 0.2;
    double high_confidence = 1.0;
    std::optional<Condition> condition;
    std::vector<BehaviorRule> custom;
};

enum class AdviceDirection { toward_positive, toward_negative };

/// Parameters of the acceptance model: adjusted-naive-Bayes confidence
/// integration, inverse-S probability weighting, and a logit choice rule,
/// plus the asymmetric-stakes multipliers and the noise knob.
struct ADBParams {
    double delta = 5.0;      // utility sensitivity; 0 means random choice
    double k = 0.63;         // probability-weighting exponent
    double gamma = 0.95;     // confidence-adjustment exponent
    double beta = 0.5;       // stakes offset
    double accept_boost = 1.0;  // applied when advice contradicts toward 1
    double accept_damp = 1.0;   // applied when advice contradicts toward 0
    double noise_level = 0.0;   // mixes the probability toward uniform
    bool literal_utility_form = false;  // printed-fraction variant, for comparison
};

struct HumanProfile {
    DecisionBehavior decision;
    ConfidenceBehavior confidence;
    ADBParams adb;
    uint64_t seed = 0;
};

/// d = 2|p - 0.5|: 0 where the outcome model is unsure, 1 where it is certain.
double difficulty_proxy(double outcome_probability);

double correct_probability(const DecisionBehavior& behavior, const Dataset& dataset, size_t instance,
                           int label, double difficulty);

int sample_decision(double p_correct, int true_label, Rng& rng);

/// kappa_sign is +1/-1; accuracy-biased confidence is clamped to [0.01, 0.99].
double confidence_value(const ConfidenceBehavior& behavior, const Dataset& dataset, size_t instance,
                        int label, double p_correct, double difficulty, int kappa_sign);

/// Probability of accepting contradictory advice. Deterministic part only:
/// utilities, logit, and direction multipliers; noise is applied by the
/// sampling functions. Inputs outside [0,1] raise ConfidenceOutOfRange.
double acceptance_probability(const ADBParams& adb, double model_confidence, double human_confidence,
                              AdviceDirection direction);

/// acceptance_probability with the noise mix applied: (1-level)*p + level*u.
double noisy_acceptance_probability(const ADBParams& adb, double model_confidence, double human_confidence,
                                    AdviceDirection direction, Rng& rng);

int sample_acceptance(const ADBParams& adb, double model_confidence, double human_confidence,
                      AdviceDirection direction, Rng& rng);

/**
 * Binds a profile to a dataset: precomputes per-instance difficulty (from a
 * supplied outcome-probability vector), probability of a correct decision,
 * and the per-instance kappa sign, then serves reproducible draws.
 */
class HumanSimulator {
public:
    HumanSimulator(HumanProfile profile, const Dataset& dataset, std::vector<double> outcome_probabilities);

    const HumanProfile& profile() const { return profile_; }
    double difficulty(size_t instance) const { return difficulty_[instance]; }
    double p_correct(size_t instance) const { return p_correct_[instance]; }

    int draw_decision(size_t instance, Rng& rng) const;
    double confidence(size_t instance) const { return confidence_[instance]; }
    int draw_acceptance(size_t instance, double model_confidence, AdviceDirection direction, Rng& rng) const;
    double true_acceptance(size_t instance, double model_confidence, AdviceDirection direction) const;

    /// Fresh generator for one repetition of this human's behavior.
    Rng repetition_rng(uint64_t repetition) const { return Rng(profile_.seed).derive(repetition); }

private:
    // everything is precomputed per instance, so the simulator owns no view
    // of the dataset and stays valid wherever it is moved
    HumanProfile profile_;
    std::vector<int> labels_;
    std::vector<double> difficulty_;
    std::vector<double> p_correct_;
    std::vector<double> confidence_;
};

}  // namespace teamrules
