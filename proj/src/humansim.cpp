#include "teamrules/humansim.hpp"

#include <algorithm>
#include <cmath>

namespace teamrules {

namespace {

constexpr double kConfidenceEps = 1e-9;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_confidence(double c, const char* name) {
    if (!(c >= 0.0 && c <= 1.0))
        throw Error(ErrorKind::ConfidenceOutOfRange, std::string(name) + " = " + std::to_string(c));
}

// (c^gamma) / (c^gamma + (1-c)^gamma): pulls confidences toward 0.5 as gamma
// drops below 1.
double adjust(double c, double gamma) {
    const double a = std::pow(c, gamma);
    const double b = std::pow(1.0 - c, gamma);
    return a / (a + b);
}

// inverse-S probability weighting
double weight(double p, double k) {
    const double num = std::pow(p, k);
    const double den = num + std::pow(1.0 - p, k);
    return num / den;
}

}  // namespace

double difficulty_proxy(double outcome_probability) {
    if (!(outcome_probability >= 0.0 && outcome_probability <= 1.0))
        throw Error(ErrorKind::ConfidenceOutOfRange,
                    "outcome probability = " + std::to_string(outcome_probability));
    return 2.0 * std::abs(outcome_probability - 0.5);
}

bool BehaviorRule::matches(const Dataset& dataset, size_t instance, int label) const {
    if (label_equals && *label_equals != label) return false;
    if (condition && !condition->holds(dataset, instance)) return false;
    return true;
}

double correct_probability(const DecisionBehavior& behavior, const Dataset& dataset, size_t instance,
                           int label, double difficulty) {
    switch (behavior.kind) {
        case BehaviorKind::difficulty_biased:
            return difficulty > behavior.difficulty_threshold ? behavior.low_accuracy : behavior.high_accuracy;
        case BehaviorKind::group_biased:
            if (!behavior.condition)
                throw Error(ErrorKind::ConfigError, "group_biased decision behavior needs a condition");
            return behavior.condition->holds(dataset, instance) ? behavior.low_accuracy : behavior.high_accuracy;
        case BehaviorKind::custom_group:
            for (const auto& rule : behavior.custom)
                if (rule.matches(dataset, instance, label)) return rule.value;
            throw Error(ErrorKind::NoMatchingRule, "no custom decision rule matches instance");
    }
    throw Error(ErrorKind::ConfigError, "unknown decision behavior");
}

int sample_decision(double p_correct, int true_label, Rng& rng) {
    return rng.bernoulli(p_correct) ? true_label : 1 - true_label;
}

double confidence_value(const ConfidenceBehavior& behavior, const Dataset& dataset, size_t instance,
                        int label, double p_correct, double difficulty, int kappa_sign) {
    switch (behavior.kind) {
        case BehaviorKind::difficulty_biased:  // accuracy_biased
            return std::clamp(p_correct + kappa_sign * behavior.kappa, 0.01, 0.99);
        case BehaviorKind::group_biased: {
            if (difficulty < behavior.difficulty_threshold) return behavior.easy_confidence;
            if (!behavior.condition)
                throw Error(ErrorKind::ConfigError, "group_biased confidence behavior needs a condition");
            return behavior.condition->holds(dataset, instance) ? behavior.low_confidence
                                                                : behavior.high_confidence;
        }
        case BehaviorKind::custom_group:
            for (const auto& rule : behavior.custom)
                if (rule.matches(dataset, instance, label)) return rule.value;
            throw Error(ErrorKind::NoMatchingRule, "no custom confidence rule matches instance");
    }
    throw Error(ErrorKind::ConfigError, "unknown confidence behavior");
}

double acceptance_probability(const ADBParams& adb, double model_confidence, double human_confidence,
                              AdviceDirection direction) {
    check_confidence(model_confidence, "model confidence");
    check_confidence(human_confidence, "human confidence");
    // Profiles may legitimately emit exactly 0 or 1; nudge into the open
    // interval so the power/ratio algebra stays finite.
    const double cm = std::clamp(model_confidence, kConfidenceEps, 1.0 - kConfidenceEps);
    const double ch = std::clamp(human_confidence, kConfidenceEps, 1.0 - kConfidenceEps);

    const double a = adjust(cm, adb.gamma);
    const double b = adjust(ch, adb.gamma);

    double posterior;
    if (adb.literal_utility_form) {
        // the fraction exactly as printed in the source formulation; kept for
        // side-by-side comparison, not a probability combination
        posterior = 1.0 / (1.0 + ((1.0 - a) * (a - b)) / (a * b));
    } else {
        posterior = (a * (1.0 - b)) / (a * (1.0 - b) + (1.0 - a) * b);
    }
    posterior = clamp01(posterior);

    const double w = weight(posterior, adb.k);
    const double u_accept = (1.0 + adb.beta) * w - adb.beta;
    const double u_reject = 1.0 - (1.0 + adb.beta) * w;
    const double p = 1.0 / (1.0 + std::exp(adb.delta * (u_reject - u_accept)));

    const double multiplier = direction == AdviceDirection::toward_positive ? adb.accept_boost : adb.accept_damp;
    return clamp01(p * multiplier);
}

double noisy_acceptance_probability(const ADBParams& adb, double model_confidence, double human_confidence,
                                    AdviceDirection direction, Rng& rng) {
    const double p = acceptance_probability(adb, model_confidence, human_confidence, direction);
    if (adb.noise_level <= 0.0) return p;
    const double level = std::min(adb.noise_level, 1.0);
    return clamp01((1.0 - level) * p + level * rng.uniform());
}

int sample_acceptance(const ADBParams& adb, double model_confidence, double human_confidence,
                      AdviceDirection direction, Rng& rng) {
    const double p = noisy_acceptance_probability(adb, model_confidence, human_confidence, direction, rng);
    return rng.bernoulli(p) ? 1 : 0;
}

HumanSimulator::HumanSimulator(HumanProfile profile, const Dataset& dataset,
                               std::vector<double> outcome_probabilities)
    : profile_(std::move(profile)) {
    if (outcome_probabilities.size() != dataset.size())
        throw Error(ErrorKind::ConfigError, "outcome probabilities must cover every instance");
    labels_.reserve(dataset.size());
    difficulty_.reserve(dataset.size());
    p_correct_.reserve(dataset.size());
    confidence_.reserve(dataset.size());
    Rng sign_rng = Rng(profile_.seed).derive(0x6b617070ull);
    for (size_t i = 0; i < dataset.size(); ++i) {
        const int label = dataset.instances[i].label;
        const double d = difficulty_proxy(outcome_probabilities[i]);
        const double p = correct_probability(profile_.decision, dataset, i, label, d);
        // per-instance kappa sign, fixed for the profile's lifetime
        const int kappa_sign = sign_rng.bernoulli(0.5) ? 1 : -1;
        labels_.push_back(label);
        difficulty_.push_back(d);
        p_correct_.push_back(p);
        confidence_.push_back(
            confidence_value(profile_.confidence, dataset, i, label, p, d, kappa_sign));
    }
}

int HumanSimulator::draw_decision(size_t instance, Rng& rng) const {
    return sample_decision(p_correct_[instance], labels_[instance], rng);
}

int HumanSimulator::draw_acceptance(size_t instance, double model_confidence, AdviceDirection direction,
                                    Rng& rng) const {
    return sample_acceptance(profile_.adb, model_confidence, confidence(instance), direction, rng);
}

double HumanSimulator::true_acceptance(size_t instance, double model_confidence,
                                       AdviceDirection direction) const {
    return acceptance_probability(profile_.adb, model_confidence, confidence(instance), direction);
}

}  // namespace teamrules
