#include <doctest.h>

#include <cmath>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/humansim.hpp"

using namespace teamrules;

namespace {

Dataset people() {
    LoadOptions options;
    options.label_column = "y";
    auto dataset = load_csv_text(
        "Age,gender,y\n"
        "45,M,1\n"
        "55,F,0\n"
        "45,F,1\n"
        "60,M,0\n",
        options);
    split(dataset, SplitCounts{4, 0, 0}, 0);
    return dataset;
}

ADBParams paper_adb() {
    ADBParams adb;
    adb.delta = 5.0;
    adb.k = 0.63;
    adb.gamma = 0.95;
    adb.beta = 0.5;
    return adb;
}

}  // namespace

TEST_CASE("difficulty proxy") {
    CHECK(difficulty_proxy(0.8) == doctest::Approx(0.6));
    CHECK(difficulty_proxy(0.5) == doctest::Approx(0.0));
    CHECK(difficulty_proxy(0.0) == doctest::Approx(1.0));
    CHECK(difficulty_proxy(1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(difficulty_proxy(1.5), Error);
}

TEST_CASE("difficulty-biased accuracy switches at the threshold") {
    const auto dataset = people();
    DecisionBehavior behavior;  // difficulty_biased, d_t=0.6, low 0.6, high 1.0
    CHECK(correct_probability(behavior, dataset, 0, 1, 0.7) == doctest::Approx(0.60));
    CHECK(correct_probability(behavior, dataset, 0, 1, 0.6) == doctest::Approx(1.0));  // boundary: easy side
    CHECK(correct_probability(behavior, dataset, 0, 1, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("group-biased accuracy follows the feature condition") {
    const auto dataset = people();
    DecisionBehavior behavior;
    behavior.kind = BehaviorKind::group_biased;
    behavior.low_accuracy = 0.60;
    behavior.high_accuracy = 0.95;
    behavior.condition = Condition{"Age", ConditionOp::less, 50.0, ""};
    CHECK(correct_probability(behavior, dataset, 0, 1, 0.0) == doctest::Approx(0.60));  // age 45
    CHECK(correct_probability(behavior, dataset, 1, 0, 0.0) == doctest::Approx(0.95));  // age 55
}

TEST_CASE("custom decision rules match first, may reference the label, and exhaust") {
    const auto dataset = people();
    DecisionBehavior behavior;
    behavior.kind = BehaviorKind::custom_group;
    BehaviorRule young_diseased;
    young_diseased.condition = Condition{"Age", ConditionOp::less, 50.0, ""};
    young_diseased.label_equals = 1;
    young_diseased.value = 0.6;
    BehaviorRule fallback;
    fallback.value = 0.95;
    behavior.custom = {young_diseased, fallback};

    CHECK(correct_probability(behavior, dataset, 0, 1, 0.0) == doctest::Approx(0.6));   // young, y=1
    CHECK(correct_probability(behavior, dataset, 3, 0, 0.0) == doctest::Approx(0.95));  // old
    CHECK(correct_probability(behavior, dataset, 1, 0, 0.0) == doctest::Approx(0.95));  // young but y=0

    behavior.custom = {young_diseased};
    CHECK_THROWS_WITH_AS(correct_probability(behavior, dataset, 1, 0, 0.0),
                         doctest::Contains("NoMatchingRule"), Error);
}

TEST_CASE("sample_decision respects degenerate probabilities and the rate") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_decision(1.0, 1, rng) == 1);
        CHECK(sample_decision(0.0, 1, rng) == 0);
        CHECK(sample_decision(1.0, 0, rng) == 0);
    }
    size_t correct = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) correct += sample_decision(0.6, 1, rng) == 1;
    const double rate = static_cast<double>(correct) / n;
    CHECK(rate > 0.6 - 0.015);
    CHECK(rate < 0.6 + 0.015);
}

TEST_CASE("accuracy-biased confidence offsets by kappa and clamps") {
    const auto dataset = people();
    ConfidenceBehavior behavior;  // accuracy-biased default, kappa 0.05
    const double up = confidence_value(behavior, dataset, 0, 1, 0.6, 0.0, +1);
    const double down = confidence_value(behavior, dataset, 0, 1, 0.6, 0.0, -1);
    CHECK(up == doctest::Approx(0.65));
    CHECK(down == doctest::Approx(0.55));
    CHECK(confidence_value(behavior, dataset, 0, 1, 1.0, 0.0, +1) == doctest::Approx(0.99));
    CHECK(confidence_value(behavior, dataset, 0, 1, 0.0, 0.0, -1) == doctest::Approx(0.01));
}

TEST_CASE("group-biased confidence: easy instances, then group rules") {
    const auto dataset = people();
    ConfidenceBehavior behavior;
    behavior.kind = BehaviorKind::group_biased;
    behavior.difficulty_threshold = 0.6;
    behavior.condition = Condition{"gender", ConditionOp::equal, 0.0, "M"};

    CHECK(confidence_value(behavior, dataset, 0, 1, 0.6, 0.5, +1) == doctest::Approx(0.9));   // d < d_t
    CHECK(confidence_value(behavior, dataset, 0, 1, 0.6, 0.7, +1) == doctest::Approx(0.2));   // male, hard
    CHECK(confidence_value(behavior, dataset, 1, 0, 0.6, 0.7, +1) == doctest::Approx(1.0));   // female, hard
    CHECK(confidence_value(behavior, dataset, 0, 1, 0.6, 0.6, +1) == doctest::Approx(0.2));   // boundary: group rule
}

TEST_CASE("acceptance probability: degenerate and symmetric points") {
    ADBParams adb = paper_adb();
    adb.delta = 0.0;
    CHECK(acceptance_probability(adb, 0.9, 0.1, AdviceDirection::toward_positive) == doctest::Approx(0.5));
    CHECK(acceptance_probability(adb, 0.2, 0.8, AdviceDirection::toward_negative) == doctest::Approx(0.5));

    // equal confidences with gamma=1 integrate to a coin flip for any delta:
    // the adjusted posterior is 1/2, w(1/2)=1/2, so both utilities equal
    // (1+beta)/2 - beta and the logit returns 1/2
    ADBParams sym = paper_adb();
    sym.gamma = 1.0;
    for (const double c : {0.2, 0.5, 0.77}) {
        CHECK(acceptance_probability(sym, c, c, AdviceDirection::toward_positive) == doctest::Approx(0.5));
    }
}

TEST_CASE("acceptance probability matches the frozen high-precision oracle") {
    // independent long-double evaluation of the five formulas at the default
    // simulation parameters, (c_m, c_h) = (0.9, 0.2)
    const double expected = 0.9973423130465943;
    const double p = acceptance_probability(paper_adb(), 0.9, 0.2, AdviceDirection::toward_positive);
    CHECK(std::abs(p - expected) < 1e-12);
}

TEST_CASE("probability weighting w is monotone with fixed points") {
    ADBParams adb = paper_adb();
    // w is exercised through the full formula; check its fixed points via
    // gamma=1 symmetric input (w(1/2)) and extreme confidences (w near 0/1)
    ADBParams g1 = adb;
    g1.gamma = 1.0;
    const double mid = acceptance_probability(g1, 0.5, 0.5, AdviceDirection::toward_positive);
    CHECK(mid == doctest::Approx(0.5));

    const double lo = acceptance_probability(adb, 0.0, 1.0, AdviceDirection::toward_positive);
    const double hi = acceptance_probability(adb, 1.0, 0.0, AdviceDirection::toward_positive);
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("acceptance is increasing in model confidence, decreasing in human confidence") {
    const ADBParams adb = paper_adb();
    for (double ch : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double prev = -1.0;
        for (double cm = 0.05; cm < 1.0; cm += 0.05) {
            const double p = acceptance_probability(adb, cm, ch, AdviceDirection::toward_positive);
            CHECK(p > prev);
            prev = p;
        }
    }
    for (double cm : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        double prev = 2.0;
        for (double ch = 0.05; ch < 1.0; ch += 0.05) {
            const double p = acceptance_probability(adb, cm, ch, AdviceDirection::toward_positive);
            CHECK(p < prev);
            prev = p;
        }
    }
}

TEST_CASE("gamma=1 leaves confidences unadjusted") {
    // with gamma=1 the adjustment is the identity, so swapping in the raw
    // confidences reproduces the same posterior as manual naive Bayes
    ADBParams adb = paper_adb();
    adb.gamma = 1.0;
    adb.delta = 1.0;
    adb.beta = 0.0;
    adb.k = 1.0;
    const double cm = 0.8, ch = 0.3;
    const double post = (cm * (1 - ch)) / (cm * (1 - ch) + (1 - cm) * ch);
    const double expected = 1.0 / (1.0 + std::exp(1.0 * ((1 - post) - post)));
    CHECK(acceptance_probability(adb, cm, ch, AdviceDirection::toward_positive) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("the literal printed utility fraction is available for comparison") {
    // the literal form is not a probability combination: at equal adjusted
    // confidences its inner fraction collapses to 1, not 1/2, so it diverges
    // from the standard combination
    ADBParams literal = paper_adb();
    literal.literal_utility_form = true;
    literal.gamma = 1.0;
    const double p_literal = acceptance_probability(literal, 0.6, 0.6, AdviceDirection::toward_positive);
    ADBParams standard = literal;
    standard.literal_utility_form = false;
    const double p_standard = acceptance_probability(standard, 0.6, 0.6, AdviceDirection::toward_positive);
    CHECK(p_standard == doctest::Approx(0.5));
    CHECK(p_literal > 0.9);
    CHECK(p_literal <= 1.0);
    CHECK(p_literal >= 0.0);
}

TEST_CASE("direction multipliers scale and clamp") {
    ADBParams adb = paper_adb();
    adb.accept_boost = 1.5;
    adb.accept_damp = 0.5;
    ADBParams plain = paper_adb();
    const double base_pos = acceptance_probability(plain, 0.7, 0.6, AdviceDirection::toward_positive);
    CHECK(acceptance_probability(adb, 0.7, 0.6, AdviceDirection::toward_positive) ==
          doctest::Approx(std::min(1.0, base_pos * 1.5)));
    CHECK(acceptance_probability(adb, 0.7, 0.6, AdviceDirection::toward_negative) ==
          doctest::Approx(base_pos * 0.5));
    // clamping: very acceptable advice boosted beyond 1 stays a probability
    CHECK(acceptance_probability(adb, 0.99, 0.1, AdviceDirection::toward_positive) == doctest::Approx(1.0));
}

TEST_CASE("confidences outside [0,1] are rejected, endpoints tolerated") {
    const ADBParams adb = paper_adb();
    CHECK_THROWS_WITH_AS(acceptance_probability(adb, 1.2, 0.5, AdviceDirection::toward_positive),
                         doctest::Contains("ConfidenceOutOfRange"), Error);
    CHECK_THROWS_AS(acceptance_probability(adb, 0.5, -0.1, AdviceDirection::toward_positive), Error);
    const double p = acceptance_probability(adb, 1.0, 1.0, AdviceDirection::toward_positive);
    CHECK(std::isfinite(p));
}

TEST_CASE("sample_acceptance trivials and monte carlo agreement") {
    ADBParams sure = paper_adb();
    sure.delta = 1000.0;  // hard max utility
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        CHECK(sample_acceptance(sure, 0.95, 0.05, AdviceDirection::toward_positive, rng) == 1);
        CHECK(sample_acceptance(sure, 0.05, 0.95, AdviceDirection::toward_positive, rng) == 0);
    }

    const ADBParams adb = paper_adb();
    const double p = acceptance_probability(adb, 0.7, 0.55, AdviceDirection::toward_positive);
    size_t accepted = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        accepted += sample_acceptance(adb, 0.7, 0.55, AdviceDirection::toward_positive, rng);
    const double rate = static_cast<double>(accepted) / n;
    CHECK(std::abs(rate - p) < 0.015);
}

TEST_CASE("noise mixes toward a coin flip") {
    ADBParams adb = paper_adb();
    adb.noise_level = 1.0;
    Rng rng(11);
    size_t accepted = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        accepted += sample_acceptance(adb, 0.95, 0.05, AdviceDirection::toward_positive, rng);
    const double rate = static_cast<double>(accepted) / n;
    CHECK(std::abs(rate - 0.5) < 0.015);  // fully randomized regardless of confidences
}

TEST_CASE("simulator is reproducible from (profile, seed)") {
    const auto dataset = people();
    HumanProfile profile;
    profile.adb = paper_adb();
    profile.seed = 99;
    const std::vector<double> probs{0.9, 0.2, 0.55, 0.7};

    HumanSimulator a(profile, dataset, probs);
    HumanSimulator b(profile, dataset, probs);
    for (uint64_t rep = 0; rep < 3; ++rep) {
        Rng ra = a.repetition_rng(rep);
        Rng rb = b.repetition_rng(rep);
        for (size_t i = 0; i < dataset.size(); ++i) {
            CHECK(a.draw_decision(i, ra) == b.draw_decision(i, rb));
            CHECK(a.confidence(i) == b.confidence(i));
        }
    }
}
