#include <doctest.h>

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>

#include "teamrules/advisor.hpp"
#include "teamrules/common.hpp"
#include "teamrules/eval.hpp"
#include "teamrules/pipeline.hpp"
#include "teamrules/trainer.hpp"

// Each criterion prints one PASS/FAIL line; the process fails if any
// criterion fails. Tolerances are pinned here, not configurable.

using namespace teamrules;

namespace {

#ifndef TEAMRULES_SOURCE_DIR
#define TEAMRULES_SOURCE_DIR "."
#endif

std::string config_path(const char* name) {
    return std::string(TEAMRULES_SOURCE_DIR) + "/data/configs/" + name;
}

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << "[criterion " << criterion << "] " << (pass ? "PASS" : "FAIL") << ": " << detail << "\n"
              << std::flush;
    CHECK_MESSAGE(pass, "criterion ", criterion, ": ", detail);
}

struct DatasetContext {
    PipelineConfig config;
    PreparedData prepared;
    SimulatorBundle sim;
};

DatasetContext& context_for(const char* config_name) {
    static std::map<std::string, std::unique_ptr<DatasetContext>> cache;
    auto& slot = cache[config_name];
    if (!slot) {
        auto config = PipelineConfig::from_json_file(config_path(config_name));
        auto prepared = prepare_data(config);
        auto sim = build_simulator(config, prepared);
        slot = std::make_unique<DatasetContext>(
            DatasetContext{std::move(config), std::move(prepared), std::move(sim)});
    }
    return *slot;
}

const SeedArtifacts& artifacts_for(const char* config_name, uint64_t repetition) {
    static std::map<std::string, std::unique_ptr<SeedArtifacts>> cache;
    const std::string key = std::string(config_name) + "#" + std::to_string(repetition);
    auto& slot = cache[key];
    if (!slot) {
        auto& ctx = context_for(config_name);
        slot = std::make_unique<SeedArtifacts>(
            build_seed_artifacts(ctx.config, ctx.prepared, ctx.sim.simulator, repetition));
    }
    return *slot;
}

}  // namespace

TEST_CASE("criterion 1: loss-algebra identities") {
    auto& ctx = context_for("heart_disease.json");
    const auto& artifacts = artifacts_for("heart_disease.json", 0);
    const auto trained = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR, 0.2, 0);

    CostSpec costs = ctx.config.costs;
    EvalConfig eval = ctx.config.eval;
    eval.repetitions = 20;
    eval.seed = 1;
    const auto report_out = evaluate(trained.advisor, ctx.prepared.dataset, ctx.prepared.view,
                                     ctx.prepared.test_rows, ctx.sim.simulator, costs, eval);

    double worst = 0.0;
    auto check_group = [&](const GroupMetrics& g) {
        worst = std::max(worst, std::abs(g.ttl.mean - (g.tdl.mean + g.al.mean)));
        worst = std::max(worst, std::abs(g.value_added.mean - (g.hdl.mean - g.ttl.mean)));
    };
    check_group(report_out.overall);
    for (const auto& g : report_out.groups) check_group(g);

    report(1, worst <= 1e-12,
           "TTL = TDL + AL and Value Added = HDL - TTL on every report group (worst deviation " +
               std::to_string(worst) + ", tolerance 1e-12)");
}

TEST_CASE("criterion 2: psi and expected-loss enumeration oracle") {
    Rng rng(2024);
    size_t checked = 0;
    double worst = 0.0;
    bool logic_match = true;
    for (int trial = 0; trial < 1000; ++trial) {
        CostSpec costs{rng.uniform() * 0.9, 0.2 + rng.uniform() * 2.8, 0.2 + rng.uniform() * 2.8};
        const double p1 = rng.uniform();
        const int h = static_cast<int>(rng.uniform_int(2));
        const int candidate = static_cast<int>(rng.uniform_int(2));
        const double p_accept = rng.uniform();

        // brute-force enumeration over y in {0,1} with explicit weights
        double adv_loss = 0.0, wh_loss = 0.0;
        for (const int y : {0, 1}) {
            const double weight = y == 1 ? p1 : 1.0 - p1;
            const double v_adv = y != candidate ? (y == 0 ? costs.lambda0 : costs.lambda1) : 0.0;
            const double v_h = y != h ? (y == 0 ? costs.lambda0 : costs.lambda1) : 0.0;
            const double one =
                candidate == h ? v_h : p_accept * v_adv + (1.0 - p_accept) * v_h + costs.alpha;
            adv_loss += weight * one;
            wh_loss += weight * v_h;
            worst = std::max(worst,
                             std::abs(expected_team_loss(costs, y, candidate, h, p_accept) - one));
        }
        logic_match = logic_match && (psi(costs, p1, candidate, h, p_accept) == (adv_loss < wh_loss));
        ++checked;
    }
    report(2, checked == 1000 && worst <= 1e-12 && logic_match,
           "1000 randomized inputs match brute-force enumeration (worst loss deviation " +
               std::to_string(worst) + ", psi decisions identical)");
}

TEST_CASE("criterion 3: annealing safety across the alpha grid on all datasets") {
    // Every selectively-advising advisor must end no worse on its training
    // panel than the empty set, i.e. than the human alone. (The task-only
    // baseline is excluded: it optimizes plain decision loss against an
    // all-negative starting point and may legitimately exceed the human.)
    bool all_safe = true;
    double slowest_hd = 0.0;
    std::string detail;
    size_t advisors = 0;
    for (const char* name : {"heart_disease.json", "fico.json", "hr.json"}) {
        auto& ctx = context_for(name);
        const auto& artifacts = artifacts_for(name, 0);
        const bool heart = std::string(name) == "heart_disease.json";
        std::vector<Variant> variants{Variant::TR};
        if (heart)
            variants = {Variant::TR, Variant::TR_no_ADB, Variant::TR_no_Cost, Variant::TR_no_ADB_Cost};
        for (const double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
            for (const Variant variant : variants) {
                const auto start = std::chrono::steady_clock::now();
                const auto trained = train_one(ctx.config, ctx.prepared, artifacts, variant, alpha, 0);
                const double seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                if (heart) slowest_hd = std::max(slowest_hd, seconds);
                ++advisors;
                const bool safe =
                    trained.anneal_result.ttl_best_total <= trained.anneal_result.ttl_empty_total;
                all_safe = all_safe && safe;
                if (!safe)
                    detail += std::string(name) + " " + variant_name(variant) + " alpha " +
                              std::to_string(alpha) + " violated; ";
            }
        }
    }
    const bool fast_enough = slowest_hd < 60.0;
    report(3, all_safe && fast_enough,
           "train TTL(R*) <= train HDL for " + std::to_string(advisors) +
               " selective advisors across 3 datasets x 5 alphas, zero violations; slowest Heart "
               "Disease advisor " +
               std::to_string(slowest_hd) + " s (budget 60 s)" + (detail.empty() ? "" : "; " + detail));
}

TEST_CASE("criterion 4: annealing optimality at desk scale") {
    // 20 instances, <= 10 candidate rules, exhaustive enumeration oracle
    LoadOptions options;
    options.label_column = "y";
    Rng gen(99);
    std::string csv = "a,b,y\n";
    for (int i = 0; i < 20; ++i) {
        const int a = static_cast<int>(gen.uniform_int(100));
        const int b = static_cast<int>(gen.uniform_int(100));
        const int y = (a < 50) ? 1 : 0;
        csv += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(y) + "\n";
    }
    auto dataset = load_csv_text(csv, options);
    split(dataset, SplitCounts{20, 0, 0}, 0);
    const auto view = binarize(dataset, 4);
    const auto train_rows = dataset.indices_of(SplitTag::train);
    std::vector<int> labels;
    for (const size_t i : train_rows) labels.push_back(dataset.instances[i].label);

    MiningConfig miner;
    miner.max_rule_len = 2;
    miner.min_support = 0.1;
    miner.forest_size = 20;
    miner.seed = 7;
    miner.pool_cap_per_side = 5;
    const auto pool = mine_candidates(view, train_rows, labels, miner);
    const size_t n_pos = pool.positive_candidates.size();
    const size_t n_neg = pool.negative_candidates.size();
    REQUIRE(n_pos + n_neg <= 10);

    TrainPanel panel;
    panel.rows = train_rows;
    panel.y = labels;
    Rng draw(5);
    for (size_t i = 0; i < 20; ++i) {
        panel.h.push_back(draw.bernoulli(0.65) ? labels[i] : 1 - labels[i]);
        panel.human_confidence.push_back(0.5 + 0.1 * draw.uniform_int(5));
        panel.outcome_p1.push_back(labels[i] == 1 ? 0.85 : 0.15);
    }
    const CostSpec costs{0.15, 1.0, 1.0};
    const auto discretion = DiscretionModel::fixed(0.75);

    // exhaustive optimum over all rule subsets
    double optimum = std::numeric_limits<double>::infinity();
    const size_t total = n_pos + n_neg;
    for (size_t mask = 0; mask < (size_t{1} << total); ++mask) {
        RuleSet set;
        for (size_t r = 0; r < n_pos; ++r)
            if (mask >> r & 1) set.positive.push_back(pool.positive_candidates[r]);
        for (size_t r = 0; r < n_neg; ++r)
            if (mask >> (n_pos + r) & 1) set.negative.push_back(pool.negative_candidates[r]);
        optimum = std::min(
            optimum, empirical_ttl(set, panel, discretion, costs, AdvisorMode::teamrules).total);
    }
    const double empty_ttl =
        empirical_ttl(RuleSet{}, panel, discretion, costs, AdvisorMode::teamrules).total;

    size_t hits = 0;
    bool never_worse_than_empty = true;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        TrainerConfig trainer;
        trainer.iterations = 2000;
        trainer.seed = seed;
        const auto result = anneal(trainer, panel, pool, discretion, costs, AdvisorMode::teamrules);
        hits += std::abs(result.ttl_best_total - optimum) <= 1e-9;
        never_worse_than_empty =
            never_worse_than_empty && result.ttl_best_total <= empty_ttl + 1e-12;
    }
    report(4, hits >= 45 && never_worse_than_empty,
           "exhaustive optimum " + std::to_string(optimum) + " matched in " + std::to_string(hits) +
               "/50 seeded runs (need >= 45); never above the empty-set TTL " +
               std::to_string(empty_ttl));
}

TEST_CASE("criterion 5: simulator statistics") {
    bool accuracy_ok = true;
    std::string detail;
    const double sigma = std::sqrt(0.75 * 0.25 / 10000.0);
    for (const char* name : {"heart_disease.json", "fico.json", "hr.json"}) {
        auto& ctx = context_for(name);
        Rng rng(777);
        size_t correct = 0;
        const int n = 10000;
        for (int s = 0; s < n; ++s) {
            const size_t i = rng.uniform_int(ctx.prepared.dataset.size());
            correct += ctx.sim.simulator.draw_decision(i, rng) == ctx.prepared.dataset.instances[i].label;
        }
        const double acc = static_cast<double>(correct) / n;
        const bool inside = acc >= 0.70 - 3 * sigma && acc <= 0.80 + 3 * sigma;
        accuracy_ok = accuracy_ok && inside;
        detail += std::string(name) + " acc " + std::to_string(acc) + "; ";
    }

    // acceptance draws match the closed-form probability
    ADBParams adb;
    Rng rng(778);
    bool adb_ok = true;
    for (const auto& [cm, ch] : std::vector<std::pair<double, double>>{
             {0.9, 0.2}, {0.7, 0.55}, {0.6, 0.95}, {0.85, 0.65}}) {
        const double p = acceptance_probability(adb, cm, ch, AdviceDirection::toward_positive);
        size_t accepted = 0;
        const int n = 10000;
        for (int s = 0; s < n; ++s)
            accepted += sample_acceptance(adb, cm, ch, AdviceDirection::toward_positive, rng);
        const double rate = static_cast<double>(accepted) / n;
        adb_ok = adb_ok && std::abs(rate - p) <= 0.015;
        detail += "p(a|" + std::to_string(cm) + "," + std::to_string(ch) + ") dev " +
                  std::to_string(std::abs(rate - p)) + "; ";
    }
    report(5, accuracy_ok && adb_ok,
           "difficulty-biased accuracy in [0.70, 0.80] (3-sigma) on all datasets and Monte Carlo "
           "acceptance within 0.015: " + detail);
}

TEST_CASE("criterion 6: discretion-model quality on heart disease") {
    auto& ctx = context_for("heart_disease.json");
    const auto& artifacts = artifacts_for("heart_disease.json", 0);
    Rng rng(66);
    const double auc = discretion_auc_against(artifacts.discretion, ctx.sim.simulator, artifacts.bootstrap,
                                              ctx.prepared.dataset, artifacts.interaction_rows, 5000, rng);
    report(6, auc > 0.9,
           "learned discretion model AUC " + std::to_string(auc) +
               " against ground-truth acceptance behavior (threshold 0.9, investigation bar 0.85)");
}

namespace {

// shared by criteria 7 and 8
const SweepResult& full_sweep() {
    static std::unique_ptr<SweepResult> cache;
    if (!cache) {
        auto& ctx = context_for("heart_disease.json");
        PipelineConfig config = ctx.config;
        config.variants = {Variant::TR, Variant::TR_no_ADB, Variant::TR_no_Cost, Variant::TR_no_ADB_Cost,
                           Variant::task_only};
        config.sweep.train_repetitions = 10;
        cache = std::make_unique<SweepResult>(sweep_alpha(config, ctx.prepared, ctx.sim,
                                                          {0.1, 0.2, 0.3, 0.4, 0.5}, config.variants, 10, 2));
    }
    return *cache;
}

}  // namespace

TEST_CASE("criterion 7: qualitative ordering across variants") {
    const auto& sweep = full_sweep();

    // index points by (alpha, variant)
    auto find_point = [&](double alpha, Variant variant) -> const SweepPoint& {
        for (const auto& point : sweep.points)
            if (point.variant == variant && std::abs(point.alpha - alpha) < 1e-12) return point;
        throw std::logic_error("sweep point missing");
    };

    bool ordering_ok = true;
    bool task_only_below = true;
    std::string detail;
    for (const double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const auto& tr = find_point(alpha, Variant::TR);
        for (const Variant v : {Variant::TR_no_ADB, Variant::TR_no_Cost, Variant::TR_no_ADB_Cost,
                                Variant::task_only}) {
            const auto& other = find_point(alpha, v);
            if (!(tr.value_added_mean >= other.value_added_mean - other.value_added_se)) {
                ordering_ok = false;
                detail += "alpha " + std::to_string(alpha) + ": TR " +
                          std::to_string(tr.value_added_mean) + " < " + variant_name(v) + " " +
                          std::to_string(other.value_added_mean) + " - se " +
                          std::to_string(other.value_added_se) + "; ";
            }
        }
        if (alpha >= 0.2 - 1e-12) {
            const auto& task = find_point(alpha, Variant::task_only);
            if (!(task.value_added_mean < tr.value_added_mean)) {
                task_only_below = false;
                detail += "alpha " + std::to_string(alpha) + ": task_only not below TR; ";
            }
        }
        detail += "a=" + std::to_string(alpha) + " TR " + std::to_string(find_point(alpha, Variant::TR).value_added_mean) + "; ";
    }
    report(7, ordering_ok && task_only_below,
           "10-seed sweep: TR within 1 SE of the top at every alpha and task_only strictly below TR at "
           "alpha >= 0.2. " + detail);
}

TEST_CASE("criterion 8: advising rate non-increasing in alpha post-hoc") {
    auto& ctx = context_for("heart_disease.json");
    const auto& artifacts = artifacts_for("heart_disease.json", 0);
    // one trained rule set, re-deployed with increasing inference alpha
    const auto trained = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR, 0.1, 0);

    // fixed panel: one draw of the human on the test rows
    Rng rng = ctx.sim.simulator.repetition_rng(404);
    std::vector<int> h_draw;
    std::vector<double> ch_draw;
    for (const size_t i : ctx.prepared.test_rows) {
        h_draw.push_back(ctx.sim.simulator.draw_decision(i, rng));
        ch_draw.push_back(ctx.sim.simulator.confidence(i));
    }

    size_t previous = ctx.prepared.test_rows.size() + 1;
    bool monotone = true;
    std::string rates;
    for (const double alpha : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0}) {
        CostSpec costs = trained.advisor.costs();
        costs.alpha = alpha;
        Advisor redeployed(trained.advisor.rule_set(), trained.advisor.discretion(),
                           trained.advisor.outcome(), costs, trained.advisor.mode(),
                           trained.advisor.negative_confidence());
        size_t offered = 0;
        for (size_t r = 0; r < ctx.prepared.test_rows.size(); ++r) {
            const auto advice = redeployed.advise(ctx.prepared.dataset, ctx.prepared.test_rows[r],
                                                  ctx.prepared.view, h_draw[r], ch_draw[r]);
            offered += advice.offered;
        }
        monotone = monotone && offered <= previous;
        previous = offered;
        rates += std::to_string(offered) + " ";
    }
    report(8, monotone, "offered-advice counts over the alpha grid: " + rates + "(non-increasing)");
}

TEST_CASE("criterion 9: robustness gate under full acceptance noise") {
    auto& ctx = context_for("heart_disease.json");
    std::vector<double> values;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto artifacts = build_seed_artifacts(ctx.config, ctx.prepared, ctx.sim.simulator, 100 + seed);
        const auto trained = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR, 0.3, 100 + seed);

        auto noisy_profile = degrade_adb(ctx.config.human, {1.0}).front();
        std::vector<double> probs;
        for (size_t i = 0; i < ctx.prepared.dataset.size(); ++i)
            probs.push_back(ctx.sim.difficulty_model.predict_proba(ctx.prepared.dataset, i));
        HumanSimulator noisy(noisy_profile, ctx.prepared.dataset, probs);

        CostSpec costs = ctx.config.costs;
        costs.alpha = 0.3;
        EvalConfig gate_eval = ctx.config.eval;
        gate_eval.repetitions = 30;
        gate_eval.seed = stream_seed(ctx.config.seed, "acc9-gate", seed);
        const bool deploy = robustness_gate(trained.advisor, ctx.prepared.dataset, ctx.prepared.view,
                                            ctx.prepared.val_rows, noisy, costs,
                                            gate_eval) == GateDecision::deploy;
        EvalConfig eval = ctx.config.eval;
        eval.repetitions = 30;
        eval.seed = stream_seed(ctx.config.seed, "acc9-eval", seed);
        const auto rep =
            deploy ? evaluate(trained.advisor, ctx.prepared.dataset, ctx.prepared.view,
                              ctx.prepared.test_rows, noisy, costs, eval)
                   : evaluate_human_alone(ctx.prepared.dataset, ctx.prepared.test_rows, noisy, costs, eval);
        values.push_back(rep.overall.value_added.mean);
    }
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double sq = 0.0;
    for (const double v : values) sq += (v - mean) * (v - mean);
    const double se = std::sqrt(sq / static_cast<double>(values.size() - 1)) /
                      std::sqrt(static_cast<double>(values.size()));
    report(9, mean >= -2.0 * se,
           "gated policy under fully-randomized acceptance: mean test value added " + std::to_string(mean) +
               " with SE " + std::to_string(se) + " over 10 seeds (needs >= -2 SE)");
}

TEST_CASE("criterion 10: variant coincidence") {
    auto& ctx = context_for("heart_disease.json");
    const auto& artifacts = artifacts_for("heart_disease.json", 0);

    const auto tr0 = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR, 0.0, 0);
    const auto nocost0 = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR_no_Cost, 0.0, 0);
    const bool cost_match = rule_set_to_json(tr0.advisor.rule_set(), ctx.prepared.view) ==
                            rule_set_to_json(nocost0.advisor.rule_set(), ctx.prepared.view);

    const auto no_adb = train_one(ctx.config, ctx.prepared, artifacts, Variant::TR_no_ADB, 0.2, 0);
    SeedArtifacts forced = artifacts;
    forced.discretion = DiscretionModel::fixed(1.0);
    const auto tr_forced = train_one(ctx.config, ctx.prepared, forced, Variant::TR, 0.2, 0);
    const bool adb_match = rule_set_to_json(no_adb.advisor.rule_set(), ctx.prepared.view) ==
                           rule_set_to_json(tr_forced.advisor.rule_set(), ctx.prepared.view);

    report(10, cost_match && adb_match,
           std::string("TR@alpha=0 == TR_no_Cost@alpha=0 serialized rule sets (") +
               (cost_match ? "identical" : "different") + "); TR_no_ADB == TR with fixed-1 discretion (" +
               (adb_match ? "identical" : "different") + ")");
}
