#include "teamrules/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace teamrules {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "teamrules-1.0";

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

Condition condition_from_json(const json& doc) {
    Condition cond;
    cond.feature = doc.at("feature").get<std::string>();
    const std::string op = doc.at("op").get<std::string>();
    if (op == "<")
        cond.op = ConditionOp::less;
    else if (op == ">=")
        cond.op = ConditionOp::greater_equal;
    else if (op == "==")
        cond.op = ConditionOp::equal;
    else if (op == "!=")
        cond.op = ConditionOp::not_equal;
    else
        throw Error(ErrorKind::ConfigError, "unknown condition op: " + op);
    const auto& value = doc.at("value");
    if (cond.op == ConditionOp::less || cond.op == ConditionOp::greater_equal) {
        cond.threshold = value.get<double>();
    } else if (value.is_string()) {
        cond.category = value.get<std::string>();
    } else {
        cond.category = value.dump();
    }
    return cond;
}

BehaviorKind behavior_kind_from_name(const std::string& name) {
    if (name == "difficulty_biased" || name == "accuracy_biased") return BehaviorKind::difficulty_biased;
    if (name == "group_biased") return BehaviorKind::group_biased;
    if (name == "custom_group") return BehaviorKind::custom_group;
    throw Error(ErrorKind::ConfigError, "unknown behavior kind: " + name);
}

std::vector<BehaviorRule> behavior_rules_from_json(const json& arr) {
    std::vector<BehaviorRule> rules;
    for (const auto& item : arr) {
        BehaviorRule rule;
        if (item.contains("condition")) rule.condition = condition_from_json(item.at("condition"));
        if (item.contains("label")) rule.label_equals = item.at("label").get<int>();
        rule.value = item.at("value").get<double>();
        rules.push_back(std::move(rule));
    }
    return rules;
}

GbtParams gbt_params_from_json(const json& doc, const GbtParams& defaults) {
    GbtParams params = defaults;
    if (doc.contains("trees")) params.trees = doc.at("trees").get<int>();
    if (doc.contains("depth")) params.depth = doc.at("depth").get<int>();
    if (doc.contains("learning_rate")) params.learning_rate = doc.at("learning_rate").get<double>();
    if (doc.contains("l2")) params.l2 = doc.at("l2").get<double>();
    return params;
}

}  // namespace

uint64_t stream_seed(uint64_t master, const char* label, uint64_t index) {
    uint64_t mix = master ^ fnv1a64(label, std::strlen(label)) ^ (index * 0x9e3779b97f4a7c15ull);
    return splitmix64(mix);
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    return from_json_text(read_file(path), fs::path(path).parent_path().string());
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    try {
        PipelineConfig config;

        const auto& ds = doc.at("dataset");
        config.dataset.csv_path = ds.at("csv").get<std::string>();
        if (!fs::path(config.dataset.csv_path).is_absolute() && !base_dir.empty())
            config.dataset.csv_path = (fs::path(base_dir) / config.dataset.csv_path).string();
        config.dataset.label_column = ds.at("label").get<std::string>();
        config.dataset.splits.train = ds.at("splits").at("train").get<size_t>();
        config.dataset.splits.val = ds.at("splits").at("val").get<size_t>();
        config.dataset.splits.test = ds.at("splits").at("test").get<size_t>();
        config.dataset.split_seed = ds.value("split_seed", uint64_t{0});
        config.dataset.bins_per_numeric = ds.value("bins_per_numeric", 5);
        if (ds.contains("schema_overrides"))
            for (const auto& [name, kind] : ds.at("schema_overrides").items())
                config.dataset.schema_overrides[name] =
                    kind.get<std::string>() == "numeric" ? FeatureKind::numeric : FeatureKind::categorical;

        const auto& human = doc.at("human");
        const auto& dec = human.at("decision");
        config.human.decision.kind = behavior_kind_from_name(dec.at("kind").get<std::string>());
        config.human.decision.difficulty_threshold = dec.value("difficulty_threshold", 0.6);
        config.human.decision.low_accuracy = dec.value("low_accuracy", 0.60);
        config.human.decision.high_accuracy =
            dec.value("high_accuracy", config.human.decision.kind == BehaviorKind::group_biased ? 0.95 : 1.0);
        if (dec.contains("condition")) config.human.decision.condition = condition_from_json(dec.at("condition"));
        if (dec.contains("custom")) config.human.decision.custom = behavior_rules_from_json(dec.at("custom"));

        const auto& conf = human.at("confidence");
        config.human.confidence.kind = behavior_kind_from_name(conf.at("kind").get<std::string>());
        config.human.confidence.kappa = conf.value("kappa", 0.05);
        config.human.confidence.difficulty_threshold = conf.value("difficulty_threshold", 0.6);
        config.human.confidence.easy_confidence = conf.value("easy_confidence", 0.9);
        config.human.confidence.low_confidence = conf.value("low_confidence", 0.2);
        config.human.confidence.high_confidence = conf.value("high_confidence", 1.0);
        if (conf.contains("condition"))
            config.human.confidence.condition = condition_from_json(conf.at("condition"));
        if (conf.contains("custom")) config.human.confidence.custom = behavior_rules_from_json(conf.at("custom"));

        if (human.contains("adb")) {
            const auto& adb = human.at("adb");
            config.human.adb.delta = adb.value("delta", 5.0);
            config.human.adb.k = adb.value("k", 0.63);
            config.human.adb.gamma = adb.value("gamma", 0.95);
            config.human.adb.beta = adb.value("beta", 0.5);
            config.human.adb.accept_boost = adb.value("accept_boost", 1.0);
            config.human.adb.accept_damp = adb.value("accept_damp", 1.0);
            config.human.adb.noise_level = adb.value("noise_level", 0.0);
            config.human.adb.literal_utility_form = adb.value("literal_utility_form", false);
        }
        config.human.seed = human.value("seed", uint64_t{7});

        if (doc.contains("estimators")) {
            const auto& est = doc.at("estimators");
            config.estimators.interaction_fraction = est.value("interaction_fraction", 0.5);
            config.estimators.outcome_cv_folds = est.value("outcome_cv_folds", 5);
            if (est.contains("outcome_grid"))
                for (const auto& point : est.at("outcome_grid"))
                    config.estimators.outcome_grid.push_back(gbt_params_from_json(point, GbtParams{}));
            if (est.contains("discretion"))
                config.estimators.discretion = gbt_params_from_json(est.at("discretion"), GbtParams{});
        }
        if (config.estimators.outcome_grid.empty()) {
            GbtParams a;
            a.trees = 200;
            a.depth = 2;
            a.learning_rate = 0.1;
            GbtParams b;
            b.trees = 200;
            b.depth = 3;
            b.learning_rate = 0.1;
            config.estimators.outcome_grid = {a, b};
        }

        if (doc.contains("miner")) {
            const auto& miner = doc.at("miner");
            config.miner.max_rule_len = miner.value("max_rule_len", 4);
            config.miner.min_support = miner.value("min_support", 0.05);
            config.miner.forest_size = miner.value("forest_size", 100);
            config.miner.pool_cap_per_side = miner.value("pool_cap", size_t{5000});
        }

        if (doc.contains("trainer")) {
            const auto& trainer = doc.at("trainer");
            config.trainer.iterations = trainer.value("iterations", 2000);
            config.trainer.cooling = trainer.value("cooling", 0.01);
            config.trainer.beta0 = trainer.value("beta0", 0.05);
            const std::string rule = trainer.value("acceptance_rule", std::string("printed"));
            if (rule == "printed")
                config.trainer.acceptance_rule = AcceptanceRule::printed;
            else if (rule == "metropolis")
                config.trainer.acceptance_rule = AcceptanceRule::metropolis;
            else
                throw Error(ErrorKind::ConfigError, "unknown acceptance_rule: " + rule);
        }

        if (doc.contains("costs")) {
            const auto& costs = doc.at("costs");
            config.costs.alpha = costs.value("alpha", 0.0);
            config.costs.lambda0 = costs.value("lambda0", 1.0);
            config.costs.lambda1 = costs.value("lambda1", 1.0);
            config.costs.validate();
        }

        if (doc.contains("variants")) {
            config.variants.clear();
            for (const auto& name : doc.at("variants"))
                config.variants.push_back(variant_from_name(name.get<std::string>()));
        }

        if (doc.contains("eval")) {
            const auto& eval = doc.at("eval");
            config.eval.repetitions = eval.value("repetitions", 50);
            config.gate_enabled = eval.value("gate", false);
            if (eval.contains("groups"))
                for (const auto& group : eval.at("groups")) {
                    GroupSpec spec;
                    spec.name = group.at("name").get<std::string>();
                    if (group.contains("label")) spec.label_equals = group.at("label").get<int>();
                    if (group.contains("feature")) spec.condition = condition_from_json(group);
                    config.eval.groups.push_back(std::move(spec));
                }
        }

        if (doc.contains("sweep")) {
            const auto& sweep = doc.at("sweep");
            if (sweep.contains("alphas"))
                config.sweep.alphas = sweep.at("alphas").get<std::vector<double>>();
            config.sweep.train_repetitions = sweep.value("train_repetitions", 10);
        }
        if (config.sweep.alphas.empty()) config.sweep.alphas = {0.1, 0.2, 0.3, 0.4, 0.5};

        if (doc.contains("degrade")) {
            const auto& degrade = doc.at("degrade");
            if (degrade.contains("levels"))
                config.degrade.levels = degrade.at("levels").get<std::vector<double>>();
            config.degrade.min_events = degrade.value("min_events", size_t{2000});
        }

        config.seed = doc.value("seed", uint64_t{1});
        config.out_dir = doc.value("out", std::string("out"));
        if (!fs::path(config.out_dir).is_absolute() && !base_dir.empty())
            config.out_dir = (fs::path(base_dir) / config.out_dir).string();
        return config;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("bad config: ") + e.what());
    }
}

std::string PipelineConfig::canonical_json() const {
    // a stable digest of everything that influences outputs
    json doc;
    doc["csv"] = dataset.csv_path;
    doc["label"] = dataset.label_column;
    doc["splits"] = {dataset.splits.train, dataset.splits.val, dataset.splits.test};
    doc["split_seed"] = dataset.split_seed;
    doc["bins"] = dataset.bins_per_numeric;
    doc["human_seed"] = human.seed;
    doc["adb"] = {human.adb.delta,        human.adb.k,           human.adb.gamma,      human.adb.beta,
                  human.adb.accept_boost, human.adb.accept_damp, human.adb.noise_level,
                  human.adb.literal_utility_form ? 1.0 : 0.0};
    auto behavior_digest = [](const auto& behavior) {
        json out;
        out["kind"] = static_cast<int>(behavior.kind);
        if (behavior.condition) out["condition"] = behavior.condition->describe();
        json rules = json::array();
        for (const auto& rule : behavior.custom) {
            json r;
            r["value"] = rule.value;
            if (rule.condition) r["condition"] = rule.condition->describe();
            if (rule.label_equals) r["label"] = *rule.label_equals;
            rules.push_back(std::move(r));
        }
        out["custom"] = std::move(rules);
        return out;
    };
    doc["decision"] = behavior_digest(human.decision);
    doc["decision_params"] = {human.decision.difficulty_threshold, human.decision.low_accuracy,
                              human.decision.high_accuracy};
    doc["confidence"] = behavior_digest(human.confidence);
    doc["confidence_params"] = {human.confidence.kappa, human.confidence.difficulty_threshold,
                                human.confidence.easy_confidence, human.confidence.low_confidence,
                                human.confidence.high_confidence};
    doc["interaction_fraction"] = estimators.interaction_fraction;
    doc["outcome_cv_folds"] = estimators.outcome_cv_folds;
    json grid = json::array();
    for (const auto& point : estimators.outcome_grid)
        grid.push_back({point.trees, point.depth, point.learning_rate, point.l2});
    doc["outcome_grid"] = std::move(grid);
    doc["discretion_params"] = {estimators.discretion.trees, estimators.discretion.depth,
                                estimators.discretion.learning_rate, estimators.discretion.l2};
    doc["miner"] = {miner.max_rule_len, miner.forest_size, static_cast<int>(miner.pool_cap_per_side)};
    doc["miner_support"] = miner.min_support;
    doc["trainer"] = {trainer.iterations, static_cast<int>(trainer.acceptance_rule)};
    doc["cooling"] = trainer.cooling;
    doc["beta0"] = trainer.beta0;
    doc["costs"] = {costs.alpha, costs.lambda0, costs.lambda1};
    json variant_list = json::array();
    for (const auto v : variants) variant_list.push_back(variant_name(v));
    doc["variants"] = std::move(variant_list);
    doc["eval_reps"] = eval.repetitions;
    json groups = json::array();
    for (const auto& group : eval.groups) {
        json g;
        g["name"] = group.name;
        if (group.condition) g["condition"] = group.condition->describe();
        if (group.label_equals) g["label"] = *group.label_equals;
        groups.push_back(std::move(g));
    }
    doc["groups"] = std::move(groups);
    doc["gate"] = gate_enabled;
    doc["sweep_alphas"] = sweep.alphas;
    doc["sweep_reps"] = sweep.train_repetitions;
    doc["degrade_levels"] = degrade.levels;
    doc["seed"] = seed;
    return doc.dump();
}

PreparedData prepare_data(const PipelineConfig& config) {
    LoadOptions options;
    options.label_column = config.dataset.label_column;
    options.schema_overrides = config.dataset.schema_overrides;
    Dataset dataset = load_csv(config.dataset.csv_path, options);
    split(dataset, config.dataset.splits, config.dataset.split_seed);
    BinarizedView view = binarize(dataset, config.dataset.bins_per_numeric);
    PreparedData prepared{std::move(dataset), std::move(view), {}, {}, {}};
    prepared.train_rows = prepared.dataset.indices_of(SplitTag::train);
    prepared.val_rows = prepared.dataset.indices_of(SplitTag::val);
    prepared.test_rows = prepared.dataset.indices_of(SplitTag::test);
    return prepared;
}

SimulatorBundle build_simulator(const PipelineConfig& config, const PreparedData& prepared) {
    auto difficulty_model = fit_logistic(prepared.dataset, prepared.train_rows);
    std::vector<double> probs(prepared.dataset.size());
    for (size_t i = 0; i < prepared.dataset.size(); ++i)
        probs[i] = difficulty_model.predict_proba(prepared.dataset, i);
    HumanSimulator simulator(config.human, prepared.dataset, std::move(probs));
    return SimulatorBundle{std::move(simulator), std::move(difficulty_model)};
}

SeedArtifacts build_seed_artifacts(const PipelineConfig& config, const PreparedData& prepared,
                                   const HumanSimulator& simulator, uint64_t repetition) {
    SeedArtifacts artifacts;

    // interaction half vs advisor half of the train split
    std::vector<size_t> shuffled = prepared.train_rows;
    Rng split_rng(stream_seed(config.seed, "interaction-split", repetition));
    shuffle_inplace(shuffled, split_rng);
    const auto k = static_cast<size_t>(config.estimators.interaction_fraction *
                                       static_cast<double>(shuffled.size()));
    artifacts.interaction_rows.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(k));
    artifacts.advisor_rows.assign(shuffled.begin() + static_cast<long>(k), shuffled.end());
    std::sort(artifacts.interaction_rows.begin(), artifacts.interaction_rows.end());
    std::sort(artifacts.advisor_rows.begin(), artifacts.advisor_rows.end());

    artifacts.bootstrap = fit_logistic(prepared.dataset, artifacts.advisor_rows);

    Rng interact_rng(stream_seed(config.seed, "interactions", repetition));
    artifacts.records = collect_interactions(simulator, artifacts.bootstrap, prepared.dataset,
                                             artifacts.interaction_rows, interact_rng);
    artifacts.discretion = DiscretionModel::fit(artifacts.records, config.estimators.discretion,
                                                stream_seed(config.seed, "discretion", repetition));

    artifacts.outcome = fit_outcome_model(prepared.dataset, artifacts.advisor_rows,
                                          config.estimators.outcome_cv_folds, config.estimators.outcome_grid,
                                          stream_seed(config.seed, "outcome", repetition));

    MiningConfig miner = config.miner;
    miner.seed = stream_seed(config.seed, "mining", repetition);
    std::vector<int> advisor_labels;
    for (const size_t i : artifacts.advisor_rows)
        advisor_labels.push_back(prepared.dataset.instances[i].label);
    artifacts.pool = mine_candidates(prepared.view, artifacts.advisor_rows, advisor_labels, miner);

    artifacts.panel.rows = artifacts.advisor_rows;
    artifacts.panel.y = advisor_labels;
    Rng panel_rng(stream_seed(config.seed, "panel", repetition));
    for (const size_t i : artifacts.advisor_rows) {
        artifacts.panel.h.push_back(simulator.draw_decision(i, panel_rng));
        artifacts.panel.human_confidence.push_back(simulator.confidence(i));
        artifacts.panel.outcome_p1.push_back(artifacts.outcome.predict_proba(prepared.dataset, i));
    }
    return artifacts;
}

TrainedAdvisor train_one(const PipelineConfig& config, const PreparedData& prepared,
                         const SeedArtifacts& artifacts, Variant variant, double alpha, uint64_t repetition) {
    if (artifacts.panel.size() == 0 || artifacts.panel.rows.size() > prepared.dataset.size())
        throw Error(ErrorKind::ConfigError, "seed artifacts do not belong to the prepared dataset");
    CostSpec context_costs = config.costs;
    context_costs.alpha = alpha;
    const auto plan = apply_variant(variant, context_costs, artifacts.discretion);

    TrainerConfig trainer = config.trainer;
    trainer.variant = variant;
    // the annealing stream is variant-independent so that variants whose
    // objectives coincide produce identical rule sets
    trainer.seed = stream_seed(config.seed, "anneal", repetition * 1000003ull + fnv1a64(format_double(alpha)));

    auto result = anneal(trainer, artifacts.panel, artifacts.pool, plan.discretion, plan.costs, plan.mode);

    const double neg_conf = plan.mode == AdvisorMode::task_only
                                ? negative_prediction_confidence(result.best, artifacts.panel)
                                : 0.0;
    Advisor advisor(result.best, plan.discretion, artifacts.outcome, plan.costs, plan.mode, neg_conf);
    return TrainedAdvisor{std::move(advisor), std::move(result), variant, alpha, repetition};
}

void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn) {
    if (workers < 1) workers = 1;
    if (count == 0) return;
    const auto thread_count = std::min<size_t>(static_cast<size_t>(workers), count);
    if (thread_count == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (size_t t = 0; t < thread_count; ++t) {
        threads.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& thread : threads) thread.join();
    if (error) std::rethrow_exception(error);
}

SweepResult sweep_alpha(const PipelineConfig& config, const PreparedData& prepared,
                        const SimulatorBundle& sim_bundle, const std::vector<double>& alphas,
                        const std::vector<Variant>& variants, int train_repetitions, int workers,
                        const std::string& bundle_root) {
    if (alphas.empty()) throw Error(ErrorKind::ConfigError, "sweep needs at least one alpha");
    if (train_repetitions < 1) throw Error(ErrorKind::ConfigError, "train_repetitions must be >= 1");

    struct RepOutput {
        // value added per (alpha, variant), alpha-major
        std::vector<double> value_added;
        std::vector<MetricsReport> reports;
    };
    std::vector<RepOutput> rep_outputs(static_cast<size_t>(train_repetitions));

    parallel_for(static_cast<size_t>(train_repetitions), workers, [&](size_t rep) {
        const auto artifacts = build_seed_artifacts(config, prepared, sim_bundle.simulator, rep);
        RepOutput output;
        for (const double alpha : alphas) {
            for (const Variant variant : variants) {
                auto trained = train_one(config, prepared, artifacts, variant, alpha, rep);
                if (rep == 0 && !bundle_root.empty()) {
                    std::ostringstream name;
                    name << "advisor_" << variant_name(variant) << "_a" << format_double(alpha) << "_s0";
                    json manifest;
                    manifest["tool"] = kToolVersion;
                    manifest["config_hash"] = config.config_hash();
                    manifest["variant"] = variant_name(variant);
                    manifest["alpha"] = alpha;
                    manifest["repetition"] = 0;
                    trained.advisor.save((fs::path(bundle_root) / name.str()).string(), prepared.view,
                                         manifest.dump(2));
                }
                CostSpec context_costs = config.costs;
                context_costs.alpha = alpha;
                EvalConfig eval = config.eval;
                eval.seed = stream_seed(config.seed, "eval", rep);

                MetricsReport report;
                bool deployed = true;
                if (config.gate_enabled) {
                    EvalConfig gate_eval = config.eval;
                    gate_eval.seed = stream_seed(config.seed, "gate", rep);
                    deployed = robustness_gate(trained.advisor, prepared.dataset, prepared.view,
                                               prepared.val_rows, sim_bundle.simulator, context_costs,
                                               gate_eval) == GateDecision::deploy;
                }
                if (deployed) {
                    report = evaluate(trained.advisor, prepared.dataset, prepared.view, prepared.test_rows,
                                      sim_bundle.simulator, context_costs, eval);
                } else {
                    report = evaluate_human_alone(prepared.dataset, prepared.test_rows, sim_bundle.simulator,
                                                  context_costs, eval);
                }
                output.value_added.push_back(report.overall.value_added.mean);
                output.reports.push_back(std::move(report));
            }
        }
        rep_outputs[rep] = std::move(output);
    });

    SweepResult result;
    size_t slot = 0;
    for (const double alpha : alphas) {
        for (const Variant variant : variants) {
            SweepPoint point;
            point.alpha = alpha;
            point.variant = variant;
            for (int rep = 0; rep < train_repetitions; ++rep) {
                point.per_rep_value_added.push_back(rep_outputs[static_cast<size_t>(rep)].value_added[slot]);
                point.reports.push_back(rep_outputs[static_cast<size_t>(rep)].reports[slot]);
            }
            double sum = 0.0;
            for (const double v : point.per_rep_value_added) sum += v;
            point.value_added_mean = sum / static_cast<double>(point.per_rep_value_added.size());
            if (point.per_rep_value_added.size() > 1) {
                double sq = 0.0;
                for (const double v : point.per_rep_value_added)
                    sq += (v - point.value_added_mean) * (v - point.value_added_mean);
                const double sd = std::sqrt(sq / static_cast<double>(point.per_rep_value_added.size() - 1));
                point.value_added_se = sd / std::sqrt(static_cast<double>(point.per_rep_value_added.size()));
            }
            result.points.push_back(std::move(point));
            ++slot;
        }
    }
    return result;
}

std::string SweepResult::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "alpha,variant,value_added,se,repetitions\n";
    for (const auto& point : points)
        out << point.alpha << ',' << variant_name(point.variant) << ',' << point.value_added_mean << ','
            << point.value_added_se << ',' << point.per_rep_value_added.size() << '\n';
    return out.str();
}

// ---- incomplete beta for the t-test p-value ----

namespace {

double betacf(double a, double b, double x) {
    const int max_iter = 200;
    const double eps = 3e-12;
    const double fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

double betainc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

PairedTTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw Error(ErrorKind::ConfigError, "paired t-test needs two equal series of length >= 2");
    const size_t n = a.size();
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        sq += d * d;
    }
    const double sd = std::sqrt(sq / static_cast<double>(n - 1));
    PairedTTest test;
    test.n = n;
    if (sd == 0.0) {
        test.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        test.p = mean == 0.0 ? 1.0 : 0.0;
        return test;
    }
    test.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const double df = static_cast<double>(n - 1);
    test.p = betainc(df / 2.0, 0.5, df / (df + test.t * test.t));
    return test;
}

// ---- commands ----

int cmd_prepare(const PipelineConfig& config) {
    const auto prepared = prepare_data(config);
    write_file(fs::path(config.out_dir) / "dataset.json", prepared.dataset.to_json());
    write_file(fs::path(config.out_dir) / "conditions.json", prepared.view.to_json());
    std::cout << "prepared " << prepared.dataset.size() << " instances, " << prepared.view.catalog.size()
              << " conditions";
    if (!prepared.view.warnings.empty()) std::cout << " (" << prepared.view.warnings.size() << " warnings)";
    std::cout << "\n";
    for (const auto& warning : prepared.view.warnings) std::cerr << "warning: " << warning << "\n";
    return 0;
}

int cmd_simulate_human(const PipelineConfig& config, const std::string& split, uint64_t repetition) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto rows = prepared.dataset.indices_of(split_tag_from_name(split));

    Rng rng(stream_seed(config.seed, "simulate-human", repetition));
    std::ostringstream out;
    out.precision(17);
    out << "instance_id,h,c_h,p_correct\n";
    for (const size_t i : rows) {
        const int h = sim_bundle.simulator.draw_decision(i, rng);
        out << i << ',' << h << ',' << sim_bundle.simulator.confidence(i) << ','
            << sim_bundle.simulator.p_correct(i) << '\n';
    }
    const auto path = fs::path(config.out_dir) / ("panel_" + split + ".csv");
    write_file(path, out.str());
    std::cout << "wrote " << rows.size() << " rows to " << path.string() << "\n";
    return 0;
}

int cmd_collect_interactions(const PipelineConfig& config, uint64_t repetition) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto artifacts = build_seed_artifacts(config, prepared, sim_bundle.simulator, repetition);
    const auto path = fs::path(config.out_dir) / "interactions.csv";
    write_file(path, interactions_to_csv(artifacts.records));
    std::cout << "collected " << artifacts.records.size() << " contradiction records from "
              << artifacts.interaction_rows.size() << " instances\n";
    return 0;
}

int cmd_fit_discretion(const PipelineConfig& config, uint64_t repetition) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto artifacts = build_seed_artifacts(config, prepared, sim_bundle.simulator, repetition);
    const auto path = fs::path(config.out_dir) / "discretion.json";
    write_file(path, artifacts.discretion.to_json());
    std::cout << "discretion model fit on " << artifacts.records.size() << " records";
    if (artifacts.discretion.holdout_auc())
        std::cout << ", held-out AUC " << *artifacts.discretion.holdout_auc();
    std::cout << "\n";
    return 0;
}

std::string advisor_bundle_dir(const PipelineConfig& config, Variant variant, double alpha,
                               uint64_t repetition) {
    std::ostringstream name;
    name << "advisor_" << variant_name(variant) << "_a" << format_double(alpha) << "_s" << repetition;
    return (fs::path(config.out_dir) / "advisors" / name.str()).string();
}

int cmd_train(const PipelineConfig& config, Variant variant, std::optional<double> alpha_override,
              uint64_t repetition) {
    const double alpha = alpha_override.value_or(config.costs.alpha);
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto artifacts = build_seed_artifacts(config, prepared, sim_bundle.simulator, repetition);
    auto trained = train_one(config, prepared, artifacts, variant, alpha, repetition);

    json manifest;
    manifest["tool"] = kToolVersion;
    manifest["config_hash"] = config.config_hash();
    manifest["seed"] = config.seed;
    manifest["repetition"] = repetition;
    manifest["variant"] = variant_name(variant);
    manifest["alpha"] = alpha;
    manifest["dataset_fingerprint"] = fnv1a64(prepared.dataset.to_json());
    manifest["panel_size"] = artifacts.panel.size();
    manifest["interaction_records"] = artifacts.records.size();
    if (artifacts.discretion.holdout_auc()) manifest["discretion_auc"] = *artifacts.discretion.holdout_auc();
    manifest["ttl_best_train"] = trained.anneal_result.ttl_best_total;
    manifest["ttl_empty_train"] = trained.anneal_result.ttl_empty_total;
    manifest["stopped_early"] = trained.anneal_result.stopped_early;

    const auto dir = advisor_bundle_dir(config, variant, alpha, repetition);
    trained.advisor.save(dir, prepared.view, manifest.dump(2));
    write_file(fs::path(dir) / "trace.csv", trace_to_csv(trained.anneal_result.trace));
    std::cout << "trained " << variant_name(variant) << " at alpha " << alpha << ": train TTL "
              << trained.anneal_result.ttl_best_total << " (empty-set " << trained.anneal_result.ttl_empty_total
              << "), " << trained.advisor.rule_set().total_rules() << " rules -> " << dir << "\n";
    return 0;
}

int cmd_evaluate(const PipelineConfig& config, Variant variant, std::optional<double> alpha_override,
                 uint64_t repetition) {
    const double alpha = alpha_override.value_or(config.costs.alpha);
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto dir = advisor_bundle_dir(config, variant, alpha, repetition);
    const auto advisor = Advisor::load(dir, prepared.view);

    CostSpec context_costs = config.costs;
    context_costs.alpha = alpha;
    EvalConfig eval = config.eval;
    eval.seed = stream_seed(config.seed, "eval", repetition);

    MetricsReport report;
    if (config.gate_enabled) {
        EvalConfig gate_eval = config.eval;
        gate_eval.seed = stream_seed(config.seed, "gate", repetition);
        if (robustness_gate(advisor, prepared.dataset, prepared.view, prepared.val_rows, sim_bundle.simulator,
                            context_costs, gate_eval) == GateDecision::human_alone) {
            report = evaluate_human_alone(prepared.dataset, prepared.test_rows, sim_bundle.simulator,
                                          context_costs, eval);
            std::cout << "gate: advisor withheld (validation value added < 0)\n";
        } else {
            report = evaluate(advisor, prepared.dataset, prepared.view, prepared.test_rows,
                              sim_bundle.simulator, context_costs, eval);
        }
    } else {
        report = evaluate(advisor, prepared.dataset, prepared.view, prepared.test_rows, sim_bundle.simulator,
                          context_costs, eval);
    }

    std::ostringstream stem;
    stem << "report_" << variant_name(variant) << "_a" << format_double(alpha) << "_s" << repetition;
    write_file(fs::path(config.out_dir) / (stem.str() + ".json"), report.to_json());
    write_file(fs::path(config.out_dir) / (stem.str() + ".csv"), report.to_csv());
    std::cout << "value added " << report.overall.value_added.mean << " +- " << report.overall.value_added.se
              << " (HDL " << report.overall.hdl.mean << ", TTL " << report.overall.ttl.mean << ")\n";
    return 0;
}

int cmd_sweep(const PipelineConfig& config, int workers) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto result = sweep_alpha(config, prepared, sim_bundle, config.sweep.alphas, config.variants,
                                    config.sweep.train_repetitions, workers,
                                    (fs::path(config.out_dir) / "sweep" / "advisors").string());
    write_file(fs::path(config.out_dir) / "sweep.csv", result.to_csv());
    for (const auto& point : result.points) {
        std::ostringstream stem;
        stem << "sweep_" << variant_name(point.variant) << "_a" << format_double(point.alpha);
        json doc;
        doc["alpha"] = point.alpha;
        doc["variant"] = variant_name(point.variant);
        doc["value_added_mean"] = point.value_added_mean;
        doc["value_added_se"] = point.value_added_se;
        doc["per_rep"] = point.per_rep_value_added;
        write_file(fs::path(config.out_dir) / "sweep" / (stem.str() + ".json"), doc.dump(2));
    }
    std::cout << "swept " << config.sweep.alphas.size() << " alphas x " << config.variants.size()
              << " variants over " << config.sweep.train_repetitions << " repetitions\n";
    return 0;
}

int cmd_case_study(const PipelineConfig& config, int workers) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const std::vector<double> alphas{config.costs.alpha};
    const auto result = sweep_alpha(config, prepared, sim_bundle, alphas, config.variants,
                                    config.sweep.train_repetitions, workers);

    // group-broken advising-strategy table: one row per (variant, group, metric)
    std::ostringstream table;
    table.precision(12);
    table << "variant,group,metric,mean,se\n";
    auto emit_group = [&](const std::string& variant, const GroupMetrics& group) {
        auto row = [&](const char* metric, const MetricValue& value) {
            table << variant << ',' << group.name << ',' << metric << ',';
            if (value.present())
                table << value.mean << ',' << value.se;
            else
                table << ',';
            table << '\n';
        };
        row("value_added", group.value_added);
        row("accuracy_improvement", group.accuracy_improvement);
        row("advising_costs_au", group.advising_costs_au);
        row("advising_rate", group.advising_rate);
        row("advising_accuracy", group.advising_accuracy);
        row("advising_confidence", group.advising_confidence);
        row("acceptance_rate", group.acceptance_rate);
        row("errors_avoided_pct", group.errors_avoided_pct);
    };
    for (const auto& point : result.points) {
        // aggregate group metrics across repetitions: re-summarize from reports
        // by averaging the per-rep means (each report already averages its
        // evaluation repetitions)
        const auto& name = variant_name(point.variant);
        std::vector<GroupMetrics> merged(point.reports.front().groups.size() + 1);
        std::vector<std::vector<const GroupMetrics*>> sources(merged.size());
        for (const auto& report : point.reports) {
            sources[0].push_back(&report.overall);
            for (size_t g = 0; g < report.groups.size(); ++g) sources[g + 1].push_back(&report.groups[g]);
        }
        for (size_t g = 0; g < merged.size(); ++g) {
            GroupMetrics out;
            out.name = sources[g].front()->name;
            out.group_size = sources[g].front()->group_size;
            auto combine = [&](MetricValue GroupMetrics::* field) {
                std::vector<double> means;
                for (const auto* src : sources[g])
                    if ((src->*field).present()) means.push_back((src->*field).mean);
                MetricValue value;
                value.defined_reps = means.size();
                if (!means.empty()) {
                    double sum = 0.0;
                    for (const double v : means) sum += v;
                    value.mean = sum / static_cast<double>(means.size());
                    if (means.size() > 1) {
                        double sq = 0.0;
                        for (const double v : means) sq += (v - value.mean) * (v - value.mean);
                        value.se = std::sqrt(sq / static_cast<double>(means.size() - 1)) /
                                   std::sqrt(static_cast<double>(means.size()));
                    }
                }
                out.*field = value;
            };
            combine(&GroupMetrics::value_added);
            combine(&GroupMetrics::accuracy_improvement);
            combine(&GroupMetrics::advising_costs_au);
            combine(&GroupMetrics::advising_rate);
            combine(&GroupMetrics::advising_accuracy);
            combine(&GroupMetrics::advising_confidence);
            combine(&GroupMetrics::acceptance_rate);
            combine(&GroupMetrics::errors_avoided_pct);
            emit_group(name, out);
        }
    }

    // paired t-test between the first variant and task_only when both present
    json tests = json::array();
    for (size_t p = 0; p < result.points.size(); ++p) {
        for (size_t q = 0; q < result.points.size(); ++q) {
            if (p == q) continue;
            if (result.points[p].variant != Variant::TR || result.points[q].variant != Variant::task_only)
                continue;
            const auto test =
                paired_t_test(result.points[p].per_rep_value_added, result.points[q].per_rep_value_added);
            json item;
            item["pair"] = "TR_vs_task_only";
            item["t"] = test.t;
            item["p"] = test.p;
            item["n"] = test.n;
            tests.push_back(std::move(item));
        }
    }

    write_file(fs::path(config.out_dir) / "case_study.csv", table.str());
    write_file(fs::path(config.out_dir) / "case_study_tests.json", tests.dump(2));
    write_file(fs::path(config.out_dir) / "case_study_sweep.csv", result.to_csv());
    std::cout << "case study written to " << config.out_dir << "\n";
    return 0;
}

int cmd_degrade_adb(const PipelineConfig& config) {
    const auto prepared = prepare_data(config);
    const auto sim_bundle = build_simulator(config, prepared);
    const auto artifacts = build_seed_artifacts(config, prepared, sim_bundle.simulator, 0);
    auto trained = train_one(config, prepared, artifacts, Variant::TR, config.costs.alpha, 0);

    const auto profiles = degrade_adb(config.human, config.degrade.levels);
    std::ostringstream out;
    out.precision(12);
    out << "level,model_auc,gated,value_added,se\n";
    for (size_t level_idx = 0; level_idx < profiles.size(); ++level_idx) {
        // same difficulty model, perturbed acceptance behavior
        std::vector<double> probs(prepared.dataset.size());
        for (size_t i = 0; i < prepared.dataset.size(); ++i)
            probs[i] = sim_bundle.difficulty_model.predict_proba(prepared.dataset, i);
        HumanSimulator perturbed(profiles[level_idx], prepared.dataset, std::move(probs));

        Rng auc_rng(stream_seed(config.seed, "degrade-auc", level_idx));
        const double model_auc =
            discretion_auc_against(artifacts.discretion, perturbed, artifacts.bootstrap, prepared.dataset,
                                   artifacts.interaction_rows, config.degrade.min_events, auc_rng);

        CostSpec context_costs = config.costs;
        EvalConfig gate_eval = config.eval;
        gate_eval.seed = stream_seed(config.seed, "degrade-gate", level_idx);
        const bool gated =
            config.gate_enabled && robustness_gate(trained.advisor, prepared.dataset, prepared.view,
                                                   prepared.val_rows, perturbed, context_costs,
                                                   gate_eval) == GateDecision::human_alone;

        EvalConfig eval = config.eval;
        eval.seed = stream_seed(config.seed, "degrade-eval", level_idx);
        const auto report =
            gated ? evaluate_human_alone(prepared.dataset, prepared.test_rows, perturbed, context_costs, eval)
                  : evaluate(trained.advisor, prepared.dataset, prepared.view, prepared.test_rows, perturbed,
                             context_costs, eval);
        out << config.degrade.levels[level_idx] << ',' << model_auc << ',' << (gated ? 1 : 0) << ','
            << report.overall.value_added.mean << ',' << report.overall.value_added.se << '\n';
    }
    write_file(fs::path(config.out_dir) / "degrade.csv", out.str());
    std::cout << "degradation study written to " << config.out_dir << "/degrade.csv\n";
    return 0;
}

}  // namespace teamrules
