#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "teamrules/common.hpp"
#include "teamrules/pipeline.hpp"

using namespace teamrules;
namespace fs = std::filesystem;

namespace {

std::string write_toy_dataset(const fs::path& dir) {
    Rng rng(71);
    std::string csv = "v,w,gender,y\n";
    for (int i = 0; i < 120; ++i) {
        const int v = static_cast<int>(rng.uniform_int(100));
        const int w = static_cast<int>(rng.uniform_int(100));
        int y = v < 50 ? 1 : 0;
        if (rng.uniform() < 0.1) y = 1 - y;
        csv += std::to_string(v) + "," + std::to_string(w) + "," + (rng.bernoulli(0.5) ? "M" : "F") + "," +
               std::to_string(y) + "\n";
    }
    fs::create_directories(dir);
    const auto path = dir / "toy.csv";
    std::ofstream out(path);
    out << csv;
    return path.string();
}

std::string toy_config_json(const std::string& csv_path, const std::string& out_dir) {
    return std::string(R"({
      "dataset": {"csv": ")") + csv_path + R"(", "label": "y",
                  "splits": {"train": 90, "val": 15, "test": 15}, "split_seed": 3,
                  "bins_per_numeric": 4},
      "human": {
        "decision": {"kind": "difficulty_biased", "difficulty_threshold": 0.6},
        "confidence": {"kind": "accuracy_biased", "kappa": 0.05},
        "adb": {"delta": 5.0, "k": 0.63, "gamma": 0.95, "beta": 0.5},
        "seed": 7
      },
      "estimators": {"interaction_fraction": 0.5, "outcome_cv_folds": 3,
        "outcome_grid": [{"trees": 60, "depth": 2, "learning_rate": 0.15}],
        "discretion": {"trees": 60, "depth": 3, "learning_rate": 0.1}},
      "miner": {"max_rule_len": 3, "min_support": 0.05, "forest_size": 25, "pool_cap": 400},
      "trainer": {"iterations": 250, "cooling": 0.01},
      "costs": {"alpha": 0.2, "lambda0": 1.0, "lambda1": 1.0},
      "variants": ["TR"],
      "eval": {"repetitions": 8, "gate": false,
               "groups": [{"name": "female", "feature": "gender", "op": "==", "value": "F"}]},
      "sweep": {"alphas": [0.1, 0.3], "train_repetitions": 2},
      "seed": 5,
      "out": ")" + out_dir + R"("
    })";
}

struct PipelineFixture {
    fs::path dir;
    PipelineConfig config;

    PipelineFixture() {
        dir = fs::temp_directory_path() / "teamrules_pipeline_test";
        fs::remove_all(dir);
        const auto csv = write_toy_dataset(dir);
        config = PipelineConfig::from_json_text(toy_config_json(csv, (dir / "out").string()), "");
    }
    ~PipelineFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("config parsing fills defaults and rejects bad input") {
    PipelineFixture fx;
    CHECK(fx.config.dataset.splits.train == 90);
    CHECK(fx.config.trainer.iterations == 250);
    CHECK(fx.config.human.adb.delta == 5.0);
    CHECK(fx.config.eval.groups.size() == 1);
    CHECK(fx.config.sweep.alphas.size() == 2);

    CHECK_THROWS_WITH_AS(PipelineConfig::from_json_text("{not json", ""), doctest::Contains("ConfigError"),
                         Error);
    CHECK_THROWS_AS(PipelineConfig::from_json_text("{}", ""), Error);
}

TEST_CASE("acceptance-rule switch parses both readings") {
    PipelineFixture fx;
    auto text = toy_config_json((fx.dir / "toy.csv").string(), (fx.dir / "out2").string());
    text.replace(text.find("\"trainer\": {"), std::string("\"trainer\": {").size(),
                 "\"trainer\": {\"acceptance_rule\": \"metropolis\", ");
    const auto config = PipelineConfig::from_json_text(text, "");
    CHECK(config.trainer.acceptance_rule == AcceptanceRule::metropolis);
}

TEST_CASE("prepare is idempotent byte for byte") {
    PipelineFixture fx;
    CHECK(cmd_prepare(fx.config) == 0);
    const auto dataset_path = fs::path(fx.config.out_dir) / "dataset.json";
    const auto conditions_path = fs::path(fx.config.out_dir) / "conditions.json";
    REQUIRE(fs::exists(dataset_path));
    REQUIRE(fs::exists(conditions_path));

    std::ifstream in1(dataset_path);
    const std::string first((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());
    CHECK(cmd_prepare(fx.config) == 0);
    std::ifstream in2(dataset_path);
    const std::string second((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    CHECK(first == second);
}

TEST_CASE("seed artifacts partition the train split and respect preconditions") {
    PipelineFixture fx;
    const auto prepared = prepare_data(fx.config);
    const auto sim = build_simulator(fx.config, prepared);
    const auto artifacts = build_seed_artifacts(fx.config, prepared, sim.simulator, 0);

    CHECK(artifacts.interaction_rows.size() == 45);
    CHECK(artifacts.advisor_rows.size() == 45);
    // disjoint and inside the train split
    for (const size_t i : artifacts.interaction_rows) {
        CHECK(prepared.dataset.split_tags[i] == SplitTag::train);
        for (const size_t j : artifacts.advisor_rows) CHECK(i != j);
    }
    CHECK(!artifacts.records.empty());
    // the contradiction rate is strictly inside (0, 1)
    CHECK(artifacts.records.size() < artifacts.interaction_rows.size());
    // records only reference interaction rows (bootstrap never saw them)
    for (const auto& rec : artifacts.records) {
        bool in_interaction = false;
        for (const size_t i : artifacts.interaction_rows) in_interaction |= rec.instance_id == i;
        CHECK(in_interaction);
    }
    CHECK(artifacts.panel.size() == 45);
}

TEST_CASE("train_one then evaluate: value added and gate plumbing") {
    PipelineFixture fx;
    const auto prepared = prepare_data(fx.config);
    const auto sim = build_simulator(fx.config, prepared);
    const auto artifacts = build_seed_artifacts(fx.config, prepared, sim.simulator, 0);
    const auto trained = train_one(fx.config, prepared, artifacts, Variant::TR, 0.2, 0);

    CHECK(trained.anneal_result.ttl_best_total <= trained.anneal_result.ttl_empty_total);

    CostSpec costs = fx.config.costs;
    EvalConfig eval = fx.config.eval;
    eval.seed = 1;
    const auto report =
        evaluate(trained.advisor, prepared.dataset, prepared.view, prepared.test_rows, sim.simulator, costs, eval);
    CHECK(report.overall.ttl.mean == report.overall.tdl.mean + report.overall.al.mean);
}

TEST_CASE("variant coincidence: TR at alpha 0 equals TR_no_Cost, TR_no_ADB equals fixed-discretion TR") {
    PipelineFixture fx;
    const auto prepared = prepare_data(fx.config);
    const auto sim = build_simulator(fx.config, prepared);
    const auto artifacts = build_seed_artifacts(fx.config, prepared, sim.simulator, 1);

    const auto tr = train_one(fx.config, prepared, artifacts, Variant::TR, 0.0, 1);
    const auto no_cost = train_one(fx.config, prepared, artifacts, Variant::TR_no_Cost, 0.0, 1);
    CHECK(rule_set_to_json(tr.advisor.rule_set(), prepared.view) ==
          rule_set_to_json(no_cost.advisor.rule_set(), prepared.view));

    // TR_no_ADB must equal TR trained with a hand-substituted fixed-1 model
    const auto no_adb = train_one(fx.config, prepared, artifacts, Variant::TR_no_ADB, 0.2, 1);
    SeedArtifacts forced = artifacts;
    forced.discretion = DiscretionModel::fixed(1.0);
    const auto tr_forced = train_one(fx.config, prepared, forced, Variant::TR, 0.2, 1);
    CHECK(rule_set_to_json(no_adb.advisor.rule_set(), prepared.view) ==
          rule_set_to_json(tr_forced.advisor.rule_set(), prepared.view));
}

TEST_CASE("sweep produces one point per alpha-variant pair, deterministically across workers") {
    PipelineFixture fx;
    fx.config.variants = {Variant::TR, Variant::task_only};
    const auto prepared = prepare_data(fx.config);
    const auto sim = build_simulator(fx.config, prepared);

    const auto serial = sweep_alpha(fx.config, prepared, sim, fx.config.sweep.alphas, fx.config.variants,
                                    fx.config.sweep.train_repetitions, 1);
    const auto parallel = sweep_alpha(fx.config, prepared, sim, fx.config.sweep.alphas, fx.config.variants,
                                      fx.config.sweep.train_repetitions, 4);
    REQUIRE(serial.points.size() == 4);
    REQUIRE(parallel.points.size() == 4);
    for (size_t p = 0; p < serial.points.size(); ++p) {
        CHECK(serial.points[p].alpha == parallel.points[p].alpha);
        CHECK(serial.points[p].variant == parallel.points[p].variant);
        CHECK(serial.points[p].value_added_mean == parallel.points[p].value_added_mean);
        CHECK(serial.points[p].per_rep_value_added == parallel.points[p].per_rep_value_added);
    }
    const auto csv = serial.to_csv();
    CHECK(csv.rfind("alpha,variant,value_added,se,repetitions\n", 0) == 0);
}

TEST_CASE("end-to-end rerun determinism: identical reports byte for byte") {
    PipelineFixture fx;
    const auto run = [&] {
        const auto prepared = prepare_data(fx.config);
        const auto sim = build_simulator(fx.config, prepared);
        const auto artifacts = build_seed_artifacts(fx.config, prepared, sim.simulator, 2);
        const auto trained = train_one(fx.config, prepared, artifacts, Variant::TR, 0.2, 2);
        EvalConfig eval = fx.config.eval;
        eval.seed = stream_seed(fx.config.seed, "eval", 2);
        return evaluate(trained.advisor, prepared.dataset, prepared.view, prepared.test_rows, sim.simulator,
                        fx.config.costs, eval)
            .to_csv();
    };
    CHECK(run() == run());
}

TEST_CASE("case-study and degrade commands write their artifacts") {
    PipelineFixture fx;
    fx.config.variants = {Variant::TR, Variant::task_only};
    fx.config.sweep.alphas = {0.2};
    fx.config.sweep.train_repetitions = 3;
    fx.config.degrade.levels = {0.0, 1.0};
    fx.config.degrade.min_events = 300;
    fx.config.eval.repetitions = 6;

    CHECK(cmd_case_study(fx.config, 2) == 0);
    CHECK(fs::exists(fs::path(fx.config.out_dir) / "case_study.csv"));
    CHECK(fs::exists(fs::path(fx.config.out_dir) / "case_study_tests.json"));

    CHECK(cmd_degrade_adb(fx.config) == 0);
    REQUIRE(fs::exists(fs::path(fx.config.out_dir) / "degrade.csv"));
    std::ifstream in(fs::path(fx.config.out_dir) / "degrade.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "level,model_auc,gated,value_added,se");
    size_t rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 2);
}

TEST_CASE("sweep command persists curves and first-repetition bundles") {
    PipelineFixture fx;
    fx.config.sweep.train_repetitions = 2;
    CHECK(cmd_sweep(fx.config, 2) == 0);
    CHECK(fs::exists(fs::path(fx.config.out_dir) / "sweep.csv"));
    CHECK(fs::exists(fs::path(fx.config.out_dir) / "sweep" / "advisors" / "advisor_TR_a0.1_s0" /
                     "ruleset.json"));
    CHECK(fs::exists(fs::path(fx.config.out_dir) / "sweep" / "advisors" / "advisor_TR_a0.3_s0" /
                     "ruleset.json"));
}

TEST_CASE("paired t test on known series") {
    // constant difference of 1 with tiny jitter: hugely significant
    std::vector<double> a{1.0, 1.1, 0.9, 1.05, 0.95};
    std::vector<double> b{0.0, 0.1, -0.1, 0.05, -0.05};
    const auto test = paired_t_test(a, b);
    CHECK(test.t > 10.0);
    CHECK(test.p < 0.01);

    // identical series: t = 0, p = 1
    const auto null_test = paired_t_test(a, a);
    CHECK(null_test.t == 0.0);
    CHECK(null_test.p == doctest::Approx(1.0));

    CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), Error);
}

TEST_CASE("stream seeds separate purposes and indices") {
    const uint64_t master = 42;
    CHECK(stream_seed(master, "a", 0) != stream_seed(master, "b", 0));
    CHECK(stream_seed(master, "a", 0) != stream_seed(master, "a", 1));
    CHECK(stream_seed(master, "a", 0) == stream_seed(master, "a", 0));
}
