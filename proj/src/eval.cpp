#include "teamrules/eval.hpp"

#include <cmath>
#include <sstream>

#include "teamrules/kernels.hpp"

#include <json.hpp>

namespace teamrules {

namespace {

using nlohmann::json;

struct Series {
    std::vector<double> values;

    void push(double v) { values.push_back(v); }

    MetricValue summarize() const {
        MetricValue out;
        out.defined_reps = values.size();
        if (values.empty()) return out;
        double sum = 0.0;
        for (const double v : values) sum += v;
        out.mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double sq = 0.0;
            for (const double v : values) sq += (v - out.mean) * (v - out.mean);
            const double sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
            out.se = sd / std::sqrt(static_cast<double>(values.size()));
        }
        return out;
    }
};

/// Per-repetition tallies for one group of instances.
struct GroupTally {
    double human_loss = 0.0;
    double team_loss = 0.0;
    size_t advice_count = 0;   // contradictory advice
    size_t advice_correct = 0;
    size_t accepted = 0;
    double confidence_sum = 0.0;
    size_t corrected = 0;
    double corrected_weighted = 0.0;
    size_t human_errors = 0;
    size_t size = 0;
};

struct GroupSeries {
    std::string name;
    size_t size = 0;
    Series hdl, tdl, al, value_added;  // ttl derived from tdl + al
    Series accuracy_improvement, tdl_improvement;
    Series advising_costs_incurred, advising_costs_au;
    Series advising_confidence, advising_accuracy, advising_rate, acceptance_rate, errors_avoided_pct;
};

GroupMetrics finalize(const GroupSeries& series) {
    GroupMetrics out;
    out.name = series.name;
    out.group_size = series.size;
    out.hdl = series.hdl.summarize();
    out.tdl = series.tdl.summarize();
    out.al = series.al.summarize();
    // identities hold exactly on the report: TTL := TDL + AL, VA := HDL - TTL
    out.ttl.mean = out.tdl.mean + out.al.mean;
    out.ttl.defined_reps = out.tdl.defined_reps;
    {
        Series ttl_series;
        for (size_t r = 0; r < series.tdl.values.size(); ++r)
            ttl_series.push(series.tdl.values[r] + series.al.values[r]);
        out.ttl.se = ttl_series.summarize().se;
    }
    out.value_added = series.value_added.summarize();
    out.value_added.mean = out.hdl.mean - out.ttl.mean;
    out.accuracy_improvement = series.accuracy_improvement.summarize();
    out.tdl_improvement = series.tdl_improvement.summarize();
    out.advising_costs_incurred = series.advising_costs_incurred.summarize();
    out.advising_costs_au = series.advising_costs_au.summarize();
    out.advising_confidence = series.advising_confidence.summarize();
    out.advising_accuracy = series.advising_accuracy.summarize();
    out.advising_rate = series.advising_rate.summarize();
    out.acceptance_rate = series.acceptance_rate.summarize();
    out.errors_avoided_pct = series.errors_avoided_pct.summarize();
    return out;
}

void tally_to_series(GroupSeries& series, const GroupTally& tally, size_t total_instances, double alpha) {
    const double n = static_cast<double>(total_instances);
    const double hdl = tally.human_loss / n;
    const double tdl = tally.team_loss / n;
    const double al = alpha * static_cast<double>(tally.advice_count) / n;
    series.hdl.push(hdl);
    series.tdl.push(tdl);
    series.al.push(al);
    series.value_added.push(hdl - (tdl + al));
    series.accuracy_improvement.push(static_cast<double>(tally.corrected) / n);
    series.tdl_improvement.push(tally.corrected_weighted / n);
    series.advising_costs_incurred.push(static_cast<double>(tally.advice_count) / n);
    const double group_n = static_cast<double>(tally.size);
    const double rate = group_n > 0 ? static_cast<double>(tally.advice_count) / group_n : 0.0;
    series.advising_rate.push(rate);
    series.advising_costs_au.push(alpha * rate);
    if (tally.advice_count > 0) {
        series.advising_confidence.push(tally.confidence_sum / static_cast<double>(tally.advice_count));
        series.advising_accuracy.push(static_cast<double>(tally.advice_correct) /
                                      static_cast<double>(tally.advice_count));
        series.acceptance_rate.push(static_cast<double>(tally.accepted) /
                                    static_cast<double>(tally.advice_count));
    }
    if (tally.human_errors > 0)
        series.errors_avoided_pct.push(static_cast<double>(tally.corrected) /
                                       static_cast<double>(tally.human_errors));
}

json metric_to_json(const MetricValue& value) {
    if (!value.present()) return nullptr;
    json out;
    out["mean"] = value.mean;
    out["se"] = value.se;
    out["reps"] = value.defined_reps;
    return out;
}

json group_to_json(const GroupMetrics& group) {
    json out;
    out["name"] = group.name;
    out["size"] = group.group_size;
    out["hdl"] = metric_to_json(group.hdl);
    out["tdl"] = metric_to_json(group.tdl);
    out["al"] = metric_to_json(group.al);
    out["ttl"] = metric_to_json(group.ttl);
    out["value_added"] = metric_to_json(group.value_added);
    out["accuracy_improvement"] = metric_to_json(group.accuracy_improvement);
    out["tdl_improvement"] = metric_to_json(group.tdl_improvement);
    out["advising_costs_incurred"] = metric_to_json(group.advising_costs_incurred);
    out["advising_costs_au"] = metric_to_json(group.advising_costs_au);
    out["advising_confidence"] = metric_to_json(group.advising_confidence);
    out["advising_accuracy"] = metric_to_json(group.advising_accuracy);
    out["advising_rate"] = metric_to_json(group.advising_rate);
    out["acceptance_rate"] = metric_to_json(group.acceptance_rate);
    out["errors_avoided_pct"] = metric_to_json(group.errors_avoided_pct);
    return out;
}

void group_to_csv(std::ostringstream& out, const GroupMetrics& group) {
    auto row = [&](const char* metric, const MetricValue& value) {
        out << metric << ',' << group.name << ',';
        if (value.present())
            out << value.mean << ',' << value.se << ',' << value.defined_reps;
        else
            out << ",,0";
        out << '\n';
    };
    row("hdl", group.hdl);
    row("tdl", group.tdl);
    row("al", group.al);
    row("ttl", group.ttl);
    row("value_added", group.value_added);
    row("accuracy_improvement", group.accuracy_improvement);
    row("tdl_improvement", group.tdl_improvement);
    row("advising_costs_incurred", group.advising_costs_incurred);
    row("advising_costs_au", group.advising_costs_au);
    row("advising_confidence", group.advising_confidence);
    row("advising_accuracy", group.advising_accuracy);
    row("advising_rate", group.advising_rate);
    row("acceptance_rate", group.acceptance_rate);
    row("errors_avoided_pct", group.errors_avoided_pct);
}

MetricsReport run_evaluation(const Advisor* advisor, const Dataset& dataset, const BinarizedView* view,
                             const std::vector<size_t>& rows, const HumanSimulator& simulator,
                             const CostSpec& context_costs, const EvalConfig& config) {
    if (config.repetitions < 1) throw Error(ErrorKind::ConfigError, "repetitions must be >= 1");
    if (rows.empty()) throw Error(ErrorKind::ConfigError, "no instances to evaluate");

    // group membership is fixed across repetitions
    std::vector<std::vector<bool>> membership;
    std::vector<kernels::BitVec> group_masks;
    for (const auto& group : config.groups) {
        std::vector<bool> member(rows.size());
        kernels::BitVec mask(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            member[r] = group.matches(dataset, rows[r]);
            if (member[r]) mask.set(r);
        }
        membership.push_back(std::move(member));
        group_masks.push_back(std::move(mask));
    }

    GroupSeries overall_series;
    overall_series.name = "overall";
    overall_series.size = rows.size();
    std::vector<GroupSeries> group_series(config.groups.size());
    for (size_t g = 0; g < config.groups.size(); ++g) {
        group_series[g].name = config.groups[g].name;
        for (size_t r = 0; r < rows.size(); ++r) group_series[g].size += membership[g][r];
    }

    for (int rep = 0; rep < config.repetitions; ++rep) {
        Rng rng = simulator.repetition_rng(config.seed + static_cast<uint64_t>(rep));
        GroupTally overall;
        overall.size = rows.size();
        std::vector<GroupTally> tallies(config.groups.size());
        for (size_t g = 0; g < tallies.size(); ++g) tallies[g].size = group_series[g].size;

        // dense per-instance loss arrays; group sums then reduce through the
        // masked kernels while the sparse advice tallies stay scalar
        std::vector<double> v_human(rows.size()), v_team(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            const size_t i = rows[r];
            const int y = dataset.instances[i].label;
            const int h = simulator.draw_decision(i, rng);
            const double c_h = simulator.confidence(i);

            Advice advice;  // withheld by default (human alone)
            if (advisor) advice = advisor->advise_instance(dataset, i, *view, h, c_h);

            int final_decision = h;
            bool contradiction = false;
            bool accepted = false;
            if (advice.offered && advice.recommendation != h) {
                contradiction = true;
                const auto direction = advice.recommendation == 1 ? AdviceDirection::toward_positive
                                                                  : AdviceDirection::toward_negative;
                accepted = simulator.draw_acceptance(i, advice.confidence, direction, rng) == 1;
                if (accepted) final_decision = advice.recommendation;
            }

            v_human[r] = decision_loss(context_costs, y, h);
            v_team[r] = decision_loss(context_costs, y, final_decision);
            const bool corrected = h != y && final_decision == y;

            auto add = [&](GroupTally& tally) {
                tally.human_errors += h != y;
                if (contradiction) {
                    tally.advice_count += 1;
                    tally.advice_correct += advice.recommendation == y;
                    tally.accepted += accepted;
                    tally.confidence_sum += advice.confidence;
                }
                if (corrected) {
                    tally.corrected += 1;
                    tally.corrected_weighted += decision_loss(context_costs, y, 1 - y);
                }
            };
            add(overall);
            for (size_t g = 0; g < tallies.size(); ++g)
                if (membership[g][r]) add(tallies[g]);
        }

        overall.human_loss = kernels::sum(v_human);
        overall.team_loss = kernels::sum(v_team);
        for (size_t g = 0; g < tallies.size(); ++g) {
            tallies[g].human_loss = group_masks[g].masked_sum(v_human);
            tallies[g].team_loss = group_masks[g].masked_sum(v_team);
        }

        tally_to_series(overall_series, overall, rows.size(), context_costs.alpha);
        for (size_t g = 0; g < tallies.size(); ++g)
            tally_to_series(group_series[g], tallies[g], rows.size(), context_costs.alpha);
    }

    MetricsReport report;
    report.repetitions = static_cast<size_t>(config.repetitions);
    report.overall = finalize(overall_series);
    for (const auto& series : group_series) report.groups.push_back(finalize(series));
    return report;
}

}  // namespace

MetricsReport evaluate(const Advisor& advisor, const Dataset& dataset, const BinarizedView& view,
                       const std::vector<size_t>& rows, const HumanSimulator& simulator,
                       const CostSpec& context_costs, const EvalConfig& config) {
    return run_evaluation(&advisor, dataset, &view, rows, simulator, context_costs, config);
}

MetricsReport evaluate_human_alone(const Dataset& dataset, const std::vector<size_t>& rows,
                                   const HumanSimulator& simulator, const CostSpec& context_costs,
                                   const EvalConfig& config) {
    return run_evaluation(nullptr, dataset, nullptr, rows, simulator, context_costs, config);
}

GateDecision robustness_gate(const Advisor& advisor, const Dataset& dataset, const BinarizedView& view,
                             const std::vector<size_t>& validation_rows, const HumanSimulator& simulator,
                             const CostSpec& context_costs, const EvalConfig& config) {
    const auto report = evaluate(advisor, dataset, view, validation_rows, simulator, context_costs, config);
    return report.overall.value_added.mean < 0.0 ? GateDecision::human_alone : GateDecision::deploy;
}

std::vector<HumanProfile> degrade_adb(const HumanProfile& profile, const std::vector<double>& levels) {
    std::vector<HumanProfile> out;
    for (const double level : levels) {
        if (level < 0.0 || level > 1.0)
            throw Error(ErrorKind::ConfigError, "noise level must be in [0,1]");
        HumanProfile perturbed = profile;
        perturbed.adb.noise_level = level;
        out.push_back(std::move(perturbed));
    }
    return out;
}

double discretion_auc_against(const DiscretionModel& model, const HumanSimulator& simulator,
                              const ProbabilisticClassifier& bootstrap, const Dataset& dataset,
                              const std::vector<size_t>& rows, size_t min_events, Rng& rng) {
    std::vector<double> scores;
    std::vector<int> labels;
    // contradiction events are a random subset of rows; keep drawing
    // repetitions of the human until enough accumulate
    const size_t max_passes = 200;
    for (size_t pass = 0; pass < max_passes && scores.size() < min_events; ++pass) {
        const auto records = collect_interactions(simulator, bootstrap, dataset, rows, rng);
        for (const auto& rec : records) {
            scores.push_back(model.probability(rec.bootstrap_confidence, rec.human_confidence));
            labels.push_back(rec.accepted);
        }
    }
    if (scores.empty()) throw Error(ErrorKind::InsufficientRecords, "no contradiction events generated");
    return auc_score(scores, labels);
}

std::string MetricsReport::to_json() const {
    json doc;
    doc["repetitions"] = repetitions;
    doc["overall"] = group_to_json(overall);
    json groups_json = json::array();
    for (const auto& group : groups) groups_json.push_back(group_to_json(group));
    doc["groups"] = std::move(groups_json);
    return doc.dump(2);
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "metric,group,mean,se,reps\n";
    group_to_csv(out, overall);
    for (const auto& group : groups) group_to_csv(out, group);
    return out.str();
}

}  // namespace teamrules
