#include "teamrules/advisor.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace teamrules {

namespace {

using nlohmann::json;

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << content;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

json condition_to_json(const Condition& cond) {
    json item;
    item["feature"] = cond.feature;
    item["op"] = condition_op_name(cond.op);
    if (cond.op == ConditionOp::less || cond.op == ConditionOp::greater_equal)
        item["threshold"] = cond.threshold;
    else
        item["category"] = cond.category;
    return item;
}

uint32_t find_condition(const json& item, const BinarizedView& view) {
    const std::string feature = item.at("feature").get<std::string>();
    const std::string op = item.at("op").get<std::string>();
    for (size_t c = 0; c < view.catalog.size(); ++c) {
        const auto& cond = view.catalog[c];
        if (cond.feature != feature || condition_op_name(cond.op) != op) continue;
        if (cond.op == ConditionOp::less || cond.op == ConditionOp::greater_equal) {
            if (cond.threshold == item.at("threshold").get<double>()) return static_cast<uint32_t>(c);
        } else if (cond.category == item.at("category").get<std::string>()) {
            return static_cast<uint32_t>(c);
        }
    }
    throw Error(ErrorKind::SchemaMismatch, "serialized condition not present in the catalog");
}

}  // namespace

bool psi(const CostSpec& costs, double outcome_p1, int candidate, int h, double p_accept) {
    const double advice_loss = outcome_p1 * expected_team_loss(costs, 1, candidate, h, p_accept) +
                               (1.0 - outcome_p1) * expected_team_loss(costs, 0, candidate, h, p_accept);
    const double withhold_loss = outcome_p1 * expected_team_loss(costs, 1, h, h, p_accept) +
                                 (1.0 - outcome_p1) * expected_team_loss(costs, 0, h, h, p_accept);
    return advice_loss < withhold_loss;
}

const char* advisor_mode_name(AdvisorMode mode) {
    return mode == AdvisorMode::teamrules ? "teamrules" : "task_only";
}

AdvisorMode advisor_mode_from_name(const std::string& name) {
    if (name == "teamrules") return AdvisorMode::teamrules;
    if (name == "task_only") return AdvisorMode::task_only;
    throw Error(ErrorKind::ConfigError, "unknown advisor mode: " + name);
}

Advisor::Advisor(RuleSet rule_set, DiscretionModel discretion, ProbabilisticClassifier outcome, CostSpec costs,
                 AdvisorMode mode, double negative_confidence)
    : rule_set_(std::move(rule_set)), discretion_(std::move(discretion)), outcome_(std::move(outcome)),
      costs_(costs), mode_(mode), negative_confidence_(negative_confidence) {
    costs_.validate();
}

Advisor::RuleMatch Advisor::rule_confidence(bool positive_side, const Dataset& dataset, size_t instance,
                                            const BinarizedView& view) const {
    const auto& side = positive_side ? rule_set_.positive : rule_set_.negative;
    const int target = positive_side ? 1 : 0;
    double best = -1.0;
    int best_id = -1;
    for (size_t r = 0; r < side.size(); ++r) {
        if (!side[r].covers(dataset, instance, view)) continue;
        const double p = side[r].precision_for(target);
        if (p > best) {
            best = p;
            best_id = static_cast<int>(r);
        }
    }
    if (best_id < 0) throw Error(ErrorKind::NoCoveringRule, "no covering rule on the requested side");
    return RuleMatch{best, best_id};
}

Advice Advisor::advise(const Dataset& dataset, size_t instance, const BinarizedView& view, int h,
                       double human_confidence) const {
    const double p1 = outcome_.predict_proba(dataset, instance);

    // positive side takes precedence; no fallback to the negative side when
    // the value test fails while the positive side covers
    bool covered_positive = false;
    for (const auto& rule : rule_set_.positive)
        if (rule.covers(dataset, instance, view)) {
            covered_positive = true;
            break;
        }

    if (covered_positive) {
        const auto match = rule_confidence(true, dataset, instance, view);
        const double p_accept = discretion_.probability(match.confidence, human_confidence);
        if (psi(costs_, p1, 1, h, p_accept))
            return Advice{true, 1, match.confidence, match.rule_id};
        return Advice{};
    }

    bool covered_negative = false;
    for (const auto& rule : rule_set_.negative)
        if (rule.covers(dataset, instance, view)) {
            covered_negative = true;
            break;
        }

    if (covered_negative) {
        const auto match = rule_confidence(false, dataset, instance, view);
        const double p_accept = discretion_.probability(match.confidence, human_confidence);
        if (psi(costs_, p1, 0, h, p_accept))
            return Advice{true, 0, match.confidence, match.rule_id};
    }
    return Advice{};
}

Advice Advisor::advise_task_only(const Dataset& dataset, size_t instance, const BinarizedView& view) const {
    for (size_t r = 0; r < rule_set_.positive.size(); ++r) {
        if (rule_set_.positive[r].covers(dataset, instance, view)) {
            const auto match = rule_confidence(true, dataset, instance, view);
            return Advice{true, 1, match.confidence, match.rule_id};
        }
    }
    return Advice{true, 0, negative_confidence_, -1};
}

Advice Advisor::advise_instance(const Dataset& dataset, size_t instance, const BinarizedView& view, int h,
                                double human_confidence) const {
    if (mode_ == AdvisorMode::task_only) return advise_task_only(dataset, instance, view);
    return advise(dataset, instance, view, h, human_confidence);
}

std::string rule_set_to_json(const RuleSet& rule_set, const BinarizedView& view) {
    auto side_to_json = [&](const std::vector<Rule>& side, int target) {
        json arr = json::array();
        for (const auto& rule : side) {
            json item;
            json conds = json::array();
            for (const uint32_t c : rule.condition_ids()) conds.push_back(condition_to_json(view.catalog[c]));
            item["conditions"] = std::move(conds);
            item["precision"] = rule.precision_for(target);
            item["support"] = rule.support();
            item["text"] = rule.describe(view);
            arr.push_back(std::move(item));
        }
        return arr;
    };
    json doc;
    doc["positive"] = side_to_json(rule_set.positive, 1);
    doc["negative"] = side_to_json(rule_set.negative, 0);
    return doc.dump(2);
}

RuleSet rule_set_from_json(const std::string& text, const BinarizedView& view) {
    const json doc = json::parse(text);
    RuleSet set;
    auto side_from_json = [&](const json& arr, int target) {
        std::vector<Rule> side;
        for (const auto& item : arr) {
            std::vector<uint32_t> ids;
            for (const auto& cond : item.at("conditions")) ids.push_back(find_condition(cond, view));
            const double precision = item.at("precision").get<double>();
            const double precision1 = target == 1 ? precision : 1.0 - precision;
            side.push_back(
                Rule::from_frozen(std::move(ids), view, precision1, item.at("support").get<uint64_t>()));
        }
        return side;
    };
    set.positive = side_from_json(doc.at("positive"), 1);
    set.negative = side_from_json(doc.at("negative"), 0);
    return set;
}

void Advisor::save(const std::string& directory, const BinarizedView& view,
                   const std::string& manifest_json) const {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    write_file(fs::path(directory) / "ruleset.json", rule_set_to_json(rule_set_, view));
    write_file(fs::path(directory) / "discretion.json", discretion_.to_json());
    write_file(fs::path(directory) / "outcome.json", outcome_.to_json());
    json costs;
    costs["alpha"] = costs_.alpha;
    costs["lambda0"] = costs_.lambda0;
    costs["lambda1"] = costs_.lambda1;
    costs["mode"] = advisor_mode_name(mode_);
    costs["negative_confidence"] = negative_confidence_;
    write_file(fs::path(directory) / "costs.json", costs.dump(2));
    write_file(fs::path(directory) / "manifest.json", manifest_json);
}

Advisor Advisor::load(const std::string& directory, const BinarizedView& view) {
    namespace fs = std::filesystem;
    const auto rule_set = rule_set_from_json(read_file(fs::path(directory) / "ruleset.json"), view);
    auto discretion = DiscretionModel::from_json(read_file(fs::path(directory) / "discretion.json"));
    auto outcome = ProbabilisticClassifier::from_json(read_file(fs::path(directory) / "outcome.json"));
    const json costs_doc = json::parse(read_file(fs::path(directory) / "costs.json"));
    CostSpec costs;
    costs.alpha = costs_doc.at("alpha").get<double>();
    costs.lambda0 = costs_doc.at("lambda0").get<double>();
    costs.lambda1 = costs_doc.at("lambda1").get<double>();
    const auto mode = advisor_mode_from_name(costs_doc.at("mode").get<std::string>());
    const double neg_conf = costs_doc.at("negative_confidence").get<double>();
    return Advisor(rule_set, std::move(discretion), std::move(outcome), costs, mode, neg_conf);
}

}  // namespace teamrules
