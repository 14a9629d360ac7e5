#include "teamrules/rules.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace teamrules {

Rule::Rule(std::vector<uint32_t> condition_ids, const BinarizedView& view, const std::vector<size_t>& panel_rows)
    : condition_ids_(std::move(condition_ids)) {
    std::sort(condition_ids_.begin(), condition_ids_.end());
    condition_ids_.erase(std::unique(condition_ids_.begin(), condition_ids_.end()), condition_ids_.end());
    if (condition_ids_.empty())
        throw Error(ErrorKind::InvalidRule, "a rule needs at least one condition");
    for (const uint32_t c : condition_ids_)
        if (c >= view.catalog.size())
            throw Error(ErrorKind::InvalidRule, "condition id out of range");

    cover_ = kernels::BitVec(panel_rows.size());
    for (size_t r = 0; r < panel_rows.size(); ++r) {
        bool all = true;
        for (const uint32_t c : condition_ids_)
            if (!view.holds(c, panel_rows[r])) {
                all = false;
                break;
            }
        if (all) cover_.set(r);
    }
    support_ = cover_.count();
}

Rule Rule::from_frozen(std::vector<uint32_t> condition_ids, const BinarizedView& view, double precision1,
                       uint64_t support) {
    Rule rule(std::move(condition_ids), view, {});
    rule.precision1_ = precision1;
    rule.support_ = support;
    return rule;
}

void Rule::score(const kernels::BitVec& panel_labels1) {
    if (support_ == 0) return;
    precision1_ = static_cast<double>(cover_.and_count(panel_labels1)) / static_cast<double>(support_);
}

bool Rule::covers(const Dataset& dataset, size_t instance, const BinarizedView& view) const {
    for (const uint32_t c : condition_ids_)
        if (!view.catalog[c].holds(dataset, instance)) return false;
    return true;
}

std::string Rule::describe(const BinarizedView& view) const {
    std::string out;
    for (size_t i = 0; i < condition_ids_.size(); ++i) {
        if (i) out += " AND ";
        out += view.catalog[condition_ids_[i]].describe();
    }
    return out;
}

bool cover(const std::vector<Condition>& conditions, const Dataset& dataset, size_t instance) {
    if (conditions.empty()) throw Error(ErrorKind::InvalidRule, "a rule needs at least one condition");
    for (const auto& cond : conditions)
        if (!cond.holds(dataset, instance)) return false;
    return true;
}

double precision(const Rule& rule, int target_label) {
    if (rule.support() == 0) throw Error(ErrorKind::ZeroCoverage, "rule covers no train instances");
    return rule.precision_for(target_label);
}

bool RuleSet::contains(bool positive_side, const Rule& rule) const {
    const auto& side = positive_side ? positive : negative;
    return std::find(side.begin(), side.end(), rule) != side.end();
}

namespace {

struct TreeNode {
    int32_t condition = -1;  // split condition; -1 for leaves
    int32_t left = -1;       // condition false
    int32_t right = -1;      // condition true
};

// Grows one depth-capped tree on a bootstrap sample and appends every
// root-to-node condition path to `paths`.
class PathExtractor {
public:
    PathExtractor(const BinarizedView& view, const std::vector<size_t>& panel_rows,
                  const std::vector<int>& panel_labels, int max_depth, size_t min_node, Rng& rng,
                  std::vector<std::vector<uint32_t>>& paths)
        : view_(view), panel_rows_(panel_rows), labels_(panel_labels), max_depth_(max_depth),
          min_node_(min_node), rng_(rng), paths_(paths) {}

    void grow() {
        std::vector<uint32_t> bootstrap(panel_rows_.size());
        for (auto& idx : bootstrap)
            idx = static_cast<uint32_t>(rng_.uniform_int(panel_rows_.size()));
        std::vector<uint32_t> path;
        split_node(bootstrap, path, 0);
    }

private:
    static double gini(size_t pos, size_t total) {
        if (total == 0) return 0.0;
        const double p = static_cast<double>(pos) / static_cast<double>(total);
        return 2.0 * p * (1.0 - p);
    }

    void split_node(const std::vector<uint32_t>& rows, std::vector<uint32_t>& path, int depth) {
        if (depth >= max_depth_ || rows.size() < min_node_) return;
        size_t pos = 0;
        for (const uint32_t r : rows) pos += labels_[r];
        if (pos == 0 || pos == rows.size()) return;

        // random subset of ~sqrt(C) candidate conditions
        const size_t n_conditions = view_.catalog.size();
        size_t k = 1;
        while (k * k < n_conditions) ++k;
        std::set<uint32_t> tried;
        int32_t best_cond = -1;
        double best_gain = 1e-12;
        const double parent = gini(pos, rows.size());
        for (size_t draw = 0; draw < k; ++draw) {
            const auto c = static_cast<uint32_t>(rng_.uniform_int(n_conditions));
            if (!tried.insert(c).second) continue;
            size_t right = 0, right_pos = 0;
            for (const uint32_t r : rows) {
                if (view_.holds(c, panel_rows_[r])) {
                    ++right;
                    right_pos += labels_[r];
                }
            }
            if (right == 0 || right == rows.size()) continue;
            const size_t left = rows.size() - right;
            const size_t left_pos = pos - right_pos;
            const double wl = static_cast<double>(left) / static_cast<double>(rows.size());
            const double wr = 1.0 - wl;
            const double gain = parent - wl * gini(left_pos, left) - wr * gini(right_pos, right);
            if (gain > best_gain) {
                best_gain = gain;
                best_cond = static_cast<int32_t>(c);
            }
        }
        if (best_cond < 0) return;

        std::vector<uint32_t> left_rows, right_rows;
        for (const uint32_t r : rows)
            (view_.holds(static_cast<uint32_t>(best_cond), panel_rows_[r]) ? right_rows : left_rows).push_back(r);

        // true branch extends the path with the condition itself
        path.push_back(static_cast<uint32_t>(best_cond));
        paths_.push_back(path);
        split_node(right_rows, path, depth + 1);
        path.pop_back();

        // false branch uses the catalog complement when one exists
        const int32_t comp = view_.complement[static_cast<size_t>(best_cond)];
        if (comp >= 0) {
            path.push_back(static_cast<uint32_t>(comp));
            paths_.push_back(path);
            split_node(left_rows, path, depth + 1);
            path.pop_back();
        }
    }

    const BinarizedView& view_;
    const std::vector<size_t>& panel_rows_;
    const std::vector<int>& labels_;
    int max_depth_;
    size_t min_node_;
    Rng& rng_;
    std::vector<std::vector<uint32_t>>& paths_;
};

}  // namespace

CandidatePool mine_candidates(const BinarizedView& view, const std::vector<size_t>& panel_rows,
                              const std::vector<int>& panel_labels, const MiningConfig& config,
                              MiningStats* stats) {
    if (config.max_rule_len < 1) throw Error(ErrorKind::ConfigError, "max_rule_len must be >= 1");
    if (config.min_support <= 0.0 || config.min_support >= 1.0)
        throw Error(ErrorKind::ConfigError, "min_support must be in (0,1)");
    if (panel_rows.size() != panel_labels.size())
        throw Error(ErrorKind::ConfigError, "panel rows/labels size mismatch");
    if (view.catalog.empty()) throw Error(ErrorKind::EmptyPool, "no conditions to mine over");

    const auto min_support_rows =
        static_cast<size_t>(std::max(1.0, std::ceil(config.min_support * static_cast<double>(panel_rows.size()))));

    std::vector<std::vector<uint32_t>> paths;
    Rng rng(config.seed ^ 0x6d696e65ull);
    for (int t = 0; t < config.forest_size; ++t) {
        Rng tree_rng = rng.derive(static_cast<uint64_t>(t));
        PathExtractor tree(view, panel_rows, panel_labels, config.max_rule_len, 2 * min_support_rows, tree_rng,
                           paths);
        tree.grow();
    }

    if (stats) stats->paths_extracted = paths.size();

    // canonicalize + dedup, then length filter per established rule-mining
    // practice: conjunctions of 2..max_rule_len conditions
    std::set<std::vector<uint32_t>> unique;
    for (auto& path : paths) {
        std::sort(path.begin(), path.end());
        path.erase(std::unique(path.begin(), path.end()), path.end());
        if (path.size() < 2 || path.size() > static_cast<size_t>(config.max_rule_len)) continue;
        unique.insert(std::move(path));
    }
    if (stats) stats->unique_rules = unique.size();

    kernels::BitVec labels1(panel_rows.size());
    for (size_t r = 0; r < panel_labels.size(); ++r)
        if (panel_labels[r] == 1) labels1.set(r);

    std::vector<Rule> positive, negative;
    for (const auto& ids : unique) {
        Rule rule(ids, view, panel_rows);
        if (rule.support() < min_support_rows) continue;
        rule.score(labels1);
        if (rule.precision_for(1) > 0.5)
            positive.push_back(std::move(rule));
        else if (rule.precision_for(0) > 0.5)
            negative.push_back(std::move(rule));
        // exact ties carry no majority label and are excluded
    }

    auto keep_best = [&](std::vector<Rule>& side, int target) {
        std::sort(side.begin(), side.end(), [&](const Rule& a, const Rule& b) {
            if (a.precision_for(target) != b.precision_for(target))
                return a.precision_for(target) > b.precision_for(target);
            if (a.support() != b.support()) return a.support() > b.support();
            return a.condition_ids() < b.condition_ids();
        });
        if (side.size() > config.pool_cap_per_side)
            side.erase(side.begin() + static_cast<long>(config.pool_cap_per_side), side.end());
    };
    keep_best(positive, 1);
    keep_best(negative, 0);

    if (positive.empty() && negative.empty())
        throw Error(ErrorKind::EmptyPool, "no candidate satisfies the length/support constraints");

    if (stats) {
        stats->kept_positive = positive.size();
        stats->kept_negative = negative.size();
    }
    return CandidatePool{std::move(positive), std::move(negative)};
}

}  // namespace teamrules
