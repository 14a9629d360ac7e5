#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/kernels.hpp"

namespace teamrules {

/// Conjunction of catalog conditions with its coverage bitset over the panel
/// rows it was mined/scored on. Immutable after construction.
class Rule {
public:
    /// condition_ids are indices into a BinarizedView catalog; they are
    /// canonicalized (sorted, deduplicated). Empty rules are unconstructible.
    Rule(std::vector<uint32_t> condition_ids, const BinarizedView& view, const std::vector<size_t>& panel_rows);

    /// Rebuilds a rule from serialized form with its train statistics frozen;
    /// carries no coverage bitset.
    static Rule from_frozen(std::vector<uint32_t> condition_ids, const BinarizedView& view, double precision1,
                            uint64_t support);

    const std::vector<uint32_t>& condition_ids() const { return condition_ids_; }
    size_t length() const { return condition_ids_.size(); }

    /// Coverage over the panel rows the rule was built on.
    const kernels::BitVec& cover_bits() const { return cover_; }
    uint64_t support() const { return support_; }

    /// Fraction of covered panel rows whose label is 1 (set by score()).
    double precision_for(int target_label) const { return target_label == 1 ? precision1_ : 1.0 - precision1_; }

    /// Semantic coverage of an arbitrary dataset instance.
    bool covers(const Dataset& dataset, size_t instance, const BinarizedView& view) const;

    void score(const kernels::BitVec& panel_labels1);

    bool operator==(const Rule& other) const { return condition_ids_ == other.condition_ids_; }

    std::string describe(const BinarizedView& view) const;

private:
    std::vector<uint32_t> condition_ids_;
    kernels::BitVec cover_;
    uint64_t support_ = 0;
    double precision1_ = 0.0;
};

/// Per-instance coverage check without a prebuilt Rule (the spec's cover op).
bool cover(const std::vector<Condition>& conditions, const Dataset& dataset, size_t instance);

/// Train precision of a rule for a target label; error on zero coverage.
double precision(const Rule& rule, int target_label);

struct RuleSet {
    std::vector<Rule> positive;
    std::vector<Rule> negative;

    bool contains(bool positive_side, const Rule& rule) const;
    size_t total_rules() const { return positive.size() + negative.size(); }
};

struct CandidatePool {
    std::vector<Rule> positive_candidates;
    std::vector<Rule> negative_candidates;
};

struct MiningConfig {
    int max_rule_len = 4;       // conditions per rule, inclusive
    double min_support = 0.05;  // fraction of panel rows
    int forest_size = 100;
    size_t pool_cap_per_side = 5000;
    uint64_t seed = 0;
};

struct MiningStats {
    size_t paths_extracted = 0;
    size_t unique_rules = 0;
    size_t kept_positive = 0;
    size_t kept_negative = 0;
};

/**
 * Candidate generation by random-forest path extraction.
 *
 * A forest of depth-capped trees is grown over the condition columns
 * (bootstrap rows, random condition subsets per split, Gini gain). Every
 * root-to-node path of length in [2, max_rule_len] becomes a candidate rule;
 * false branches use the condition's catalog complement. Candidates are
 * deduplicated, filtered by panel support, partitioned by strict majority
 * label of covered rows, and capped per side keeping the highest precision.
 * Deterministic for a given seed (trees are grown and merged in order).
 */
CandidatePool mine_candidates(const BinarizedView& view, const std::vector<size_t>& panel_rows,
                              const std::vector<int>& panel_labels, const MiningConfig& config,
                              MiningStats* stats = nullptr);

}  // namespace teamrules
