#include "teamrules/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include "teamrules/kernels.hpp"

namespace teamrules {

const char* variant_name(Variant variant) {
    switch (variant) {
        case Variant::TR: return "TR";
        case Variant::TR_no_ADB: return "TR_no_ADB";
        case Variant::TR_no_Cost: return "TR_no_Cost";
        case Variant::TR_no_ADB_Cost: return "TR_no_ADB_Cost";
        case Variant::task_only: return "task_only";
    }
    return "TR";
}

Variant variant_from_name(const std::string& name) {
    if (name == "TR") return Variant::TR;
    if (name == "TR_no_ADB") return Variant::TR_no_ADB;
    if (name == "TR_no_Cost") return Variant::TR_no_Cost;
    if (name == "TR_no_ADB_Cost") return Variant::TR_no_ADB_Cost;
    if (name == "task_only") return Variant::task_only;
    throw Error(ErrorKind::ConfigError, "unknown variant: " + name);
}

VariantPlan apply_variant(Variant variant, const CostSpec& context_costs, const DiscretionModel& learned) {
    VariantPlan plan{learned, context_costs, AdvisorMode::teamrules};
    switch (variant) {
        case Variant::TR:
            break;
        case Variant::TR_no_ADB:
            plan.discretion = DiscretionModel::fixed(1.0);
            break;
        case Variant::TR_no_Cost:
            plan.costs.alpha = 0.0;
            break;
        case Variant::TR_no_ADB_Cost:
            plan.discretion = DiscretionModel::fixed(1.0);
            plan.costs.alpha = 0.0;
            break;
        case Variant::task_only:
            plan.discretion = DiscretionModel::fixed(1.0);
            plan.costs.alpha = 0.0;
            plan.mode = AdvisorMode::task_only;
            break;
    }
    return plan;
}

namespace {

struct RowState {
    int advice = 0;  // the effective recommendation (h when withheld)
    bool offered = false;
    double model_confidence = 0.0;
    double p_accept = 0.0;
    double loss = 0.0;
    double adjusted = 0.0;

    bool operator==(const RowState&) const = default;
};

/// Memoized discretion lookups. Model confidences come from the finite set
/// of candidate precisions, so the table stays tiny.
class DiscretionMemo {
public:
    explicit DiscretionMemo(const DiscretionModel& model) : model_(&model) {}

    double probability(double model_confidence, double human_confidence) {
        if (model_->fixed_value()) return *model_->fixed_value();
        uint64_t mkey = 0, hkey = 0;
        std::memcpy(&mkey, &model_confidence, 8);
        std::memcpy(&hkey, &human_confidence, 8);
        const uint64_t key = mkey * 0x9e3779b97f4a7c15ull ^ hkey;
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double p = model_->probability(model_confidence, human_confidence);
        cache_.emplace(key, p);
        return p;
    }

private:
    const DiscretionModel* model_;
    std::unordered_map<uint64_t, double> cache_;
};

/// Working state of the annealer: member rules per side (pool indices in
/// insertion order) plus per-row advice and loss. Structural edits update
/// only the rows covered by the touched rules; the result must match a full
/// recomputation bit for bit (cross-checked in tests).
class AnnealState {
public:
    AnnealState(const TrainPanel& panel, const CandidatePool& pool, const DiscretionModel& discretion,
                const CostSpec& costs, AdvisorMode mode)
        : panel_(panel), pool_(pool), discretion_(discretion), memo_(discretion), costs_(costs), mode_(mode),
          rows_(panel.size()), loss_(panel.size(), 0.0), adjusted_(panel.size(), 0.0),
          visited_epoch_(panel.size(), 0) {
        for (size_t i = 0; i < panel_.size(); ++i) recompute_row(i);
    }

    const std::vector<uint32_t>& side(bool positive) const { return positive ? positive_ : negative_; }
    const std::vector<double>& adjusted_losses() const { return adjusted_; }
    const RowState& row(size_t i) const { return rows_[i]; }

    double total_loss() const { return kernels::sum(loss_); }

    struct Edit {
        std::string kind = "none";
        bool positive_side = true;
        std::optional<std::pair<size_t, uint32_t>> removed;  // position in side, pool index
        std::optional<uint32_t> added;
        std::vector<std::pair<size_t, RowState>> saved_rows;
    };

    void apply(Edit& edit) {
        auto& members = edit.positive_side ? positive_ : negative_;
        if (edit.removed) members.erase(members.begin() + static_cast<long>(edit.removed->first));
        if (edit.added) members.push_back(*edit.added);

        ++epoch_;
        auto touch = [&](uint32_t pool_index) {
            pool_rule(edit.positive_side, pool_index).cover_bits().for_each_set([&](size_t i) {
                if (visited_epoch_[i] == epoch_) return;
                visited_epoch_[i] = epoch_;
                edit.saved_rows.emplace_back(i, rows_[i]);
                recompute_row(i);
            });
        };
        if (edit.removed) touch(edit.removed->second);
        if (edit.added) touch(*edit.added);
    }

    void revert(const Edit& edit) {
        auto& members = edit.positive_side ? positive_ : negative_;
        if (edit.added) members.pop_back();
        if (edit.removed)
            members.insert(members.begin() + static_cast<long>(edit.removed->first), edit.removed->second);
        for (const auto& [i, state] : edit.saved_rows) {
            rows_[i] = state;
            loss_[i] = state.loss;
            adjusted_[i] = state.adjusted;
        }
    }

    void force_members(std::vector<uint32_t> positive, std::vector<uint32_t> negative) {
        positive_ = std::move(positive);
        negative_ = std::move(negative);
        for (size_t i = 0; i < panel_.size(); ++i) recompute_row(i);
    }

    const Rule& pool_rule(bool positive, uint32_t index) const {
        return positive ? pool_.positive_candidates[index] : pool_.negative_candidates[index];
    }

    bool covered_by_current(size_t i) const {
        for (const uint32_t m : positive_)
            if (pool_rule(true, m).cover_bits().test(i)) return true;
        for (const uint32_t m : negative_)
            if (pool_rule(false, m).cover_bits().test(i)) return true;
        return false;
    }

    RuleSet materialize() const {
        RuleSet set;
        for (const uint32_t m : positive_) set.positive.push_back(pool_rule(true, m));
        for (const uint32_t m : negative_) set.negative.push_back(pool_rule(false, m));
        return set;
    }

    /// Same members evaluated from scratch; cross-check support.
    std::vector<RowState> full_recompute() const {
        AnnealState fresh(panel_, pool_, discretion_, costs_, mode_);
        fresh.force_members(positive_, negative_);
        return fresh.rows_;
    }

    void recompute_row(size_t i) {
        RowState state;
        const int h = panel_.h[i];
        const int y = panel_.y[i];

        // best covering member per side; first maximum wins ties, matching the
        // inference-time scan order over the same member sequence
        auto best_covering = [&](bool positive) -> std::optional<double> {
            const auto& members = positive ? positive_ : negative_;
            double best = -1.0;
            for (const uint32_t m : members) {
                const auto& rule = pool_rule(positive, m);
                if (!rule.cover_bits().test(i)) continue;
                best = std::max(best, rule.precision_for(positive ? 1 : 0));
            }
            if (best < 0.0) return std::nullopt;
            return best;
        };

        if (mode_ == AdvisorMode::task_only) {
            const auto match = best_covering(true);
            state.advice = match ? 1 : 0;
            state.offered = true;
            state.model_confidence = match.value_or(0.0);
            state.p_accept = 1.0;
            state.loss = expected_team_loss(costs_, y, state.advice, h, 1.0);
            state.adjusted = state.loss;
        } else {
            state.advice = h;
            if (const auto pos = best_covering(true)) {
                const double p_accept = memo_.probability(*pos, panel_.human_confidence[i]);
                if (psi(costs_, panel_.outcome_p1[i], 1, h, p_accept)) {
                    state.advice = 1;
                    state.offered = true;
                    state.model_confidence = *pos;
                    state.p_accept = p_accept;
                }
            } else if (const auto neg = best_covering(false)) {
                const double p_accept = memo_.probability(*neg, panel_.human_confidence[i]);
                if (psi(costs_, panel_.outcome_p1[i], 0, h, p_accept)) {
                    state.advice = 0;
                    state.offered = true;
                    state.model_confidence = *neg;
                    state.p_accept = p_accept;
                }
            }
            state.loss = state.offered ? expected_team_loss(costs_, y, state.advice, h, state.p_accept)
                                       : decision_loss(costs_, y, h);
            state.adjusted = state.loss;
            // cost-effective contradictions do not count as needing correction
            if (state.offered && decision_loss(costs_, y, 1 - y) * state.p_accept > costs_.alpha)
                state.adjusted = std::max(0.0, state.loss - costs_.alpha);
        }
        rows_[i] = state;
        loss_[i] = state.loss;
        adjusted_[i] = state.adjusted;
    }

private:
    const TrainPanel& panel_;
    const CandidatePool& pool_;
    const DiscretionModel& discretion_;
    DiscretionMemo memo_;
    CostSpec costs_;
    AdvisorMode mode_;
    std::vector<uint32_t> positive_;
    std::vector<uint32_t> negative_;
    std::vector<RowState> rows_;
    std::vector<double> loss_;
    std::vector<double> adjusted_;
    std::vector<uint32_t> visited_epoch_;
    uint32_t epoch_ = 0;
};

/// Builds the structural edit for a sampled error instance. Returns kind
/// "none" when no eligible rule or candidate exists; the iteration still
/// counts.
AnnealState::Edit propose_edit(const AnnealState& state, const CandidatePool& pool, size_t epsilon,
                               const TrainPanel& panel, const CostSpec& costs, Rng& rng) {
    AnnealState::Edit edit;
    const auto& row = state.row(epsilon);
    const int y = panel.y[epsilon];
    const int h = panel.h[epsilon];

    const bool covered_wrong = state.covered_by_current(epsilon) && row.advice != y;
    const bool costly_contradiction = row.offered && row.advice != h && row.p_accept < costs.alpha;

    if (covered_wrong || costly_contradiction) {
        // cut or replace on the side advising against y
        const bool positive_side = (y == 0);
        edit.positive_side = positive_side;
        const auto& members = state.side(positive_side);
        std::vector<size_t> covering;
        for (size_t m = 0; m < members.size(); ++m)
            if (state.pool_rule(positive_side, members[m]).cover_bits().test(epsilon)) covering.push_back(m);
        if (covering.empty()) return edit;

        const bool do_replace = rng.bernoulli(0.5);
        const size_t victim = covering[rng.uniform_int(covering.size())];
        if (!do_replace) {
            edit.kind = "cut";
            edit.removed = std::make_pair(victim, members[victim]);
            return edit;
        }
        const auto& candidates = positive_side ? pool.positive_candidates : pool.negative_candidates;
        const int target = positive_side ? 1 : 0;
        int best = -1;
        for (size_t c = 0; c < candidates.size(); ++c) {
            if (!candidates[c].cover_bits().test(epsilon)) continue;
            if (std::find(members.begin(), members.end(), static_cast<uint32_t>(c)) != members.end()) continue;
            if (best < 0 || candidates[c].precision_for(target) >
                                candidates[static_cast<size_t>(best)].precision_for(target))
                best = static_cast<int>(c);
        }
        if (best < 0) return edit;
        edit.kind = "replace";
        edit.removed = std::make_pair(victim, members[victim]);
        edit.added = static_cast<uint32_t>(best);
        return edit;
    }

    // grow the side of the true label with a candidate covering the instance
    const bool positive_side = (y == 1);
    edit.positive_side = positive_side;
    const auto& candidates = positive_side ? pool.positive_candidates : pool.negative_candidates;
    const auto& members = state.side(positive_side);
    std::vector<uint32_t> eligible;
    for (size_t c = 0; c < candidates.size(); ++c) {
        if (!candidates[c].cover_bits().test(epsilon)) continue;
        if (std::find(members.begin(), members.end(), static_cast<uint32_t>(c)) != members.end()) continue;
        eligible.push_back(static_cast<uint32_t>(c));
    }
    if (eligible.empty()) return edit;
    edit.kind = "add";
    edit.added = eligible[rng.uniform_int(eligible.size())];
    return edit;
}

}  // namespace

std::optional<size_t> sample_error_instance(const std::vector<double>& adjusted_losses, Rng& rng) {
    const double total = kernels::sum(adjusted_losses);
    if (!(total > 0.0)) return std::nullopt;
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    for (size_t i = 0; i < adjusted_losses.size(); ++i) {
        cumulative += adjusted_losses[i];
        if (target < cumulative) return i;
    }
    // numerical tail: fall back to the last positive weight
    for (size_t i = adjusted_losses.size(); i > 0; --i)
        if (adjusted_losses[i - 1] > 0.0) return i - 1;
    return std::nullopt;
}

TtlBreakdown empirical_ttl(const RuleSet& rule_set, const TrainPanel& panel, const DiscretionModel& discretion,
                           const CostSpec& costs, AdvisorMode mode) {
    if (panel.size() == 0) throw Error(ErrorKind::ConfigError, "empty panel");
    DiscretionMemo memo(discretion);
    std::vector<double> losses(panel.size(), 0.0);
    for (size_t i = 0; i < panel.size(); ++i) {
        const int h = panel.h[i];
        const int y = panel.y[i];
        auto best_covering = [&](const std::vector<Rule>& side, int target) -> std::optional<double> {
            double best = -1.0;
            for (const auto& rule : side) {
                if (!rule.cover_bits().test(i)) continue;
                best = std::max(best, rule.precision_for(target));
            }
            if (best < 0.0) return std::nullopt;
            return best;
        };
        if (mode == AdvisorMode::task_only) {
            losses[i] = expected_team_loss(costs, y, best_covering(rule_set.positive, 1) ? 1 : 0, h, 1.0);
            continue;
        }
        int advice = h;
        double p_accept = 0.0;
        bool offered = false;
        if (const auto pos = best_covering(rule_set.positive, 1)) {
            const double p = memo.probability(*pos, panel.human_confidence[i]);
            if (psi(costs, panel.outcome_p1[i], 1, h, p)) {
                advice = 1;
                p_accept = p;
                offered = true;
            }
        } else if (const auto neg = best_covering(rule_set.negative, 0)) {
            const double p = memo.probability(*neg, panel.human_confidence[i]);
            if (psi(costs, panel.outcome_p1[i], 0, h, p)) {
                advice = 0;
                p_accept = p;
                offered = true;
            }
        }
        losses[i] = offered ? expected_team_loss(costs, y, advice, h, p_accept) : decision_loss(costs, y, h);
    }
    TtlBreakdown out;
    out.total = kernels::sum(losses);
    out.mean = out.total / static_cast<double>(panel.size());
    return out;
}

AnnealResult anneal(const TrainerConfig& config, const TrainPanel& panel, const CandidatePool& pool,
                    const DiscretionModel& discretion, const CostSpec& training_costs, AdvisorMode mode) {
    config.validate();
    if (panel.size() == 0) throw Error(ErrorKind::ConfigError, "empty panel");
    if (pool.positive_candidates.empty() && pool.negative_candidates.empty())
        throw Error(ErrorKind::EmptyPool, "cannot anneal over an empty candidate pool");

    AnnealState state(panel, pool, discretion, training_costs, mode);
    Rng rng(config.seed ^ 0x616e6e65616cull);

    AnnealResult result;
    result.ttl_empty_total = state.total_loss();

    double ttl_current = result.ttl_empty_total;
    double ttl_best = ttl_current;
    std::vector<uint32_t> best_positive;
    std::vector<uint32_t> best_negative;

    const double t_total = static_cast<double>(config.iterations);
    for (int t = 1; t <= config.iterations; ++t) {
        result.iterations_run = t;
        const auto epsilon = sample_error_instance(state.adjusted_losses(), rng);
        if (!epsilon) {
            result.stopped_early = true;
            result.trace.push_back({t, ttl_current, ttl_best, "stop", false});
            break;
        }

        auto edit = propose_edit(state, pool, *epsilon, panel, training_costs, rng);
        if (edit.kind == "none") {
            result.trace.push_back({t, ttl_current, ttl_best, "none", false});
            continue;
        }

        state.apply(edit);
        const double ttl_new = state.total_loss();

        if (config.cross_check) {
            const auto reference = state.full_recompute();
            for (size_t i = 0; i < panel.size(); ++i)
                if (!(reference[i] == state.row(i)))
                    throw std::logic_error("incremental state diverged from full recomputation");
        }

        if (ttl_new < ttl_best) {
            ttl_best = ttl_new;
            best_positive = state.side(true);
            best_negative = state.side(false);
        }

        const double temperature = std::pow(config.cooling, static_cast<double>(t) / t_total);
        const double ratio = std::exp((ttl_current - ttl_new) / temperature);
        const double u = rng.uniform();
        const bool revert = config.acceptance_rule == AcceptanceRule::printed ? (ratio <= u) : (u >= ratio);
        if (revert) {
            state.revert(edit);
        } else {
            ttl_current = ttl_new;
        }
        result.trace.push_back({t, ttl_current, ttl_best, edit.kind, !revert});
    }

    AnnealState best_state(panel, pool, discretion, training_costs, mode);
    best_state.force_members(best_positive, best_negative);
    result.best = best_state.materialize();
    result.ttl_best_total = ttl_best;
    result.ttl_best_mean = ttl_best / static_cast<double>(panel.size());
    return result;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "t,ttl_current,ttl_best,edit_kind,accepted\n";
    for (const auto& row : trace)
        out << row.t << ',' << row.ttl_current << ',' << row.ttl_best << ',' << row.edit_kind << ','
            << (row.accepted ? 1 : 0) << '\n';
    return out.str();
}

double negative_prediction_confidence(const RuleSet& rule_set, const TrainPanel& panel) {
    kernels::BitVec covered(panel.size());
    for (const auto& rule : rule_set.positive) covered.or_with(rule.cover_bits());
    kernels::BitVec negatives(panel.size());
    for (size_t i = 0; i < panel.size(); ++i)
        if (panel.y[i] == 0) negatives.set(i);
    const uint64_t uncovered = panel.size() - covered.count();
    if (uncovered == 0) return 0.0;
    return static_cast<double>(negatives.andnot_count(covered)) / static_cast<double>(uncovered);
}

}  // namespace teamrules
