#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/humansim.hpp"

namespace teamrules {

/// Dataset features flattened into a dense numeric row: standardized numeric
/// columns followed by one-hot categorical columns. Fit on train rows only.
class FeatureEncoder {
public:
    FeatureEncoder() = default;
    FeatureEncoder(const Dataset& dataset, const std::vector<size_t>& fit_rows);

    size_t dimension() const { return dimension_; }
    std::vector<double> encode(const Dataset& dataset, size_t instance) const;

    std::string to_json() const;
    static FeatureEncoder from_json(const std::string& text);

private:
    friend class ProbabilisticClassifier;
    std::vector<double> means_;
    std::vector<double> scales_;
    std::vector<size_t> onehot_sizes_;  // per categorical feature
    size_t dimension_ = 0;
};

struct GbtNode {
    int32_t feature = -1;  // -1: leaf
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    double value = 0.0;  // leaf weight
};

struct GbtParams {
    int trees = 200;
    int depth = 3;
    double learning_rate = 0.1;
    double l2 = 1.0;
    double validation_fraction = 0.2;  // early-stopping holdout
    int patience = 20;
    uint64_t seed = 0;
};

struct LogisticParams {
    int max_iterations = 100;
    double tolerance = 1e-8;
    double l2 = 1e-4;
};

enum class ClassifierKind { linear_logistic, boosted_trees };

/**
 * Binary probabilistic classifier over encoded rows. Always emits
 * probabilities in [0,1] with p(1) + p(0) = 1 by construction.
 */
class ProbabilisticClassifier {
public:
    ClassifierKind kind() const { return kind_; }

    double predict_proba(const std::vector<double>& row) const;
    double predict_proba(const Dataset& dataset, size_t instance) const;

    const FeatureEncoder& encoder() const { return encoder_; }
    const std::string& metadata() const { return metadata_; }

    std::string to_json() const;
    static ProbabilisticClassifier from_json(const std::string& text);

    // fitting entry points on raw rows; labels in {0,1}
    static ProbabilisticClassifier fit_logistic_rows(const std::vector<std::vector<double>>& rows,
                                                     const std::vector<int>& labels, const LogisticParams& params);
    static ProbabilisticClassifier fit_gbt_rows(const std::vector<std::vector<double>>& rows,
                                                const std::vector<int>& labels, const GbtParams& params);

    friend ProbabilisticClassifier fit_logistic(const Dataset& dataset, const std::vector<size_t>& rows,
                                                const LogisticParams& params);
    friend ProbabilisticClassifier fit_outcome_model(const Dataset& dataset, const std::vector<size_t>& rows,
                                                     int cv_folds, const std::vector<GbtParams>& grid,
                                                     uint64_t seed);

private:
    ClassifierKind kind_ = ClassifierKind::linear_logistic;
    FeatureEncoder encoder_;
    bool has_encoder_ = false;
    // logistic
    std::vector<double> weights_;  // last element is the intercept
    // boosted trees
    std::vector<std::vector<GbtNode>> trees_;
    double base_score_ = 0.0;
    double learning_rate_ = 0.1;
    std::string metadata_;
};

/// Logistic regression via iteratively reweighted least squares.
ProbabilisticClassifier fit_logistic(const Dataset& dataset, const std::vector<size_t>& rows,
                                     const LogisticParams& params = {});

/// Boosted trees with grid-search cross-validation on log-loss; the grid and
/// the chosen point are recorded in the model metadata.
ProbabilisticClassifier fit_outcome_model(const Dataset& dataset, const std::vector<size_t>& rows, int cv_folds,
                                          const std::vector<GbtParams>& grid, uint64_t seed);

/// One contradiction event between the human and the bootstrap advisor.
struct InteractionRecord {
    size_t instance_id = 0;
    int human_decision = 0;
    double human_confidence = 0.0;
    int bootstrap_advice = 0;
    double bootstrap_confidence = 0.0;
    int accepted = 0;
};

std::string interactions_to_csv(const std::vector<InteractionRecord>& records);
std::vector<InteractionRecord> interactions_from_csv(const std::string& text);

/// Draws the human's independent behavior on `rows`, confronts it with the
/// bootstrap model, and records accept/reject at every contradiction.
std::vector<InteractionRecord> collect_interactions(const HumanSimulator& simulator,
                                                    const ProbabilisticClassifier& bootstrap,
                                                    const Dataset& dataset, const std::vector<size_t>& rows,
                                                    Rng& rng);

/// p(accept | model confidence, human confidence), either learned from
/// interaction records or pinned to a fixed value.
class DiscretionModel {
public:
    static DiscretionModel fixed(double value);
    static DiscretionModel fit(const std::vector<InteractionRecord>& records, const GbtParams& params,
                               uint64_t seed);

    double probability(double model_confidence, double human_confidence) const;
    std::optional<double> fixed_value() const { return fixed_value_; }
    std::optional<double> holdout_auc() const { return holdout_auc_; }

    std::string to_json() const;
    static DiscretionModel from_json(const std::string& text);

private:
    std::optional<double> fixed_value_;
    std::optional<double> holdout_auc_;
    std::shared_ptr<const ProbabilisticClassifier> classifier_;
};

/// Mann-Whitney AUC with tie handling; scores ranked against binary labels.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace teamrules
