#include "teamrules/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace teamrules {

namespace {

using nlohmann::json;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_loss(double p, int y) {
    const double eps = 1e-12;
    const double q = std::clamp(p, eps, 1.0 - eps);
    return y ? -std::log(q) : -std::log(1.0 - q);
}

void check_two_classes(const std::vector<int>& labels) {
    bool has0 = false, has1 = false;
    for (const int y : labels) (y ? has1 : has0) = true;
    if (!has0 || !has1)
        throw Error(ErrorKind::SingleClassTrainingSet, "training labels contain a single class");
}

// Cholesky solve of the symmetric positive-definite system A x = b.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (sum <= 0.0)
                    throw Error(ErrorKind::NonConvergence, "normal equations are not positive definite");
                a[i * n + j] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    for (size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
        b[i] = sum / a[i * n + i];
    }
    for (size_t ii = n; ii > 0; --ii) {
        const size_t i = ii - 1;
        double sum = b[i];
        for (size_t k = i + 1; k < n; ++k) sum -= a[k * n + i] * b[k];
        b[i] = sum / a[i * n + i];
    }
    return b;
}

}  // namespace

FeatureEncoder::FeatureEncoder(const Dataset& dataset, const std::vector<size_t>& fit_rows) {
    size_t numeric_count = 0;
    for (const auto& spec : dataset.schema) {
        if (spec.kind == FeatureKind::numeric) {
            ++numeric_count;
        } else {
            onehot_sizes_.push_back(spec.categories.size());
        }
    }
    means_.assign(numeric_count, 0.0);
    scales_.assign(numeric_count, 1.0);
    if (!fit_rows.empty()) {
        for (const size_t r : fit_rows) {
            const auto& vals = dataset.instances[r].numeric;
            for (size_t f = 0; f < numeric_count; ++f) means_[f] += vals[f];
        }
        for (auto& m : means_) m /= static_cast<double>(fit_rows.size());
        std::vector<double> var(numeric_count, 0.0);
        for (const size_t r : fit_rows) {
            const auto& vals = dataset.instances[r].numeric;
            for (size_t f = 0; f < numeric_count; ++f) {
                const double d = vals[f] - means_[f];
                var[f] += d * d;
            }
        }
        for (size_t f = 0; f < numeric_count; ++f) {
            const double sd = std::sqrt(var[f] / static_cast<double>(fit_rows.size()));
            scales_[f] = sd > 0.0 ? sd : 1.0;
        }
    }
    dimension_ = numeric_count;
    for (const size_t sz : onehot_sizes_) dimension_ += sz;
}

std::vector<double> FeatureEncoder::encode(const Dataset& dataset, size_t instance) const {
    std::vector<double> row;
    row.reserve(dimension_);
    const auto& inst = dataset.instances[instance];
    for (size_t f = 0; f < means_.size(); ++f) row.push_back((inst.numeric[f] - means_[f]) / scales_[f]);
    for (size_t c = 0; c < onehot_sizes_.size(); ++c) {
        const size_t start = row.size();
        row.resize(start + onehot_sizes_[c], 0.0);
        const int32_t cat = inst.categorical[c];
        if (cat >= 0 && static_cast<size_t>(cat) < onehot_sizes_[c]) row[start + static_cast<size_t>(cat)] = 1.0;
    }
    return row;
}

std::string FeatureEncoder::to_json() const {
    json doc;
    doc["means"] = means_;
    doc["scales"] = scales_;
    doc["onehot_sizes"] = onehot_sizes_;
    doc["dimension"] = dimension_;
    return doc.dump();
}

FeatureEncoder FeatureEncoder::from_json(const std::string& text) {
    const json doc = json::parse(text);
    FeatureEncoder enc;
    enc.means_ = doc.at("means").get<std::vector<double>>();
    enc.scales_ = doc.at("scales").get<std::vector<double>>();
    enc.onehot_sizes_ = doc.at("onehot_sizes").get<std::vector<size_t>>();
    enc.dimension_ = doc.at("dimension").get<size_t>();
    return enc;
}

ProbabilisticClassifier ProbabilisticClassifier::fit_logistic_rows(const std::vector<std::vector<double>>& rows,
                                                                   const std::vector<int>& labels,
                                                                   const LogisticParams& params) {
    if (rows.empty()) throw Error(ErrorKind::SingleClassTrainingSet, "empty training set");
    check_two_classes(labels);
    const size_t d = rows.front().size() + 1;  // + intercept
    std::vector<double> w(d, 0.0);

    auto margin = [&](const std::vector<double>& row) {
        double z = w[d - 1];
        for (size_t f = 0; f + 1 < d; ++f) z += w[f] * row[f];
        return z;
    };

    int iter = 0;
    for (; iter < params.max_iterations; ++iter) {
        // IRLS step: (X' W X + l2 I) dw = X'(y - p) - l2 w
        std::vector<double> hessian(d * d, 0.0);
        std::vector<double> grad(d, 0.0);
        for (size_t i = 0; i < rows.size(); ++i) {
            const double p = sigmoid(margin(rows[i]));
            const double r = static_cast<double>(labels[i]) - p;
            const double wgt = std::max(p * (1.0 - p), 1e-9);
            for (size_t f = 0; f < d; ++f) {
                const double xf = f + 1 < d ? rows[i][f] : 1.0;
                grad[f] += r * xf;
                for (size_t g = 0; g <= f; ++g) {
                    const double xg = g + 1 < d ? rows[i][g] : 1.0;
                    hessian[f * d + g] += wgt * xf * xg;
                }
            }
        }
        for (size_t f = 0; f < d; ++f) {
            hessian[f * d + f] += params.l2;
            grad[f] -= params.l2 * w[f];
            for (size_t g = f + 1; g < d; ++g) hessian[f * d + g] = hessian[g * d + f];
        }
        double grad_norm = 0.0;
        for (const double g : grad) grad_norm = std::max(grad_norm, std::abs(g));
        if (grad_norm < params.tolerance) break;
        const auto step = solve_spd(hessian, grad, d);
        for (size_t f = 0; f < d; ++f) w[f] += step[f];
    }
    if (iter == params.max_iterations)
        throw Error(ErrorKind::NonConvergence, "IRLS did not converge in " + std::to_string(iter) + " iterations");

    ProbabilisticClassifier model;
    model.kind_ = ClassifierKind::linear_logistic;
    model.weights_ = std::move(w);
    model.metadata_ = "{\"iterations\":" + std::to_string(iter) + "}";
    return model;
}

namespace {

// One regression tree on gradient/hessian targets, exact greedy splits.
struct TreeBuilder {
    const std::vector<std::vector<double>>& rows;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const GbtParams& params;
    std::vector<GbtNode> nodes;

    int32_t build(std::vector<uint32_t>& idx, int depth) {
        double g_sum = 0.0, h_sum = 0.0;
        for (const uint32_t i : idx) {
            g_sum += grad[i];
            h_sum += hess[i];
        }
        const auto make_leaf = [&] {
            GbtNode leaf;
            leaf.value = -g_sum / (h_sum + params.l2);
            nodes.push_back(leaf);
            return static_cast<int32_t>(nodes.size() - 1);
        };
        if (depth >= params.depth || idx.size() < 2) return make_leaf();

        const size_t d = rows.front().size();
        const double parent_score = g_sum * g_sum / (h_sum + params.l2);
        double best_gain = 1e-12;
        size_t best_feature = 0;
        double best_threshold = 0.0;

        std::vector<uint32_t> order(idx);
        for (size_t f = 0; f < d; ++f) {
            std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
                if (rows[a][f] != rows[b][f]) return rows[a][f] < rows[b][f];
                return a < b;
            });
            double gl = 0.0, hl = 0.0;
            for (size_t pos = 0; pos + 1 < order.size(); ++pos) {
                gl += grad[order[pos]];
                hl += hess[order[pos]];
                if (rows[order[pos]][f] == rows[order[pos + 1]][f]) continue;
                const double gr = g_sum - gl;
                const double hr = h_sum - hl;
                const double gain =
                    gl * gl / (hl + params.l2) + gr * gr / (hr + params.l2) - parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (rows[order[pos]][f] + rows[order[pos + 1]][f]);
                }
            }
        }
        bool found = best_gain > 1e-12;
        if (!found && depth + 1 < params.depth) {
            // No marginal gain anywhere but the node still mixes labels
            // (XOR-like structure): take one exploratory split at the median
            // of the first feature with distinct values so deeper levels can
            // resolve the interaction.
            bool mixed = false;
            for (const uint32_t i : idx)
                if ((grad[i] < 0.0) != (grad[idx.front()] < 0.0)) {
                    mixed = true;
                    break;
                }
            if (mixed) {
                for (size_t f = 0; f < d && !found; ++f) {
                    std::vector<double> values;
                    values.reserve(idx.size());
                    for (const uint32_t i : idx) values.push_back(rows[i][f]);
                    std::sort(values.begin(), values.end());
                    const double lo = values.front();
                    const double hi = values.back();
                    if (lo == hi) continue;
                    const double mid = values[values.size() / 2];
                    best_feature = f;
                    best_threshold = mid > lo ? mid : hi;
                    found = true;
                }
            }
        }
        if (!found) return make_leaf();

        std::vector<uint32_t> left, right;
        for (const uint32_t i : idx)
            (rows[i][best_feature] < best_threshold ? left : right).push_back(i);
        if (left.empty() || right.empty()) return make_leaf();

        GbtNode node;
        node.feature = static_cast<int32_t>(best_feature);
        node.threshold = best_threshold;
        nodes.push_back(node);
        const auto self = static_cast<int32_t>(nodes.size() - 1);
        const int32_t l = build(left, depth + 1);
        const int32_t r = build(right, depth + 1);
        nodes[self].left = l;
        nodes[self].right = r;
        return self;
    }
};

double eval_tree(const std::vector<GbtNode>& nodes, const std::vector<double>& row) {
    // the root is always node 0: build() pushes a node before recursing
    int32_t cur = 0;
    while (nodes[static_cast<size_t>(cur)].feature >= 0) {
        const auto& n = nodes[static_cast<size_t>(cur)];
        cur = row[static_cast<size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<size_t>(cur)].value;
}

}  // namespace

ProbabilisticClassifier ProbabilisticClassifier::fit_gbt_rows(const std::vector<std::vector<double>>& rows,
                                                              const std::vector<int>& labels,
                                                              const GbtParams& params) {
    if (rows.empty()) throw Error(ErrorKind::SingleClassTrainingSet, "empty training set");
    check_two_classes(labels);

    // deterministic holdout for early stopping
    std::vector<uint32_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(params.seed ^ 0x67627400ull);
    shuffle_inplace(order, rng);
    size_t val_count = params.validation_fraction > 0.0
                           ? static_cast<size_t>(params.validation_fraction * static_cast<double>(rows.size()))
                           : 0;
    // an early-stopping holdout needs both classes; otherwise train on everything
    if (val_count > 0) {
        bool has0 = false, has1 = false;
        for (size_t i = 0; i < rows.size() - val_count; ++i) (labels[order[i]] ? has1 : has0) = true;
        if (!has0 || !has1) val_count = 0;
    }
    std::vector<uint32_t> train_idx(order.begin(), order.end() - static_cast<long>(val_count));
    std::vector<uint32_t> val_idx(order.end() - static_cast<long>(val_count), order.end());

    double pos = 0.0;
    for (const uint32_t i : train_idx) pos += labels[i];
    const double prior = std::clamp(pos / static_cast<double>(train_idx.size()), 1e-6, 1.0 - 1e-6);

    ProbabilisticClassifier model;
    model.kind_ = ClassifierKind::boosted_trees;
    model.base_score_ = std::log(prior / (1.0 - prior));
    model.learning_rate_ = params.learning_rate;

    std::vector<double> margin(rows.size(), model.base_score_);
    std::vector<double> grad(rows.size()), hess(rows.size());
    double best_val_loss = std::numeric_limits<double>::infinity();
    size_t best_size = 0;
    int since_best = 0;

    for (int t = 0; t < params.trees; ++t) {
        for (const uint32_t i : train_idx) {
            const double p = sigmoid(margin[i]);
            grad[i] = p - static_cast<double>(labels[i]);
            hess[i] = std::max(p * (1.0 - p), 1e-9);
        }
        TreeBuilder builder{rows, grad, hess, params, {}};
        std::vector<uint32_t> root_idx(train_idx);
        builder.build(root_idx, 0);
        model.trees_.push_back(std::move(builder.nodes));
        const auto& tree = model.trees_.back();
        for (size_t i = 0; i < rows.size(); ++i) margin[i] += params.learning_rate * eval_tree(tree, rows[i]);

        if (!val_idx.empty()) {
            double val_loss = 0.0;
            for (const uint32_t i : val_idx) val_loss += log_loss(sigmoid(margin[i]), labels[i]);
            val_loss /= static_cast<double>(val_idx.size());
            if (val_loss < best_val_loss - 1e-12) {
                best_val_loss = val_loss;
                best_size = model.trees_.size();
                since_best = 0;
            } else if (++since_best >= params.patience) {
                break;
            }
        }
    }
    if (!val_idx.empty() && best_size > 0) model.trees_.resize(best_size);
    model.metadata_ = "{\"trees\":" + std::to_string(model.trees_.size()) + "}";
    return model;
}

double ProbabilisticClassifier::predict_proba(const std::vector<double>& row) const {
    if (kind_ == ClassifierKind::linear_logistic) {
        const size_t d = weights_.size();
        double z = weights_[d - 1];
        for (size_t f = 0; f + 1 < d; ++f) z += weights_[f] * row[f];
        return sigmoid(z);
    }
    double margin = base_score_;
    for (const auto& tree : trees_) margin += learning_rate_ * eval_tree(tree, row);
    return sigmoid(margin);
}

double ProbabilisticClassifier::predict_proba(const Dataset& dataset, size_t instance) const {
    if (!has_encoder_)
        throw Error(ErrorKind::ConfigError, "classifier was fit on raw rows, not dataset instances");
    return predict_proba(encoder_.encode(dataset, instance));
}

std::string ProbabilisticClassifier::to_json() const {
    json doc;
    doc["kind"] = kind_ == ClassifierKind::linear_logistic ? "linear_logistic" : "boosted_trees";
    doc["metadata"] = metadata_;
    doc["has_encoder"] = has_encoder_;
    if (has_encoder_) doc["encoder"] = json::parse(encoder_.to_json());
    if (kind_ == ClassifierKind::linear_logistic) {
        doc["weights"] = weights_;
    } else {
        doc["base_score"] = base_score_;
        doc["learning_rate"] = learning_rate_;
        json trees = json::array();
        for (const auto& tree : trees_) {
            json nodes = json::array();
            for (const auto& n : tree)
                nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"v", n.value}});
            trees.push_back(std::move(nodes));
        }
        doc["trees"] = std::move(trees);
    }
    return doc.dump();
}

ProbabilisticClassifier ProbabilisticClassifier::from_json(const std::string& text) {
    const json doc = json::parse(text);
    ProbabilisticClassifier model;
    model.kind_ = doc.at("kind").get<std::string>() == "linear_logistic" ? ClassifierKind::linear_logistic
                                                                         : ClassifierKind::boosted_trees;
    model.metadata_ = doc.at("metadata").get<std::string>();
    model.has_encoder_ = doc.at("has_encoder").get<bool>();
    if (model.has_encoder_) model.encoder_ = FeatureEncoder::from_json(doc.at("encoder").dump());
    if (model.kind_ == ClassifierKind::linear_logistic) {
        model.weights_ = doc.at("weights").get<std::vector<double>>();
    } else {
        model.base_score_ = doc.at("base_score").get<double>();
        model.learning_rate_ = doc.at("learning_rate").get<double>();
        for (const auto& tree : doc.at("trees")) {
            std::vector<GbtNode> nodes;
            for (const auto& n : tree) {
                GbtNode node;
                node.feature = n.at("f").get<int32_t>();
                node.threshold = n.at("t").get<double>();
                node.left = n.at("l").get<int32_t>();
                node.right = n.at("r").get<int32_t>();
                node.value = n.at("v").get<double>();
                nodes.push_back(node);
            }
            model.trees_.push_back(std::move(nodes));
        }
    }
    return model;
}

ProbabilisticClassifier fit_logistic(const Dataset& dataset, const std::vector<size_t>& rows,
                                     const LogisticParams& params) {
    FeatureEncoder encoder(dataset, rows);
    std::vector<std::vector<double>> encoded;
    std::vector<int> labels;
    encoded.reserve(rows.size());
    for (const size_t r : rows) {
        encoded.push_back(encoder.encode(dataset, r));
        labels.push_back(dataset.instances[r].label);
    }
    auto model = ProbabilisticClassifier::fit_logistic_rows(encoded, labels, params);
    model.encoder_ = std::move(encoder);
    model.has_encoder_ = true;
    return model;
}

ProbabilisticClassifier fit_outcome_model(const Dataset& dataset, const std::vector<size_t>& rows, int cv_folds,
                                          const std::vector<GbtParams>& grid, uint64_t seed) {
    if (cv_folds < 2) throw Error(ErrorKind::ConfigError, "cv_folds must be >= 2");
    if (grid.empty()) throw Error(ErrorKind::ConfigError, "hyperparameter grid is empty");
    FeatureEncoder encoder(dataset, rows);
    std::vector<std::vector<double>> encoded;
    std::vector<int> labels;
    for (const size_t r : rows) {
        encoded.push_back(encoder.encode(dataset, r));
        labels.push_back(dataset.instances[r].label);
    }
    check_two_classes(labels);

    std::vector<uint32_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed ^ 0x63760000ull);
    shuffle_inplace(order, rng);

    size_t best_point = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (size_t g = 0; g < grid.size(); ++g) {
        double total_loss = 0.0;
        size_t total_count = 0;
        for (int fold = 0; fold < cv_folds; ++fold) {
            std::vector<std::vector<double>> fold_rows;
            std::vector<int> fold_labels;
            std::vector<uint32_t> held;
            for (size_t i = 0; i < order.size(); ++i) {
                if (static_cast<int>(i % static_cast<size_t>(cv_folds)) == fold) {
                    held.push_back(order[i]);
                } else {
                    fold_rows.push_back(encoded[order[i]]);
                    fold_labels.push_back(labels[order[i]]);
                }
            }
            bool has0 = false, has1 = false;
            for (const int y : fold_labels) (y ? has1 : has0) = true;
            if (!has0 || !has1) continue;
            GbtParams params = grid[g];
            params.seed = seed + static_cast<uint64_t>(fold);
            params.validation_fraction = 0.0;  // CV measures generalization itself
            const auto model = ProbabilisticClassifier::fit_gbt_rows(fold_rows, fold_labels, params);
            for (const uint32_t i : held) {
                total_loss += log_loss(model.predict_proba(encoded[i]), labels[i]);
                ++total_count;
            }
        }
        const double mean_loss = total_count ? total_loss / static_cast<double>(total_count)
                                             : std::numeric_limits<double>::infinity();
        if (mean_loss < best_loss) {
            best_loss = mean_loss;
            best_point = g;
        }
    }

    GbtParams chosen = grid[best_point];
    chosen.seed = seed;
    auto model = ProbabilisticClassifier::fit_gbt_rows(encoded, labels, chosen);
    model.encoder_ = std::move(encoder);
    model.has_encoder_ = true;
    json meta;
    meta["grid_size"] = grid.size();
    meta["chosen"] = {{"trees", chosen.trees}, {"depth", chosen.depth}, {"learning_rate", chosen.learning_rate}};
    meta["cv_logloss"] = best_loss;
    meta["trees_fit"] = json::parse(model.metadata_).at("trees");
    model.metadata_ = meta.dump();
    return model;
}

std::string interactions_to_csv(const std::vector<InteractionRecord>& records) {
    std::ostringstream out;
    out << "instance_id,h,c_h,y_bootstrap,c_m_bootstrap,a\n";
    out.precision(17);
    for (const auto& rec : records) {
        out << rec.instance_id << ',' << rec.human_decision << ',' << rec.human_confidence << ','
            << rec.bootstrap_advice << ',' << rec.bootstrap_confidence << ',' << rec.accepted << '\n';
    }
    return out.str();
}

std::vector<InteractionRecord> interactions_from_csv(const std::string& text) {
    std::vector<InteractionRecord> records;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        InteractionRecord rec;
        std::istringstream fields(line);
        std::string cell;
        std::getline(fields, cell, ',');
        rec.instance_id = std::stoull(cell);
        std::getline(fields, cell, ',');
        rec.human_decision = std::stoi(cell);
        std::getline(fields, cell, ',');
        rec.human_confidence = std::stod(cell);
        std::getline(fields, cell, ',');
        rec.bootstrap_advice = std::stoi(cell);
        std::getline(fields, cell, ',');
        rec.bootstrap_confidence = std::stod(cell);
        std::getline(fields, cell, ',');
        rec.accepted = std::stoi(cell);
        records.push_back(rec);
    }
    return records;
}

std::vector<InteractionRecord> collect_interactions(const HumanSimulator& simulator,
                                                    const ProbabilisticClassifier& bootstrap,
                                                    const Dataset& dataset, const std::vector<size_t>& rows,
                                                    Rng& rng) {
    std::vector<InteractionRecord> records;
    for (const size_t i : rows) {
        const int h = simulator.draw_decision(i, rng);
        const double c_h = simulator.confidence(i);
        const double p1 = bootstrap.predict_proba(dataset, i);
        const int advice = p1 >= 0.5 ? 1 : 0;
        const double c_m = std::max(p1, 1.0 - p1);
        if (advice == h) continue;  // discretion events exist only at contradictions
        const auto direction = advice == 1 ? AdviceDirection::toward_positive : AdviceDirection::toward_negative;
        const int a = simulator.draw_acceptance(i, c_m, direction, rng);
        records.push_back(InteractionRecord{i, h, c_h, advice, c_m, a});
    }
    return records;
}

DiscretionModel DiscretionModel::fixed(double value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw Error(ErrorKind::ConfigError, "fixed discretion value must be in [0,1]");
    DiscretionModel model;
    model.fixed_value_ = value;
    return model;
}

DiscretionModel DiscretionModel::fit(const std::vector<InteractionRecord>& records, const GbtParams& params,
                                     uint64_t seed) {
    if (records.size() < 2)
        throw Error(ErrorKind::InsufficientRecords,
                    "need at least 2 interaction records, got " + std::to_string(records.size()));
    bool has0 = false, has1 = false;
    for (const auto& rec : records) (rec.accepted ? has1 : has0) = true;
    if (!has0 || !has1)
        throw Error(ErrorKind::SingleClassRecords, "interaction records contain a single accept/reject class");

    std::vector<uint32_t> order(records.size());
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed ^ 0x64697363ull);
    shuffle_inplace(order, rng);
    size_t holdout = records.size() / 5;

    auto features = [&](const InteractionRecord& rec) {
        return std::vector<double>{rec.bootstrap_confidence, rec.human_confidence};
    };

    std::vector<std::vector<double>> train_rows;
    std::vector<int> train_labels;
    std::vector<std::vector<double>> held_rows;
    std::vector<int> held_labels;
    for (size_t i = 0; i < order.size(); ++i) {
        const auto& rec = records[order[i]];
        if (i < holdout) {
            held_rows.push_back(features(rec));
            held_labels.push_back(rec.accepted);
        } else {
            train_rows.push_back(features(rec));
            train_labels.push_back(rec.accepted);
        }
    }
    {
        bool t0 = false, t1 = false;
        for (const int y : train_labels) (y ? t1 : t0) = true;
        if (!t0 || !t1) {
            // fall back to fitting on everything; AUC then unavailable
            train_rows.clear();
            train_labels.clear();
            for (const auto& rec : records) {
                train_rows.push_back(features(rec));
                train_labels.push_back(rec.accepted);
            }
            held_rows.clear();
            held_labels.clear();
        }
    }

    GbtParams gbt = params;
    gbt.seed = seed;
    DiscretionModel model;
    model.classifier_ = std::make_shared<ProbabilisticClassifier>(
        ProbabilisticClassifier::fit_gbt_rows(train_rows, train_labels, gbt));

    bool held_both = false, h0 = false, h1 = false;
    for (const int y : held_labels) (y ? h1 : h0) = true;
    held_both = h0 && h1;
    if (held_both) {
        std::vector<double> scores;
        scores.reserve(held_rows.size());
        for (const auto& row : held_rows) scores.push_back(model.classifier_->predict_proba(row));
        model.holdout_auc_ = auc_score(scores, held_labels);
    }
    return model;
}

double DiscretionModel::probability(double model_confidence, double human_confidence) const {
    if (fixed_value_) return *fixed_value_;
    return classifier_->predict_proba({model_confidence, human_confidence});
}

std::string DiscretionModel::to_json() const {
    json doc;
    if (fixed_value_) {
        doc["fixed_value"] = *fixed_value_;
    } else {
        doc["classifier"] = json::parse(classifier_->to_json());
    }
    if (holdout_auc_) doc["holdout_auc"] = *holdout_auc_;
    return doc.dump();
}

DiscretionModel DiscretionModel::from_json(const std::string& text) {
    const json doc = json::parse(text);
    DiscretionModel model;
    if (doc.contains("fixed_value")) {
        model.fixed_value_ = doc.at("fixed_value").get<double>();
    } else {
        model.classifier_ = std::make_shared<ProbabilisticClassifier>(
            ProbabilisticClassifier::from_json(doc.at("classifier").dump()));
    }
    if (doc.contains("holdout_auc")) model.holdout_auc_ = doc.at("holdout_auc").get<double>();
    return model;
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    size_t n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum_pos += mean_rank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    if (n_pos == 0 || n_neg == 0)
        throw Error(ErrorKind::SingleClassRecords, "AUC needs both classes");
    const double u = rank_sum_pos - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace teamrules
