#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/kernels.hpp"

namespace teamrules {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind;
    std::vector<std::string> categories;  // populated for categorical features
};

enum class SplitTag { none, train, val, test };

const char* split_tag_name(SplitTag tag);
SplitTag split_tag_from_name(const std::string& name);

/// One decision instance. Numeric and categorical cells are stored in
/// schema order; categorical cells hold an index into the feature's
/// category list.
struct Instance {
    std::vector<double> numeric;
    std::vector<int32_t> categorical;
    int label = 0;  // always 0 or 1
};

class Dataset {
public:
    std::vector<FeatureSpec> schema;
    std::vector<Instance> instances;
    std::vector<SplitTag> split_tags;
    std::string label_name;
    std::vector<std::string> label_values;  // raw values mapped to 0/1
    uint64_t split_seed = 0;

    size_t size() const { return instances.size(); }

    std::vector<size_t> indices_of(SplitTag tag) const;

    // position of a feature in the numeric/categorical cell arrays
    struct FeatureRef {
        size_t schema_index;
        size_t cell_index;
        FeatureKind kind;
    };
    FeatureRef resolve(const std::string& feature_name) const;

    double numeric_value(size_t instance, const FeatureRef& ref) const {
        return instances[instance].numeric[ref.cell_index];
    }
    int32_t category_value(size_t instance, const FeatureRef& ref) const {
        return instances[instance].categorical[ref.cell_index];
    }

    std::string to_json() const;
    static Dataset from_json(const std::string& text);
};

enum class ConditionOp { less, greater_equal, equal, not_equal };

const char* condition_op_name(ConditionOp op);

/// One atomic test over a feature value. Rules are conjunctions of these.
struct Condition {
    std::string feature;
    ConditionOp op;
    double threshold = 0.0;      // numeric ops
    std::string category;        // categorical ops

    bool holds(const Dataset& dataset, size_t instance) const;
    std::string describe() const;
};

/// Boolean view of a dataset: one bit column per condition, rows ordered by
/// instance index. Thresholds come from the train split only.
struct BinarizedView {
    std::vector<Condition> catalog;
    std::vector<kernels::BitVec> columns;  // columns[c].test(i) == condition c holds on instance i
    std::vector<int32_t> complement;       // index of the negation of each condition, or -1
    std::vector<std::string> warnings;     // e.g. dropped constant features
    size_t instance_count = 0;

    bool holds(size_t condition, size_t instance) const { return columns[condition].test(instance); }

    std::string to_json() const;
};

struct LoadOptions {
    std::string label_column;
    std::map<std::string, FeatureKind> schema_overrides;
};

Dataset load_csv(const std::string& path, const LoadOptions& options);
Dataset load_csv_text(const std::string& text, const LoadOptions& options, const std::string& origin = "<memory>");

struct SplitCounts {
    size_t train = 0;
    size_t val = 0;
    size_t test = 0;
};

/// Seeded-shuffle contiguous assignment; same seed ⇒ identical membership.
void split(Dataset& dataset, const SplitCounts& counts, uint64_t seed);

BinarizedView binarize(const Dataset& dataset, int bins_per_numeric);

}  // namespace teamrules
