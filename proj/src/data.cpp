#include "teamrules/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace teamrules {

namespace {

using nlohmann::json;

// RFC-4180: quoted fields may contain commas, newlines, and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& origin) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_has_content = false;
    };

    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty())
                    throw Error(ErrorKind::ParseError, origin + ": stray quote mid-field");
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                end_field();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_has_content || !row.empty()) end_row();
                break;
            default:
                field += c;
                row_has_content = true;
                break;
        }
    }
    if (in_quotes) throw Error(ErrorKind::ParseError, origin + ": unterminated quoted field");
    if (row_has_content || !row.empty()) end_row();
    return rows;
}

bool parse_double(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

const char* split_tag_name(SplitTag tag) {
    switch (tag) {
        case SplitTag::none: return "none";
        case SplitTag::train: return "train";
        case SplitTag::val: return "val";
        case SplitTag::test: return "test";
    }
    return "none";
}

SplitTag split_tag_from_name(const std::string& name) {
    if (name == "train") return SplitTag::train;
    if (name == "val") return SplitTag::val;
    if (name == "test") return SplitTag::test;
    if (name == "none") return SplitTag::none;
    throw Error(ErrorKind::ParseError, "unknown split tag: " + name);
}

const char* condition_op_name(ConditionOp op) {
    switch (op) {
        case ConditionOp::less: return "<";
        case ConditionOp::greater_equal: return ">=";
        case ConditionOp::equal: return "==";
        case ConditionOp::not_equal: return "!=";
    }
    return "?";
}

std::vector<size_t> Dataset::indices_of(SplitTag tag) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < split_tags.size(); ++i)
        if (split_tags[i] == tag) out.push_back(i);
    return out;
}

Dataset::FeatureRef Dataset::resolve(const std::string& feature_name) const {
    size_t numeric_pos = 0;
    size_t categorical_pos = 0;
    for (size_t s = 0; s < schema.size(); ++s) {
        const bool is_numeric = schema[s].kind == FeatureKind::numeric;
        if (schema[s].name == feature_name)
            return FeatureRef{s, is_numeric ? numeric_pos : categorical_pos, schema[s].kind};
        (is_numeric ? numeric_pos : categorical_pos)++;
    }
    throw Error(ErrorKind::SchemaMismatch, "no such feature: " + feature_name);
}

bool Condition::holds(const Dataset& dataset, size_t instance) const {
    const auto ref = dataset.resolve(feature);
    if (op == ConditionOp::less || op == ConditionOp::greater_equal) {
        if (ref.kind != FeatureKind::numeric)
            throw Error(ErrorKind::SchemaMismatch, feature + " is not numeric");
        const double v = dataset.numeric_value(instance, ref);
        return op == ConditionOp::less ? v < threshold : v >= threshold;
    }
    if (ref.kind != FeatureKind::categorical)
        throw Error(ErrorKind::SchemaMismatch, feature + " is not categorical");
    const auto& cats = dataset.schema[ref.schema_index].categories;
    const auto it = std::find(cats.begin(), cats.end(), category);
    const int32_t want = it == cats.end() ? -1 : static_cast<int32_t>(it - cats.begin());
    const bool eq = dataset.category_value(instance, ref) == want;
    return op == ConditionOp::equal ? eq : !eq;
}

std::string Condition::describe() const {
    if (op == ConditionOp::less || op == ConditionOp::greater_equal)
        return feature + " " + condition_op_name(op) + " " + format_double(threshold);
    return feature + " " + condition_op_name(op) + " " + category;
}

Dataset load_csv(const std::string& path, const LoadOptions& options) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error(ErrorKind::IoError, "cannot open " + path);
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return load_csv_text(buffer.str(), options, path);
}

Dataset load_csv_text(const std::string& text, const LoadOptions& options, const std::string& origin) {
    const auto rows = parse_csv(text, origin);
    if (rows.empty())
        throw Error(ErrorKind::MissingLabelColumn, origin + ": no header row");
    const auto& header = rows.front();

    size_t label_col = header.size();
    for (size_t c = 0; c < header.size(); ++c)
        if (header[c] == options.label_column) label_col = c;
    if (label_col == header.size())
        throw Error(ErrorKind::MissingLabelColumn, origin + ": no column named '" + options.label_column + "'");

    const size_t n_rows = rows.size() - 1;
    for (size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != header.size())
            throw Error(ErrorKind::ParseError,
                        origin + ": row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                            " fields, expected " + std::to_string(header.size()));

    // Infer per-column kind: numeric iff every cell parses as a finite double,
    // unless overridden.
    Dataset dataset;
    dataset.label_name = options.label_column;
    std::vector<size_t> feature_cols;
    for (size_t c = 0; c < header.size(); ++c) {
        if (c == label_col) continue;
        feature_cols.push_back(c);
        FeatureSpec spec;
        spec.name = header[c];
        const auto override_it = options.schema_overrides.find(spec.name);
        if (override_it != options.schema_overrides.end()) {
            spec.kind = override_it->second;
        } else {
            spec.kind = FeatureKind::numeric;
            double ignored;
            for (size_t r = 1; r < rows.size(); ++r) {
                if (!parse_double(rows[r][c], ignored)) {
                    spec.kind = FeatureKind::categorical;
                    break;
                }
            }
        }
        dataset.schema.push_back(std::move(spec));
    }

    // Label mapping: {0,1} directly, otherwise the two distinct values sorted
    // lexicographically map to 0 and 1.
    std::set<std::string> label_set;
    for (size_t r = 1; r < rows.size(); ++r) {
        label_set.insert(rows[r][label_col]);
        if (label_set.size() > 2)
            throw Error(ErrorKind::NonBinaryLabel,
                        origin + ": row " + std::to_string(r) + " introduces a third label value '" +
                            rows[r][label_col] + "'");
    }
    if (label_set.empty()) throw Error(ErrorKind::NonBinaryLabel, origin + ": no data rows");
    dataset.label_values.assign(label_set.begin(), label_set.end());

    dataset.instances.reserve(n_rows);
    for (size_t r = 1; r < rows.size(); ++r) {
        Instance inst;
        for (size_t f = 0; f < feature_cols.size(); ++f) {
            const size_t c = feature_cols[f];
            const std::string& cell = rows[r][c];
            if (cell.empty())
                throw Error(ErrorKind::ParseError,
                            origin + ": row " + std::to_string(r) + " column '" + header[c] + "' is empty");
            if (dataset.schema[f].kind == FeatureKind::numeric) {
                double v;
                if (!parse_double(cell, v))
                    throw Error(ErrorKind::ParseError, origin + ": row " + std::to_string(r) + " column '" +
                                                           header[c] + "' is not numeric: '" + cell + "'");
                inst.numeric.push_back(v);
            } else {
                auto& cats = dataset.schema[f].categories;
                auto it = std::find(cats.begin(), cats.end(), cell);
                if (it == cats.end()) {
                    cats.push_back(cell);
                    it = std::prev(cats.end());
                }
                inst.categorical.push_back(static_cast<int32_t>(it - cats.begin()));
            }
        }
        inst.label = rows[r][label_col] == dataset.label_values.back() && dataset.label_values.size() == 2 ? 1 : 0;
        if (dataset.label_values.size() == 1) inst.label = rows[r][label_col] == "1" ? 1 : 0;
        dataset.instances.push_back(std::move(inst));
    }
    dataset.split_tags.assign(dataset.instances.size(), SplitTag::none);
    return dataset;
}

void split(Dataset& dataset, const SplitCounts& counts, uint64_t seed) {
    const size_t total = counts.train + counts.val + counts.test;
    if (total > dataset.size())
        throw Error(ErrorKind::CountsExceedSize, "requested " + std::to_string(total) + " of " +
                                                     std::to_string(dataset.size()) + " instances");
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle_inplace(order, rng);

    dataset.split_tags.assign(dataset.size(), SplitTag::none);
    size_t cursor = 0;
    for (size_t i = 0; i < counts.train; ++i) dataset.split_tags[order[cursor++]] = SplitTag::train;
    for (size_t i = 0; i < counts.val; ++i) dataset.split_tags[order[cursor++]] = SplitTag::val;
    for (size_t i = 0; i < counts.test; ++i) dataset.split_tags[order[cursor++]] = SplitTag::test;
    dataset.split_seed = seed;
}

BinarizedView binarize(const Dataset& dataset, int bins_per_numeric) {
    if (bins_per_numeric < 2)
        throw Error(ErrorKind::ConfigError, "bins_per_numeric must be >= 2");
    const auto train = dataset.indices_of(SplitTag::train);
    if (train.empty()) throw Error(ErrorKind::ConfigError, "binarize requires a train split");

    BinarizedView view;
    view.instance_count = dataset.size();

    auto add_pair = [&](const Condition& cond, const Condition& mirror) {
        // Materialize both columns, keep only those with nonzero and
        // non-universal train support; wire complements where both survive.
        kernels::BitVec col(dataset.size()), mcol(dataset.size());
        for (size_t i = 0; i < dataset.size(); ++i) {
            if (cond.holds(dataset, i)) col.set(i);
            if (mirror.holds(dataset, i)) mcol.set(i);
        }
        size_t support = 0, msupport = 0;
        for (const size_t i : train) {
            support += col.test(i);
            msupport += mcol.test(i);
        }
        const bool keep = support > 0 && support < train.size();
        const bool keep_mirror = msupport > 0 && msupport < train.size();
        const int32_t idx = keep ? static_cast<int32_t>(view.catalog.size()) : -1;
        if (keep) {
            view.catalog.push_back(cond);
            view.columns.push_back(std::move(col));
            view.complement.push_back(-1);
        }
        const int32_t midx = keep_mirror ? static_cast<int32_t>(view.catalog.size()) : -1;
        if (keep_mirror) {
            view.catalog.push_back(mirror);
            view.columns.push_back(std::move(mcol));
            view.complement.push_back(idx);
        }
        if (keep && keep_mirror) view.complement[static_cast<size_t>(idx)] = midx;
    };

    for (const auto& spec : dataset.schema) {
        const auto ref = dataset.resolve(spec.name);
        if (spec.kind == FeatureKind::numeric) {
            std::vector<double> values;
            values.reserve(train.size());
            for (const size_t i : train) values.push_back(dataset.numeric_value(i, ref));
            std::sort(values.begin(), values.end());
            if (values.front() == values.back()) {
                view.warnings.push_back("constant feature dropped: " + spec.name);
                continue;
            }
            std::vector<double> thresholds;
            for (int b = 1; b < bins_per_numeric; ++b) {
                // type-7 quantile (linear interpolation between order statistics)
                const double q = static_cast<double>(b) / bins_per_numeric;
                const double pos = q * static_cast<double>(values.size() - 1);
                const size_t lo = static_cast<size_t>(pos);
                const double frac = pos - static_cast<double>(lo);
                const double t = lo + 1 < values.size() ? values[lo] + frac * (values[lo + 1] - values[lo])
                                                        : values[lo];
                if (thresholds.empty() || t != thresholds.back()) thresholds.push_back(t);
            }
            for (const double t : thresholds) {
                Condition lt{spec.name, ConditionOp::less, t, {}};
                Condition ge{spec.name, ConditionOp::greater_equal, t, {}};
                add_pair(lt, ge);
            }
        } else {
            if (spec.categories.size() < 2) {
                view.warnings.push_back("constant feature dropped: " + spec.name);
                continue;
            }
            // == per category; != only when it is not just another category's ==
            for (const auto& cat : spec.categories) {
                Condition eq{spec.name, ConditionOp::equal, 0.0, cat};
                if (spec.categories.size() == 2) {
                    const auto& other = spec.categories[spec.categories[0] == cat ? 1 : 0];
                    Condition mirror{spec.name, ConditionOp::equal, 0.0, other};
                    if (cat == spec.categories[0]) add_pair(eq, mirror);
                    // second category's pair already emitted as the mirror
                } else {
                    Condition ne{spec.name, ConditionOp::not_equal, 0.0, cat};
                    add_pair(eq, ne);
                }
            }
        }
    }
    return view;
}

std::string Dataset::to_json() const {
    json doc;
    doc["label"] = label_name;
    doc["label_values"] = label_values;
    doc["seed"] = split_seed;
    json schema_json = json::array();
    for (const auto& spec : schema) {
        json s;
        s["name"] = spec.name;
        s["kind"] = spec.kind == FeatureKind::numeric ? "numeric" : "categorical";
        if (spec.kind == FeatureKind::categorical) s["categories"] = spec.categories;
        schema_json.push_back(std::move(s));
    }
    doc["schema"] = std::move(schema_json);
    json rows = json::array();
    for (const auto& inst : instances) {
        json row;
        row["numeric"] = inst.numeric;
        row["categorical"] = inst.categorical;
        row["label"] = inst.label;
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    json tags = json::array();
    for (const auto tag : split_tags) tags.push_back(split_tag_name(tag));
    doc["split_tags"] = std::move(tags);
    return doc.dump(2);
}

Dataset Dataset::from_json(const std::string& text) {
    const json doc = json::parse(text);
    Dataset dataset;
    dataset.label_name = doc.at("label").get<std::string>();
    dataset.label_values = doc.at("label_values").get<std::vector<std::string>>();
    dataset.split_seed = doc.at("seed").get<uint64_t>();
    for (const auto& s : doc.at("schema")) {
        FeatureSpec spec;
        spec.name = s.at("name").get<std::string>();
        spec.kind = s.at("kind").get<std::string>() == "numeric" ? FeatureKind::numeric : FeatureKind::categorical;
        if (spec.kind == FeatureKind::categorical)
            spec.categories = s.at("categories").get<std::vector<std::string>>();
        dataset.schema.push_back(std::move(spec));
    }
    for (const auto& row : doc.at("rows")) {
        Instance inst;
        inst.numeric = row.at("numeric").get<std::vector<double>>();
        inst.categorical = row.at("categorical").get<std::vector<int32_t>>();
        inst.label = row.at("label").get<int>();
        dataset.instances.push_back(std::move(inst));
    }
    for (const auto& tag : doc.at("split_tags"))
        dataset.split_tags.push_back(split_tag_from_name(tag.get<std::string>()));
    return dataset;
}

std::string BinarizedView::to_json() const {
    json doc;
    json conds = json::array();
    for (size_t c = 0; c < catalog.size(); ++c) {
        json item;
        item["feature"] = catalog[c].feature;
        item["op"] = condition_op_name(catalog[c].op);
        if (catalog[c].op == ConditionOp::less || catalog[c].op == ConditionOp::greater_equal)
            item["threshold"] = catalog[c].threshold;
        else
            item["category"] = catalog[c].category;
        item["complement"] = complement[c];
        conds.push_back(std::move(item));
    }
    doc["conditions"] = std::move(conds);
    doc["warnings"] = warnings;
    doc["instances"] = instance_count;
    return doc.dump(2);
}

}  // namespace teamrules
