#include <doctest.h>

#include <set>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"

using namespace teamrules;

namespace {

const std::string kToyCsv =
    "age,gender,score,target\n"
    "40,F,1.5,0\n"
    "60,M,2.5,1\n"
    "50,F,3.5,1\n"
    "30,M,0.5,0\n"
    "45,F,2.0,1\n"
    "55,M,1.0,0\n"
    "65,F,3.0,1\n"
    "35,M,0.0,0\n";

Dataset toy() {
    LoadOptions options;
    options.label_column = "target";
    return load_csv_text(kToyCsv, options);
}

}  // namespace

TEST_CASE("load_csv infers schema and binary labels") {
    const auto dataset = toy();
    CHECK(dataset.size() == 8);
    CHECK(dataset.schema.size() == 3);
    CHECK(dataset.schema[0].kind == FeatureKind::numeric);
    CHECK(dataset.schema[1].kind == FeatureKind::categorical);
    CHECK(dataset.schema[1].categories.size() == 2);
    CHECK(dataset.instances[0].label == 0);
    CHECK(dataset.instances[1].label == 1);
}

TEST_CASE("quoted fields and CRLF are handled") {
    LoadOptions options;
    options.label_column = "y";
    const auto dataset = load_csv_text("name,y\r\n\"a,b\",0\r\n\"say \"\"hi\"\"\",1\r\n", options);
    CHECK(dataset.size() == 2);
    CHECK(dataset.schema[0].categories[0] == "a,b");
    CHECK(dataset.schema[0].categories[1] == "say \"hi\"");
}

TEST_CASE("empty file raises MissingLabelColumn") {
    LoadOptions options;
    options.label_column = "target";
    CHECK_THROWS_WITH_AS(load_csv_text("", options), doctest::Contains("MissingLabelColumn"), Error);
    CHECK_THROWS_AS(load_csv_text("a,b\n1,0\n", options), Error);
}

TEST_CASE("three label values raise NonBinaryLabel with the row index") {
    LoadOptions options;
    options.label_column = "y";
    try {
        load_csv_text("x,y\n1,0\n2,1\n3,2\n", options);
        FAIL("expected NonBinaryLabel");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonBinaryLabel);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("unparseable and missing cells raise ParseError with location") {
    LoadOptions options;
    options.label_column = "y";
    options.schema_overrides["x"] = FeatureKind::numeric;
    try {
        load_csv_text("x,y\n1,0\nnope,1\n", options);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("'x'") != std::string::npos);
    }
    CHECK_THROWS_AS(load_csv_text("x,y\n,0\n", options), Error);
}

TEST_CASE("schema overrides force categorical") {
    LoadOptions options;
    options.label_column = "target";
    options.schema_overrides["score"] = FeatureKind::categorical;
    const auto dataset = load_csv_text(kToyCsv, options);
    CHECK(dataset.schema[2].kind == FeatureKind::categorical);
}

TEST_CASE("split assigns exact counts deterministically") {
    auto dataset = toy();
    split(dataset, SplitCounts{5, 2, 1}, 0);
    CHECK(dataset.indices_of(SplitTag::train).size() == 5);
    CHECK(dataset.indices_of(SplitTag::val).size() == 2);
    CHECK(dataset.indices_of(SplitTag::test).size() == 1);

    auto again = toy();
    split(again, SplitCounts{5, 2, 1}, 0);
    CHECK(again.split_tags == dataset.split_tags);
}

TEST_CASE("different seeds give different train membership") {
    auto a = toy();
    auto b = toy();
    split(a, SplitCounts{4, 2, 2}, 0);
    split(b, SplitCounts{4, 2, 2}, 1);
    const auto ta = a.indices_of(SplitTag::train);
    const auto tb = b.indices_of(SplitTag::train);
    CHECK(std::set<size_t>(ta.begin(), ta.end()) != std::set<size_t>(tb.begin(), tb.end()));
}

TEST_CASE("all-train split and leftover rows") {
    auto dataset = toy();
    split(dataset, SplitCounts{8, 0, 0}, 3);
    CHECK(dataset.indices_of(SplitTag::train).size() == 8);

    split(dataset, SplitCounts{6, 0, 0}, 3);
    CHECK(dataset.indices_of(SplitTag::none).size() == 2);
}

TEST_CASE("counts exceeding the dataset raise CountsExceedSize") {
    auto dataset = toy();
    CHECK_THROWS_WITH_AS(split(dataset, SplitCounts{9, 0, 0}, 0), doctest::Contains("CountsExceedSize"), Error);
}

TEST_CASE("quantile thresholds sit at the 20/40/60/80 percentiles") {
    std::string csv = "v,y\n";
    for (int i = 1; i <= 100; ++i) csv += std::to_string(i) + "," + std::to_string(i % 2) + "\n";
    LoadOptions options;
    options.label_column = "y";
    auto dataset = load_csv_text(csv, options);
    split(dataset, SplitCounts{100, 0, 0}, 0);
    const auto view = binarize(dataset, 5);

    std::vector<double> less_thresholds;
    size_t ge_count = 0;
    for (const auto& cond : view.catalog) {
        if (cond.op == ConditionOp::less) less_thresholds.push_back(cond.threshold);
        if (cond.op == ConditionOp::greater_equal) ++ge_count;
    }
    REQUIRE(less_thresholds.size() == 4);
    CHECK(ge_count == 4);  // mirrored
    CHECK(less_thresholds[0] == doctest::Approx(20.8));
    CHECK(less_thresholds[1] == doctest::Approx(40.6));
    CHECK(less_thresholds[2] == doctest::Approx(60.4));
    CHECK(less_thresholds[3] == doctest::Approx(80.2));

    // every condition has a complement and nonzero train support
    for (size_t c = 0; c < view.catalog.size(); ++c) {
        CHECK(view.complement[c] >= 0);
        CHECK(view.columns[c].count() > 0);
    }
}

TEST_CASE("two-category features emit one equality per category") {
    auto dataset = toy();
    split(dataset, SplitCounts{8, 0, 0}, 0);
    const auto view = binarize(dataset, 2);
    size_t gender_conditions = 0;
    for (const auto& cond : view.catalog)
        if (cond.feature == "gender") {
            ++gender_conditions;
            CHECK(cond.op == ConditionOp::equal);
        }
    CHECK(gender_conditions == 2);
}

TEST_CASE("constant features are dropped with a warning") {
    LoadOptions options;
    options.label_column = "y";
    auto dataset = load_csv_text("c,x,y\n5,1,0\n5,2,1\n5,3,0\n5,4,1\n", options);
    split(dataset, SplitCounts{4, 0, 0}, 0);
    const auto view = binarize(dataset, 2);
    REQUIRE(view.warnings.size() == 1);
    CHECK(view.warnings[0].find("c") != std::string::npos);
    for (const auto& cond : view.catalog) CHECK(cond.feature != "c");
}

TEST_CASE("binarize requires at least two bins") {
    auto dataset = toy();
    split(dataset, SplitCounts{8, 0, 0}, 0);
    CHECK_THROWS_AS(binarize(dataset, 1), Error);
}

TEST_CASE("condition matrix matches semantic evaluation") {
    auto dataset = toy();
    split(dataset, SplitCounts{6, 1, 1}, 2);
    const auto view = binarize(dataset, 3);
    for (size_t c = 0; c < view.catalog.size(); ++c)
        for (size_t i = 0; i < dataset.size(); ++i)
            CHECK(view.holds(c, i) == view.catalog[c].holds(dataset, i));
}

TEST_CASE("changing only test rows leaves the condition catalog intact") {
    std::string csv = "v,y\n";
    for (int i = 0; i < 40; ++i) csv += std::to_string(i) + "," + std::to_string(i % 2) + "\n";
    LoadOptions options;
    options.label_column = "y";
    auto dataset = load_csv_text(csv, options);
    split(dataset, SplitCounts{30, 0, 10}, 5);
    const auto view_before = binarize(dataset, 4);

    auto perturbed = dataset;
    for (size_t i = 0; i < perturbed.size(); ++i)
        if (perturbed.split_tags[i] == SplitTag::test) perturbed.instances[i].numeric[0] += 1000.0;
    const auto view_after = binarize(perturbed, 4);

    REQUIRE(view_before.catalog.size() == view_after.catalog.size());
    for (size_t c = 0; c < view_before.catalog.size(); ++c) {
        CHECK(view_before.catalog[c].feature == view_after.catalog[c].feature);
        CHECK(view_before.catalog[c].op == view_after.catalog[c].op);
        CHECK(view_before.catalog[c].threshold == view_after.catalog[c].threshold);
    }
}

TEST_CASE("dataset json round-trip preserves instances and split tags") {
    auto dataset = toy();
    split(dataset, SplitCounts{5, 2, 1}, 11);
    const auto restored = Dataset::from_json(dataset.to_json());
    CHECK(restored.size() == dataset.size());
    CHECK(restored.split_tags == dataset.split_tags);
    CHECK(restored.split_seed == dataset.split_seed);
    for (size_t i = 0; i < dataset.size(); ++i) {
        CHECK(restored.instances[i].numeric == dataset.instances[i].numeric);
        CHECK(restored.instances[i].categorical == dataset.instances[i].categorical);
        CHECK(restored.instances[i].label == dataset.instances[i].label);
    }
    // byte-identical re-serialization
    CHECK(restored.to_json() == dataset.to_json());
}
