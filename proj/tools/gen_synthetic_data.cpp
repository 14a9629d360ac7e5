// Generates the three bundled benchmark CSVs. The files are deterministic
// stand-ins: row counts match the published split tables, schemas carry the
// features the simulated-expert conditions reference, and the label signal
// is auto-calibrated so that the share of instances an outcome model is
// unsure about (difficulty d <= d_t) lands near a target fraction.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "teamrules/common.hpp"
#include "teamrules/data.hpp"
#include "teamrules/estimators.hpp"
#include "teamrules/humansim.hpp"

using namespace teamrules;

namespace {

struct Column {
    std::string name;
    std::vector<std::string> values;
    std::vector<double> latent;  // standardized contribution driver (numeric or encoded)
    double weight = 0.0;         // latent weight
};

std::string format_value(double v, int decimals) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(decimals);
    out << v;
    std::string s = out.str();
    if (decimals > 0) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    return s;
}

struct Table {
    std::vector<Column> columns;
    std::string label_name;
    std::vector<std::string> label_values;  // value for 0, value for 1
    size_t rows = 0;

    void add_numeric(const std::string& name, std::vector<double> values, double weight, int decimals) {
        Column col;
        col.name = name;
        double mean = 0.0;
        for (const double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (const double v : values) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(values.size()));
        for (const double v : values) {
            col.values.push_back(format_value(v, decimals));
            col.latent.push_back(sd > 0 ? (v - mean) / sd : 0.0);
        }
        col.weight = weight;
        columns.push_back(std::move(col));
    }

    void add_categorical(const std::string& name, std::vector<std::string> values,
                         const std::map<std::string, double>& effects, double weight) {
        Column col;
        col.name = name;
        for (const auto& v : values) {
            const auto it = effects.find(v);
            col.latent.push_back(it == effects.end() ? 0.0 : it->second);
            col.values.push_back(v);
        }
        col.weight = weight;
        columns.push_back(std::move(col));
    }

    std::vector<int> draw_labels(double scale, double intercept, uint64_t seed) const {
        Rng rng(seed);
        std::vector<int> labels(rows);
        for (size_t i = 0; i < rows; ++i) {
            double z = intercept;
            for (const auto& col : columns) z += scale * col.weight * col.latent[i];
            labels[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0;
        }
        return labels;
    }

    std::string to_csv(const std::vector<int>& labels) const {
        std::ostringstream out;
        for (const auto& col : columns) out << col.name << ',';
        out << label_name << '\n';
        for (size_t i = 0; i < rows; ++i) {
            for (const auto& col : columns) out << col.values[i] << ',';
            out << label_values[static_cast<size_t>(labels[i])] << '\n';
        }
        return out.str();
    }
};

std::vector<double> draw_uniform(Rng& rng, size_t n, double lo, double hi) {
    std::vector<double> out(n);
    for (auto& v : out) v = lo + (hi - lo) * rng.uniform();
    return out;
}

std::vector<double> draw_normal(Rng& rng, size_t n, double mean, double sd, double lo, double hi) {
    std::vector<double> out(n);
    for (auto& v : out) {
        // Box-Muller; one draw per value keeps the stream simple
        const double u1 = std::max(rng.uniform(), 1e-12);
        const double u2 = rng.uniform();
        v = std::clamp(mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2), lo, hi);
    }
    return out;
}

/// Fraction of instances with difficulty d <= d_t under the project's own
/// logistic difficulty model, fit on the configured train split.
double unsure_fraction(const std::string& csv, const std::string& label, const SplitCounts& counts,
                       uint64_t split_seed, double d_t) {
    LoadOptions options;
    options.label_column = label;
    Dataset dataset = load_csv_text(csv, options);
    split(dataset, counts, split_seed);
    const auto model = fit_logistic(dataset, dataset.indices_of(SplitTag::train));
    size_t unsure = 0;
    for (size_t i = 0; i < dataset.size(); ++i)
        unsure += difficulty_proxy(model.predict_proba(dataset, i)) <= d_t;
    return static_cast<double>(unsure) / static_cast<double>(dataset.size());
}

/// Bisection on the signal scale: stronger signal makes the model confident
/// (d large), shrinking the unsure fraction.
std::vector<int> calibrate(const Table& table, const SplitCounts& counts, uint64_t split_seed, double d_t,
                           double intercept, uint64_t label_seed, double target, const char* name) {
    double lo = 0.05, hi = 12.0;
    std::vector<int> labels;
    double achieved = 0.0;
    for (int iter = 0; iter < 24; ++iter) {
        const double scale = 0.5 * (lo + hi);
        labels = table.draw_labels(scale, intercept, label_seed);
        achieved = unsure_fraction(table.to_csv(labels), table.label_name, counts, split_seed, d_t);
        if (std::abs(achieved - target) < 0.01) break;
        if (achieved > target)
            lo = scale;  // too unsure -> strengthen signal
        else
            hi = scale;
    }
    size_t positives = 0;
    for (const int y : labels) positives += y;
    std::cout << name << ": unsure fraction " << achieved << " (target " << target << "), prevalence "
              << static_cast<double>(positives) / static_cast<double>(labels.size()) << "\n";
    return labels;
}

void write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    std::cout << "wrote " << path.string() << "\n";
}

Table make_heart_disease(size_t n) {
    Rng rng(0x48441ull);
    Table table;
    table.rows = n;
    table.label_name = "HeartDisease";
    table.label_values = {"0", "1"};

    table.add_numeric("Age", draw_normal(rng, n, 53, 9.5, 29, 77), 0.55, 0);
    std::vector<std::string> gender(n);
    for (auto& g : gender) g = rng.uniform() < 0.64 ? "M" : "F";
    table.add_categorical("gender", std::move(gender), {{"M", 0.5}, {"F", -0.5}}, 0.8);
    std::vector<std::string> chest_pain(n);
    for (auto& c : chest_pain) {
        const double u = rng.uniform();
        c = u < 0.48 ? "ASY" : u < 0.66 ? "NAP" : u < 0.86 ? "ATA" : "TA";
    }
    table.add_categorical("ChestPainType", std::move(chest_pain),
                          {{"ASY", 0.9}, {"NAP", -0.3}, {"ATA", -0.7}, {"TA", -0.1}}, 1.0);
    table.add_numeric("RestingBP", draw_normal(rng, n, 132, 17, 94, 200), 0.2, 0);
    table.add_numeric("Cholesterol", draw_normal(rng, n, 220, 55, 110, 410), 0.25, 0);
    std::vector<double> fasting(n);
    for (auto& f : fasting) f = rng.uniform() < 0.23 ? 1 : 0;
    table.add_numeric("FastingBS", std::move(fasting), 0.35, 0);
    table.add_numeric("MaxHR", draw_normal(rng, n, 137, 25, 60, 202), -0.6, 0);
    std::vector<std::string> angina(n);
    for (auto& a : angina) a = rng.uniform() < 0.40 ? "Y" : "N";
    table.add_categorical("ExerciseAngina", std::move(angina), {{"Y", 0.8}, {"N", -0.4}}, 0.9);
    table.add_numeric("Oldpeak", draw_normal(rng, n, 0.9, 1.05, 0, 6.2), 0.7, 1);
    std::vector<std::string> slope(n);
    for (auto& s : slope) {
        const double u = rng.uniform();
        s = u < 0.47 ? "Flat" : u < 0.92 ? "Up" : "Down";
    }
    table.add_categorical("STSlope", std::move(slope), {{"Flat", 0.6}, {"Up", -0.8}, {"Down", 0.4}}, 0.9);
    return table;
}

Table make_fico(size_t n) {
    Rng rng(0xF1C0ull);
    Table table;
    table.rows = n;
    table.label_name = "RiskPerformance";
    table.label_values = {"Bad", "Good"};

    table.add_numeric("ExternalRiskEstimate", draw_normal(rng, n, 71, 12, 33, 94), 0.9, 0);
    table.add_numeric("MSinceOldestTradeOpen", draw_normal(rng, n, 185, 95, 2, 450), 0.35, 0);
    table.add_numeric("AverageMInFile", draw_normal(rng, n, 75, 32, 4, 250), 0.4, 0);
    // skewed low so the low-trades group is the majority
    std::vector<double> satisfactory(n);
    for (auto& v : satisfactory) {
        const double u = rng.uniform();
        v = std::floor(std::clamp(u < 0.72 ? 2.0 + 21.0 * rng.uniform() : 24.0 + 55.0 * rng.uniform(), 0.0, 79.0));
    }
    table.add_numeric("NumSatisfactoryTrades", std::move(satisfactory), 0.55, 0);
    table.add_numeric("PercentTradesNeverDelq", draw_normal(rng, n, 94, 9, 20, 100), 0.5, 0);
    table.add_numeric("MaxDelqEver", draw_normal(rng, n, 6, 1.8, 1, 8), 0.3, 0);
    table.add_numeric("NumTotalTrades", draw_normal(rng, n, 21, 11, 1, 104), 0.15, 0);
    table.add_numeric("NumInqLast6M", draw_normal(rng, n, 1.4, 2.0, 0, 20), -0.35, 0);
    table.add_numeric("NetFractionRevolvingBurden", draw_normal(rng, n, 34, 29, 0, 230), -0.55, 0);
    table.add_numeric("PercentInstallTrades", draw_normal(rng, n, 33, 18, 0, 100), -0.2, 0);
    return table;
}

Table make_hr(size_t n) {
    Rng rng(0x4852ull);
    Table table;
    table.rows = n;
    table.label_name = "Attrition";
    table.label_values = {"No", "Yes"};

    // centered so roughly seven in ten employees are past the age condition
    table.add_numeric("Age", draw_normal(rng, n, 37.5, 9.0, 18, 60), -0.5, 0);
    std::vector<std::string> gender(n);
    for (auto& g : gender) g = rng.uniform() < 0.6 ? "M" : "F";
    table.add_categorical("gender", std::move(gender), {{"M", 0.1}, {"F", -0.1}}, 0.3);
    std::vector<std::string> dept(n);
    for (auto& d : dept) {
        const double u = rng.uniform();
        d = u < 0.65 ? "Research" : u < 0.95 ? "Sales" : "HumanResources";
    }
    table.add_categorical("Department", std::move(dept),
                          {{"Research", -0.2}, {"Sales", 0.5}, {"HumanResources", 0.3}}, 0.7);
    table.add_numeric("MonthlyIncome", draw_normal(rng, n, 6500, 4200, 1000, 20000), -0.8, 0);
    table.add_numeric("JobSatisfaction", draw_uniform(rng, n, 1, 4.999), -0.6, 0);
    std::vector<std::string> overtime(n);
    for (auto& o : overtime) o = rng.uniform() < 0.28 ? "Yes" : "No";
    table.add_categorical("OverTime", std::move(overtime), {{"Yes", 1.0}, {"No", -0.4}}, 1.0);
    table.add_numeric("YearsAtCompany", draw_normal(rng, n, 7, 6, 0, 40), -0.6, 0);
    table.add_numeric("DistanceFromHome", draw_normal(rng, n, 9, 8, 1, 29), 0.35, 0);
    table.add_numeric("WorkLifeBalance", draw_uniform(rng, n, 1, 4.999), -0.45, 0);
    table.add_numeric("NumCompaniesWorked", draw_normal(rng, n, 2.7, 2.5, 0, 9), 0.4, 0);
    table.add_numeric("PercentSalaryHike", draw_normal(rng, n, 15, 3.6, 11, 25), -0.15, 0);
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path out_dir = argc > 1 ? argv[1] : "data";

    {
        const auto table = make_heart_disease(719);
        const auto labels =
            calibrate(table, SplitCounts{505, 87, 127}, 13, 0.6, -0.15, 0x4844AAull, 0.375, "heart_disease");
        write(out_dir / "heart_disease.csv", table.to_csv(labels));
    }
    {
        const auto table = make_fico(8001);
        const auto labels =
            calibrate(table, SplitCounts{6120, 801, 1080}, 17, 0.3, 0.1, 0xF1C0AAull, 0.375, "fico");
        write(out_dir / "fico.csv", table.to_csv(labels));
    }
    {
        const auto table = make_hr(749);
        const auto labels = calibrate(table, SplitCounts{568, 38, 143}, 19, 0.8, -0.9, 0x4852AAull, 0.375, "hr");
        write(out_dir / "hr.csv", table.to_csv(labels));
    }
    return 0;
}
