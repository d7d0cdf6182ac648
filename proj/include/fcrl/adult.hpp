#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fcrl/dataset.hpp"
#include "fcrl/error.hpp"

namespace fcrl {

// UCI Adult ("census income") preprocessing. The raw files are the
// published comma-separated format: 14 attributes plus the income field.
// Pipeline: drop rows with missing ('?') values, one-hot encode the
// categorical attributes with categories taken from the train split,
// min-max scale continuous attributes with train statistics (test values
// clamped to [0,1]), y = income > 50K, c = sex (Male=0, Female=1).
//
// With the original UCI files this yields 30162 train and 15060 test rows.

namespace adult_detail {

constexpr int kNumFields = 15;
// 0 age, 1 workclass, 2 fnlwgt, 3 education, 4 education-num,
// 5 marital-status, 6 occupation, 7 relationship, 8 race, 9 sex,
// 10 capital-gain, 11 capital-loss, 12 hours-per-week,
// 13 native-country, 14 income
constexpr std::array<int, 6> kContinuous = {0, 2, 4, 10, 11, 12};
constexpr std::array<int, 7> kCategorical = {1, 3, 5, 6, 7, 8, 13};
constexpr std::array<const char*, 15> kFieldNames = {
    "age",          "workclass",    "fnlwgt",        "education", "education-num",
    "marital-status", "occupation", "relationship",  "race",      "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country", "income"};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct RawRow {
    std::vector<std::string> fields;  // trimmed, size kNumFields
    int y = 0;
    int c = 0;
};

// Reads one raw Adult file; rows with '?' or the wrong field count are
// dropped (counted). The test file's "|1x3 Cross validator" banner and
// trailing periods on income are handled.
inline std::vector<RawRow> read_raw(const std::string& path, std::size_t* dropped) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<RawRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '|') continue;
        auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != kNumFields) {
            ++*dropped;
            continue;
        }
        RawRow row;
        bool missing = false;
        for (auto& cell : cells) {
            std::string v = trim(cell);
            if (v == "?") missing = true;
            row.fields.push_back(std::move(v));
        }
        if (missing) {
            ++*dropped;
            continue;
        }
        std::string income = row.fields[14];
        if (!income.empty() && income.back() == '.') income.pop_back();
        if (income == ">50K")
            row.y = 1;
        else if (income == "<=50K")
            row.y = 0;
        else {
            ++*dropped;
            continue;
        }
        if (row.fields[9] == "Male")
            row.c = 0;
        else if (row.fields[9] == "Female")
            row.c = 1;
        else {
            ++*dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace adult_detail

// Builds train/test Datasets from the raw UCI Adult files. If more than
// `drop_threshold` of either file's rows fail to parse, ingestion aborts.
inline std::pair<Dataset, Dataset> preprocess_adult(const std::string& raw_train_path,
                                                    const std::string& raw_test_path,
                                                    double drop_threshold = 0.5) {
    using namespace adult_detail;
    std::size_t dropped_train = 0, dropped_test = 0;
    auto train_rows = read_raw(raw_train_path, &dropped_train);
    auto test_rows = read_raw(raw_test_path, &dropped_test);
    if (train_rows.empty() || test_rows.empty())
        throw DataError("adult: no usable rows");
    const double frac_train =
        static_cast<double>(dropped_train) / static_cast<double>(train_rows.size() + dropped_train);
    const double frac_test =
        static_cast<double>(dropped_test) / static_cast<double>(test_rows.size() + dropped_test);
    if (frac_train > drop_threshold || frac_test > drop_threshold)
        throw DataError("adult: dropped row fraction exceeds threshold");

    // categories from train only, sorted for determinism
    std::map<int, std::vector<std::string>> categories;
    for (int col : kCategorical) {
        std::set<std::string> values;
        for (const auto& row : train_rows) values.insert(row.fields[col]);
        categories[col].assign(values.begin(), values.end());
    }
    // min-max from train only
    std::map<int, std::pair<double, double>> ranges;
    for (int col : kContinuous) {
        double lo = 1e300, hi = -1e300;
        for (const auto& row : train_rows) {
            double v = detail::parse_double(row.fields[col], 0, col);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        ranges[col] = {lo, hi};
    }

    std::vector<std::string> feature_names;
    for (int col : kContinuous) feature_names.push_back(kFieldNames[col]);
    for (int col : kCategorical)
        for (const auto& v : categories[col])
            feature_names.push_back(std::string(kFieldNames[col]) + "=" + v);
    const std::size_t p = feature_names.size();

    auto build = [&](const std::vector<RawRow>& rows) {
        Dataset ds;
        ds.K = 2;
        ds.feature_names = feature_names;
        std::vector<double> xdata;
        for (const auto& row : rows) {
            std::vector<double> feats;
            feats.reserve(p);
            bool skip = false;
            for (int col : kContinuous) {
                double v = detail::parse_double(row.fields[col], 0, col);
                const auto [lo, hi] = ranges[col];
                double s = hi > lo ? (v - lo) / (hi - lo) : 0.0;
                feats.push_back(std::min(1.0, std::max(0.0, s)));
            }
            for (int col : kCategorical) {
                const auto& cats = categories[col];
                auto it = std::lower_bound(cats.begin(), cats.end(), row.fields[col]);
                if (it == cats.end() || *it != row.fields[col]) {
                    skip = true;  // category unseen in train
                    break;
                }
                for (const auto& cat : cats) feats.push_back(cat == row.fields[col] ? 1.0 : 0.0);
            }
            if (skip) continue;
            xdata.insert(xdata.end(), feats.begin(), feats.end());
            ds.y.push_back(row.y);
            ds.c.push_back(row.c);
        }
        ds.X = Matrix(ds.y.size(), p, std::move(xdata));
        ds.validate();
        return ds;
    };
    return {build(train_rows), build(test_rows)};
}

}  // namespace fcrl
