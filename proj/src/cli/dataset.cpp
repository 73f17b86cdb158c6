#include "wgf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "wgf/errors.hpp"

namespace wgf {

namespace {

struct RawRow {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;  // 1-based index
};

LabeledDataset assemble(std::vector<RawRow>& rows) {
    if (rows.empty()) throw MalformedLine("no data rows");
    std::size_t max_index = 0;
    for (const auto& r : rows)
        for (const auto& [idx, _] : r.entries) max_index = std::max(max_index, idx);

    std::set<double> distinct;
    for (const auto& r : rows) distinct.insert(r.label);
    if (distinct.size() > 2)
        throw NonBinaryLabels("dataset has " + std::to_string(distinct.size()) +
                              " distinct labels, expected 2");

    // Map to {-1,+1}: pass-through, or smaller-of-pair -> -1 for {0,1}/{1,2}
    // style encodings.
    auto map_label = [&](double v) -> int {
        if (distinct.size() == 1) {
            if (v == -1.0 || v == 1.0) return static_cast<int>(v);
            throw NonBinaryLabels("single label value not in {-1,+1}");
        }
        const double lo = *distinct.begin();
        const double hi = *distinct.rbegin();
        if (lo == -1.0 && hi == 1.0) return v < 0 ? -1 : 1;
        return v == lo ? -1 : 1;
    };

    LabeledDataset ds;
    ds.features = Mat(rows.size(), max_index + 1);
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.labels[i] = map_label(rows[i].label);
        for (const auto& [idx, val] : rows[i].entries) ds.features(i, idx - 1) = val;
        ds.features(i, max_index) = 1.0;  // bias
    }
    return ds;
}

std::vector<RawRow> parse_lines(std::istream& in) {
    std::vector<RawRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments and whitespace-only lines
        if (const auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;

        RawRow row;
        try {
            std::size_t used = 0;
            row.label = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw MalformedLine("line " + std::to_string(lineno) + ": bad label '" + tok +
                                "'");
        }
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw MalformedLine("line " + std::to_string(lineno) +
                                    ": expected index:value, got '" + tok + "'");
            try {
                std::size_t used = 0;
                const long idx = std::stol(tok.substr(0, colon), &used);
                if (used != colon || idx < 1) throw std::invalid_argument(tok);
                used = 0;
                const std::string vs = tok.substr(colon + 1);
                const double val = std::stod(vs, &used);
                if (used != vs.size()) throw std::invalid_argument(tok);
                row.entries.emplace_back(static_cast<std::size_t>(idx), val);
            } catch (const std::exception&) {
                throw MalformedLine("line " + std::to_string(lineno) +
                                    ": bad index:value pair '" + tok + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

LabeledDataset parse_libsvm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    auto rows = parse_lines(in);
    return assemble(rows);
}

LabeledDataset parse_libsvm_text(const std::string& text) {
    std::istringstream in(text);
    auto rows = parse_lines(in);
    return assemble(rows);
}

Standardizer fit_standardizer(const LabeledDataset& ds,
                              const std::vector<std::size_t>& train_index) {
    if (train_index.empty()) throw InvalidArgument("fit_standardizer: empty train split");
    const std::size_t f = ds.n_features();
    Standardizer st;
    st.mean.assign(f, 0.0);
    st.scale.assign(f, 1.0);
    for (const auto i : train_index)
        for (std::size_t j = 0; j < f; ++j) st.mean[j] += ds.features(i, j);
    for (std::size_t j = 0; j < f; ++j) st.mean[j] /= static_cast<double>(train_index.size());
    Vec var(f, 0.0);
    for (const auto i : train_index)
        for (std::size_t j = 0; j < f; ++j) {
            const double d = ds.features(i, j) - st.mean[j];
            var[j] += d * d;
        }
    for (std::size_t j = 0; j < f; ++j) {
        const double v = var[j] / static_cast<double>(train_index.size());
        if (v > 1e-24) {
            st.scale[j] = 1.0 / std::sqrt(v);
        } else {
            // Constant columns (the bias among them) pass through untouched.
            st.mean[j] = 0.0;
            st.scale[j] = 1.0;
        }
    }
    return st;
}

void apply_standardizer(const Standardizer& s, LabeledDataset& ds) {
    const std::size_t f = ds.n_features();
    if (s.mean.size() != f) throw DimensionMismatch("apply_standardizer: width differs");
    for (std::size_t i = 0; i < ds.n(); ++i)
        for (std::size_t j = 0; j < f; ++j)
            ds.features(i, j) = (ds.features(i, j) - s.mean[j]) * s.scale[j];
}

}  // namespace wgf
