#pragma once

#include <string>

#include "wgf/mat.hpp"

namespace wgf {

// Binary-labeled dense feature matrix. Labels are +-1 after loading.
struct LabeledDataset {
    Mat features;             // n x f, last column is the appended 1.0 bias
    std::vector<int> labels;  // entries in {-1, +1}

    std::size_t n() const { return features.rows; }
    std::size_t n_features() const { return features.cols; }
};

// Reads "label idx:value ..." lines with 1-based indices; missing indices are
// zero and a constant 1.0 bias is appended as the last column. Labels {-1,+1}
// pass through; any other two-value encoding ({0,1}, {1,2}, ...) is remapped
// with the smaller value to -1. Throws MalformedLine (with the line number) on
// parse failures or empty input, NonBinaryLabels when more than two distinct
// labels appear or a lone label is not in {-1,+1}.
LabeledDataset parse_libsvm(const std::string& path);

// Same, from an already-loaded buffer (tests).
LabeledDataset parse_libsvm_text(const std::string& text);

// Standardize columns to mean 0, sd 1 using statistics of the rows in
// train_index only; applies to all rows. Constant columns (the bias among
// them) are left untouched.
struct Standardizer {
    Vec mean;
    Vec scale;  // 1/sd
};
Standardizer fit_standardizer(const LabeledDataset& ds,
                              const std::vector<std::size_t>& train_index);
void apply_standardizer(const Standardizer& s, LabeledDataset& ds);

}  // namespace wgf
