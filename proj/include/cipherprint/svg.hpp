#pragma once
// Standalone SVG figures: heatmaps for gap matrices and ridgelines for score densities.

#include <string>
#include <vector>

namespace cipherprint::svg {

// values[r][c]; NaN cells are drawn grey. Colour runs from low (white) to high (dark blue).
std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::vector<std::vector<double>>& values,
                    const std::string& value_format_suffix = "");

struct Ridge {
    std::string label;
    std::vector<std::vector<double>> thin;  // per-seed curves
    std::vector<double> mean;
};

// One ridge per entry, bins evenly spaced on [0, 1].
std::string ridgeline(const std::string& title, const std::vector<Ridge>& ridges);

}  // namespace cipherprint::svg
