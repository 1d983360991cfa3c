#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rulforge/tensor.hpp"

namespace rulforge {

// Importance scores over all input features plus the indices that clear the
// retention threshold.
struct FeatureSelection {
    std::vector<double> importance;       // normalized, sums to 1
    std::vector<std::size_t> retained;    // ascending feature indices
    double threshold = 1e-3;
};

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_leaf = 5;
    std::uint64_t seed = 0;
};

// Regression forest on bootstrap samples with variance-reduction splits over
// max(1, floor(F/3)) candidate features per node. Only the accumulated
// impurity decreases are kept; the trees themselves are discarded.
// DataError when every feature is constant.
FeatureSelection rf_feature_select(const Tensor& features,
                                   std::span<const double> labels,
                                   const ForestConfig& config);

}  // namespace rulforge
