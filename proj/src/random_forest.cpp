#include "rulforge/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rulforge/errors.hpp"
#include "rulforge/rng.hpp"

namespace rulforge {

namespace {

// Sum of squared deviations from the mean, from the moment sums.
double sse(double sum, double sumsq, double n) {
    double s = sumsq - sum * sum / n;
    return s > 0.0 ? s : 0.0;
}

struct TreeBuilder {
    const Tensor& x;
    std::span<const double> y;
    const ForestConfig& cfg;
    std::size_t mtry;
    Rng rng;
    std::vector<double>& importance;

    std::vector<std::size_t> samples;    // bootstrap indices, partitioned in place
    std::vector<std::size_t> feat_pool;  // 0..F-1, partially shuffled per node
    std::vector<std::pair<double, double>> sorted;  // (value, label) scratch

    void build(std::size_t begin, std::size_t end, std::size_t depth) {
        const std::size_t n_node = end - begin;
        double sum = 0.0;
        double sumsq = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            double v = y[samples[i]];
            sum += v;
            sumsq += v * v;
        }
        double node_sse = sse(sum, sumsq, static_cast<double>(n_node));
        if (depth >= cfg.max_depth || n_node < 2 * cfg.min_leaf ||
            node_sse <= 0.0) {
            return;
        }

        // draw mtry distinct candidate features
        const std::size_t f_count = feat_pool.size();
        for (std::size_t i = 0; i < mtry; ++i) {
            std::size_t j = i + rng.index(f_count - i);
            std::swap(feat_pool[i], feat_pool[j]);
        }

        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        for (std::size_t fi = 0; fi < mtry; ++fi) {
            const std::size_t f = feat_pool[fi];
            sorted.clear();
            for (std::size_t i = begin; i < end; ++i) {
                sorted.emplace_back(x.at(samples[i], f), y[samples[i]]);
            }
            std::sort(sorted.begin(), sorted.end());

            double left_sum = 0.0;
            double left_sumsq = 0.0;
            for (std::size_t s = 0; s + 1 < n_node; ++s) {
                left_sum += sorted[s].second;
                left_sumsq += sorted[s].second * sorted[s].second;
                if (sorted[s].first == sorted[s + 1].first) continue;
                std::size_t n_left = s + 1;
                std::size_t n_right = n_node - n_left;
                if (n_left < cfg.min_leaf || n_right < cfg.min_leaf) continue;
                double gain =
                    node_sse -
                    sse(left_sum, left_sumsq, static_cast<double>(n_left)) -
                    sse(sum - left_sum, sumsq - left_sumsq,
                        static_cast<double>(n_right));
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold =
                        0.5 * (sorted[s].first + sorted[s + 1].first);
                }
            }
        }
        if (best_gain <= 1e-12) return;

        importance[best_feature] += best_gain;
        auto mid = std::partition(
            samples.begin() + static_cast<std::ptrdiff_t>(begin),
            samples.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t r) { return x.at(r, best_feature) < best_threshold; });
        auto split = static_cast<std::size_t>(mid - samples.begin());
        // numeric ties can defeat the midpoint; stop rather than recurse on
        // an empty side
        if (split == begin || split == end) return;
        build(begin, split, depth + 1);
        build(split, end, depth + 1);
    }
};

}  // namespace

FeatureSelection rf_feature_select(const Tensor& features,
                                   std::span<const double> labels,
                                   const ForestConfig& config) {
    if (features.rank() != 2) {
        throw DimensionError("rf_feature_select expects a matrix, got " +
                             shape_str(features.shape()));
    }
    const std::size_t n = features.rows();
    const std::size_t f_count = features.cols();
    if (labels.size() != n) {
        throw DimensionError("rf_feature_select: " + std::to_string(n) +
                             " rows but " + std::to_string(labels.size()) +
                             " labels");
    }
    if (n < 100) {
        throw ContractError("rf_feature_select: need at least 100 rows, got " +
                            std::to_string(n));
    }

    bool any_varying = false;
    for (std::size_t f = 0; f < f_count && !any_varying; ++f) {
        for (std::size_t r = 1; r < n; ++r) {
            if (features.at(r, f) != features.at(0, f)) {
                any_varying = true;
                break;
            }
        }
    }
    if (!any_varying) {
        throw DataError("rf_feature_select: every feature is constant");
    }

    FeatureSelection sel;
    sel.importance.assign(f_count, 0.0);
    const std::size_t mtry = std::max<std::size_t>(1, f_count / 3);
    Rng root(config.seed);
    for (std::size_t t = 0; t < config.trees; ++t) {
        TreeBuilder tree{features,       labels,         config, mtry,
                         root.derive(t), sel.importance, {},     {},
                         {}};
        tree.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            tree.samples[i] = tree.rng.index(n);
        }
        tree.feat_pool.resize(f_count);
        for (std::size_t f = 0; f < f_count; ++f) tree.feat_pool[f] = f;
        tree.sorted.reserve(n);
        tree.build(0, n, 0);
    }

    double total = 0.0;
    for (double v : sel.importance) total += v;
    if (total <= 0.0) {
        throw DataError("rf_feature_select: no informative splits found");
    }
    for (double& v : sel.importance) v /= total;
    for (std::size_t f = 0; f < f_count; ++f) {
        if (sel.importance[f] >= sel.threshold) sel.retained.push_back(f);
    }
    if (sel.retained.empty()) {
        throw DataError("rf_feature_select: no feature cleared the threshold");
    }
    return sel;
}

}  // namespace rulforge
