#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rulforge/tensor.hpp"

namespace rulforge {

struct KMeansResult {
    Tensor centroids;  // k x d
    std::vector<std::uint32_t> assignment;
    std::vector<double> inertia;  // per Lloyd iteration, after update
};

// k-means++ seeding from Rng(seed), then Lloyd iterations until the largest
// centroid displacement drops below 1e-4 or 300 iterations pass. Requires at
// least k distinct rows (DataError otherwise).
KMeansResult kmeans_fit(const Tensor& rows, std::size_t k, std::uint64_t seed);

// Nearest centroid by squared Euclidean distance, ties to the lowest index.
std::uint32_t kmeans_assign(const Tensor& centroids,
                            std::span<const double> row);

}  // namespace rulforge
