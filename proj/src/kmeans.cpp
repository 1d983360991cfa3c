#include "rulforge/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rulforge/errors.hpp"
#include "rulforge/rng.hpp"

namespace rulforge {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

std::size_t count_distinct(const Tensor& rows) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t j = 0; j < d; ++j) {
            if (rows.at(a, j) != rows.at(b, j)) {
                return rows.at(a, j) < rows.at(b, j);
            }
        }
        return false;
    });
    std::size_t distinct = n == 0 ? 0 : 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (sq_dist(&rows.data()[order[i] * d], &rows.data()[order[i - 1] * d],
                    d) > 0.0) {
            ++distinct;
        }
    }
    return distinct;
}

}  // namespace

std::uint32_t kmeans_assign(const Tensor& centroids,
                            std::span<const double> row) {
    const std::size_t k = centroids.rows();
    const std::size_t d = centroids.cols();
    if (row.size() != d) {
        throw DimensionError("kmeans_assign: row has " +
                             std::to_string(row.size()) +
                             " values, centroids have " + std::to_string(d));
    }
    std::uint32_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        double dist = sq_dist(&centroids.data()[c * d], row.data(), d);
        if (dist < best_dist) {  // strict: ties keep the lower index
            best_dist = dist;
            best = static_cast<std::uint32_t>(c);
        }
    }
    return best;
}

KMeansResult kmeans_fit(const Tensor& rows, std::size_t k,
                        std::uint64_t seed) {
    if (rows.rank() != 2) {
        throw DimensionError("kmeans_fit expects a matrix, got " +
                             shape_str(rows.shape()));
    }
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    if (k == 0) throw ContractError("kmeans_fit: k must be positive");
    if (count_distinct(rows) < k) {
        throw DataError("kmeans_fit: need at least " + std::to_string(k) +
                        " distinct rows");
    }

    Rng rng(seed);
    Tensor centroids({k, d});
    auto copy_row = [&](std::size_t c, std::size_t r) {
        for (std::size_t j = 0; j < d; ++j) {
            centroids.at(c, j) = rows.at(r, j);
        }
    };

    // k-means++: first centroid uniform, the rest proportional to the
    // squared distance from the nearest chosen centroid.
    copy_row(0, rng.index(n));
    std::vector<double> nearest(n);
    for (std::size_t r = 0; r < n; ++r) {
        nearest[r] = sq_dist(&rows.data()[r * d], &centroids.data()[0], d);
    }
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double w : nearest) total += w;
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                acc += nearest[r];
                if (acc >= target && nearest[r] > 0.0) {
                    pick = r;
                    break;
                }
                if (r + 1 == n) pick = r;
            }
        } else {
            pick = rng.index(n);
        }
        copy_row(c, pick);
        for (std::size_t r = 0; r < n; ++r) {
            double dist =
                sq_dist(&rows.data()[r * d], &centroids.data()[c * d], d);
            nearest[r] = std::min(nearest[r], dist);
        }
    }

    KMeansResult result;
    result.assignment.assign(n, 0);
    constexpr double kShiftTol = 1e-4;
    constexpr std::size_t kMaxIters = 300;
    for (std::size_t iter = 0; iter < kMaxIters; ++iter) {
        double inertia = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            std::uint32_t c = kmeans_assign(
                centroids, std::span<const double>(&rows.data()[r * d], d));
            result.assignment[r] = c;
            inertia += sq_dist(&rows.data()[r * d], &centroids.data()[c * d], d);
        }
        result.inertia.push_back(inertia);

        Tensor next({k, d});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r = 0; r < n; ++r) {
            std::uint32_t c = result.assignment[r];
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) {
                next.at(c, j) += rows.at(r, j);
            }
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // keep an orphaned centroid in place
                for (std::size_t j = 0; j < d; ++j) {
                    next.at(c, j) = centroids.at(c, j);
                }
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) {
                next.at(c, j) /= static_cast<double>(counts[c]);
            }
            max_shift = std::max(
                max_shift, std::sqrt(sq_dist(&next.data()[c * d],
                                             &centroids.data()[c * d], d)));
        }
        centroids = next;
        if (max_shift < kShiftTol) break;
    }

    // final assignment against the updated centroids
    for (std::size_t r = 0; r < n; ++r) {
        result.assignment[r] = kmeans_assign(
            centroids, std::span<const double>(&rows.data()[r * d], d));
    }
    result.centroids = centroids;
    return result;
}

}  // namespace rulforge
