#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

struct ForestParams {
    std::size_t trees = 100;
    std::optional<std::size_t> max_depth; // unlimited when empty
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
    double feature_subset = 1.0 / 3.0;
    Seed seed = 0;
    std::size_t threads = 0; // 0: hardware concurrency

    void check() const;
    json to_json() const;
    static ForestParams from_json(const json& j);
};

struct SurrogatePrediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// CART regression tree stored as a flat node array; node 0 is the root.
class RegressionTree {
public:
    struct Node {
        std::int32_t feature = -1; // -1 marks a leaf
        double threshold = 0.0;    // x[feature] <= threshold goes left
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0; // leaf mean
        std::size_t samples = 0;
    };

    double predict(std::span<const double> x) const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;
    json to_json() const;

private:
    friend class TreeBuilder;
    std::vector<Node> nodes_;
};

/// Random regression forest with across-tree uncertainty.
///
/// Each tree is grown greedily on variance reduction from a bootstrap
/// resample (or the full data), examining a random subset of features at
/// every node. Candidate splits sit at midpoints between adjacent distinct
/// feature values; among splits whose child sum of squared errors is equal
/// to within a relative 1e-10 of the parent's, the lowest feature index and
/// then the lowest threshold win.
class Forest {
public:
    static Forest fit(const std::vector<std::vector<double>>& X, std::span<const double> Y,
                      const ForestParams& params);

    /// Mean of the per-tree predictions and their unbiased sample variance
    /// (0 for a single tree).
    SurrogatePrediction predict(std::span<const double> x) const;
    std::vector<double> tree_predictions(std::span<const double> x) const;

    std::size_t size() const noexcept { return trees_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const RegressionTree& tree(std::size_t i) const { return trees_.at(i); }
    /// Training-row indices (with multiplicity) used to grow tree `i`.
    const std::vector<std::size_t>& training_rows(std::size_t i) const { return rows_.at(i); }

    /// Debug dump of all trees; the layout is not a stable format.
    json to_json() const;

private:
    void check_dimension(std::span<const double> x) const;

    std::size_t dimension_ = 0;
    std::vector<RegressionTree> trees_;
    std::vector<std::vector<std::size_t>> rows_;
};

} // namespace pego
