#include "pego/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace pego {

namespace {

constexpr double kTieTolerance = 1e-10;

struct SplitChoice {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::size_t left_count = 0;
    double sse = std::numeric_limits<double>::infinity();
};

std::size_t resolve_threads(std::size_t requested, std::size_t work) {
    std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, work));
}

} // namespace

void ForestParams::check() const {
    if (trees < 1)
        throw std::invalid_argument("forest needs at least one tree");
    if (min_samples_leaf < 1)
        throw std::invalid_argument("min_samples_leaf must be >= 1");
    if (!(feature_subset > 0.0 && feature_subset <= 1.0))
        throw std::invalid_argument("feature_subset must lie in (0, 1]");
    if (max_depth && *max_depth < 1)
        throw std::invalid_argument("max_depth must be >= 1 when set");
}

json ForestParams::to_json() const {
    return json{{"trees", trees},
                {"max_depth", max_depth ? json(*max_depth) : json(nullptr)},
                {"min_samples_leaf", min_samples_leaf},
                {"bootstrap", bootstrap},
                {"feature_subset", feature_subset},
                {"seed", seed}};
}

ForestParams ForestParams::from_json(const json& j) {
    ForestParams p;
    p.trees = j.value("trees", p.trees);
    if (j.contains("max_depth") && !j.at("max_depth").is_null())
        p.max_depth = j.at("max_depth").get<std::size_t>();
    p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    p.feature_subset = j.value("feature_subset", p.feature_subset);
    p.seed = j.value("seed", p.seed);
    p.threads = j.value("threads", p.threads);
    p.check();
    return p;
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

json RegressionTree::to_json() const {
    json out = json::array();
    for (const auto& n : nodes_) {
        if (n.feature < 0)
            out.push_back({{"leaf", n.value}, {"samples", n.samples}});
        else
            out.push_back({{"feature", n.feature},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right},
                           {"samples", n.samples}});
    }
    return out;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& X, std::span<const double> Y, const ForestParams& p,
                std::mt19937_64& rng)
        : X_(X), Y_(Y), p_(p), rng_(rng), dim_(X.front().size()) {
        features_.resize(dim_);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p.feature_subset * dim_ + 1e-9)));
        mtry_ = std::min(mtry_, dim_);
    }

    RegressionTree build(std::vector<std::size_t> rows) {
        RegressionTree tree;
        struct Task {
            std::size_t node;
            std::size_t begin;
            std::size_t end;
            std::size_t depth;
        };
        rows_ = std::move(rows);
        tree.nodes_.emplace_back();
        std::vector<Task> stack{{0, 0, rows_.size(), 0}};
        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            const auto split = find_split(t.begin, t.end, t.depth);
            auto& node = tree.nodes_[t.node];
            node.samples = t.end - t.begin;
            if (split.feature < 0) {
                node.value = leaf_value(t.begin, t.end);
                continue;
            }
            // Partition rows in place: left block first, stable by value order.
            const auto f = static_cast<std::size_t>(split.feature);
            auto first = rows_.begin() + static_cast<std::ptrdiff_t>(t.begin);
            auto last = rows_.begin() + static_cast<std::ptrdiff_t>(t.end);
            std::stable_partition(first, last, [&](std::size_t r) { return X_[r][f] <= split.threshold; });
            const std::size_t mid = t.begin + split.left_count;

            node.feature = split.feature;
            node.threshold = split.threshold;
            const auto left = tree.nodes_.size();
            tree.nodes_.emplace_back();
            tree.nodes_.emplace_back();
            tree.nodes_[t.node].left = static_cast<std::int32_t>(left);
            tree.nodes_[t.node].right = static_cast<std::int32_t>(left + 1);
            stack.push_back({left + 1, mid, t.end, t.depth + 1});
            stack.push_back({left, t.begin, mid, t.depth + 1});
        }
        return tree;
    }

private:
    double leaf_value(std::size_t begin, std::size_t end) const {
        double lo = Y_[rows_[begin]];
        double hi = lo;
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const double y = Y_[rows_[i]];
            lo = std::min(lo, y);
            hi = std::max(hi, y);
            sum += y;
        }
        if (lo == hi)
            return lo;
        return std::clamp(sum / static_cast<double>(end - begin), lo, hi);
    }

    SplitChoice find_split(std::size_t begin, std::size_t end, std::size_t depth) {
        const std::size_t n = end - begin;
        const std::size_t min_leaf = p_.min_samples_leaf;
        if (n < 2 * min_leaf || (p_.max_depth && depth >= *p_.max_depth))
            return {};

        double mean = 0.0;
        bool constant = true;
        for (std::size_t i = begin; i < end; ++i) {
            mean += Y_[rows_[i]];
            constant = constant && Y_[rows_[i]] == Y_[rows_[begin]];
        }
        if (constant)
            return {};
        mean /= static_cast<double>(n);
        double parent_sse = 0.0;
        for (std::size_t i = begin; i < end; ++i)
            parent_sse += (Y_[rows_[i]] - mean) * (Y_[rows_[i]] - mean);
        const double tol = kTieTolerance * parent_sse;

        // Random feature order; the first mtry are examined in ascending
        // index order and the rest only if none of those admits a split.
        std::shuffle(features_.begin(), features_.end(), rng_);
        std::vector<std::size_t> primary(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
        std::sort(primary.begin(), primary.end());

        SplitChoice best;
        for (std::size_t f : primary)
            scan_feature(f, begin, end, mean, tol, best);
        for (std::size_t k = mtry_; k < dim_ && best.feature < 0; ++k)
            scan_feature(features_[k], begin, end, mean, tol, best);
        return best;
    }

    void scan_feature(std::size_t f, std::size_t begin, std::size_t end, double mean, double tol,
                      SplitChoice& best) {
        const std::size_t n = end - begin;
        order_.assign(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                      rows_.begin() + static_cast<std::ptrdiff_t>(end));
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t a, std::size_t b) { return X_[a][f] < X_[b][f]; });
        double total = 0.0;
        double total_sq = 0.0;
        for (std::size_t r : order_) {
            const double y = Y_[r] - mean;
            total += y;
            total_sq += y * y;
        }
        double left = 0.0;
        double left_sq = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double y = Y_[order_[k - 1]] - mean;
            left += y;
            left_sq += y * y;
            const double a = X_[order_[k - 1]][f];
            const double b = X_[order_[k]][f];
            if (!(a < b) || k < p_.min_samples_leaf || n - k < p_.min_samples_leaf)
                continue;
            const double nl = static_cast<double>(k);
            const double nr = static_cast<double>(n - k);
            const double right = total - left;
            const double right_sq = total_sq - left_sq;
            const double sse = std::max(0.0, left_sq - left * left / nl) + std::max(0.0, right_sq - right * right / nr);
            if (best.feature < 0 || sse < best.sse - tol) {
                double threshold = 0.5 * (a + b);
                if (!(threshold < b))
                    threshold = a;
                best = {static_cast<std::int32_t>(f), threshold, k, sse};
            }
        }
    }

    const std::vector<std::vector<double>>& X_;
    std::span<const double> Y_;
    const ForestParams& p_;
    std::mt19937_64& rng_;
    std::size_t dim_;
    std::size_t mtry_ = 1;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> rows_;
    std::vector<std::size_t> order_;
};

Forest Forest::fit(const std::vector<std::vector<double>>& X, std::span<const double> Y, const ForestParams& params) {
    params.check();
    if (X.empty() || X.size() != Y.size())
        throw std::invalid_argument("forest fit needs |X| = |Y| >= 1");
    const std::size_t dim = X.front().size();
    if (dim == 0)
        throw std::invalid_argument("forest fit needs at least one feature");
    for (const auto& row : X) {
        if (row.size() != dim)
            throw std::invalid_argument("forest fit: rows have mismatched dimension");
        for (double v : row)
            if (!std::isfinite(v))
                throw std::invalid_argument("forest fit: non-finite feature value");
    }
    for (double y : Y)
        if (!std::isfinite(y))
            throw std::invalid_argument("forest fit: non-finite target");

    Forest forest;
    forest.dimension_ = dim;
    forest.trees_.resize(params.trees);
    forest.rows_.resize(params.trees);

    const std::size_t n = X.size();
    auto grow = [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(params.seed, kStreamTree, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (auto& r : rows)
                r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        forest.rows_[t] = rows;
        TreeBuilder builder(X, Y, params, rng);
        forest.trees_[t] = builder.build(std::move(rows));
    };

    const std::size_t workers = resolve_threads(params.threads, params.trees);
    if (workers == 1) {
        for (std::size_t t = 0; t < params.trees; ++t)
            grow(t);
        return forest;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < params.trees; t = next++) {
                    try {
                        grow(t);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
    }
    if (failure)
        std::rethrow_exception(failure);
    return forest;
}

void Forest::check_dimension(std::span<const double> x) const {
    if (x.size() != dimension_)
        throw std::invalid_argument("forest predict: vector has length " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(dimension_));
}

std::vector<double> Forest::tree_predictions(std::span<const double> x) const {
    check_dimension(x);
    std::vector<double> out;
    out.reserve(trees_.size());
    for (const auto& t : trees_)
        out.push_back(t.predict(x));
    return out;
}

SurrogatePrediction Forest::predict(std::span<const double> x) const {
    check_dimension(x);
    const std::size_t b = trees_.size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    // Small fixed buffer avoids an allocation per call for typical sizes.
    thread_local std::vector<double> preds;
    preds.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        preds[i] = trees_[i].predict(x);
        sum += preds[i];
        lo = std::min(lo, preds[i]);
        hi = std::max(hi, preds[i]);
    }
    if (lo == hi)
        return {lo, 0.0};
    const double mean = std::clamp(sum / static_cast<double>(b), lo, hi);
    double ss = 0.0;
    for (double p : preds)
        ss += (p - mean) * (p - mean);
    return {mean, ss / static_cast<double>(b - 1)};
}

json Forest::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_)
        trees.push_back(t.to_json());
    return json{{"dimension", dimension_}, {"trees", std::move(trees)}};
}

} // namespace pego
