#pragma once

// Feature selection, decision trees, cross-validation and the OR-combiner.

#include <fpkit/labeler.hpp>
#include <fpkit/util.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpkit {

using SparseVector = std::map<std::string, double>;

inline SparseVector to_sparse(const std::set<std::string>& present)
{
    SparseVector v;
    for (const auto& f : present)
        v.emplace_hint(v.end(), f, 1.0);
    return v;
}

class SelectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense matrix; label 1 = fingerprinting.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;

    std::size_t size() const { return rows.size(); }

    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> c(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            c[i] = rows[i][j];
        return c;
    }

    /// Restricts to the named features, in the given order.
    FeatureMatrix select(const std::vector<std::string>& keep) const
    {
        std::map<std::string, std::size_t> pos;
        for (std::size_t j = 0; j < names.size(); ++j)
            pos.emplace(names[j], j);
        FeatureMatrix m;
        m.names = keep;
        m.ids = ids;
        m.labels = labels;
        m.rows.assign(rows.size(), std::vector<double>(keep.size(), 0.0));
        for (std::size_t k = 0; k < keep.size(); ++k) {
            auto it = pos.find(keep[k]);
            if (it == pos.end())
                continue;
            for (std::size_t i = 0; i < rows.size(); ++i)
                m.rows[i][k] = rows[i][it->second];
        }
        return m;
    }

    FeatureMatrix subset(const std::vector<std::size_t>& which) const
    {
        FeatureMatrix m;
        m.names = names;
        for (auto i : which) {
            m.ids.push_back(ids[i]);
            m.rows.push_back(rows[i]);
            m.labels.push_back(labels[i]);
        }
        return m;
    }
};

/// Columns are the sorted union of feature names unless `names` is given.
inline FeatureMatrix make_matrix(const std::vector<std::string>& ids, const std::vector<SparseVector>& vectors, const std::vector<int>& labels,
    std::optional<std::vector<std::string>> names = std::nullopt)
{
    if (ids.size() != vectors.size() || ids.size() != labels.size())
        throw std::invalid_argument("make_matrix: ids, vectors and labels differ in length");
    FeatureMatrix m;
    if (names) {
        m.names = std::move(*names);
    } else {
        std::set<std::string> all;
        for (const auto& v : vectors)
            for (const auto& [k, _] : v)
                all.insert(k);
        m.names.assign(all.begin(), all.end());
    }
    std::map<std::string, std::size_t> pos;
    for (std::size_t j = 0; j < m.names.size(); ++j)
        pos.emplace(m.names[j], j);
    m.ids = ids;
    m.labels = labels;
    m.rows.assign(vectors.size(), std::vector<double>(m.names.size(), 0.0));
    for (std::size_t i = 0; i < vectors.size(); ++i)
        for (const auto& [k, val] : vectors[i])
            if (auto it = pos.find(k); it != pos.end())
                m.rows[i][it->second] = val;
    return m;
}

// ---- selection ------------------------------------------------------------

inline double population_variance(const std::vector<double>& x)
{
    if (x.empty())
        return 0.0;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    return ss / n;
}

inline constexpr double default_variance_threshold = 0.01;

/// Features whose population variance exceeds `threshold`, in matrix order.
inline std::vector<std::string> variance_filter(const FeatureMatrix& m, double threshold = default_variance_threshold)
{
    if (m.size() == 0)
        throw SelectionError("variance filter on an empty matrix");
    std::vector<std::string> keep;
    for (std::size_t j = 0; j < m.names.size(); ++j)
        if (population_variance(m.column(j)) > threshold)
            keep.push_back(m.names[j]);
    if (keep.empty())
        throw SelectionError("variance filter removed every feature");
    return keep;
}

/// Base-2 entropy of a two-class distribution; 0 log 0 = 0.
inline double entropy(double pos, double neg)
{
    const double n = pos + neg;
    if (n <= 0)
        return 0.0;
    double h = 0.0;
    for (double c : {pos, neg})
        if (c > 0) {
            const double p = c / n;
            h -= p * std::log2(p);
        }
    return h;
}

struct Gain {
    double gain = 0.0;
    // split is x <= threshold; NaN when the column is constant
    double threshold = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double gain_tolerance = 1e-12;

namespace detail {

// Best binary split of (value, label) pairs. Ties keep the smaller threshold.
inline Gain best_split(std::vector<std::pair<double, int>>& pairs)
{
    Gain best;
    if (pairs.empty())
        return best;
    std::sort(pairs.begin(), pairs.end());
    double total_pos = 0;
    for (const auto& p : pairs)
        total_pos += p.second;
    const double n = static_cast<double>(pairs.size());
    const double h = entropy(total_pos, n - total_pos);
    double left_pos = 0, left_n = 0;
    bool found = false;
    for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
        left_pos += pairs[i].second;
        left_n += 1;
        if (pairs[i].first == pairs[i + 1].first)
            continue;
        const double right_n = n - left_n;
        const double right_pos = total_pos - left_pos;
        const double cond = (left_n / n) * entropy(left_pos, left_n - left_pos) + (right_n / n) * entropy(right_pos, right_n - right_pos);
        const double g = std::max(0.0, h - cond);
        if (!found || g > best.gain + gain_tolerance) {
            best.gain = g;
            best.threshold = pairs[i].first + (pairs[i + 1].first - pairs[i].first) / 2;
            found = true;
        }
    }
    return best;
}

} // namespace detail

/// IG of the best midpoint threshold on `column`.
inline Gain information_gain(const std::vector<double>& column, const std::vector<int>& labels)
{
    if (column.size() != labels.size())
        throw std::invalid_argument("information_gain: column and labels differ in length");
    std::vector<std::pair<double, int>> pairs(column.size());
    for (std::size_t i = 0; i < column.size(); ++i)
        pairs[i] = {column[i], labels[i] ? 1 : 0};
    return detail::best_split(pairs);
}

inline constexpr std::size_t default_top_k = 1000;

struct RankedFeature {
    std::string name;
    Gain gain;
};

/// Features ordered by gain (descending), ties by name.
inline std::vector<RankedFeature> rank_features(const FeatureMatrix& m)
{
    std::vector<RankedFeature> r;
    for (std::size_t j = 0; j < m.names.size(); ++j)
        r.push_back({m.names[j], information_gain(m.column(j), m.labels)});
    // gains equal to within the tolerance grid count as ties
    auto key = [](double g) { return std::llround(g / gain_tolerance); };
    std::sort(r.begin(), r.end(), [&](const RankedFeature& a, const RankedFeature& b) {
        const auto ka = key(a.gain.gain), kb = key(b.gain.gain);
        if (ka != kb)
            return ka > kb;
        return a.name < b.name;
    });
    return r;
}

inline std::vector<std::string> select_top_k(const FeatureMatrix& m, std::size_t k = default_top_k)
{
    auto ranked = rank_features(m);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        out.push_back(ranked[i].name);
    return out;
}

struct SelectionOptions {
    double variance_threshold = default_variance_threshold;
    std::size_t top_k = default_top_k;
};

/// Variance filter followed by top-k; the result is sorted by name.
inline std::vector<std::string> select_features(const FeatureMatrix& m, const SelectionOptions& opt = {})
{
    auto kept = variance_filter(m, opt.variance_threshold);
    auto top = select_top_k(m.select(kept), opt.top_k);
    std::sort(top.begin(), top.end());
    return top;
}

// ---- decision tree --------------------------------------------------------

struct TreeNode {
    bool leaf = true;
    std::string feature;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Verdict cls = Verdict::non_fingerprinting;
    // [non_fingerprinting, fingerprinting]
    std::array<std::size_t, 2> counts {0, 0};

    bool operator==(const TreeNode&) const = default;
};

struct TreeOptions {
    std::size_t min_samples_split = 2;
    // 0 = unlimited
    std::size_t max_depth = 0;
};

struct DecisionTreeModel {
    std::vector<TreeNode> nodes;
    std::string feature_space = "static";
    std::vector<std::string> selected_features;
    std::size_t training_size = 0;
    std::uint64_t seed = 0;

    std::size_t depth() const { return nodes.empty() ? 0 : depth_of(0); }
    std::size_t leaves() const
    {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
    }

    bool operator==(const DecisionTreeModel&) const = default;

private:
    std::size_t depth_of(int i) const
    {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        return n.leaf ? 0 : 1 + std::max(depth_of(n.left), depth_of(n.right));
    }
};

inline Verdict majority(const std::array<std::size_t, 2>& counts)
{
    return counts[1] > counts[0] ? Verdict::fingerprinting : Verdict::non_fingerprinting;
}

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& m, const TreeOptions& opt) : m_(m), opt_(opt)
    {
        order_.resize(m.names.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return m.names[a] < m.names[b]; });
    }

    int build(const std::vector<std::size_t>& rows, std::size_t depth, std::vector<TreeNode>& nodes)
    {
        TreeNode node;
        for (auto i : rows)
            ++node.counts[m_.labels[i] ? 1 : 0];
        node.cls = majority(node.counts);
        const int index = static_cast<int>(nodes.size());
        nodes.push_back(node);

        const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
        if (pure || rows.size() < opt_.min_samples_split || (opt_.max_depth && depth >= opt_.max_depth))
            return index;

        // zero-gain splits are still taken
        bool found = false;
        std::size_t best_feature = 0;
        Gain best;
        std::vector<std::pair<double, int>> pairs(rows.size());
        for (auto j : order_) {
            for (std::size_t k = 0; k < rows.size(); ++k)
                pairs[k] = {m_.rows[rows[k]][j], m_.labels[rows[k]] ? 1 : 0};
            Gain g = best_split(pairs);
            if (std::isnan(g.threshold))
                continue;
            if (!found || g.gain > best.gain + gain_tolerance) {
                best = g;
                best_feature = j;
                found = true;
            }
        }
        if (!found)
            return index;

        std::vector<std::size_t> left, right;
        for (auto i : rows)
            (m_.rows[i][best_feature] <= best.threshold ? left : right).push_back(i);
        const int l = build(left, depth + 1, nodes);
        const int r = build(right, depth + 1, nodes);
        auto& n = nodes[static_cast<std::size_t>(index)];
        n.leaf = false;
        n.feature = m_.names[best_feature];
        n.threshold = best.threshold;
        n.left = l;
        n.right = r;
        return index;
    }

private:
    const FeatureMatrix& m_;
    TreeOptions opt_;
    std::vector<std::size_t> order_;
};

} // namespace detail

/// Greedy information-gain tree. Ties between splits go to the
/// lexicographically smaller feature name, then the smaller threshold.
inline DecisionTreeModel train_tree(const FeatureMatrix& m, const TreeOptions& opt = {}, std::string feature_space = "static", std::uint64_t seed = 0)
{
    if (m.names.empty())
        throw SelectionError("no features selected; refusing to train");
    DecisionTreeModel model;
    model.feature_space = std::move(feature_space);
    model.selected_features = m.names;
    std::sort(model.selected_features.begin(), model.selected_features.end());
    model.training_size = m.size();
    model.seed = seed;
    std::vector<std::size_t> rows(m.size());
    std::iota(rows.begin(), rows.end(), 0);
    detail::TreeBuilder(m, opt).build(rows, 0, model.nodes);
    return model;
}

struct Prediction {
    Verdict label = Verdict::non_fingerprinting;
    std::array<std::size_t, 2> counts {0, 0};
};

inline Prediction predict(const DecisionTreeModel& model, const SparseVector& v)
{
    if (model.nodes.empty())
        return {};
    std::size_t i = 0;
    while (!model.nodes[i].leaf) {
        const auto& n = model.nodes[i];
        auto it = v.find(n.feature);
        const double x = it == v.end() ? 0.0 : it->second;
        i = static_cast<std::size_t>(x <= n.threshold ? n.left : n.right);
    }
    return {model.nodes[i].cls, model.nodes[i].counts};
}

inline Prediction predict(const DecisionTreeModel& model, const FeatureMatrix& m, std::size_t row)
{
    SparseVector v;
    for (std::size_t j = 0; j < m.names.size(); ++j)
        if (m.rows[row][j] != 0.0)
            v.emplace(m.names[j], m.rows[row][j]);
    return predict(model, v);
}

inline json to_json(const DecisionTreeModel& model)
{
    json nodes = json::array();
    for (const auto& n : model.nodes) {
        json j;
        j["counts"] = n.counts;
        if (n.leaf) {
            j["leaf"] = true;
            j["class"] = to_string(n.cls);
        } else {
            j["leaf"] = false;
            j["feature"] = n.feature;
            j["threshold"] = n.threshold;
            j["left"] = n.left;
            j["right"] = n.right;
        }
        nodes.push_back(std::move(j));
    }
    return {{"format", "fpkit-decision-tree"}, {"version", 1},
        {"metadata", {{"feature_space", model.feature_space}, {"selected_features", model.selected_features}, {"training_size", model.training_size}, {"seed", model.seed}}},
        {"nodes", nodes}};
}

inline DecisionTreeModel model_from_json(const json& j)
{
    if (j.value("format", "") != "fpkit-decision-tree" || j.value("version", 0) != 1)
        throw std::runtime_error("not a version 1 decision tree model");
    DecisionTreeModel model;
    const auto& meta = j.at("metadata");
    model.feature_space = meta.at("feature_space").get<std::string>();
    model.selected_features = meta.at("selected_features").get<std::vector<std::string>>();
    model.training_size = meta.at("training_size").get<std::size_t>();
    model.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& jn : j.at("nodes")) {
        TreeNode n;
        n.counts = jn.at("counts").get<std::array<std::size_t, 2>>();
        n.leaf = jn.at("leaf").get<bool>();
        if (n.leaf) {
            n.cls = parse_verdict(jn.at("class").get<std::string>());
        } else {
            n.cls = majority(n.counts);
            n.feature = jn.at("feature").get<std::string>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
        }
        model.nodes.push_back(std::move(n));
    }
    const auto count = static_cast<int>(model.nodes.size());
    for (const auto& n : model.nodes)
        if (!n.leaf && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
            throw std::runtime_error("model node index out of range");
    return model;
}

// ---- evaluation -----------------------------------------------------------

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    void add(Verdict truth, Verdict predicted)
    {
        const bool t = truth == Verdict::fingerprinting;
        const bool p = predicted == Verdict::fingerprinting;
        if (t && p)
            ++tp;
        else if (!t && p)
            ++fp;
        else if (!t && !p)
            ++tn;
        else
            ++fn;
    }

    std::size_t total() const { return tp + fp + tn + fn; }
    static double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }
    double accuracy() const { return ratio(tp + tn, total()); }
    double precision() const { return ratio(tp, tp + fp); }
    double recall() const { return ratio(tp, tp + fn); }
    double fpr() const { return ratio(fp, fp + tn); }
    double fnr() const { return ratio(fn, fn + tp); }
};

inline json to_json(const Metrics& m)
{
    return {{"accuracy", m.accuracy()}, {"precision", m.precision()}, {"recall", m.recall()}, {"fpr", m.fpr()}, {"fnr", m.fnr()},
        {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

/// Stratified assignment: each class is shuffled with the seeded RNG and
/// dealt round-robin, negatives continuing where positives stopped.
inline std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t folds, std::uint64_t seed)
{
    if (folds < 2)
        throw std::invalid_argument("cross-validation needs at least 2 folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos : neg).push_back(i);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::size_t> fold(labels.size());
    std::size_t k = 0;
    for (auto i : pos)
        fold[i] = k++ % folds;
    for (auto i : neg)
        fold[i] = k++ % folds;
    return fold;
}

struct TrainOptions {
    SelectionOptions selection;
    TreeOptions tree;
    bool select = true;
};

/// Selection (if enabled) and training on `m`. Falls back to a single leaf
/// when selection leaves nothing or only one class is present.
inline DecisionTreeModel fit(const FeatureMatrix& m, const TrainOptions& opt, const std::string& space, std::uint64_t seed)
{
    const bool both = std::count(m.labels.begin(), m.labels.end(), 1) > 0 && std::count(m.labels.begin(), m.labels.end(), 0) > 0;
    std::vector<std::string> features = m.names;
    if (opt.select && both) {
        try {
            features = select_features(m, opt.selection);
        } catch (const SelectionError&) {
            features.clear();
        }
    }
    if (!both || features.empty()) {
        DecisionTreeModel model;
        model.feature_space = space;
        model.training_size = m.size();
        model.seed = seed;
        TreeNode leaf;
        for (int l : m.labels)
            ++leaf.counts[l ? 1 : 0];
        leaf.cls = majority(leaf.counts);
        model.nodes.push_back(leaf);
        return model;
    }
    return train_tree(m.select(features), opt.tree, space, seed);
}

/// K-fold CV with micro-aggregated metrics; selection runs inside each
/// training fold.
inline Metrics cross_validate(const FeatureMatrix& m, std::size_t folds = 10, std::uint64_t seed = 0, const TrainOptions& opt = {})
{
    if (std::count(m.labels.begin(), m.labels.end(), 1) == 0 || std::count(m.labels.begin(), m.labels.end(), 0) == 0)
        throw std::invalid_argument("cross-validation needs both classes");
    auto fold = stratified_folds(m.labels, folds, seed);
    Metrics metrics;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < m.size(); ++i)
            (fold[i] == f ? test : train).push_back(i);
        if (test.empty())
            continue;
        auto model = fit(m.subset(train), opt, "static", seed);
        for (auto i : test)
            metrics.add(m.labels[i] ? Verdict::fingerprinting : Verdict::non_fingerprinting, predict(model, m, i).label);
    }
    return metrics;
}

class UnclassifiableError : public std::runtime_error {
public:
    UnclassifiableError() : std::runtime_error("script has neither a static nor a dynamic decision") {}
};

inline Verdict combine(std::optional<Verdict> static_label, std::optional<Verdict> dynamic_label)
{
    if (!static_label && !dynamic_label)
        throw UnclassifiableError();
    return (static_label == Verdict::fingerprinting || dynamic_label == Verdict::fingerprinting) ? Verdict::fingerprinting : Verdict::non_fingerprinting;
}

/// One labeled script with either or both feature vectors.
struct Example {
    std::string script_id;
    std::optional<SparseVector> static_vector;
    std::optional<SparseVector> dynamic_vector;
    Verdict truth = Verdict::non_fingerprinting;
};

struct CombinedMetrics {
    Metrics static_metrics;
    Metrics dynamic_metrics;
    Metrics combined;
    std::size_t unclassifiable = 0;
};

inline json to_json(const CombinedMetrics& c)
{
    return {{"static", to_json(c.static_metrics)}, {"dynamic", to_json(c.dynamic_metrics)}, {"combined", to_json(c.combined)},
        {"unclassifiable", c.unclassifiable}};
}

namespace detail {

inline FeatureMatrix space_matrix(const std::vector<Example>& ex, const std::vector<std::size_t>& which, bool dynamic)
{
    std::vector<std::string> ids;
    std::vector<SparseVector> vecs;
    std::vector<int> labels;
    for (auto i : which) {
        const auto& v = dynamic ? ex[i].dynamic_vector : ex[i].static_vector;
        if (!v)
            continue;
        ids.push_back(ex[i].script_id);
        vecs.push_back(*v);
        labels.push_back(ex[i].truth == Verdict::fingerprinting);
    }
    return make_matrix(ids, vecs, labels);
}

} // namespace detail

/// CV over both feature spaces with shared folds. Each fold trains one
/// model per space; a held-out script is scored by the models for which it
/// has a vector and the verdicts are OR-combined. Static and dynamic rows
/// count only scripts having that vector.
inline CombinedMetrics cross_validate_combined(const std::vector<Example>& ex, std::size_t folds = 10, std::uint64_t seed = 0, const TrainOptions& opt = {})
{
    std::vector<int> labels;
    for (const auto& e : ex)
        labels.push_back(e.truth == Verdict::fingerprinting);
    if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), 0) == 0)
        throw std::invalid_argument("cross-validation needs both classes");
    auto fold = stratified_folds(labels, folds, seed);
    CombinedMetrics out;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < ex.size(); ++i)
            (fold[i] == f ? test : train).push_back(i);
        if (test.empty())
            continue;
        auto sm = detail::space_matrix(ex, train, false);
        auto dm = detail::space_matrix(ex, train, true);
        std::optional<DecisionTreeModel> smodel, dmodel;
        if (sm.size() > 0)
            smodel = fit(sm, opt, "static", seed);
        if (dm.size() > 0)
            dmodel = fit(dm, opt, "dynamic", seed);
        for (auto i : test) {
            const auto& e = ex[i];
            std::optional<Verdict> s, d;
            if (e.static_vector) {
                s = smodel ? predict(*smodel, *e.static_vector).label : Verdict::non_fingerprinting;
                out.static_metrics.add(e.truth, *s);
            }
            if (e.dynamic_vector) {
                d = dmodel ? predict(*dmodel, *e.dynamic_vector).label : Verdict::non_fingerprinting;
                out.dynamic_metrics.add(e.truth, *d);
            }
            if (!s && !d) {
                ++out.unclassifiable;
                continue;
            }
            out.combined.add(e.truth, combine(s, d));
        }
    }
    return out;
}

} // namespace fpkit
