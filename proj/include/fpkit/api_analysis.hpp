#pragma once

// Keyword prevalence ratios, co-occurrence graph and Louvain clustering.

#include <fpkit/labeler.hpp>
#include <fpkit/static_features.hpp>
#include <fpkit/util.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace fpkit {

/// Vocabulary keywords occurring as whole `[A-Za-z0-9_$]+` tokens.
inline std::set<std::string> keyword_occurrences(std::string_view source, const KeywordVocabulary& vocab)
{
    std::set<std::string> out;
    auto word = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '$'; };
    std::size_t i = 0;
    std::string tok;
    while (i < source.size()) {
        if (!word(source[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < source.size() && word(source[j]))
            ++j;
        tok.assign(source.substr(i, j - i));
        if (vocab.contains(tok))
            out.insert(tok);
        i = j;
    }
    return out;
}

/// One script's keyword set with its label and embedding sites.
struct ScriptKeywords {
    std::string script_id;
    std::set<std::string> keywords;
    Verdict label = Verdict::non_fingerprinting;
    std::set<std::string> sites;
};

/// fp_fraction / nonfp_fraction, with an explicit infinite value.
struct Ratio {
    bool infinite = false;
    double value = 0.0;

    static Ratio of(double fp, double nonfp)
    {
        if (nonfp == 0.0)
            return fp > 0.0 ? Ratio {true, 0.0} : Ratio {false, 0.0};
        return {false, fp / nonfp};
    }

    bool operator==(const Ratio&) const = default;
};

/// Strict descending order with infinity first.
inline bool ratio_greater(const Ratio& a, const Ratio& b)
{
    if (a.infinite != b.infinite)
        return a.infinite;
    return !a.infinite && a.value > b.value;
}

inline nlohmann::json to_json(const Ratio& r)
{
    if (r.infinite)
        return "Infinity";
    return r.value;
}

struct KeywordStats {
    std::string keyword;
    double fp_fraction = 0.0;
    double nonfp_fraction = 0.0;
    Ratio ratio;
    // fingerprinting scripts containing the keyword, and their sites
    std::size_t script_count = 0;
    std::size_t website_count = 0;
    // scripts of either class containing the keyword
    std::size_t support = 0;
};

inline std::vector<KeywordStats> prevalence_ratios(const std::vector<ScriptKeywords>& scripts)
{
    std::size_t fp_total = 0, nonfp_total = 0;
    for (const auto& s : scripts)
        ++(s.label == Verdict::fingerprinting ? fp_total : nonfp_total);
    if (fp_total == 0)
        throw std::invalid_argument("prevalence ratios need at least one fingerprinting script");

    struct Acc {
        std::size_t fp = 0, nonfp = 0;
        std::set<std::string> sites;
    };
    std::map<std::string, Acc> acc;
    for (const auto& s : scripts)
        for (const auto& k : s.keywords) {
            auto& a = acc[k];
            if (s.label == Verdict::fingerprinting) {
                ++a.fp;
                a.sites.insert(s.sites.begin(), s.sites.end());
            } else {
                ++a.nonfp;
            }
        }

    std::vector<KeywordStats> out;
    for (const auto& [k, a] : acc) {
        KeywordStats st;
        st.keyword = k;
        st.fp_fraction = static_cast<double>(a.fp) / static_cast<double>(fp_total);
        st.nonfp_fraction = nonfp_total ? static_cast<double>(a.nonfp) / static_cast<double>(nonfp_total) : 0.0;
        st.ratio = Ratio::of(st.fp_fraction, st.nonfp_fraction);
        st.script_count = a.fp;
        st.website_count = a.sites.size();
        st.support = a.fp + a.nonfp;
        out.push_back(std::move(st));
    }
    std::sort(out.begin(), out.end(), [](const KeywordStats& a, const KeywordStats& b) {
        if (ratio_greater(a.ratio, b.ratio))
            return true;
        if (ratio_greater(b.ratio, a.ratio))
            return false;
        if (a.script_count != b.script_count)
            return a.script_count > b.script_count;
        return a.keyword < b.keyword;
    });
    return out;
}

inline nlohmann::json to_json(const KeywordStats& s)
{
    return {{"keyword", s.keyword}, {"ratio", to_json(s.ratio)}, {"fp_fraction", s.fp_fraction}, {"nonfp_fraction", s.nonfp_fraction},
        {"script_count", s.script_count}, {"website_count", s.website_count}};
}

// ---- weighted graphs and Louvain ------------------------------------------

/// Undirected weighted graph on nodes 0..n-1. An edge (i, i) is a self-loop
/// whose weight counts once toward m and twice toward the degree of i.
struct WeightedGraph {
    std::size_t n = 0;
    std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
};

/// Q = (1/2m) Σ_ij [A_ij - k_i k_j / 2m] δ(c_i, c_j); 0 for edgeless graphs.
inline double modularity(const WeightedGraph& g, const std::vector<int>& community)
{
    double m = 0.0;
    std::vector<double> degree(g.n, 0.0);
    std::map<int, double> internal, total;
    for (const auto& [i, j, w] : g.edges) {
        m += w;
        degree[i] += w;
        degree[j] += w;
        if (community[i] == community[j])
            internal[community[i]] += w;
    }
    if (m == 0.0)
        return 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        total[community[i]] += degree[i];
    double q = 0.0;
    for (const auto& [c, tot] : total) {
        const double in = internal.count(c) ? internal[c] : 0.0;
        q += in / m - (tot / (2 * m)) * (tot / (2 * m));
    }
    return q;
}

struct LouvainResult {
    std::vector<int> community;
    double modularity = 0.0;
    std::size_t levels = 0;
};

namespace detail {

struct LevelGraph {
    std::size_t n = 0;
    std::vector<std::map<std::size_t, double>> adj;
    std::vector<double> self;
    std::vector<double> degree;
    double m = 0.0;

    explicit LevelGraph(const WeightedGraph& g) : n(g.n), adj(g.n), self(g.n, 0.0), degree(g.n, 0.0)
    {
        for (const auto& [i, j, w] : g.edges) {
            m += w;
            if (i == j) {
                self[i] += w;
                degree[i] += 2 * w;
            } else {
                adj[i][j] += w;
                adj[j][i] += w;
                degree[i] += w;
                degree[j] += w;
            }
        }
    }

    WeightedGraph as_graph() const
    {
        WeightedGraph g;
        g.n = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (self[i] != 0.0)
                g.edges.emplace_back(i, i, self[i]);
            for (const auto& [j, w] : adj[i])
                if (j > i)
                    g.edges.emplace_back(i, j, w);
        }
        return g;
    }
};

// Local moving phase. Returns whether any node changed community.
inline bool local_moving(const LevelGraph& g, std::vector<int>& comm, Rng& rng)
{
    std::vector<double> tot(g.n, 0.0);
    for (std::size_t i = 0; i < g.n; ++i)
        tot[static_cast<std::size_t>(comm[i])] += g.degree[i];
    std::vector<std::size_t> order(g.n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    bool moved_any = false;
    bool moved = true;
    const double two_m = 2 * g.m;
    while (moved) {
        moved = false;
        for (auto i : order) {
            const int own = comm[i];
            std::map<int, double> links;
            for (const auto& [j, w] : g.adj[i])
                links[comm[j]] += w;
            tot[static_cast<std::size_t>(own)] -= g.degree[i];
            auto gain = [&](int c) {
                auto it = links.find(c);
                const double k_in = it == links.end() ? 0.0 : it->second;
                return k_in - tot[static_cast<std::size_t>(c)] * g.degree[i] / two_m;
            };
            int best = own;
            double best_gain = gain(own);
            for (const auto& [c, _] : links) {
                const double d = gain(c);
                if (d > best_gain + 1e-14) {
                    best = c;
                    best_gain = d;
                }
            }
            tot[static_cast<std::size_t>(best)] += g.degree[i];
            if (best != own) {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
    }
    return moved_any;
}

// Renumbers communities 0..k-1 by first appearance.
inline std::size_t renumber(std::vector<int>& comm)
{
    std::map<int, int> ids;
    for (auto& c : comm) {
        auto [it, inserted] = ids.emplace(c, static_cast<int>(ids.size()));
        c = it->second;
    }
    return ids.size();
}

} // namespace detail

/// Two-phase Louvain; node visit order at each level comes from `seed`.
inline LouvainResult louvain(const WeightedGraph& g, std::uint64_t seed = 0)
{
    if (g.n == 0)
        throw std::invalid_argument("louvain on an empty graph");
    LouvainResult r;
    r.community.resize(g.n);
    std::iota(r.community.begin(), r.community.end(), 0);
    Rng rng(seed);
    WeightedGraph level = g;
    while (true) {
        detail::LevelGraph lg(level);
        if (lg.m == 0.0)
            break;
        std::vector<int> comm(lg.n);
        std::iota(comm.begin(), comm.end(), 0);
        if (!detail::local_moving(lg, comm, rng))
            break;
        const std::size_t k = detail::renumber(comm);
        ++r.levels;
        for (auto& c : r.community)
            c = comm[static_cast<std::size_t>(c)];
        WeightedGraph next;
        next.n = k;
        std::map<std::pair<std::size_t, std::size_t>, double> w;
        for (const auto& [i, j, wt] : level.edges) {
            auto a = static_cast<std::size_t>(comm[i]);
            auto b = static_cast<std::size_t>(comm[j]);
            if (a > b)
                std::swap(a, b);
            w[{a, b}] += wt;
        }
        for (const auto& [e, wt] : w)
            next.edges.emplace_back(e.first, e.second, wt);
        level = std::move(next);
        if (k == 1)
            break;
    }
    detail::renumber(r.community);
    // Q of the final coarse graph with every node in its own community
    std::vector<int> singletons(level.n);
    std::iota(singletons.begin(), singletons.end(), 0);
    if (r.levels > 0)
        r.modularity = modularity(level, singletons);
    else
        r.modularity = modularity(g, r.community);
    return r;
}

// ---- keyword graph --------------------------------------------------------

struct KeywordNode {
    Ratio weight;
    bool in_reference_library = false;
    std::size_t support = 0;
};

struct KeywordGraph {
    std::map<std::string, KeywordNode> nodes;
    // key.first < key.second
    std::map<std::pair<std::string, std::string>, std::size_t> edges;
    std::map<std::string, int> community;
    double modularity = 0.0;

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        for (const auto& [k, _] : nodes)
            out.push_back(k);
        return out;
    }

    WeightedGraph weighted() const
    {
        std::map<std::string, std::size_t> index;
        for (const auto& [k, _] : nodes)
            index.emplace(k, index.size());
        WeightedGraph g;
        g.n = nodes.size();
        for (const auto& [e, w] : edges)
            g.edges.emplace_back(index.at(e.first), index.at(e.second), static_cast<double>(w));
        return g;
    }
};

inline constexpr std::size_t default_min_support = 2;

inline KeywordGraph build_graph(const std::vector<ScriptKeywords>& scripts, const std::vector<KeywordStats>& stats,
    const std::set<std::string>& reference_library, std::size_t min_support = default_min_support)
{
    KeywordGraph g;
    for (const auto& s : stats)
        if (s.support >= min_support)
            g.nodes[s.keyword] = {s.ratio, reference_library.count(s.keyword) != 0, s.support};
    for (const auto& s : scripts) {
        std::vector<std::string> kept;
        for (const auto& k : s.keywords)
            if (g.nodes.count(k))
                kept.push_back(k);
        for (std::size_t a = 0; a < kept.size(); ++a)
            for (std::size_t b = a + 1; b < kept.size(); ++b)
                ++g.edges[{kept[a], kept[b]}];
    }
    return g;
}

inline void cluster(KeywordGraph& g, std::uint64_t seed = 0)
{
    if (g.nodes.empty())
        throw std::invalid_argument("cannot cluster an empty keyword graph");
    auto r = louvain(g.weighted(), seed);
    std::size_t i = 0;
    for (const auto& [k, _] : g.nodes)
        g.community[k] = r.community[i++];
    g.modularity = r.modularity;
}

struct ClusterReport {
    int community = 0;
    std::vector<std::string> members;
    double mean_ratio = 0.0;
    double infinite_fraction = 0.0;
    double reference_fraction = 0.0;
};

/// Clusters by (mean ratio, fraction of infinite-ratio members, fraction of
/// reference-library members), all descending. Infinite ratios enter the
/// mean as the largest finite ratio in the graph.
inline std::vector<ClusterReport> rank_clusters(const KeywordGraph& g)
{
    double max_finite = 0.0;
    for (const auto& [_, n] : g.nodes)
        if (!n.weight.infinite)
            max_finite = std::max(max_finite, n.weight.value);
    std::map<int, ClusterReport> by_id;
    for (const auto& [k, c] : g.community) {
        auto& r = by_id[c];
        r.community = c;
        r.members.push_back(k);
    }
    std::vector<ClusterReport> out;
    for (auto& [c, r] : by_id) {
        double sum = 0.0, inf = 0.0, ref = 0.0;
        for (const auto& k : r.members) {
            const auto& n = g.nodes.at(k);
            sum += n.weight.infinite ? max_finite : n.weight.value;
            inf += n.weight.infinite;
            ref += n.in_reference_library;
        }
        const double size = static_cast<double>(r.members.size());
        r.mean_ratio = sum / size;
        r.infinite_fraction = inf / size;
        r.reference_fraction = ref / size;
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const ClusterReport& a, const ClusterReport& b) {
        if (a.mean_ratio != b.mean_ratio)
            return a.mean_ratio > b.mean_ratio;
        if (a.infinite_fraction != b.infinite_fraction)
            return a.infinite_fraction > b.infinite_fraction;
        if (a.reference_fraction != b.reference_fraction)
            return a.reference_fraction > b.reference_fraction;
        return a.members.front() < b.members.front();
    });
    return out;
}

inline nlohmann::json cluster_report_json(const KeywordGraph& g, const std::vector<ClusterReport>& ranked)
{
    nlohmann::json clusters = nlohmann::json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& r = ranked[i];
        clusters.push_back({{"rank", i + 1}, {"community", r.community}, {"members", r.members}, {"mean_ratio", r.mean_ratio},
            {"infinite_fraction", r.infinite_fraction}, {"reference_fraction", r.reference_fraction}});
    }
    nlohmann::json nodes = nlohmann::json::object();
    for (const auto& [k, n] : g.nodes)
        nodes[k] = {{"ratio", to_json(n.weight)}, {"in_reference_library", n.in_reference_library}, {"support", n.support},
            {"community", g.community.count(k) ? g.community.at(k) : -1}};
    return {{"modularity", g.modularity}, {"clusters", clusters}, {"nodes", nodes}};
}

inline std::string to_dot(const KeywordGraph& g)
{
    auto quote = [](const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\')
                out += '\\';
            out += c;
        }
        return out + "\"";
    };
    std::string out = "graph keywords {\n";
    for (const auto& [k, n] : g.nodes) {
        out += "  " + quote(k) + " [community=" + std::to_string(g.community.count(k) ? g.community.at(k) : -1);
        out += ", ratio=" + (n.weight.infinite ? std::string("\"inf\"") : nlohmann::json(n.weight.value).dump());
        if (n.in_reference_library)
            out += ", reference=true";
        out += "];\n";
    }
    for (const auto& [e, w] : g.edges)
        out += "  " + quote(e.first) + " -- " + quote(e.second) + " [weight=" + std::to_string(w) + "];\n";
    return out + "}\n";
}

} // namespace fpkit
