#pragma once

// File formats and orchestration shared by the command-line tool and tests.

#include <fpkit/api_analysis.hpp>
#include <fpkit/classifier.hpp>
#include <fpkit/corpus.hpp>
#include <fpkit/dynamic_features.hpp>
#include <fpkit/filterlist.hpp>
#include <fpkit/labeler.hpp>
#include <fpkit/similarity.hpp>
#include <fpkit/static_features.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace fpkit {

/// Runs fn(i) for i in [0, n) on `jobs` threads. Callers write results into
/// slot i, so output order never depends on scheduling.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn)
{
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next {0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < std::min(jobs, n); ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

/// Unique scripts ordered by script_id.
inline std::vector<const ScriptRecord*> scripts_by_id(const CorpusManifest& m)
{
    std::vector<const ScriptRecord*> out;
    std::set<std::string> seen;
    for (const auto& s : m.scripts)
        if (seen.insert(s.script_id).second)
            out.push_back(&s);
    std::sort(out.begin(), out.end(), [](const ScriptRecord* a, const ScriptRecord* b) { return a->script_id < b->script_id; });
    return out;
}

inline CorpusManifest load_corpus(const std::filesystem::path& root)
{
    return dedupe(ingest(root));
}

// ---- feature files --------------------------------------------------------

struct StaticOptions {
    int max_depth = default_unpack_depth;
    StaticFeatureOptions features;
    std::size_t jobs = 1;
};

inline std::vector<StaticAnalysis> featurize_static(const CorpusManifest& m, const KeywordVocabulary& vocab, const StaticOptions& opt = {})
{
    auto scripts = scripts_by_id(m);
    std::vector<StaticAnalysis> out(scripts.size());
    parallel_for(scripts.size(), opt.jobs, [&](std::size_t i) { out[i] = analyze_static(*scripts[i], vocab, opt.max_depth, opt.features); });
    return out;
}

inline std::string write_static(const std::vector<StaticAnalysis>& rows)
{
    std::string out;
    for (const auto& r : rows)
        out += to_json(r).dump() + "\n";
    return out;
}

/// script_id -> feature vector; parse failures have no entry.
inline std::map<std::string, SparseVector> read_static(const std::string& text)
{
    std::map<std::string, SparseVector> out;
    for (auto line : split_lines(text)) {
        if (trim(line).empty())
            continue;
        auto j = json::parse(line);
        if (!j.contains("features"))
            continue;
        std::set<std::string> f;
        for (const auto& name : j["features"])
            f.insert(name.get<std::string>());
        out[j.at("script_id").get<std::string>()] = to_sparse(f);
    }
    return out;
}

struct DynamicOptions {
    std::size_t cap = default_record_cap;
    std::size_t jobs = 1;
};

/// Scripts whose trace has at least one record.
inline std::vector<DynamicFeatureVector> featurize_dynamic(const CorpusManifest& m, const DynamicOptions& opt = {})
{
    std::vector<const ExecutionTrace*> traces;
    for (const auto* s : scripts_by_id(m))
        if (const auto* t = m.trace(s->script_id); t && !t->records.empty())
            traces.push_back(t);
    std::vector<DynamicFeatureVector> out(traces.size());
    parallel_for(traces.size(), opt.jobs, [&](std::size_t i) { out[i] = extract_dynamic_features(cap_records(*traces[i], opt.cap)); });
    return out;
}

inline std::string write_dynamic(const std::vector<DynamicFeatureVector>& rows)
{
    std::string out;
    for (const auto& r : rows)
        out += to_json(r).dump() + "\n";
    return out;
}

inline std::map<std::string, SparseVector> read_dynamic(const std::string& text)
{
    std::map<std::string, SparseVector> out;
    for (auto line : split_lines(text)) {
        if (trim(line).empty())
            continue;
        auto v = dynamic_vector_from_json(json::parse(line));
        out[v.script_id] = std::move(v.features);
    }
    return out;
}

inline std::map<std::string, Verdict> label_map(const std::vector<Label>& labels)
{
    std::map<std::string, Verdict> out;
    for (const auto& l : labels)
        out[l.script_id] = l.value;
    return out;
}

/// Matrix of the labeled scripts that have a vector, in script_id order.
inline FeatureMatrix labeled_matrix(const std::map<std::string, SparseVector>& vectors, const std::map<std::string, Verdict>& labels)
{
    std::vector<std::string> ids;
    std::vector<SparseVector> rows;
    std::vector<int> y;
    for (const auto& [id, v] : vectors) {
        auto it = labels.find(id);
        if (it == labels.end())
            continue;
        ids.push_back(id);
        rows.push_back(v);
        y.push_back(it->second == Verdict::fingerprinting);
    }
    return make_matrix(ids, rows, y);
}

/// Every labeled script with whichever vectors it has, in script_id order.
inline std::vector<Example> examples(const std::map<std::string, SparseVector>& static_vectors,
    const std::map<std::string, SparseVector>& dynamic_vectors, const std::map<std::string, Verdict>& labels)
{
    std::vector<Example> out;
    for (const auto& [id, truth] : labels) {
        Example e;
        e.script_id = id;
        e.truth = truth;
        if (auto it = static_vectors.find(id); it != static_vectors.end())
            e.static_vector = it->second;
        if (auto it = dynamic_vectors.find(id); it != dynamic_vectors.end())
            e.dynamic_vector = it->second;
        out.push_back(std::move(e));
    }
    return out;
}

// ---- verdicts -------------------------------------------------------------

struct Classification {
    std::string script_id;
    std::optional<Verdict> static_label;
    std::optional<Verdict> dynamic_label;
    Verdict combined = Verdict::non_fingerprinting;
};

struct ClassifyResult {
    std::vector<Classification> verdicts;
    std::vector<std::string> unclassifiable;
};

inline ClassifyResult classify(const std::vector<std::string>& script_ids, const std::map<std::string, SparseVector>& static_vectors,
    const std::map<std::string, SparseVector>& dynamic_vectors, const DecisionTreeModel* static_model, const DecisionTreeModel* dynamic_model)
{
    ClassifyResult r;
    for (const auto& id : script_ids) {
        Classification c;
        c.script_id = id;
        if (auto it = static_vectors.find(id); static_model && it != static_vectors.end())
            c.static_label = predict(*static_model, it->second).label;
        if (auto it = dynamic_vectors.find(id); dynamic_model && it != dynamic_vectors.end())
            c.dynamic_label = predict(*dynamic_model, it->second).label;
        if (!c.static_label && !c.dynamic_label) {
            r.unclassifiable.push_back(id);
            continue;
        }
        c.combined = combine(c.static_label, c.dynamic_label);
        r.verdicts.push_back(std::move(c));
    }
    return r;
}

inline json to_json(const ClassifyResult& r)
{
    json verdicts = json::array();
    for (const auto& c : r.verdicts) {
        json j = {{"script_id", c.script_id}, {"verdict", to_string(c.combined)}};
        j["static"] = c.static_label ? json(to_string(*c.static_label)) : json(nullptr);
        j["dynamic"] = c.dynamic_label ? json(to_string(*c.dynamic_label)) : json(nullptr);
        verdicts.push_back(std::move(j));
    }
    return {{"verdicts", verdicts}, {"unclassifiable", r.unclassifiable}};
}

inline std::map<std::string, ScriptVerdict> read_verdicts(const std::string& text)
{
    auto j = json::parse(text);
    std::map<std::string, ScriptVerdict> out;
    for (const auto& v : j.at("verdicts")) {
        ScriptVerdict sv;
        sv.label = parse_verdict(v.at("verdict").get<std::string>());
        for (const char* space : {"static", "dynamic"})
            if (v.contains(space) && v[space].is_string() && v[space].get<std::string>() == "fingerprinting")
                sv.sources.insert(space);
        out[v.at("script_id").get<std::string>()] = std::move(sv);
    }
    return out;
}

// ---- whole pipeline -------------------------------------------------------

struct PipelineOptions {
    std::uint64_t seed = 0;
    std::size_t folds = 10;
    std::size_t jobs = 1;
    TrainOptions train;
    StaticOptions static_options;
    DynamicOptions dynamic_options;
    std::optional<std::filesystem::path> overrides;
    std::string generated_at = default_generated_at();
};

struct PipelineOutputs {
    std::string labels;
    std::string static_features;
    std::string dynamic_features;
    std::string metrics;
    std::string static_model;
    std::string dynamic_model;
    std::string verdicts;
    std::string filter_list_plain;
    std::string filter_list_rules;
    std::string filter_list_extension;
};

/// label → featurize → cross-validate → train on everything → classify →
/// filter lists. Every output is serialized text.
inline PipelineOutputs run_pipeline(const CorpusManifest& m, const KeywordVocabulary& vocab, const PublicSuffixList& psl, PipelineOptions opt)
{
    PipelineOutputs out;
    auto labels = label_corpus(m);
    if (opt.overrides)
        labels = apply_overrides(std::move(labels), read_overrides(read_file(*opt.overrides)));
    out.labels = write_labels(labels);
    const auto truth = label_map(labels);

    opt.static_options.jobs = opt.jobs;
    opt.dynamic_options.jobs = opt.jobs;
    out.static_features = write_static(featurize_static(m, vocab, opt.static_options));
    out.dynamic_features = write_dynamic(featurize_dynamic(m, opt.dynamic_options));
    const auto sv = read_static(out.static_features);
    const auto dv = read_dynamic(out.dynamic_features);

    out.metrics = to_json(cross_validate_combined(examples(sv, dv, truth), opt.folds, opt.seed, opt.train)).dump(2) + "\n";

    const auto smodel = fit(labeled_matrix(sv, truth), opt.train, "static", opt.seed);
    const auto dmodel = fit(labeled_matrix(dv, truth), opt.train, "dynamic", opt.seed);
    out.static_model = to_json(smodel).dump(2) + "\n";
    out.dynamic_model = to_json(dmodel).dump(2) + "\n";

    std::vector<std::string> ids;
    for (const auto* s : scripts_by_id(m))
        ids.push_back(s->script_id);
    const auto result = classify(ids, sv, dv, &smodel, &dmodel);
    out.verdicts = to_json(result).dump(2) + "\n";

    const auto list = build_filter_list(read_verdicts(out.verdicts), m, psl, opt.generated_at);
    out.filter_list_plain = emit(list, ListFormat::plain);
    out.filter_list_rules = emit(list, ListFormat::rules);
    out.filter_list_extension = emit(list, ListFormat::extension);
    return out;
}

} // namespace fpkit
