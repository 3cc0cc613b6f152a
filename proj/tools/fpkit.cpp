// fpkit command-line tool.

#include <fpkit/pipeline.hpp>
#include <fpkit/report.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace fpkit;

namespace {

struct Flags {
    std::string corpus;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::size_t folds = 10;
    double variance_threshold = default_variance_threshold;
    std::size_t top_k = default_top_k;
    std::string vocab;
    std::string format = "plain";
    std::string overrides;
    std::string config;
    std::string library_dir;

    std::string labels;
    std::string features;
    std::string static_features;
    std::string dynamic_features;
    std::string static_model;
    std::string dynamic_model;
    std::string selected;
    std::string space = "static";
    std::string verdicts;
    std::string static_predictions;
    std::string dynamic_predictions;
    std::string csv;
    std::string dot;
    std::string reference_keywords;
    std::string generated_at;
    std::string psl;
    std::size_t min_support = default_min_support;
    std::size_t cap = default_record_cap;
    int max_depth = default_unpack_depth;
    std::size_t max_tree_depth = 0;
    bool no_context = false;
};

// Writes to --out, or standard output when it is empty or "-".
void output(const Flags& f, const std::string& data)
{
    if (f.out.empty() || f.out == "-")
        std::cout << data;
    else
        write_file(f.out, data);
}

const KeywordVocabulary& vocabulary(const Flags& f)
{
    static std::optional<KeywordVocabulary> custom;
    if (f.vocab.empty())
        return default_vocabulary();
    if (!custom)
        custom = load_vocabulary(f.vocab);
    return *custom;
}

const PublicSuffixList& suffixes(const Flags& f)
{
    static std::optional<PublicSuffixList> custom;
    if (f.psl.empty())
        return default_psl();
    if (!custom)
        custom = PublicSuffixList::load(f.psl);
    return *custom;
}

TrainOptions train_options(const Flags& f)
{
    TrainOptions t;
    t.selection.variance_threshold = f.variance_threshold;
    t.selection.top_k = f.top_k;
    t.tree.max_depth = f.max_tree_depth;
    return t;
}

std::map<std::string, Verdict> read_label_file(const std::string& path)
{
    return label_map(read_labels(read_file(path)));
}

std::map<std::string, SparseVector> read_features(const std::string& path)
{
    // static files list names, dynamic files map names to numbers
    const std::string text = read_file(path);
    for (auto line : split_lines(text)) {
        if (trim(line).empty())
            continue;
        auto j = json::parse(line);
        if (j.contains("features") && j["features"].is_object())
            return read_dynamic(text);
        break;
    }
    return read_static(text);
}

std::vector<std::string> read_lines(const std::string& path)
{
    std::vector<std::string> out;
    const std::string text = read_file(path);
    for (auto line : split_lines(text))
        if (!trim(line).empty() && trim(line).front() != '#')
            out.emplace_back(trim(line));
    return out;
}

std::vector<LibraryVersion> library(const Flags& f)
{
    if (f.library_dir.empty())
        return {};
    return load_library_versions(f.library_dir);
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

int cmd_ingest(const Flags& f)
{
    auto raw = ingest(f.corpus);
    auto m = dedupe(raw);
    std::size_t records = 0;
    for (const auto& [_, t] : m.traces)
        records += t.records.size();
    output(f, dump({{"manifest_lines", raw.scripts.size()}, {"scripts", m.scripts.size()}, {"traces", m.traces.size()},
        {"trace_records", records}, {"sites", m.sites().size()}, {"decode_errors", m.decode_errors()}}));
    return 0;
}

int cmd_label(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    auto labels = label_corpus(m);
    if (!f.overrides.empty())
        labels = apply_overrides(std::move(labels), read_overrides(read_file(f.overrides)));
    std::sort(labels.begin(), labels.end(), [](const Label& a, const Label& b) { return a.script_id < b.script_id; });
    output(f, write_labels(labels));
    return 0;
}

int cmd_featurize_static(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    StaticOptions opt;
    opt.max_depth = f.max_depth;
    opt.jobs = f.jobs;
    opt.features.context_retention = !f.no_context;
    auto rows = featurize_static(m, vocabulary(f), opt);
    std::size_t failures = 0;
    for (const auto& r : rows)
        failures += !r.vector;
    if (failures)
        std::cerr << failures << " of " << rows.size() << " scripts failed to parse\n";
    output(f, write_static(rows));
    return 0;
}

int cmd_featurize_dynamic(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    DynamicOptions opt;
    opt.cap = f.cap;
    opt.jobs = f.jobs;
    output(f, write_dynamic(featurize_dynamic(m, opt)));
    return 0;
}

int cmd_select(const Flags& f)
{
    auto m = labeled_matrix(read_features(f.features), read_label_file(f.labels));
    auto kept = variance_filter(m, f.variance_threshold);
    auto top = select_top_k(m.select(kept), f.top_k);
    std::cerr << m.names.size() << " features, " << kept.size() << " after variance filter, " << top.size() << " selected\n";
    std::string out;
    for (const auto& name : top)
        out += name + "\n";
    output(f, out);
    return 0;
}

int cmd_train(const Flags& f)
{
    auto m = labeled_matrix(read_features(f.features), read_label_file(f.labels));
    auto opt = train_options(f);
    DecisionTreeModel model;
    if (!f.selected.empty()) {
        auto names = read_lines(f.selected);
        model = train_tree(m.select(names), opt.tree, f.space, f.seed);
    } else {
        model = fit(m, opt, f.space, f.seed);
    }
    std::cerr << "trained on " << m.size() << " scripts: " << model.nodes.size() << " nodes, depth " << model.depth() << "\n";
    output(f, dump(to_json(model)));
    return 0;
}

int cmd_evaluate(const Flags& f)
{
    const auto labels = read_label_file(f.labels);
    std::map<std::string, SparseVector> sv, dv;
    if (!f.static_features.empty())
        sv = read_static(read_file(f.static_features));
    if (!f.dynamic_features.empty())
        dv = read_dynamic(read_file(f.dynamic_features));
    if (sv.empty() && dv.empty())
        throw CLI::ValidationError("evaluate", "needs --static and/or --dynamic feature files");
    auto result = cross_validate_combined(examples(sv, dv, labels), f.folds, f.seed, train_options(f));
    output(f, dump(to_json(result)));
    return 0;
}

int cmd_classify(const Flags& f)
{
    std::map<std::string, SparseVector> sv, dv;
    std::optional<DecisionTreeModel> sm, dm;
    if (!f.static_model.empty()) {
        sm = model_from_json(json::parse(read_file(f.static_model)));
        if (!f.static_features.empty())
            sv = read_static(read_file(f.static_features));
    }
    if (!f.dynamic_model.empty()) {
        dm = model_from_json(json::parse(read_file(f.dynamic_model)));
        if (!f.dynamic_features.empty())
            dv = read_dynamic(read_file(f.dynamic_features));
    }
    std::vector<std::string> ids;
    if (!f.corpus.empty()) {
        const auto m = load_corpus(f.corpus);
        for (const auto* s : scripts_by_id(m))
            ids.push_back(s->script_id);
    } else {
        std::set<std::string> all;
        for (const auto& [id, _] : sv)
            all.insert(id);
        for (const auto& [id, _] : dv)
            all.insert(id);
        ids.assign(all.begin(), all.end());
    }
    auto result = classify(ids, sv, dv, sm ? &*sm : nullptr, dm ? &*dm : nullptr);
    if (!result.unclassifiable.empty())
        std::cerr << result.unclassifiable.size() << " scripts unclassifiable\n";
    output(f, dump(to_json(result)));
    return 0;
}

std::map<std::string, Verdict> read_predictions(const std::string& path, const char* space)
{
    std::map<std::string, Verdict> out;
    if (path.empty())
        return out;
    auto j = json::parse(read_file(path));
    for (const auto& v : j.at("verdicts")) {
        auto value = v.contains(space) && v[space].is_string() ? v[space] : v.at("verdict");
        out[v.at("script_id").get<std::string>()] = parse_verdict(value.get<std::string>());
    }
    return out;
}

int cmd_combine(const Flags& f)
{
    auto s = read_predictions(f.static_predictions, "static");
    auto d = read_predictions(f.dynamic_predictions, "dynamic");
    std::set<std::string> ids;
    for (const auto& [id, _] : s)
        ids.insert(id);
    for (const auto& [id, _] : d)
        ids.insert(id);
    ClassifyResult r;
    for (const auto& id : ids) {
        Classification c;
        c.script_id = id;
        if (auto it = s.find(id); it != s.end())
            c.static_label = it->second;
        if (auto it = d.find(id); it != d.end())
            c.dynamic_label = it->second;
        c.combined = combine(c.static_label, c.dynamic_label);
        r.verdicts.push_back(c);
    }
    output(f, dump(to_json(r)));
    return 0;
}

int cmd_similarity(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    auto labels = read_label_file(f.labels);
    auto versions = library(f);
    if (versions.empty())
        throw CLI::ValidationError("similarity", "--library-dir must contain at least one library version");
    auto scripts = scripts_by_id(m);
    std::vector<Similarity> best(scripts.size());
    parallel_for(scripts.size(), f.jobs, [&](std::size_t i) { best[i] = best_similarity(tokenize_script(scripts[i]->content).tokens, versions); });
    std::vector<double> scores;
    std::vector<bool> truth;
    json per_script = json::array();
    for (std::size_t i = 0; i < scripts.size(); ++i) {
        auto it = labels.find(scripts[i]->script_id);
        if (it == labels.end())
            continue;
        scores.push_back(best[i].score);
        truth.push_back(it->second == Verdict::fingerprinting);
        per_script.push_back({{"script_id", scripts[i]->script_id}, {"score", best[i].score}, {"version", best[i].version}});
    }
    auto sweep = threshold_sweep(scores, truth);
    auto j = to_json(sweep);
    j["scripts"] = per_script;
    output(f, dump(j));
    if (!f.csv.empty())
        write_file(f.csv, curve_csv(sweep));
    return 0;
}

int cmd_cluster(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    auto labels = read_label_file(f.labels);
    const auto& vocab = vocabulary(f);
    std::vector<ScriptKeywords> rows;
    for (const auto* s : scripts_by_id(m)) {
        auto it = labels.find(s->script_id);
        if (it == labels.end())
            continue;
        ScriptKeywords k;
        k.script_id = s->script_id;
        k.keywords = keyword_occurrences(s->content, vocab);
        k.label = it->second;
        for (const auto& o : s->occurrences)
            k.sites.insert(o.site_url);
        rows.push_back(std::move(k));
    }
    auto stats = prevalence_ratios(rows);
    std::set<std::string> reference;
    if (!f.reference_keywords.empty())
        for (auto& k : read_lines(f.reference_keywords))
            reference.insert(k);
    else
        for (const auto& v : library(f))
            for (const auto& t : keyword_occurrences(read_file(fs::path(f.library_dir) / v.id), vocab))
                reference.insert(t);
    auto graph = build_graph(rows, stats, reference, f.min_support);
    json j;
    if (graph.nodes.empty()) {
        j = {{"modularity", 0.0}, {"clusters", json::array()}, {"nodes", json::object()}};
    } else {
        cluster(graph, f.seed);
        j = cluster_report_json(graph, rank_clusters(graph));
    }
    json ratios = json::array();
    for (const auto& s : stats)
        ratios.push_back(to_json(s));
    j["prevalence"] = ratios;
    output(f, dump(j));
    if (!f.dot.empty())
        write_file(f.dot, to_dot(graph));
    return 0;
}

int cmd_emit_list(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    auto verdicts = read_verdicts(read_file(f.verdicts));
    auto format = parse_list_format(f.format);
    auto list = build_filter_list(verdicts, m, suffixes(f), f.generated_at.empty() ? default_generated_at() : f.generated_at);
    output(f, emit(list, format));
    return 0;
}

int cmd_report(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    auto verdicts = read_verdicts(read_file(f.verdicts));
    auto labels = read_label_file(f.labels);
    auto versions = library(f);
    if (f.out.empty())
        throw CLI::ValidationError("report", "--out must name a directory");
    fs::create_directories(f.out);
    std::size_t written = 0;
    for (const auto* s : scripts_by_id(m)) {
        auto v = verdicts.find(s->script_id);
        auto l = labels.find(s->script_id);
        if (v == verdicts.end() || l == labels.end())
            continue;
        ReportInput in {s, m.trace(s->script_id), v->second.label, l->second, &versions};
        if (auto text = disagreement_report(in)) {
            write_file(fs::path(f.out) / (s->script_id + ".md"), *text);
            ++written;
        }
    }
    std::cerr << written << " disagreement reports written to " << f.out << "\n";
    return 0;
}

int cmd_pipeline(const Flags& f)
{
    auto m = load_corpus(f.corpus);
    PipelineOptions opt;
    opt.seed = f.seed;
    opt.folds = f.folds;
    opt.jobs = f.jobs;
    opt.train = train_options(f);
    opt.static_options.max_depth = f.max_depth;
    opt.static_options.features.context_retention = !f.no_context;
    opt.dynamic_options.cap = f.cap;
    if (!f.overrides.empty())
        opt.overrides = fs::path(f.overrides);
    if (!f.generated_at.empty())
        opt.generated_at = f.generated_at;
    if (f.out.empty())
        throw CLI::ValidationError("pipeline", "--out must name a directory");
    auto out = run_pipeline(m, vocabulary(f), suffixes(f), opt);
    const fs::path dir = f.out;
    write_file(dir / "labels.jsonl", out.labels);
    write_file(dir / "static.jsonl", out.static_features);
    write_file(dir / "dynamic.jsonl", out.dynamic_features);
    write_file(dir / "metrics.json", out.metrics);
    write_file(dir / "static_model.json", out.static_model);
    write_file(dir / "dynamic_model.json", out.dynamic_model);
    write_file(dir / "verdicts.json", out.verdicts);
    write_file(dir / "filterlist.txt", out.filter_list_plain);
    write_file(dir / "filterlist.rules", out.filter_list_rules);
    write_file(dir / "filterlist.json", out.filter_list_extension);
    return 0;
}

/// Removes `--config FILE` from args and appends the file's key = value
/// entries as flags of the chosen subcommand, skipping flags already given.
/// Keys may be bare or under a [subcommand] section; keys the subcommand
/// does not know are ignored.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args)
{
    std::optional<std::string> path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 == args.size())
                throw std::runtime_error("--config needs a file name");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!path)
        return rest;
    CLI::App* sub = nullptr;
    for (const auto& a : rest)
        if (!a.empty() && a.front() != '-') {
            sub = app.get_subcommand_no_throw(a);
            break;
        }
    if (!sub)
        return rest;
    std::ifstream in(*path);
    if (!in)
        throw std::runtime_error("cannot read config file '" + *path + "'");
    auto given = [&](const std::string& flag) {
        return std::any_of(rest.begin(), rest.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    std::vector<std::string> extra;
    for (const auto& item : CLI::ConfigBase().from_config(in)) {
        if (item.name == "++" || item.name == "--")
            continue;
        if (!item.parents.empty() && item.parents != std::vector<std::string> {sub->get_name()})
            continue;
        const std::string flag = "--" + item.name;
        const CLI::Option* opt = sub->get_option_no_throw(flag);
        if (!opt || flag == "--config" || given(flag))
            continue;
        if (opt->get_type_size() == 0) {
            if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "1"))
                extra.push_back(flag);
            continue;
        }
        extra.push_back(flag);
        extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
    }
    rest.insert(rest.end(), extra.begin(), extra.end());
    return rest;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"Fingerprinting-script detection pipeline"};
    app.require_subcommand(1);
    Flags f;

    auto corpus = [&](CLI::App* c, bool required = true) {
        auto* o = c->add_option("--corpus", f.corpus, "Corpus directory");
        if (required)
            o->required()->check(CLI::ExistingDirectory);
    };
    auto out = [&](CLI::App* c, const char* what = "Output file (default: standard output)") { c->add_option("--out", f.out, what); };
    auto jobs = [&](CLI::App* c) { c->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber); };
    auto seed = [&](CLI::App* c) { c->add_option("--seed", f.seed, "Random seed"); };
    auto selection = [&](CLI::App* c) {
        c->add_option("--variance-threshold", f.variance_threshold, "Drop features with variance at or below this");
        c->add_option("--top-k", f.top_k, "Keep this many features by information gain");
        c->add_option("--max-tree-depth", f.max_tree_depth, "Tree depth limit (0: none)");
    };
    auto labels = [&](CLI::App* c) { c->add_option("--labels", f.labels, "Labels JSONL")->required()->check(CLI::ExistingFile); };
    auto vocab = [&](CLI::App* c) { c->add_option("--vocab", f.vocab, "Keyword vocabulary file")->check(CLI::ExistingFile); };
    auto library_dir = [&](CLI::App* c) { c->add_option("--library-dir", f.library_dir, "Directory of reference library versions")->check(CLI::ExistingDirectory); };
    auto static_opts = [&](CLI::App* c) {
        c->add_option("--max-depth", f.max_depth, "eval/Function unpacking depth");
        c->add_flag("--no-context", f.no_context, "Disable control-flow context retention");
    };

    std::map<CLI::App*, int (*)(const Flags&)> handlers;

    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a corpus and print a summary");
    corpus(ingest_cmd);
    out(ingest_cmd);
    handlers[ingest_cmd] = cmd_ingest;

    auto* label_cmd = app.add_subcommand("label", "Heuristic ground-truth labels");
    corpus(label_cmd);
    out(label_cmd);
    label_cmd->add_option("--overrides", f.overrides, "Manual overrides JSONL")->check(CLI::ExistingFile);
    handlers[label_cmd] = cmd_label;

    auto* fs_cmd = app.add_subcommand("featurize-static", "AST parent:child features");
    corpus(fs_cmd);
    out(fs_cmd);
    jobs(fs_cmd);
    vocab(fs_cmd);
    static_opts(fs_cmd);
    handlers[fs_cmd] = cmd_featurize_static;

    auto* fd_cmd = app.add_subcommand("featurize-dynamic", "Execution-trace features");
    corpus(fd_cmd);
    out(fd_cmd);
    jobs(fd_cmd);
    fd_cmd->add_option("--cap", f.cap, "Records kept per symbol and access kind");
    handlers[fd_cmd] = cmd_featurize_dynamic;

    auto* select_cmd = app.add_subcommand("select", "Variance filter and information-gain top-k");
    select_cmd->add_option("--features", f.features, "Feature JSONL")->required()->check(CLI::ExistingFile);
    labels(select_cmd);
    out(select_cmd);
    selection(select_cmd);
    handlers[select_cmd] = cmd_select;

    auto* train_cmd = app.add_subcommand("train", "Train a decision tree");
    train_cmd->add_option("--features", f.features, "Feature JSONL")->required()->check(CLI::ExistingFile);
    labels(train_cmd);
    out(train_cmd);
    seed(train_cmd);
    selection(train_cmd);
    train_cmd->add_option("--selected", f.selected, "Feature names to use (skips selection)")->check(CLI::ExistingFile);
    train_cmd->add_option("--space", f.space, "Feature space tag")->check(CLI::IsMember({"static", "dynamic"}));
    handlers[train_cmd] = cmd_train;

    auto* eval_cmd = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
    eval_cmd->add_option("--static", f.static_features, "Static feature JSONL")->check(CLI::ExistingFile);
    eval_cmd->add_option("--dynamic", f.dynamic_features, "Dynamic feature JSONL")->check(CLI::ExistingFile);
    labels(eval_cmd);
    out(eval_cmd);
    seed(eval_cmd);
    selection(eval_cmd);
    eval_cmd->add_option("--folds", f.folds, "Number of folds")->check(CLI::Range(2, 1000));
    handlers[eval_cmd] = cmd_evaluate;

    auto* classify_cmd = app.add_subcommand("classify", "Apply static and dynamic models");
    corpus(classify_cmd, false);
    classify_cmd->add_option("--static", f.static_features, "Static feature JSONL")->check(CLI::ExistingFile);
    classify_cmd->add_option("--dynamic", f.dynamic_features, "Dynamic feature JSONL")->check(CLI::ExistingFile);
    classify_cmd->add_option("--static-model", f.static_model, "Static model JSON")->check(CLI::ExistingFile);
    classify_cmd->add_option("--dynamic-model", f.dynamic_model, "Dynamic model JSON")->check(CLI::ExistingFile);
    out(classify_cmd);
    handlers[classify_cmd] = cmd_classify;

    auto* combine_cmd = app.add_subcommand("combine", "OR-combine static and dynamic predictions");
    combine_cmd->add_option("--static", f.static_predictions, "Verdicts JSON with static predictions")->check(CLI::ExistingFile);
    combine_cmd->add_option("--dynamic", f.dynamic_predictions, "Verdicts JSON with dynamic predictions")->check(CLI::ExistingFile);
    out(combine_cmd);
    handlers[combine_cmd] = cmd_combine;

    auto* sim_cmd = app.add_subcommand("similarity", "Jaccard baseline against library versions");
    corpus(sim_cmd);
    labels(sim_cmd);
    library_dir(sim_cmd);
    jobs(sim_cmd);
    out(sim_cmd);
    sim_cmd->add_option("--csv", f.csv, "Also write the sweep curve as CSV");
    handlers[sim_cmd] = cmd_similarity;

    auto* cluster_cmd = app.add_subcommand("cluster", "Keyword prevalence ratios and Louvain clusters");
    corpus(cluster_cmd);
    labels(cluster_cmd);
    vocab(cluster_cmd);
    seed(cluster_cmd);
    out(cluster_cmd);
    library_dir(cluster_cmd);
    cluster_cmd->add_option("--reference-keywords", f.reference_keywords, "Reference-library keywords, one per line")->check(CLI::ExistingFile);
    cluster_cmd->add_option("--min-support", f.min_support, "Minimum scripts per keyword node");
    cluster_cmd->add_option("--dot", f.dot, "Also write the graph in DOT format");
    handlers[cluster_cmd] = cmd_cluster;

    auto* emit_cmd = app.add_subcommand("emit-list", "Domain filter list from verdicts");
    corpus(emit_cmd);
    emit_cmd->add_option("--verdicts", f.verdicts, "Verdicts JSON from classify")->required()->check(CLI::ExistingFile);
    emit_cmd->add_option("--format", f.format, "plain, rules or extension")->check(CLI::IsMember({"plain", "rules", "extension"}));
    emit_cmd->add_option("--generated-at", f.generated_at, "Timestamp written into the list");
    emit_cmd->add_option("--psl", f.psl, "Public suffix list file (default: bundled snapshot or FPKIT_PSL)")->check(CLI::ExistingFile);
    out(emit_cmd);
    handlers[emit_cmd] = cmd_emit_list;

    auto* report_cmd = app.add_subcommand("report", "One report per script where verdict and label disagree");
    corpus(report_cmd);
    report_cmd->add_option("--verdicts", f.verdicts, "Verdicts JSON from classify")->required()->check(CLI::ExistingFile);
    labels(report_cmd);
    library_dir(report_cmd);
    out(report_cmd, "Output directory");
    handlers[report_cmd] = cmd_report;

    auto* pipe_cmd = app.add_subcommand("pipeline", "Run label through emit-list in one go");
    corpus(pipe_cmd);
    out(pipe_cmd, "Output directory");
    seed(pipe_cmd);
    jobs(pipe_cmd);
    vocab(pipe_cmd);
    selection(pipe_cmd);
    static_opts(pipe_cmd);
    pipe_cmd->add_option("--folds", f.folds, "Number of folds")->check(CLI::Range(2, 1000));
    pipe_cmd->add_option("--overrides", f.overrides, "Manual overrides JSONL")->check(CLI::ExistingFile);
    pipe_cmd->add_option("--cap", f.cap, "Records kept per symbol and access kind");
    pipe_cmd->add_option("--generated-at", f.generated_at, "Timestamp written into the lists");
    pipe_cmd->add_option("--psl", f.psl, "Public suffix list file (default: bundled snapshot or FPKIT_PSL)")->check(CLI::ExistingFile);
    handlers[pipe_cmd] = cmd_pipeline;

    std::string config_help = "Read flags from a key = value file; command-line flags win";
    for (auto& [sub, _] : handlers)
        sub->add_option("--config", f.config, config_help);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = apply_config(app, std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::reverse(args.begin(), args.end());

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (auto* sub : app.get_subcommands())
            return handlers.at(sub)(f);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
