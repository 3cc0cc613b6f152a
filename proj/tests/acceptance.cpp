// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fpkit/pipeline.hpp>

#include "support/common.hpp"
#include "support/keywords.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/traces.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

using namespace fpkit;
using namespace fpkit::testkit;

namespace {

class Check {
public:
    void expect(bool ok, const std::string& what)
    {
        if (ok)
            return;
        if (failures_++ < 5)
            notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    void note(const std::string& s) { info_ += (info_.empty() ? "" : ", ") + s; }

    std::size_t failures() const { return failures_; }
    const std::string& notes() const { return notes_; }
    const std::string& info() const { return info_; }

private:
    std::size_t failures_ = 0;
    std::string notes_, info_;
};

struct Criterion {
    std::string name;
    double time_limit;
    std::function<void(Check&)> run;
};

std::string fmt(double x)
{
    std::ostringstream o;
    o.precision(4);
    o << x;
    return o.str();
}

bool contains_all(const std::set<std::string>& hay, const std::set<std::string>& needles)
{
    return std::includes(hay.begin(), hay.end(), needles.begin(), needles.end());
}

double feature(const DynamicFeatureVector& v, const std::string& name)
{
    auto it = v.features.find(name);
    return it == v.features.end() ? -1 : it->second;
}

void static_fixture(Check& c)
{
    auto f = extract_static_features(js::parse(fixture("canvas_font_unpacked.js")), default_vocabulary());
    for (const auto& name : canvas_font_features())
        c.expect(f.count(name) == 1, "missing " + name);
    c.note(std::to_string(canvas_font_features().size()) + " expected pairs present among " + std::to_string(f.size()));
}

void dynamic_fixture(Check& c)
{
    auto v = extract_dynamic_features(cap_records(canvas_text_probe_trace()));
    const std::vector<std::pair<std::string, double>> want = {
        {"HTMLCanvasElement.getContext", 1},
        {"CanvasRenderingContext2D.measureText#textlen", 7},
        {"HTMLCanvasElement.width#value", 100},
        {"HTMLCanvasElement.height#value", 100},
    };
    for (const auto& [name, value] : want)
        c.expect(feature(v, name) == value, name + " = " + fmt(feature(v, name)));
}

void unpacking(Check& c)
{
    auto packed = make_script(fixture("canvas_font_packed.js"), "https://a.example/", "https://a.example/p.js");
    auto stub = analyze_static(packed, default_vocabulary(), 0);
    c.expect(stub.vector && stub.vector->features == std::set<std::string> {"CallExpression:eval"}, "packed script without unpacking is not just the eval stub");
    auto u = unpack(packed);
    c.expect(u.children.size() == 1, "expected one unpacked child, got " + std::to_string(u.children.size()));
    if (!u.children.empty() && u.children[0].ast)
        c.expect(contains_all(extract_static_features(*u.children[0].ast, default_vocabulary()), canvas_font_features()), "child lacks the canvas-font pairs");
    auto full = analyze_static(packed, default_vocabulary());
    c.expect(full.vector && contains_all(full.vector->features, canvas_font_features()), "unpacked script vector lacks the canvas-font pairs");
}

void labeler(Check& c)
{
    for (unsigned mask = 0; mask < 16; ++mask) {
        auto l = label(trigger_trace(mask));
        c.expect(l.triggered == mask_triggers(mask), "mask " + std::to_string(mask) + " triggers differ");
        c.expect(l.value == (mask ? Verdict::fingerprinting : Verdict::non_fingerprinting), "mask " + std::to_string(mask) + " verdict");
    }
    auto fonts = [](std::size_t f, std::size_t m) {
        TraceBuilder b("f");
        add_fonts(b, f, m);
        return label_canvas_font(b.trace());
    };
    c.expect(!fonts(20, 20) && !fonts(20, 21) && !fonts(21, 20), "20 fonts or 20 measurements must not trigger");
    c.expect(fonts(21, 21), "21 fonts with 21 measurements must trigger");
    c.note("16 trigger combinations plus font boundaries");
}

void information_gain_oracle(Check& c)
{
    Rng rng(7);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        std::vector<double> col(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = trial % 2 ? std::round(rng.uniform() * 1000) / 8 : static_cast<double>(rng.below(3));
            y[i] = rng.chance(0.4);
        }
        worst = std::max(worst, std::abs(information_gain(col, y).gain - oracle_gain(col, y)));
    }
    c.expect(worst <= 1e-9, "max error " + fmt(worst));
    c.note("1000 columns, max error " + fmt(worst));
}

void tree_oracle(Check& c)
{
    std::size_t datasets = 0, mismatches = 0;
    for (unsigned d = 1; d <= 3; ++d)
        for_each_binary_dataset(d, 8, [&](const std::vector<BinaryRow>& rows) {
            ++datasets;
            ReferenceTree ref(rows, d);
            auto model = train_tree(binary_matrix(rows, d));
            for (unsigned x = 0; x < (1u << d); ++x)
                if (ref.predict(x) != (predict(model, cube_point(x, d)).label == Verdict::fingerprinting)) {
                    ++mismatches;
                    break;
                }
        });
    c.expect(mismatches == 0, std::to_string(mismatches) + " datasets differ");
    c.note(std::to_string(datasets) + " datasets");
}

void end_to_end(Check& c)
{
    auto corpus = generate_synthetic(2024, 100, 100);
    PipelineOptions opt;
    opt.seed = 0;
    opt.folds = 10;
    opt.jobs = 4;
    opt.generated_at = "1970-01-01T00:00:00Z";
    auto out = run_pipeline(corpus.manifest, default_vocabulary(), default_psl(), opt);
    const auto m = json::parse(out.metrics).at("combined");
    const double precision = m.at("precision"), recall = m.at("recall");
    c.expect(recall >= 0.90, "recall " + fmt(recall));
    c.expect(precision >= 0.90, "precision " + fmt(precision));
    std::size_t agree = 0;
    for (const auto& [id, v] : label_map(read_labels(out.labels)))
        agree += corpus.intended.count(id) && corpus.intended.at(id) == v;
    c.note(std::to_string(agree) + "/" + std::to_string(corpus.intended.size()) + " heuristic labels match the generator");
    c.note(std::to_string(corpus.manifest.scripts.size()) + " scripts, recall " + fmt(recall) + ", precision " + fmt(precision));
}

void jaccard_baseline(Check& c)
{
    const std::set<std::string> ab = {"a", "b"}, abc = {"a", "b", "c"}, bcd = {"b", "c", "d"};
    c.expect(jaccard(ab, ab) == 1.0, "identical sets");
    c.expect(jaccard(abc, bcd) == 0.5, "half overlap");
    c.expect(jaccard({"a"}, {"b"}) == 0.0, "disjoint sets");

    auto r = threshold_sweep({0.9, 0.7, 0.7, 0.4, 0.2, 0.1}, {true, true, false, true, false, false});
    struct Row {
        double th;
        std::size_t tp, fp, tn, fn;
    };
    const std::vector<Row> expect = {{-0.9, 3, 3, 0, 0}, {0.15, 3, 2, 1, 0}, {0.3, 3, 1, 2, 0}, {0.55, 2, 1, 2, 1}, {0.8, 1, 0, 3, 2}, {0.9, 0, 0, 3, 3}};
    c.expect(r.curve.size() == expect.size(), "curve has " + std::to_string(r.curve.size()) + " points");
    for (std::size_t i = 0; i < std::min(expect.size(), r.curve.size()); ++i) {
        const auto& p = r.curve[i];
        const auto& e = expect[i];
        c.expect(std::abs(p.threshold - e.th) < 1e-12 && p.tp == e.tp && p.fp == e.fp && p.tn == e.tn && p.fn == e.fn, "point " + std::to_string(i));
    }
    c.expect(std::abs(r.best.threshold - 0.3) < 1e-12 && r.best.tp == 3 && r.best.fp == 1 && r.best.tn == 2 && r.best.fn == 0, "best threshold");
}

void louvain_checks(Check& c)
{
    std::size_t recovered = 0;
    std::vector<WeightedGraph> graphs = small_structured_graphs();
    for (std::size_t i = 0; i < 20; ++i) {
        auto p = planted_instance(0, i);
        recovered += same_partition(louvain(p.graph, 0).community, p.truth);
        graphs.push_back(p.graph);
    }
    c.expect(recovered == 20, std::to_string(recovered) + "/20 planted partitions recovered");
    double worst = 0;
    std::size_t small = 0;
    for (const auto& g : graphs) {
        auto r = louvain(g, 0);
        worst = std::max(worst, std::abs(r.modularity - oracle_modularity(g, r.community)));
        if (g.n <= 8) {
            ++small;
            const double best = brute_force_max_modularity(g);
            c.expect(std::abs(r.modularity - best) <= 1e-12, "n=" + std::to_string(g.n) + " Q " + fmt(r.modularity) + " < optimum " + fmt(best));
        }
    }
    c.expect(worst <= 1e-12, "reported Q differs from recomputed by " + fmt(worst));
    c.note(std::to_string(graphs.size()) + " graphs, " + std::to_string(small) + " checked against brute force");
}

void prevalence(Check& c)
{
    const auto base = fifty_scripts();
    auto r = prevalence_ratios(base);
    c.expect(!r.empty() && r.front().keyword == "MediaDeviceInfo" && r.front().ratio.infinite, "exclusive keyword is not first and infinite");
    for (std::size_t i = 1; i < r.size(); ++i)
        c.expect(!r[i].ratio.infinite, r[i].keyword + " unexpectedly infinite");
    auto d = prevalence_ratios(duplicated(base));
    c.expect(d.size() == r.size(), "duplication changed the keyword count");
    for (std::size_t i = 0; i < std::min(d.size(), r.size()); ++i)
        c.expect(d[i].keyword == r[i].keyword && d[i].ratio == r[i].ratio, "duplication changed " + r[i].keyword);
}

void etld1_and_determinism(Check& c)
{
    std::istringstream in(read_file(test_dir() / "data" / "etld1_fixtures.tsv"));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        const auto url = line.substr(0, tab), expected = line.substr(tab + 1);
        ++n;
        std::string got;
        try {
            got = etld1(url);
        } catch (const DomainError&) {
            got = "ERROR";
        }
        c.expect(got == expected, url + " -> " + got + ", want " + expected);
    }
    c.expect(n == 25, std::to_string(n) + " fixtures");

    auto corpus = generate_synthetic(11, 40, 40);
    PipelineOptions opt;
    opt.seed = 5;
    opt.generated_at = "1970-01-01T00:00:00Z";
    opt.jobs = 1;
    const auto a = run_pipeline(corpus.manifest, default_vocabulary(), default_psl(), opt);
    opt.jobs = 4;
    const auto b = run_pipeline(corpus.manifest, default_vocabulary(), default_psl(), opt);
    c.expect(a.filter_list_plain == b.filter_list_plain && a.filter_list_rules == b.filter_list_rules && a.filter_list_extension == b.filter_list_extension,
        "filter lists differ between runs");
    c.expect(a.metrics == b.metrics, "metrics differ between runs");
    c.note(std::to_string(n) + " URLs, two pipeline runs compared");
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {"static features of the unpacked canvas-font script", 1.0, static_fixture},
        {"dynamic features of the canvas text probe trace", 0, dynamic_fixture},
        {"unpacking of the eval-packed script", 0, unpacking},
        {"heuristic labeler trigger combinations", 0, labeler},
        {"information gain against entropy oracle", 0, information_gain_oracle},
        {"decision tree against exhaustive reference", 0, tree_oracle},
        {"end-to-end synthetic corpus cross-validation", 60.0, end_to_end},
        {"jaccard values and threshold sweep", 0, jaccard_baseline},
        {"louvain communities and modularity", 0, louvain_checks},
        {"keyword prevalence ratios", 0, prevalence},
        {"etld+1 fixtures and pipeline determinism", 0, etld1_and_determinism},
    };
    std::size_t failed = 0;
    for (const auto& cr : criteria) {
        Check c;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.run(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.time_limit > 0)
            c.expect(secs < cr.time_limit, "took " + fmt(secs) + " s, limit " + fmt(cr.time_limit) + " s");
        const bool ok = c.failures() == 0;
        failed += !ok;
        std::cout << (ok ? "PASS " : "FAIL ") << cr.name << " (" << fmt(secs) << " s";
        if (!c.info().empty())
            std::cout << "; " << c.info();
        std::cout << ")";
        if (!ok)
            std::cout << ": " << c.notes();
        std::cout << std::endl;
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
