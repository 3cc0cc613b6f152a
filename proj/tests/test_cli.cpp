#include <fpkit/pipeline.hpp>

#include "support/common.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

using namespace fpkit;
using testkit::TempDir;
using testkit::test_dir;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

std::string quote(const std::string& s)
{
    std::string q = "'";
    for (char c : s)
        q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

std::string quote(const std::filesystem::path& p)
{
    return quote(p.string());
}

Run fpkit_cli(const std::string& args)
{
    const std::string cmd = "env -u SOURCE_DATE_EPOCH " + quote(std::string(FPKIT_CLI)) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::filesystem::path corpus_dir()
{
    return test_dir() / "fixtures" / "corpus";
}

std::string corpus()
{
    return quote(corpus_dir());
}

std::string golden(const std::string& name)
{
    return read_file(test_dir() / "fixtures" / "golden" / name);
}

// label, featurize both spaces and train both models into `dir`.
void stage(const TempDir& dir)
{
    const auto d = [&](const char* f) { return quote(dir / f); };
    ASSERT_EQ(fpkit_cli("label --corpus " + corpus() + " --out " + d("labels.jsonl")).status, 0);
    ASSERT_EQ(fpkit_cli("featurize-static --corpus " + corpus() + " --out " + d("static.jsonl")).status, 0);
    ASSERT_EQ(fpkit_cli("featurize-dynamic --corpus " + corpus() + " --out " + d("dynamic.jsonl")).status, 0);
    ASSERT_EQ(fpkit_cli("train --space static --features " + d("static.jsonl") + " --labels " + d("labels.jsonl") + " --out " + d("static_model.json")).status, 0);
    ASSERT_EQ(fpkit_cli("train --space dynamic --features " + d("dynamic.jsonl") + " --labels " + d("labels.jsonl") + " --out " + d("dynamic_model.json")).status, 0);
}

} // namespace

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(fpkit_cli("").status, 2);
    EXPECT_EQ(fpkit_cli("frobnicate").status, 2);
    EXPECT_EQ(fpkit_cli("ingest --corpus " + corpus() + " --bogus").status, 2);
    EXPECT_EQ(fpkit_cli("ingest").status, 2);
    EXPECT_EQ(fpkit_cli("--help").status, 0);
    EXPECT_EQ(fpkit_cli("evaluate --labels /nonexistent/labels.jsonl").status, 2);
    EXPECT_EQ(fpkit_cli("ingest --corpus " + corpus()).status, 0);

    TempDir dir;
    CorpusManifest m;
    m.scripts.push_back(make_script("a();", "https://a.example/", "https://a.example/a.js"));
    write_corpus(m, dir.path());
    write_file(dir / "scripts" / m.scripts[0].script_id, "tampered();");
    EXPECT_EQ(fpkit_cli("ingest --corpus " + quote(dir.path())).status, 1);
}

TEST(Cli, IngestSummary)
{
    auto r = fpkit_cli("ingest --corpus " + corpus());
    ASSERT_EQ(r.status, 0);
    auto j = json::parse(r.out);
    EXPECT_EQ(j["scripts"], 36);
    EXPECT_EQ(j["decode_errors"], 0);
}

TEST(Cli, EvaluateIsDeterministic)
{
    TempDir dir;
    stage(dir);
    const std::string args = "evaluate --folds 10 --seed 7 --labels " + quote(dir / "labels.jsonl") + " --static " + quote(dir / "static.jsonl")
        + " --dynamic " + quote(dir / "dynamic.jsonl");
    auto a = fpkit_cli(args);
    auto b = fpkit_cli(args);
    ASSERT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out);
    auto j = json::parse(a.out);
    for (const char* k : {"static", "dynamic", "combined"})
        EXPECT_TRUE(j[k].contains("precision")) << k;
    EXPECT_EQ(fpkit_cli("evaluate --labels " + quote(dir / "labels.jsonl")).status, 2);
}

TEST(Cli, FeaturizationIndependentOfJobs)
{
    auto a = fpkit_cli("featurize-static --jobs 1 --corpus " + corpus());
    auto b = fpkit_cli("featurize-static --jobs 4 --corpus " + corpus());
    ASSERT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(fpkit_cli("featurize-dynamic --jobs 1 --corpus " + corpus()).out, fpkit_cli("featurize-dynamic --jobs 3 --corpus " + corpus()).out);
}

TEST(Cli, ClassifyListsUnclassifiable)
{
    TempDir dir;
    stage(dir);
    // keep static vectors for all but one script and use only the static model
    const auto text = read_file(dir / "static.jsonl");
    auto lines = split_lines(text);
    const auto dropped = json::parse(lines.front())["script_id"].get<std::string>();
    std::string kept;
    for (std::size_t i = 1; i < lines.size(); ++i)
        if (!lines[i].empty())
            kept += std::string(lines[i]) + "\n";
    write_file(dir / "partial.jsonl", kept);
    auto r = fpkit_cli("classify --corpus " + corpus() + " --static " + quote(dir / "partial.jsonl") + " --static-model " + quote(dir / "static_model.json"));
    ASSERT_EQ(r.status, 0);
    auto j = json::parse(r.out);
    EXPECT_EQ(j["unclassifiable"], json::array({dropped}));
    EXPECT_EQ(j["verdicts"].size(), 35u);
    for (const auto& v : j["verdicts"])
        EXPECT_TRUE(v["dynamic"].is_null());
}

TEST(Cli, CombineIsOr)
{
    TempDir dir;
    write_file(dir / "s.json", R"({"verdicts": [{"script_id": "a", "verdict": "fingerprinting", "static": "fingerprinting", "dynamic": null},
        {"script_id": "b", "verdict": "non_fingerprinting", "static": "non_fingerprinting", "dynamic": null}]})");
    write_file(dir / "d.json", R"({"verdicts": [{"script_id": "b", "verdict": "fingerprinting", "static": null, "dynamic": "fingerprinting"},
        {"script_id": "c", "verdict": "non_fingerprinting", "static": null, "dynamic": "non_fingerprinting"}]})");
    auto r = fpkit_cli("combine --static " + quote(dir / "s.json") + " --dynamic " + quote(dir / "d.json"));
    ASSERT_EQ(r.status, 0);
    auto v = read_verdicts(r.out);
    EXPECT_EQ(v.at("a").label, Verdict::fingerprinting);
    EXPECT_EQ(v.at("b").label, Verdict::fingerprinting);
    EXPECT_EQ(v.at("c").label, Verdict::non_fingerprinting);
}

TEST(Cli, ConfigFileMirrorsFlags)
{
    TempDir dir;
    stage(dir);
    const std::string inputs = " --labels " + quote(dir / "labels.jsonl") + " --static " + quote(dir / "static.jsonl");
    write_file(dir / "flat.conf", "# shared settings\nseed = 7\nfolds = 5\nvocab = unused-by-evaluate.txt\n");
    write_file(dir / "section.conf", "[evaluate]\nseed = 7\nfolds = 5\n");
    const auto direct = fpkit_cli("evaluate --seed 7 --folds 5" + inputs);
    ASSERT_EQ(direct.status, 0);
    EXPECT_EQ(fpkit_cli("evaluate --config " + quote(dir / "flat.conf") + inputs).out, direct.out);
    EXPECT_EQ(fpkit_cli("--config " + quote(dir / "section.conf") + " evaluate" + inputs).out, direct.out);
    // command-line flags win
    EXPECT_EQ(fpkit_cli("evaluate --config " + quote(dir / "flat.conf") + " --folds 3" + inputs).out, fpkit_cli("evaluate --seed 7 --folds 3" + inputs).out);
    // required options may come from the file
    write_file(dir / "inputs.conf", "labels = " + (dir / "labels.jsonl").string() + "\nstatic = " + (dir / "static.jsonl").string() + "\nseed = 7\nfolds = 5\n");
    EXPECT_EQ(fpkit_cli("evaluate --config " + quote(dir / "inputs.conf")).out, direct.out);
    EXPECT_EQ(fpkit_cli("evaluate --config " + quote(dir / "missing.conf") + inputs).status, 2);
}

TEST(Cli, ReportPerDisagreeingScript)
{
    TempDir dir;
    stage(dir);
    auto labels = label_map(read_labels(read_file(dir / "labels.jsonl")));
    // flip three verdicts against the labels
    json verdicts = json::array();
    std::set<std::string> flipped;
    for (const auto& [id, v] : labels) {
        Verdict out = v;
        if (flipped.size() < 3) {
            out = v == Verdict::fingerprinting ? Verdict::non_fingerprinting : Verdict::fingerprinting;
            flipped.insert(id);
        }
        verdicts.push_back({{"script_id", id}, {"verdict", to_string(out)}, {"static", to_string(out)}, {"dynamic", nullptr}});
    }
    write_file(dir / "verdicts.json", json {{"verdicts", verdicts}, {"unclassifiable", json::array()}}.dump());
    auto r = fpkit_cli("report --corpus " + corpus() + " --verdicts " + quote(dir / "verdicts.json") + " --labels " + quote(dir / "labels.jsonl") + " --out "
        + quote(dir / "reports"));
    ASSERT_EQ(r.status, 0);
    std::set<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(dir / "reports"))
        files.insert(e.path().filename().string());
    std::set<std::string> expected;
    for (const auto& id : flipped)
        expected.insert(id + ".md");
    EXPECT_EQ(files, expected);
    for (const auto& f : files) {
        const auto text = read_file(dir / "reports" / f);
        for (const char* h : {"## 1.", "## 2.", "## 3.", "## 4."})
            EXPECT_NE(text.find(h), std::string::npos) << f << " " << h;
    }
}

TEST(Cli, PipelineMatchesGoldenFilterList)
{
    TempDir dir;
    auto r = fpkit_cli("pipeline --corpus " + corpus() + " --seed 0 --generated-at 1970-01-01T00:00:00Z --out " + quote(dir.path()));
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(read_file(dir / "filterlist.txt"), golden("filterlist.txt"));
    EXPECT_EQ(read_file(dir / "filterlist.rules"), golden("filterlist.rules"));
    EXPECT_EQ(read_file(dir / "filterlist.json"), golden("filterlist.json"));
    EXPECT_EQ(parse_extension_list(read_file(dir / "filterlist.json")).domain_set(), parse_extension_list(golden("filterlist.json")).domain_set());
}

TEST(Cli, StagedCommandsMatchPipeline)
{
    TempDir dir;
    stage(dir);
    const auto d = [&](const char* f) { return quote(dir / f); };
    ASSERT_EQ(fpkit_cli("classify --corpus " + corpus() + " --static " + d("static.jsonl") + " --dynamic " + d("dynamic.jsonl") + " --static-model "
        + d("static_model.json") + " --dynamic-model " + d("dynamic_model.json") + " --out " + d("verdicts.json"))
                  .status,
        0);
    for (const char* format : {"plain", "rules", "extension"}) {
        auto r = fpkit_cli("emit-list --corpus " + corpus() + " --verdicts " + d("verdicts.json") + " --generated-at 1970-01-01T00:00:00Z --format " + format);
        ASSERT_EQ(r.status, 0);
        const std::string name = std::string(format) == "plain" ? "filterlist.txt" : std::string(format) == "rules" ? "filterlist.rules" : "filterlist.json";
        EXPECT_EQ(r.out, golden(name)) << format;
    }
    EXPECT_EQ(fpkit_cli("emit-list --corpus " + corpus() + " --verdicts " + d("verdicts.json") + " --format hosts").status, 2);

    // a list that makes example.com a public suffix changes what gets grouped
    write_file(dir / "tiny.dat", "com\nexample.com\nexample\nuk\nco.uk\nio\nnet\n");
    auto custom = fpkit_cli("emit-list --corpus " + corpus() + " --verdicts " + d("verdicts.json") + " --psl " + d("tiny.dat"));
    ASSERT_EQ(custom.status, 0);
    EXPECT_NE(custom.out, golden("filterlist.txt"));
    EXPECT_EQ(custom.out.find("\nexample.com\n"), std::string::npos);
    EXPECT_EQ(fpkit_cli("emit-list --corpus " + corpus() + " --verdicts " + d("verdicts.json") + " --psl " + d("absent.dat")).status, 2);
}

TEST(Cli, SimilarityAndCluster)
{
    TempDir dir;
    stage(dir);
    std::filesystem::create_directories(dir / "libs");
    const auto m = load_corpus(corpus_dir());
    const auto labels = label_map(read_labels(read_file(dir / "labels.jsonl")));
    for (const auto& s : m.scripts)
        if (labels.at(s.script_id) == Verdict::fingerprinting) {
            write_file(dir / "libs" / "reference.js", s.content);
            break;
        }
    auto sim = fpkit_cli("similarity --corpus " + corpus() + " --labels " + quote(dir / "labels.jsonl") + " --library-dir " + quote(dir / "libs") + " --csv "
        + quote(dir / "curve.csv"));
    ASSERT_EQ(sim.status, 0);
    auto j = json::parse(sim.out);
    EXPECT_EQ(j["scripts"].size(), 36u);
    EXPECT_GE(j["accuracy"].get<double>(), 0.5);
    EXPECT_EQ(read_file(dir / "curve.csv").rfind("threshold,", 0), 0u);
    EXPECT_EQ(fpkit_cli("similarity --corpus " + corpus() + " --labels " + quote(dir / "labels.jsonl")).status, 2);

    auto cl = fpkit_cli("cluster --corpus " + corpus() + " --labels " + quote(dir / "labels.jsonl") + " --library-dir " + quote(dir / "libs") + " --dot "
        + quote(dir / "graph.dot"));
    ASSERT_EQ(cl.status, 0);
    auto c = json::parse(cl.out);
    EXPECT_FALSE(c["clusters"].empty());
    EXPECT_FALSE(c["prevalence"].empty());
    EXPECT_EQ(read_file(dir / "graph.dot").rfind("graph keywords {", 0), 0u);
    EXPECT_EQ(cl.out, fpkit_cli("cluster --corpus " + corpus() + " --labels " + quote(dir / "labels.jsonl") + " --library-dir " + quote(dir / "libs")).out);
}
