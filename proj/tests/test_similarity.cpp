#include <fpkit/similarity.hpp>

#include "support/common.hpp"

#include <gtest/gtest.h>

using namespace fpkit;
using testkit::TempDir;

namespace {

std::set<std::string> S(std::initializer_list<const char*> xs)
{
    std::set<std::string> out;
    for (auto x : xs)
        out.emplace(x);
    return out;
}

// Scores and truth for the six-script sweep fixture.
const std::vector<double> six_scores = {0.9, 0.7, 0.7, 0.4, 0.2, 0.1};
const std::vector<bool> six_labels = {true, true, false, true, false, false};

} // namespace

TEST(Jaccard, TrivialSets)
{
    EXPECT_EQ(jaccard(S({"a", "b"}), S({"a", "b"})), 1.0);
    EXPECT_EQ(jaccard(S({"a", "b", "c"}), S({"b", "c", "d"})), 0.5);
    EXPECT_EQ(jaccard(S({"a"}), S({"b"})), 0.0);
    EXPECT_EQ(jaccard({}, {}), 0.0);
    EXPECT_EQ(jaccard(S({"a"}), {}), 0.0);
}

TEST(Jaccard, SymmetricAndBounded)
{
    Rng rng(5);
    for (int t = 0; t < 500; ++t) {
        std::set<std::string> a, b;
        for (int i = 0; i < 12; ++i) {
            if (rng.chance(0.4))
                a.insert(std::to_string(i));
            if (rng.chance(0.4))
                b.insert(std::to_string(i));
        }
        const double j = jaccard(a, b);
        EXPECT_EQ(j, jaccard(b, a));
        EXPECT_GE(j, 0.0);
        EXPECT_LE(j, 1.0);
        if (!a.empty() || !b.empty()) {
            EXPECT_EQ(j == 1.0, a == b);
        }
    }
}

TEST(Tokenize, BeautifierContract)
{
    EXPECT_EQ(beautify("var a=1;var a=1;"), "var a = 1;\nvar a = 1;\n");
    auto t = tokenize_script("var a=1;var a=1;");
    EXPECT_FALSE(t.fallback);
    EXPECT_EQ(t.tokens, S({"var", "a", "=", "1;"}));
    EXPECT_TRUE(tokenize_script("").tokens.empty());
}

TEST(Tokenize, MinifiedFormMatches)
{
    const std::string pretty = "function add(a, b) {\n  // sum\n  return a + b;\n}\n\nvar total = add(1, 2);\nif (total > 2) { log(total) }\n";
    const std::string minified = "function add(a,b){return a+b;}var total=add(1,2);if(total>2){log(total)}";
    EXPECT_EQ(beautify(pretty), beautify(minified));
    EXPECT_EQ(tokenize_script(pretty).tokens, tokenize_script(minified).tokens);
    EXPECT_EQ(beautify(beautify(pretty)), beautify(pretty));
}

TEST(Tokenize, FallbackOnLexError)
{
    auto t = tokenize_script("var s = 'open\nx y");
    EXPECT_TRUE(t.fallback);
    EXPECT_EQ(t.tokens, S({"var", "s", "=", "'open", "x", "y"}));
}

TEST(BestSimilarity, PicksHighestVersion)
{
    TempDir dir;
    write_file(dir / "v1.js", "a x y");
    write_file(dir / "v2.js", "a b c d e");
    auto versions = load_library_versions(dir.path());
    ASSERT_EQ(versions.size(), 2u);
    EXPECT_EQ(versions[0].id, "v1.js");
    const auto script = tokenize_script("a b c").tokens;
    EXPECT_DOUBLE_EQ(jaccard(script, versions[0].tokens), 0.2);
    auto best = best_similarity(script, versions);
    EXPECT_DOUBLE_EQ(best.score, 0.6);
    EXPECT_EQ(best.version, "v2.js");

    write_file(dir / "v3.js", "a  b\n c");
    auto more = load_library_versions(dir.path());
    auto exact = best_similarity(script, more);
    EXPECT_EQ(exact.score, 1.0);
    EXPECT_EQ(exact.version, "v3.js");
    EXPECT_GE(exact.score, best.score);

    EXPECT_DOUBLE_EQ(best_similarity(script, {versions[0]}).score, 0.2);
    EXPECT_THROW(best_similarity(script, {}), std::invalid_argument);
}

TEST(Sweep, SixScriptFixture)
{
    auto r = threshold_sweep(six_scores, six_labels);
    // thresholds: below min, four midpoints, max
    ASSERT_EQ(r.curve.size(), 6u);
    struct Row {
        double th;
        std::size_t tp, fp, tn, fn;
    };
    const std::vector<Row> expect = {
        {-0.9, 3, 3, 0, 0},
        {0.15, 3, 2, 1, 0},
        {0.3, 3, 1, 2, 0},
        {0.55, 2, 1, 2, 1},
        {0.8, 1, 0, 3, 2},
        {0.9, 0, 0, 3, 3},
    };
    for (std::size_t i = 0; i < expect.size(); ++i) {
        EXPECT_NEAR(r.curve[i].threshold, expect[i].th, 1e-12) << i;
        EXPECT_EQ(r.curve[i].tp, expect[i].tp) << i;
        EXPECT_EQ(r.curve[i].fp, expect[i].fp) << i;
        EXPECT_EQ(r.curve[i].tn, expect[i].tn) << i;
        EXPECT_EQ(r.curve[i].fn, expect[i].fn) << i;
    }
    EXPECT_NEAR(r.best.threshold, 0.3, 1e-12);
    EXPECT_EQ(r.best.tpr(), 1.0);
    EXPECT_DOUBLE_EQ(r.best.fpr(), 1.0 / 3);
    EXPECT_DOUBLE_EQ(r.best.accuracy(), 5.0 / 6);
}

TEST(Sweep, BestIsMaximal)
{
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s;
        std::vector<bool> y;
        for (int i = 0; i < 15; ++i) {
            s.push_back(static_cast<double>(rng.below(8)) / 8);
            y.push_back(i % 3 == 0);
        }
        auto r = threshold_sweep(s, y);
        for (const auto& p : r.curve)
            EXPECT_GE(r.best.accuracy(), p.accuracy());
        // every achievable prediction set is represented
        std::set<double> distinct(s.begin(), s.end());
        EXPECT_EQ(r.curve.size(), distinct.size() + 1);
    }
}

TEST(Sweep, SeparatedScores)
{
    auto r = threshold_sweep({0.1, 0.2, 0.8, 0.9}, {false, false, true, true});
    EXPECT_EQ(r.best.tpr(), 1.0);
    EXPECT_EQ(r.best.fpr(), 0.0);
    EXPECT_NEAR(r.best.threshold, 0.5, 1e-12);
}

TEST(Sweep, Errors)
{
    EXPECT_THROW(threshold_sweep({0.1, 0.2}, {true, true}), std::invalid_argument);
    EXPECT_THROW(threshold_sweep({0.1}, {true, false}), std::invalid_argument);
}

TEST(Sweep, JsonAndCsv)
{
    auto r = threshold_sweep(six_scores, six_labels);
    auto j = to_json(r);
    EXPECT_EQ(j["curve"].size(), 6u);
    EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 5.0 / 6);
    auto csv = curve_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,tpr,fpr,accuracy,tp,fp,tn,fn");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_NE(csv.find(",3,1,2,0\n"), std::string::npos);
}
