#include <fpkit/corpus.hpp>

#include "support/common.hpp"

#include <gtest/gtest.h>

using namespace fpkit;
using testkit::TempDir;

namespace {

CorpusManifest one_script_corpus()
{
    CorpusManifest m;
    auto s = make_script("document.title;\n", "https://site.example/", "https://cdn.example/a.js");
    m.traces[s.script_id] = TraceBuilder(s.script_id, s.source_url()).get("Document.title", SerializedValue::string("t")).take();
    m.scripts.push_back(std::move(s));
    return m;
}

template <typename F>
CorpusError corpus_error(F&& f)
{
    try {
        f();
    } catch (const CorpusError& e) {
        return e;
    }
    ADD_FAILURE() << "no CorpusError thrown";
    return CorpusError("none");
}

} // namespace

TEST(Corpus, EmptyManifestGivesEmptyCorpus)
{
    TempDir dir;
    write_file(dir / "manifest", "");
    auto m = ingest(dir.path());
    EXPECT_TRUE(m.scripts.empty());
    EXPECT_TRUE(m.traces.empty());
}

TEST(Corpus, MissingManifestIsFatal)
{
    TempDir dir;
    EXPECT_THROW(ingest(dir.path()), CorpusError);
}

TEST(Corpus, RoundTrip)
{
    TempDir dir;
    auto m = one_script_corpus();
    write_corpus(m, dir.path());
    auto back = ingest(dir.path());
    ASSERT_EQ(back.scripts.size(), 1u);
    ASSERT_EQ(back.traces.size(), 1u);
    EXPECT_EQ(back, m);
}

TEST(Corpus, UnknownTraceIdIsNamed)
{
    TempDir dir;
    write_corpus(one_script_corpus(), dir.path());
    write_file(dir / "traces" / "deadbeef.jsonl", "");
    auto e = corpus_error([&] { ingest(dir.path()); });
    EXPECT_EQ(e.offending_ids, std::vector<std::string> {"deadbeef"});
    EXPECT_NE(std::string(e.what()).find("deadbeef"), std::string::npos);
}

TEST(Corpus, UnknownIdsInRecordsAreCollected)
{
    TempDir dir;
    auto m = one_script_corpus();
    const auto id = m.scripts[0].script_id;
    m.traces[id].records[0].script_id = "cafe";
    write_corpus(m, dir.path());
    write_file(dir / "traces" / "beef.jsonl", "");
    auto e = corpus_error([&] { ingest(dir.path()); });
    EXPECT_EQ(e.offending_ids, (std::vector<std::string> {"beef", "cafe"}));
}

TEST(Corpus, HashMismatchIsRejected)
{
    TempDir dir;
    auto m = one_script_corpus();
    write_corpus(m, dir.path());
    write_file(dir / "scripts" / m.scripts[0].script_id, "tampered");
    auto e = corpus_error([&] { ingest(dir.path()); });
    EXPECT_EQ(e.offending_ids, std::vector<std::string> {m.scripts[0].script_id});
}

TEST(Corpus, MissingContentIsRejected)
{
    TempDir dir;
    auto m = one_script_corpus();
    write_corpus(m, dir.path());
    std::filesystem::remove(dir / "scripts" / m.scripts[0].script_id);
    EXPECT_THROW(ingest(dir.path()), CorpusError);
}

TEST(Corpus, InvalidUtf8IsFlaggedNotDropped)
{
    TempDir dir;
    CorpusManifest m;
    m.scripts.push_back(make_script(std::string("var s = '\xff\xfe';"), "https://a.example/", "https://a.example/x.js"));
    m.scripts.push_back(make_script("var ok = 1;", "https://a.example/", "https://a.example/y.js"));
    write_corpus(m, dir.path());
    auto back = ingest(dir.path());
    ASSERT_EQ(back.scripts.size(), 2u);
    EXPECT_EQ(back.decode_errors(), 1u);
    EXPECT_TRUE(back.scripts[0].decode_error);
    EXPECT_FALSE(back.scripts[1].decode_error);
}

TEST(Corpus, InlineIndexIsUniquePerDocument)
{
    TempDir dir;
    CorpusManifest m;
    const std::string site = "https://a.example/";
    m.scripts.push_back(make_script("a();", site, inline_source_url(site, 0), ScriptKind::inline_script));
    m.scripts.push_back(make_script("b();", site, inline_source_url(site, 0), ScriptKind::inline_script));
    write_corpus(m, dir.path());
    auto e = corpus_error([&] { ingest(dir.path()); });
    EXPECT_EQ(e.offending_ids.size(), 2u);
}

TEST(Corpus, InlineSourceUrl)
{
    const std::string site = "https://a.example/page";
    EXPECT_EQ(parse_inline_index(inline_source_url(site, 3), site), 3u);
    EXPECT_FALSE(parse_inline_index("https://cdn.example/x.js", site));
}

TEST(Corpus, ArgumentsOnlyOnCalls)
{
    json get = {{"script_id", "a"}, {"symbol", "Navigator.userAgent"}, {"access_kind", "get"}, {"call_index", 0},
        {"arguments", json::array()}, {"stack", json::array()}};
    EXPECT_ANY_THROW(api_call_from_json(get));
    json call = {{"script_id", "a"}, {"symbol", "Document.createElement"}, {"access_kind", "call"}, {"call_index", 0}, {"stack", json::array()}};
    EXPECT_ANY_THROW(api_call_from_json(call));
    call["arguments"] = json::array({{{"type", "string"}, {"value", "canvas"}}});
    auto r = api_call_from_json(call);
    ASSERT_TRUE(r.arguments);
    EXPECT_EQ(r.arguments->at(0), SerializedValue::string("canvas"));
}

TEST(Corpus, CallIndexMustIncrease)
{
    auto t = TraceBuilder("a").call("F.f", {}).call("F.f", {}).take();
    EXPECT_NO_THROW(validate_trace(t));
    t.records[1].call_index = 0;
    EXPECT_THROW(validate_trace(t), CorpusError);
    t.records[1].call_index = -1;
    EXPECT_THROW(validate_trace(t), CorpusError);
}

TEST(Corpus, CallIndexStreamsAreIndependent)
{
    auto t = TraceBuilder("a").call("F.f", {}).get("F.f").call("G.g", {}).call("F.f", {}).take();
    EXPECT_EQ(t.records[0].call_index, 0);
    EXPECT_EQ(t.records[1].call_index, 0);
    EXPECT_EQ(t.records[2].call_index, 0);
    EXPECT_EQ(t.records[3].call_index, 1);
    EXPECT_NO_THROW(validate_trace(t));
}

TEST(Corpus, SerializedValueRoundTrip)
{
    for (const auto& v : {SerializedValue::string("x"), SerializedValue::number(1.5), SerializedValue::number(100),
             SerializedValue::boolean(false), SerializedValue {ValueType::null, "", {}, {}, {}}, SerializedValue {},
             SerializedValue::object("canvas"), SerializedValue::object(std::nullopt, 12)})
        EXPECT_EQ(serialized_value_from_json(to_json(v)), v);
}

TEST(Dedupe, IdenticalContentMerges)
{
    CorpusManifest m;
    m.scripts.push_back(make_script("lib();", "https://a.example/", "https://cdn.example/lib.js"));
    m.scripts.push_back(make_script("lib();", "https://b.example/", "https://cdn.example/lib.js"));
    auto d = dedupe(m);
    ASSERT_EQ(d.scripts.size(), 1u);
    ASSERT_EQ(d.scripts[0].occurrences.size(), 2u);
    EXPECT_EQ(d.scripts[0].occurrences[1].site_url, "https://b.example/");
}

TEST(Dedupe, DistinctScriptsUnchanged)
{
    CorpusManifest m;
    m.scripts.push_back(make_script("a();", "https://a.example/", "https://cdn.example/a.js"));
    m.scripts.push_back(make_script("b();", "https://a.example/", "https://cdn.example/b.js"));
    EXPECT_EQ(dedupe(m), m);
}

TEST(Dedupe, SameUrlDifferentBodies)
{
    CorpusManifest m;
    m.scripts.push_back(make_script("v1();", "https://a.example/", "https://cdn.example/app.js"));
    m.scripts.push_back(make_script("v2();", "https://b.example/", "https://cdn.example/app.js"));
    EXPECT_EQ(dedupe(m).scripts.size(), 2u);
}

TEST(Dedupe, SurvivesRoundTripWithSharedContent)
{
    TempDir dir;
    CorpusManifest m;
    m.scripts.push_back(make_script("lib();", "https://a.example/", "https://cdn.example/lib.js"));
    m.scripts.push_back(make_script("lib();", "https://b.example/", "https://cdn.example/lib.js"));
    auto d = dedupe(m);
    write_corpus(d, dir.path());
    EXPECT_EQ(dedupe(ingest(dir.path())), d);
}
