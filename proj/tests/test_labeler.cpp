#include <fpkit/labeler.hpp>

#include "support/traces.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace fpkit;
using namespace fpkit::testkit;

TEST(Labeler, EveryTriggerCombination)
{
    for (unsigned mask = 0; mask < 16; ++mask) {
        auto l = label(trigger_trace(mask));
        EXPECT_EQ(l.triggered, mask_triggers(mask)) << "mask " << mask;
        EXPECT_EQ(l.value, mask ? Verdict::fingerprinting : Verdict::non_fingerprinting) << "mask " << mask;
    }
}

TEST(Labeler, EmptyTraceIsNotFingerprinting)
{
    ExecutionTrace t;
    EXPECT_FALSE(label_canvas(t));
    EXPECT_FALSE(label_webrtc(t));
    EXPECT_FALSE(label_canvas_font(t));
    EXPECT_FALSE(label_audio(t));
    EXPECT_EQ(label(t).value, Verdict::non_fingerprinting);
}

TEST(Labeler, CanvasRules)
{
    TraceBuilder b("c");
    add_canvas(b, true);
    EXPECT_TRUE(label_canvas(b.trace()));

    TraceBuilder no_style("c");
    no_style.call("CanvasRenderingContext2D.fillText", {V::string("x")});
    no_style.call("HTMLCanvasElement.toDataURL", {});
    EXPECT_FALSE(label_canvas(no_style.trace()));

    TraceBuilder stroke("c");
    stroke.set("CanvasRenderingContext2D.strokeStyle", V::string("red"));
    stroke.call("CanvasRenderingContext2D.strokeText", {V::string("x")});
    stroke.call("HTMLCanvasElement.toDataURL", {});
    EXPECT_TRUE(label_canvas(stroke.trace()));

    TraceBuilder got_style("c");
    got_style.get("CanvasRenderingContext2D.fillStyle", V::string("#000"));
    got_style.call("CanvasRenderingContext2D.fillText", {V::string("x")});
    got_style.call("HTMLCanvasElement.toDataURL", {});
    EXPECT_FALSE(label_canvas(got_style.trace()));
}

TEST(Labeler, CanvasExclusions)
{
    for (const char* sym : {"CanvasRenderingContext2D.save", "CanvasRenderingContext2D.restore", "HTMLCanvasElement.addEventListener"}) {
        TraceBuilder b("c");
        add_canvas(b, true);
        b.call(sym, {});
        EXPECT_FALSE(label_canvas(b.trace())) << sym;
    }
}

TEST(Labeler, WebRtcRules)
{
    for (const char* probe : {"RTCPeerConnection.createDataChannel", "RTCPeerConnection.createOffer"}) {
        TraceBuilder b("w");
        b.call(probe, {});
        EXPECT_FALSE(label_webrtc(b.trace()));
        b.get("RTCPeerConnection.localDescription", V::object());
        EXPECT_TRUE(label_webrtc(b.trace())) << probe;
    }
    TraceBuilder answer("w");
    answer.call("RTCPeerConnection.createAnswer", {});
    answer.set("RTCPeerConnection.onicecandidate", V::object("function"));
    EXPECT_FALSE(label_webrtc(answer.trace()));
}

TEST(Labeler, FontThresholdIsStrict)
{
    auto fonts = [](std::size_t f, std::size_t m) {
        TraceBuilder b("f");
        add_fonts(b, f, m);
        return label_canvas_font(b.trace());
    };
    EXPECT_FALSE(fonts(20, 20));
    EXPECT_FALSE(fonts(20, 21));
    EXPECT_FALSE(fonts(21, 20));
    EXPECT_TRUE(fonts(21, 21));
    EXPECT_TRUE(fonts(60, 100));
}

TEST(Labeler, FontsCountDistinctValues)
{
    TraceBuilder b("f");
    for (int i = 0; i < 30; ++i) {
        b.set("CanvasRenderingContext2D.font", V::string(i % 2 ? "12px a" : "12px b"));
        b.call("CanvasRenderingContext2D.measureText", {V::string("x")});
    }
    EXPECT_FALSE(label_canvas_font(b.trace()));
}

TEST(Labeler, AudioRules)
{
    for (const char* owner : {"AudioContext", "OfflineAudioContext", "BaseAudioContext"})
        for (const char* member : {"createOscillator", "createDynamicsCompressor", "destination", "startRendering", "oncomplete"}) {
            TraceBuilder b("a");
            b.get(std::string(owner) + "." + member, V::object());
            EXPECT_TRUE(label_audio(b.trace())) << owner << "." << member;
        }
    TraceBuilder b("a");
    b.call("AudioContext.createGain", {});
    b.call("AudioContext.resume", {});
    b.call("OscillatorNode.start", {});
    EXPECT_FALSE(label_audio(b.trace()));
}

TEST(Labeler, CorpusWithoutTraceIsNotFingerprinting)
{
    CorpusManifest m;
    m.scripts.push_back(make_script("a();", "https://a.example/", "https://a.example/a.js"));
    m.scripts.push_back(make_script("b();", "https://a.example/", "https://a.example/b.js"));
    const auto fp_id = m.scripts[1].script_id;
    m.traces[fp_id] = trigger_trace(1, fp_id);
    auto labels = label_corpus(m);
    ASSERT_EQ(labels.size(), 2u);
    EXPECT_EQ(labels[0].value, Verdict::non_fingerprinting);
    EXPECT_EQ(labels[1].value, Verdict::fingerprinting);
    EXPECT_EQ(labels[1].script_id, fp_id);
}

TEST(Overrides, ReplaceValueAndWarnOnUnknown)
{
    std::vector<Label> labels = {label(trigger_trace(0, "a")), label(trigger_trace(1, "b"))};
    auto overrides = read_overrides(R"({"script_id": "a", "value": "fingerprinting", "note": "manual review"}
{"script_id": "zz", "value": "non_fingerprinting"}
{"script_id": "b", "value": "non_fingerprinting"}
)");
    ASSERT_EQ(overrides.size(), 3u);
    std::ostringstream warn;
    auto out = apply_overrides(labels, overrides, &warn);
    EXPECT_EQ(out[0].value, Verdict::fingerprinting);
    EXPECT_EQ(out[0].source, LabelSource::manual_override);
    EXPECT_EQ(out[1].value, Verdict::non_fingerprinting);
    EXPECT_NE(warn.str().find("zz"), std::string::npos);
}

TEST(Overrides, MalformedLinesAreErrors)
{
    EXPECT_THROW(read_overrides("{\"script_id\": \"a\"}\n"), CorpusError);
    EXPECT_THROW(read_overrides("not json\n"), CorpusError);
    EXPECT_ANY_THROW(read_overrides("{\"script_id\": \"a\", \"value\": \"maybe\"}\n"));
}

TEST(Labels, JsonRoundTrip)
{
    std::vector<Label> labels;
    for (unsigned mask = 0; mask < 16; ++mask)
        labels.push_back(label(trigger_trace(mask, "s" + std::to_string(mask))));
    labels[3].source = LabelSource::manual_override;
    auto back = read_labels(write_labels(labels));
    ASSERT_EQ(back.size(), labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        EXPECT_EQ(back[i].script_id, labels[i].script_id);
        EXPECT_EQ(back[i].value, labels[i].value);
        EXPECT_EQ(back[i].source, labels[i].source);
        EXPECT_EQ(back[i].triggered, labels[i].triggered);
    }
}
