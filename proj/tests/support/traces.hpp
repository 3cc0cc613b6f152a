#pragma once

// Hand-built traces for the labeler and the dynamic featurizer.

#include <fpkit/corpus.hpp>
#include <fpkit/labeler.hpp>

#include <set>
#include <string>

namespace fpkit::testkit {

using V = SerializedValue;

inline void add_canvas(TraceBuilder& b, bool complete)
{
    b.call("Document.createElement", {V::string("canvas")}, V::object("canvas"));
    b.call("HTMLCanvasElement.getContext", {V::string("2d")}, V::object());
    b.set("CanvasRenderingContext2D.fillStyle", V::string("#f60"));
    b.call("CanvasRenderingContext2D.fillText", {V::string("Cwm fjordbank"), V::number(2), V::number(15)});
    if (complete)
        b.call("HTMLCanvasElement.toDataURL", {}, V::string("data:image/png;base64,AAAA"));
}

inline void add_webrtc(TraceBuilder& b, bool complete)
{
    b.call("RTCPeerConnection.createDataChannel", {V::string("")}, V::object());
    b.call("RTCPeerConnection.createOffer", {}, V::object("Promise"));
    if (complete)
        b.set("RTCPeerConnection.onicecandidate", V::object("function"));
}

// `fonts` distinct font values and `measures` measureText calls.
inline void add_fonts(TraceBuilder& b, std::size_t fonts, std::size_t measures)
{
    for (std::size_t i = 0; i < std::max(fonts, measures); ++i) {
        if (i < fonts)
            b.set("CanvasRenderingContext2D.font", V::string("72px font" + std::to_string(i) + ", monospace"));
        if (i < measures)
            b.call("CanvasRenderingContext2D.measureText", {V::string("mmmmmmmmmmlli")}, V::object("TextMetrics"));
    }
}

inline void add_audio(TraceBuilder& b, bool complete)
{
    b.call("AudioContext.createGain", {}, V::object("GainNode"));
    if (complete)
        b.call("OfflineAudioContext.createOscillator", {}, V::object("OscillatorNode"));
}

/// Trace firing exactly the triggers in `mask` (bit 0 canvas, 1 webrtc,
/// 2 canvas_font, 3 audio). Absent categories are present as near misses
/// one step short of firing, including 20 fonts against 21 measures.
inline ExecutionTrace trigger_trace(unsigned mask, const std::string& id = "t")
{
    TraceBuilder b(id, "https://cdn.example/t.js");
    add_canvas(b, mask & 1u);
    add_webrtc(b, mask & 2u);
    if (mask & 4u)
        add_fonts(b, 21, 21);
    else
        add_fonts(b, 20, 21);
    add_audio(b, mask & 8u);
    return b.take();
}

inline std::set<Trigger> mask_triggers(unsigned mask)
{
    std::set<Trigger> out;
    if (mask & 1u)
        out.insert(Trigger::canvas);
    if (mask & 2u)
        out.insert(Trigger::webrtc);
    if (mask & 4u)
        out.insert(Trigger::canvas_font);
    if (mask & 8u)
        out.insert(Trigger::audio);
    return out;
}

/// Text-width probe on a 100x100 canvas with a 7-character string.
inline ExecutionTrace canvas_text_probe_trace(const std::string& id = "probe")
{
    TraceBuilder b(id, "https://cdn.example/fp.js");
    b.call("Document.createElement", {V::string("canvas")}, V::object("canvas"), 1);
    b.set("HTMLCanvasElement.width", V::number(100), 2);
    b.set("HTMLCanvasElement.height", V::number(100), 3);
    b.call("HTMLCanvasElement.getContext", {V::string("2d")}, V::object(), 4);
    b.set("CanvasRenderingContext2D.font", V::string("72px monospace"), 5);
    b.call("CanvasRenderingContext2D.measureText", {V::string("mmmmlli")}, V::object("TextMetrics"), 6);
    return b.take();
}

} // namespace fpkit::testkit
