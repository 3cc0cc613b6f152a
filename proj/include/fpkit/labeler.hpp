#pragma once

// Ground-truth labels from execution traces.

#include <fpkit/corpus.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fpkit {

enum class Verdict { non_fingerprinting, fingerprinting };

inline std::string to_string(Verdict v)
{
    return v == Verdict::fingerprinting ? "fingerprinting" : "non_fingerprinting";
}

inline Verdict parse_verdict(const std::string& s)
{
    if (s == "fingerprinting")
        return Verdict::fingerprinting;
    if (s == "non_fingerprinting")
        return Verdict::non_fingerprinting;
    throw CorpusError("unknown label value '" + s + "'");
}

enum class LabelSource { heuristic, manual_override };

enum class Trigger { canvas, webrtc, canvas_font, audio };

inline std::string to_string(Trigger t)
{
    switch (t) {
    case Trigger::canvas: return "canvas";
    case Trigger::webrtc: return "webrtc";
    case Trigger::canvas_font: return "canvas_font";
    case Trigger::audio: return "audio";
    }
    return "canvas";
}

struct Label {
    std::string script_id;
    Verdict value = Verdict::non_fingerprinting;
    LabelSource source = LabelSource::heuristic;
    std::set<Trigger> triggered;

    bool operator==(const Label&) const = default;
};

namespace detail {

inline bool has(const ExecutionTrace& t, const std::string& symbol, AccessKind kind)
{
    return std::any_of(t.records.begin(), t.records.end(), [&](const auto& r) { return r.symbol == symbol && r.access_kind == kind; });
}

inline bool has_any_access(const ExecutionTrace& t, const std::string& symbol)
{
    return std::any_of(t.records.begin(), t.records.end(), [&](const auto& r) { return r.symbol == symbol; });
}

} // namespace detail

inline bool label_canvas(const ExecutionTrace& t)
{
    using detail::has;
    constexpr auto call = AccessKind::call;
    const bool text = has(t, "CanvasRenderingContext2D.fillText", call) || has(t, "CanvasRenderingContext2D.strokeText", call);
    const bool style = has(t, "CanvasRenderingContext2D.fillStyle", AccessKind::set) || has(t, "CanvasRenderingContext2D.strokeStyle", AccessKind::set);
    const bool extract = has(t, "HTMLCanvasElement.toDataURL", call);
    const bool excluded = has(t, "CanvasRenderingContext2D.save", call) || has(t, "CanvasRenderingContext2D.restore", call)
        || has(t, "HTMLCanvasElement.addEventListener", call);
    return text && style && extract && !excluded;
}

inline bool label_webrtc(const ExecutionTrace& t)
{
    using detail::has;
    using detail::has_any_access;
    const bool probe = has(t, "RTCPeerConnection.createDataChannel", AccessKind::call) || has(t, "RTCPeerConnection.createOffer", AccessKind::call);
    const bool candidate = has_any_access(t, "RTCPeerConnection.onicecandidate") || has_any_access(t, "RTCPeerConnection.localDescription");
    return probe && candidate;
}

inline constexpr std::size_t font_threshold = 20;

inline bool label_canvas_font(const ExecutionTrace& t)
{
    std::set<std::string> fonts;
    std::size_t measures = 0;
    for (const auto& r : t.records) {
        if (r.access_kind == AccessKind::set && (r.symbol == "CanvasRenderingContext2D.font" || r.symbol == "HTMLCanvasElement.font") && r.value)
            fonts.insert(r.value->text);
        else if (r.access_kind == AccessKind::call && r.symbol == "CanvasRenderingContext2D.measureText")
            ++measures;
    }
    return fonts.size() > font_threshold && measures > font_threshold;
}

inline bool label_audio(const ExecutionTrace& t)
{
    static const std::vector<std::string> owners = {"AudioContext", "OfflineAudioContext", "BaseAudioContext"};
    static const std::vector<std::string> members = {"createOscillator", "createDynamicsCompressor", "destination", "startRendering", "oncomplete"};
    for (const auto& r : t.records) {
        auto dot = r.symbol.find('.');
        if (dot == std::string::npos)
            continue;
        std::string owner = r.symbol.substr(0, dot);
        std::string member = r.symbol.substr(dot + 1);
        if (std::find(owners.begin(), owners.end(), owner) != owners.end()
            && std::find(members.begin(), members.end(), member) != members.end())
            return true;
    }
    return false;
}

inline Label label(const ExecutionTrace& t)
{
    Label l;
    l.script_id = t.script_id;
    if (label_canvas(t))
        l.triggered.insert(Trigger::canvas);
    if (label_webrtc(t))
        l.triggered.insert(Trigger::webrtc);
    if (label_canvas_font(t))
        l.triggered.insert(Trigger::canvas_font);
    if (label_audio(t))
        l.triggered.insert(Trigger::audio);
    l.value = l.triggered.empty() ? Verdict::non_fingerprinting : Verdict::fingerprinting;
    return l;
}

/// Labels every script of the manifest; scripts without a trace get an
/// empty one.
inline std::vector<Label> label_corpus(const CorpusManifest& m)
{
    std::vector<Label> out;
    std::set<std::string> seen;
    for (const auto& s : m.scripts) {
        if (!seen.insert(s.script_id).second)
            continue;
        if (const auto* t = m.trace(s.script_id)) {
            out.push_back(label(*t));
        } else {
            ExecutionTrace empty;
            empty.script_id = s.script_id;
            out.push_back(label(empty));
        }
    }
    return out;
}

struct Override {
    std::string script_id;
    Verdict value = Verdict::non_fingerprinting;
    std::string note;
};

inline std::vector<Override> read_overrides(const std::string& text)
{
    std::vector<Override> out;
    std::size_t n = 0;
    for (auto line : split_lines(text)) {
        ++n;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorpusError("overrides line " + std::to_string(n) + ": " + e.what());
        }
        if (!j.contains("script_id") || !j.contains("value"))
            throw CorpusError("overrides line " + std::to_string(n) + ": needs script_id and value");
        out.push_back({j["script_id"].get<std::string>(), parse_verdict(j["value"].get<std::string>()), j.value("note", "")});
    }
    return out;
}

/// Later overrides for the same script win. Unknown ids are reported on
/// `warn` and skipped.
inline std::vector<Label> apply_overrides(std::vector<Label> labels, const std::vector<Override>& overrides, std::ostream* warn = &std::cerr)
{
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i)
        index.emplace(labels[i].script_id, i);
    for (const auto& o : overrides) {
        auto it = index.find(o.script_id);
        if (it == index.end()) {
            if (warn)
                *warn << "warning: override for unknown script_id " << o.script_id << " skipped\n";
            continue;
        }
        labels[it->second].value = o.value;
        labels[it->second].source = LabelSource::manual_override;
    }
    return labels;
}

inline json to_json(const Label& l)
{
    json trig = json::array();
    for (auto t : l.triggered)
        trig.push_back(to_string(t));
    return {{"script_id", l.script_id}, {"value", to_string(l.value)},
        {"source", l.source == LabelSource::heuristic ? "heuristic" : "manual_override"}, {"triggered", trig}};
}

inline Label label_from_json(const json& j)
{
    Label l;
    l.script_id = j.at("script_id").get<std::string>();
    l.value = parse_verdict(j.at("value").get<std::string>());
    l.source = j.value("source", "heuristic") == "manual_override" ? LabelSource::manual_override : LabelSource::heuristic;
    for (const auto& t : j.value("triggered", json::array())) {
        const auto s = t.get<std::string>();
        if (s == "canvas")
            l.triggered.insert(Trigger::canvas);
        else if (s == "webrtc")
            l.triggered.insert(Trigger::webrtc);
        else if (s == "canvas_font")
            l.triggered.insert(Trigger::canvas_font);
        else if (s == "audio")
            l.triggered.insert(Trigger::audio);
        else
            throw CorpusError("unknown trigger '" + s + "'");
    }
    return l;
}

inline std::string write_labels(const std::vector<Label>& labels)
{
    std::string out;
    for (const auto& l : labels)
        out += to_json(l).dump() + "\n";
    return out;
}

inline std::vector<Label> read_labels(const std::string& text)
{
    std::vector<Label> out;
    for (auto line : split_lines(text))
        if (!trim(line).empty())
            out.push_back(label_from_json(json::parse(line)));
    return out;
}

} // namespace fpkit
