#pragma once

// Disagreement reports for manual review of classifier/ground-truth
// mismatches.

#include <fpkit/corpus.hpp>
#include <fpkit/labeler.hpp>
#include <fpkit/similarity.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fpkit {

inline bool is_fingerprinting_api(const std::string& symbol)
{
    static const std::vector<std::string> prefixes = {"CanvasRenderingContext2D.", "HTMLCanvasElement.", "RTCPeerConnection.",
        "AudioContext.", "OfflineAudioContext.", "BaseAudioContext."};
    for (const auto& p : prefixes)
        if (symbol.rfind(p, 0) == 0)
            return true;
    return false;
}

inline std::string describe(const SerializedValue& v)
{
    switch (v.type) {
    case ValueType::string: return json(v.text).dump();
    case ValueType::number:
    case ValueType::boolean: return v.text;
    case ValueType::null: return "null";
    case ValueType::undefined: return "undefined";
    case ValueType::object: {
        std::string s = "[object";
        if (v.tag)
            s += " " + *v.tag;
        if (v.length)
            s += " length=" + detail::number_text(*v.length);
        if (v.size)
            s += " size=" + detail::number_text(*v.size);
        return s + "]";
    }
    }
    return "?";
}

inline constexpr int snippet_context = 5;

struct ReportInput {
    const ScriptRecord* script = nullptr;
    const ExecutionTrace* trace = nullptr;
    Verdict verdict = Verdict::non_fingerprinting;
    Verdict ground_truth = Verdict::non_fingerprinting;
    const std::vector<LibraryVersion>* library_versions = nullptr;
};

/// nullopt when verdict and ground truth agree.
inline std::optional<std::string> disagreement_report(const ReportInput& in)
{
    if (in.verdict == in.ground_truth)
        return std::nullopt;
    const auto& s = *in.script;
    std::string out;
    out += "# Disagreement report " + s.script_id + "\n\n";
    out += "classifier: " + to_string(in.verdict) + "\n";
    out += "ground truth: " + to_string(in.ground_truth) + "\n";
    for (const auto& o : s.occurrences)
        out += "seen on: " + o.site_url + " from " + o.source_url + "\n";

    out += "\n## 1. Monitored API accesses\n\n";
    if (!in.trace) {
        out += "unavailable: no execution trace\n";
    } else if (in.trace->records.empty()) {
        out += "(no recorded accesses)\n";
    } else {
        for (const auto& r : in.trace->records) {
            std::string line = "- " + to_string(r.access_kind) + " " + r.symbol;
            if (r.arguments) {
                line += "(";
                for (std::size_t i = 0; i < r.arguments->size(); ++i)
                    line += (i ? ", " : "") + describe((*r.arguments)[i]);
                line += ")";
            }
            if (r.value)
                line += (r.access_kind == AccessKind::set ? " = " : " -> ") + describe(*r.value);
            if (!r.stack.empty())
                line += "  [line " + std::to_string(r.stack.front().line) + "]";
            out += line + "\n";
        }
    }

    out += "\n## 2. Source around fingerprinting API calls\n\n";
    if (!in.trace) {
        out += "unavailable: no execution trace\n";
    } else {
        auto lines = split_lines(s.content);
        std::set<int> centers;
        for (const auto& r : in.trace->records)
            if (is_fingerprinting_api(r.symbol) && !r.stack.empty() && r.stack.front().line > 0)
                centers.insert(r.stack.front().line);
        if (centers.empty())
            out += "(no canvas, WebRTC, canvas-font or audio API calls with source positions)\n";
        int last_printed = 0;
        for (int c : centers) {
            const int from = std::max(1, c - snippet_context);
            const int to = std::min(static_cast<int>(lines.size()), c + snippet_context);
            if (from > last_printed)
                out += "--- line " + std::to_string(c) + "\n";
            for (int l = std::max(from, last_printed + 1); l <= to; ++l)
                out += std::to_string(l) + (l == c ? " > " : " | ") + std::string(lines[static_cast<std::size_t>(l - 1)]) + "\n";
            last_printed = std::max(last_printed, to);
        }
    }

    out += "\n## 3. Similarity to library versions\n\n";
    const auto tokens = tokenize_script(s.content);
    if (!in.library_versions || in.library_versions->empty()) {
        out += "unavailable: no library versions supplied\n";
    } else {
        auto best = best_similarity(tokens.tokens, *in.library_versions);
        out += "best score: " + json(best.score).dump() + "\nversion: " + best.version + "\n";
    }

    out += "\n## 4. Beautified script\n\n```js\n";
    if (tokens.fallback) {
        out += s.content;
        if (!s.content.empty() && s.content.back() != '\n')
            out += '\n';
    } else {
        out += beautify(s.content);
    }
    out += "```\n";
    return out;
}

} // namespace fpkit
