#pragma once

// Dynamic features from execution traces: presence, counts and derived
// argument/value features.

#include <fpkit/corpus.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fpkit {

struct DynamicFeatureVector {
    std::string script_id;
    std::map<std::string, double> features;

    bool operator==(const DynamicFeatureVector&) const = default;
};

inline constexpr std::size_t default_record_cap = 50;

inline const std::set<std::string>& default_cap_exempt()
{
    static const std::set<std::string> s = {"CanvasRenderingContext2D.measureText", "CanvasRenderingContext2D.font"};
    return s;
}

/// Keeps the first `cap` records of every (symbol, access_kind) stream,
/// except for exempt symbols. Relative order is preserved.
inline ExecutionTrace cap_records(const ExecutionTrace& t, std::size_t cap = default_record_cap,
    const std::set<std::string>& exempt = default_cap_exempt())
{
    ExecutionTrace out;
    out.script_id = t.script_id;
    std::map<std::pair<std::string, AccessKind>, std::size_t> seen;
    for (const auto& r : t.records) {
        if (!exempt.count(r.symbol) && seen[{r.symbol, r.access_kind}]++ >= cap)
            continue;
        out.records.push_back(r);
    }
    return out;
}

namespace detail {

inline std::size_t char_length(const std::string& s)
{
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80)
            ++n;
    return n;
}

inline std::optional<double> numeric_value(const SerializedValue& v)
{
    if (v.type != ValueType::number && v.type != ValueType::string)
        return std::nullopt;
    auto t = trim(v.text);
    if (t.empty())
        return std::nullopt;
    double d = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
    if (ec != std::errc() || ptr != t.data() + t.size())
        return std::nullopt;
    return d;
}

inline std::optional<double> payload_length(const SerializedValue& v)
{
    switch (v.type) {
    case ValueType::string:
        return static_cast<double>(char_length(v.text));
    case ValueType::object:
        if (v.length)
            return *v.length;
        if (v.size)
            return *v.size;
        return std::nullopt;
    case ValueType::null:
    case ValueType::undefined:
        return 0.0;
    default:
        return std::nullopt;
    }
}

inline const SerializedValue* arg(const ApiCallRecord& r, std::size_t i)
{
    if (!r.arguments || r.arguments->size() <= i)
        return nullptr;
    return &(*r.arguments)[i];
}

inline std::string member_of(const std::string& symbol)
{
    auto dot = symbol.rfind('.');
    return dot == std::string::npos ? symbol : symbol.substr(dot + 1);
}

inline std::string lower(std::string s)
{
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return s;
}

inline void raise(std::map<std::string, double>& f, const std::string& name, double v)
{
    auto [it, inserted] = f.emplace(name, v);
    if (!inserted)
        it->second = std::max(it->second, v);
}

} // namespace detail

/// Attachment methods whose first argument is the inserted element.
inline bool is_attachment_symbol(const std::string& symbol)
{
    const auto m = detail::member_of(symbol);
    return m == "appendChild" || m == "insertBefore" || m == "append" || m == "prepend" || m == "replaceChild";
}

inline DynamicFeatureVector extract_dynamic_features(const ExecutionTrace& t)
{
    using detail::arg;
    DynamicFeatureVector v;
    v.script_id = t.script_id;
    auto& f = v.features;

    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::set<std::string>> font_values;
    std::map<std::string, double> last_dimension;

    for (const auto& r : t.records) {
        ++counts[r.symbol];
        const auto member = detail::member_of(r.symbol);

        if (r.access_kind == AccessKind::call && (member == "fillText" || member == "strokeText" || member == "measureText")) {
            if (const auto* a = arg(r, 0); a && a->type == ValueType::string)
                detail::raise(f, r.symbol + "#textlen", static_cast<double>(detail::char_length(a->text)));
        } else if (r.access_kind == AccessKind::set && (r.symbol == "HTMLCanvasElement.width" || r.symbol == "HTMLCanvasElement.height")) {
            if (r.value)
                if (auto d = detail::numeric_value(*r.value)) {
                    f[r.symbol + "#value"] = *d;
                    last_dimension[member] = *d;
                }
        } else if (r.access_kind == AccessKind::set && member == "font") {
            if (r.value && r.value->type == ValueType::string)
                font_values[r.symbol].insert(r.value->text);
        } else if (r.access_kind == AccessKind::call && r.symbol == "Navigator.sendBeacon") {
            if (const auto* a = arg(r, 1))
                if (auto len = detail::payload_length(*a))
                    detail::raise(f, r.symbol + "#payloadlen", *len);
        } else if (r.access_kind == AccessKind::call && r.symbol == "XMLHttpRequest.send") {
            if (const auto* a = arg(r, 0))
                if (auto len = detail::payload_length(*a))
                    detail::raise(f, r.symbol + "#payloadlen", *len);
        } else if (r.access_kind == AccessKind::call && r.symbol == "Document.createElement") {
            if (const auto* a = arg(r, 0); a && a->type == ValueType::string && !a->text.empty())
                f[r.symbol + "#tag_" + detail::lower(truncate_utf8(a->text, 32))] = 1;
        } else if (r.access_kind == AccessKind::call && is_attachment_symbol(r.symbol)) {
            if (const auto* a = arg(r, 0); a && a->type == ValueType::object) {
                const bool canvas = a->tag && detail::lower(*a->tag) == "canvas";
                detail::raise(f, r.symbol + "#onscreen", canvas ? 1.0 : 0.0);
            }
        }
    }

    for (const auto& [symbol, n] : counts) {
        f[symbol] = 1;
        f[symbol + "#count"] = static_cast<double>(n);
    }
    for (const auto& [symbol, values] : font_values)
        f[symbol + "#distinct"] = static_cast<double>(values.size());
    if (last_dimension.count("width") && last_dimension.count("height"))
        f["HTMLCanvasElement.width#area"] = last_dimension["width"] * last_dimension["height"];
    return v;
}

inline json to_json(const DynamicFeatureVector& v)
{
    return {{"script_id", v.script_id}, {"features", v.features}};
}

inline DynamicFeatureVector dynamic_vector_from_json(const json& j)
{
    DynamicFeatureVector v;
    v.script_id = j.at("script_id").get<std::string>();
    for (const auto& [k, val] : j.at("features").items())
        v.features[k] = val.get<double>();
    return v;
}

} // namespace fpkit
