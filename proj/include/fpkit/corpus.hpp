#pragma once

// On-disk corpus of scripts and execution traces.
//
//   <root>/manifest                 JSONL, one ScriptRecord (sans content) per line
//   <root>/scripts/<script_id>      raw source bytes
//   <root>/traces/<script_id>.jsonl JSONL, one ApiCallRecord per line

#include <fpkit/util.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fpkit {

using json = nlohmann::json;

/// Validation failure. `offending_ids` lists the script ids at fault, if any.
class CorpusError : public std::runtime_error {
public:
    explicit CorpusError(const std::string& message, std::vector<std::string> ids = {})
        : std::runtime_error(format(message, ids))
        , offending_ids(std::move(ids))
    {
    }

    std::vector<std::string> offending_ids;

private:
    static std::string format(const std::string& message, const std::vector<std::string>& ids)
    {
        std::string out = message;
        for (std::size_t i = 0; i < ids.size(); ++i)
            out += (i == 0 ? ": " : ", ") + ids[i];
        return out;
    }
};

enum class ScriptKind { external, inline_script, unpacked_child };

inline std::string to_string(ScriptKind k)
{
    switch (k) {
    case ScriptKind::external: return "external";
    case ScriptKind::inline_script: return "inline";
    case ScriptKind::unpacked_child: return "unpacked_child";
    }
    return "external";
}

inline ScriptKind parse_script_kind(const std::string& s)
{
    if (s == "external")
        return ScriptKind::external;
    if (s == "inline")
        return ScriptKind::inline_script;
    if (s == "unpacked_child")
        return ScriptKind::unpacked_child;
    throw CorpusError("unknown script kind '" + s + "'");
}

/// Where a script was seen: the embedding page and the fetch URL (or the
/// synthetic "inline:<site_url>#<index>" id for inline scripts).
struct Occurrence {
    std::string site_url;
    std::string source_url;

    auto operator<=>(const Occurrence&) const = default;
};

inline std::string inline_source_url(const std::string& site_url, std::size_t index)
{
    return "inline:" + site_url + "#" + std::to_string(index);
}

/// Parses "inline:<site_url>#<index>"; nullopt if malformed or the site does
/// not match.
inline std::optional<std::size_t> parse_inline_index(const std::string& source_url, const std::string& site_url)
{
    const std::string prefix = "inline:" + site_url + "#";
    if (source_url.rfind(prefix, 0) != 0)
        return std::nullopt;
    std::string digits = source_url.substr(prefix.size());
    if (digits.empty() || digits.size() > 9 || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    return static_cast<std::size_t>(std::stoul(digits));
}

struct ScriptRecord {
    std::string script_id;
    ScriptKind kind = ScriptKind::external;
    std::optional<std::string> parent_script_id;
    std::vector<Occurrence> occurrences;
    std::string content;
    bool decode_error = false;

    const std::string& site_url() const { return occurrences.front().site_url; }
    const std::string& source_url() const { return occurrences.front().source_url; }

    bool operator==(const ScriptRecord&) const = default;
};

enum class AccessKind { call, get, set };

inline std::string to_string(AccessKind k)
{
    switch (k) {
    case AccessKind::call: return "call";
    case AccessKind::get: return "get";
    case AccessKind::set: return "set";
    }
    return "call";
}

inline AccessKind parse_access_kind(const std::string& s)
{
    if (s == "call")
        return AccessKind::call;
    if (s == "get")
        return AccessKind::get;
    if (s == "set")
        return AccessKind::set;
    throw CorpusError("unknown access_kind '" + s + "'");
}

enum class ValueType { string, number, boolean, null, undefined, object };

/// A logged argument or value. Primitive values keep their text in `text`;
/// objects are summarized by length/size and, for DOM elements, tag name.
struct SerializedValue {
    ValueType type = ValueType::undefined;
    std::string text;
    std::optional<double> length;
    std::optional<double> size;
    std::optional<std::string> tag;

    static SerializedValue string(std::string s) { return {ValueType::string, std::move(s), {}, {}, {}}; }
    static SerializedValue number(double v);
    static SerializedValue boolean(bool b) { return {ValueType::boolean, b ? "true" : "false", {}, {}, {}}; }
    static SerializedValue object(std::optional<std::string> tag = {}, std::optional<double> length = {})
    {
        return {ValueType::object, {}, length, {}, std::move(tag)};
    }

    bool operator==(const SerializedValue&) const = default;
};

namespace detail {
inline std::string value_type_name(ValueType t)
{
    switch (t) {
    case ValueType::string: return "string";
    case ValueType::number: return "number";
    case ValueType::boolean: return "boolean";
    case ValueType::null: return "null";
    case ValueType::undefined: return "undefined";
    case ValueType::object: return "object";
    }
    return "undefined";
}

inline std::string number_text(double v)
{
    json j = v;
    std::string s = j.dump();
    if (s.size() > 2 && s.substr(s.size() - 2) == ".0")
        s.resize(s.size() - 2);
    return s;
}
} // namespace detail

inline SerializedValue SerializedValue::number(double v)
{
    return {ValueType::number, detail::number_text(v), {}, {}, {}};
}

struct StackFrame {
    std::string script_url;
    std::string function_name;
    int line = 0;
    int column = 0;

    bool operator==(const StackFrame&) const = default;
};

struct ApiCallRecord {
    std::string script_id;
    std::string symbol;
    AccessKind access_kind = AccessKind::call;
    std::optional<std::vector<SerializedValue>> arguments;
    std::optional<SerializedValue> value;
    std::int64_t call_index = 0;
    std::vector<StackFrame> stack;

    bool operator==(const ApiCallRecord&) const = default;
};

struct ExecutionTrace {
    std::string script_id;
    std::vector<ApiCallRecord> records;

    bool operator==(const ExecutionTrace&) const = default;
};

struct CorpusManifest {
    std::vector<ScriptRecord> scripts;
    std::map<std::string, ExecutionTrace> traces;

    std::set<std::string> sites() const
    {
        std::set<std::string> out;
        for (const auto& s : scripts)
            for (const auto& o : s.occurrences)
                out.insert(o.site_url);
        return out;
    }

    std::size_t decode_errors() const
    {
        return static_cast<std::size_t>(std::count_if(scripts.begin(), scripts.end(), [](const auto& s) { return s.decode_error; }));
    }

    const ScriptRecord* find(const std::string& id) const
    {
        for (const auto& s : scripts)
            if (s.script_id == id)
                return &s;
        return nullptr;
    }

    const ExecutionTrace* trace(const std::string& id) const
    {
        auto it = traces.find(id);
        return it == traces.end() ? nullptr : &it->second;
    }

    bool operator==(const CorpusManifest&) const = default;
};

// ---- JSON mapping ---------------------------------------------------------

inline json to_json(const SerializedValue& v)
{
    json j;
    j["type"] = detail::value_type_name(v.type);
    switch (v.type) {
    case ValueType::string:
    case ValueType::number:
    case ValueType::boolean:
        j["value"] = v.text;
        break;
    default:
        break;
    }
    if (v.length)
        j["length"] = *v.length;
    if (v.size)
        j["size"] = *v.size;
    if (v.tag)
        j["tag"] = *v.tag;
    return j;
}

inline SerializedValue serialized_value_from_json(const json& j)
{
    SerializedValue v;
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw CorpusError("serialized value needs a string 'type'");
    const std::string t = j["type"].get<std::string>();
    if (t == "string")
        v.type = ValueType::string;
    else if (t == "number")
        v.type = ValueType::number;
    else if (t == "boolean")
        v.type = ValueType::boolean;
    else if (t == "null")
        v.type = ValueType::null;
    else if (t == "undefined")
        v.type = ValueType::undefined;
    else if (t == "object")
        v.type = ValueType::object;
    else
        throw CorpusError("unknown value type '" + t + "'");
    if (auto it = j.find("value"); it != j.end()) {
        if (it->is_string())
            v.text = it->get<std::string>();
        else if (it->is_number())
            v.text = detail::number_text(it->get<double>());
        else if (it->is_boolean())
            v.text = it->get<bool>() ? "true" : "false";
        else if (!it->is_null())
            throw CorpusError("serialized 'value' must be a scalar");
    }
    if (auto it = j.find("length"); it != j.end() && it->is_number())
        v.length = it->get<double>();
    if (auto it = j.find("size"); it != j.end() && it->is_number())
        v.size = it->get<double>();
    if (auto it = j.find("tag"); it != j.end() && it->is_string())
        v.tag = it->get<std::string>();
    return v;
}

inline json to_json(const ApiCallRecord& r)
{
    json j;
    j["script_id"] = r.script_id;
    j["symbol"] = r.symbol;
    j["access_kind"] = to_string(r.access_kind);
    if (r.arguments) {
        json args = json::array();
        for (const auto& a : *r.arguments)
            args.push_back(to_json(a));
        j["arguments"] = std::move(args);
    } else {
        j["arguments"] = nullptr;
    }
    j["value"] = r.value ? to_json(*r.value) : json(nullptr);
    j["call_index"] = r.call_index;
    json stack = json::array();
    for (const auto& f : r.stack)
        stack.push_back({{"script_url", f.script_url}, {"function_name", f.function_name}, {"line", f.line}, {"column", f.column}});
    j["stack"] = std::move(stack);
    return j;
}

inline ApiCallRecord api_call_from_json(const json& j)
{
    auto str = [&](const char* key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw CorpusError(std::string("trace record needs string '") + key + "'");
        return it->get<std::string>();
    };
    if (!j.is_object())
        throw CorpusError("trace record must be a JSON object");
    ApiCallRecord r;
    r.script_id = str("script_id");
    r.symbol = str("symbol");
    r.access_kind = parse_access_kind(str("access_kind"));
    if (auto it = j.find("arguments"); it != j.end() && !it->is_null()) {
        if (!it->is_array())
            throw CorpusError("'arguments' must be an array");
        std::vector<SerializedValue> args;
        for (const auto& a : *it)
            args.push_back(serialized_value_from_json(a));
        r.arguments = std::move(args);
    }
    if (auto it = j.find("value"); it != j.end() && !it->is_null())
        r.value = serialized_value_from_json(*it);
    if (auto it = j.find("call_index"); it != j.end() && it->is_number_integer())
        r.call_index = it->get<std::int64_t>();
    else
        throw CorpusError("trace record needs integer 'call_index'");
    if (auto it = j.find("stack"); it != j.end() && it->is_array()) {
        for (const auto& f : *it) {
            StackFrame frame;
            frame.script_url = f.value("script_url", "");
            frame.function_name = f.value("function_name", "");
            frame.line = f.value("line", 0);
            frame.column = f.value("column", 0);
            r.stack.push_back(std::move(frame));
        }
    }
    if ((r.access_kind == AccessKind::call) != r.arguments.has_value())
        throw CorpusError("arguments must be present exactly for calls (" + r.symbol + ")", {r.script_id});
    return r;
}

inline json manifest_line(const ScriptRecord& s, const Occurrence& o)
{
    json j;
    j["script_id"] = s.script_id;
    j["site_url"] = o.site_url;
    j["source_url"] = o.source_url;
    j["kind"] = to_string(s.kind);
    if (s.parent_script_id)
        j["parent_script_id"] = *s.parent_script_id;
    return j;
}

// ---- validation -----------------------------------------------------------

/// Checks the trace invariants: shared script id and strictly increasing
/// call_index per (symbol, access_kind) stream.
inline void validate_trace(const ExecutionTrace& trace)
{
    std::map<std::pair<std::string, AccessKind>, std::int64_t> last;
    for (const auto& r : trace.records) {
        if (r.script_id != trace.script_id)
            throw CorpusError("trace record names a different script", {trace.script_id, r.script_id});
        auto key = std::make_pair(r.symbol, r.access_kind);
        auto it = last.find(key);
        if (it != last.end() && r.call_index <= it->second)
            throw CorpusError("call_index not strictly increasing for " + r.symbol, {trace.script_id});
        if (r.call_index < 0)
            throw CorpusError("negative call_index for " + r.symbol, {trace.script_id});
        last[key] = r.call_index;
    }
}

inline void validate_record(const ScriptRecord& s)
{
    if (s.occurrences.empty())
        throw CorpusError("script has no occurrence", {s.script_id});
    if ((s.kind == ScriptKind::unpacked_child) != s.parent_script_id.has_value())
        throw CorpusError("parent_script_id must be set exactly for unpacked_child scripts", {s.script_id});
    if (s.kind == ScriptKind::inline_script) {
        for (const auto& o : s.occurrences)
            if (!parse_inline_index(o.source_url, o.site_url))
                throw CorpusError("inline script source_url must be inline:<site_url>#<index>", {s.script_id});
    }
}

/// Loads and validates a corpus directory. One ScriptRecord is produced per
/// manifest line, in file order; see dedupe() for merging.
inline CorpusManifest ingest(const std::filesystem::path& root)
{
    namespace fs = std::filesystem;
    const fs::path manifest_path = root / "manifest";
    if (!fs::is_regular_file(manifest_path))
        throw CorpusError("missing manifest at " + manifest_path.string());

    CorpusManifest m;
    const std::string text = read_file(manifest_path);
    std::map<std::pair<std::string, std::size_t>, std::string> inline_slots;
    std::map<std::string, std::string> content_cache;
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorpusError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("script_id") || !j.contains("site_url") || !j.contains("source_url") || !j.contains("kind"))
            throw CorpusError("manifest line " + std::to_string(line_no) + ": needs script_id, site_url, source_url, kind");
        ScriptRecord s;
        s.script_id = j["script_id"].get<std::string>();
        s.kind = parse_script_kind(j["kind"].get<std::string>());
        if (auto it = j.find("parent_script_id"); it != j.end() && !it->is_null())
            s.parent_script_id = it->get<std::string>();
        s.occurrences.push_back({j["site_url"].get<std::string>(), j["source_url"].get<std::string>()});
        validate_record(s);

        if (s.kind == ScriptKind::inline_script) {
            auto idx = *parse_inline_index(s.source_url(), s.site_url());
            auto [it, inserted] = inline_slots.emplace(std::make_pair(s.site_url(), idx), s.script_id);
            if (!inserted && it->second != s.script_id)
                throw CorpusError("inline index reused within a document", {it->second, s.script_id});
        }

        auto cached = content_cache.find(s.script_id);
        if (cached == content_cache.end()) {
            const fs::path script_path = root / "scripts" / s.script_id;
            if (!fs::is_regular_file(script_path))
                throw CorpusError("script content missing", {s.script_id});
            std::string content = read_file(script_path);
            if (sha256_hex(content) != s.script_id)
                throw CorpusError("script_id does not match the content hash", {s.script_id});
            cached = content_cache.emplace(s.script_id, std::move(content)).first;
        }
        s.content = cached->second;
        s.decode_error = !is_valid_utf8(s.content);
        m.scripts.push_back(std::move(s));
    }

    const fs::path trace_dir = root / "traces";
    if (fs::is_directory(trace_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(trace_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::vector<std::string> unknown;
        for (const auto& file : files) {
            std::string id = file.stem().string();
            if (!content_cache.count(id)) {
                unknown.push_back(id);
                continue;
            }
            ExecutionTrace trace;
            trace.script_id = id;
            std::size_t n = 0;
            const std::string text = read_file(file);
            for (auto line : split_lines(text)) {
                ++n;
                if (trim(line).empty())
                    continue;
                try {
                    trace.records.push_back(api_call_from_json(json::parse(line)));
                } catch (const json::exception& e) {
                    throw CorpusError(file.filename().string() + " line " + std::to_string(n) + ": " + e.what(), {id});
                }
            }
            for (const auto& r : trace.records)
                if (!content_cache.count(r.script_id))
                    unknown.push_back(r.script_id);
            if (unknown.empty())
                validate_trace(trace);
            m.traces.emplace(id, std::move(trace));
        }
        if (!unknown.empty()) {
            std::sort(unknown.begin(), unknown.end());
            unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
            throw CorpusError("trace references unknown script_id", unknown);
        }
    }
    return m;
}

/// Merges records sharing a script_id, keeping first-seen order and the
/// union of occurrences.
inline CorpusManifest dedupe(CorpusManifest m)
{
    std::vector<ScriptRecord> merged;
    std::map<std::string, std::size_t> index;
    for (auto& s : m.scripts) {
        auto it = index.find(s.script_id);
        if (it == index.end()) {
            index.emplace(s.script_id, merged.size());
            merged.push_back(std::move(s));
            continue;
        }
        auto& target = merged[it->second];
        for (auto& o : s.occurrences)
            if (std::find(target.occurrences.begin(), target.occurrences.end(), o) == target.occurrences.end())
                target.occurrences.push_back(std::move(o));
    }
    m.scripts = std::move(merged);
    return m;
}

/// Writes `m` in the corpus layout; ingest(root) reads it back unchanged.
inline void write_corpus(const CorpusManifest& m, const std::filesystem::path& root)
{
    namespace fs = std::filesystem;
    fs::create_directories(root / "scripts");
    fs::create_directories(root / "traces");
    std::string manifest;
    for (const auto& s : m.scripts) {
        for (const auto& o : s.occurrences)
            manifest += manifest_line(s, o).dump() + "\n";
        write_file(root / "scripts" / s.script_id, s.content);
    }
    write_file(root / "manifest", manifest);
    for (const auto& [id, trace] : m.traces) {
        std::string out;
        for (const auto& r : trace.records)
            out += to_json(r).dump() + "\n";
        write_file(root / "traces" / (id + ".jsonl"), out);
    }
}

/// Builds a record for in-memory corpora (tests, generators).
inline ScriptRecord make_script(std::string content, std::string site_url, std::string source_url,
    ScriptKind kind = ScriptKind::external, std::optional<std::string> parent = std::nullopt)
{
    ScriptRecord s;
    s.script_id = sha256_hex(content);
    s.kind = kind;
    s.parent_script_id = std::move(parent);
    s.occurrences.push_back({std::move(site_url), std::move(source_url)});
    s.decode_error = !is_valid_utf8(content);
    s.content = std::move(content);
    return s;
}

/// Appends a record to a trace, assigning the next call_index for its
/// (symbol, access_kind) stream.
class TraceBuilder {
public:
    explicit TraceBuilder(std::string script_id, std::string script_url = {})
        : script_url_(std::move(script_url))
    {
        trace_.script_id = std::move(script_id);
    }

    TraceBuilder& call(const std::string& symbol, std::vector<SerializedValue> args, std::optional<SerializedValue> ret = {}, int line = 1)
    {
        return push(symbol, AccessKind::call, std::move(args), std::move(ret), line);
    }
    TraceBuilder& get(const std::string& symbol, std::optional<SerializedValue> value = {}, int line = 1)
    {
        return push(symbol, AccessKind::get, std::nullopt, std::move(value), line);
    }
    TraceBuilder& set(const std::string& symbol, SerializedValue value, int line = 1)
    {
        return push(symbol, AccessKind::set, std::nullopt, std::move(value), line);
    }

    const ExecutionTrace& trace() const { return trace_; }
    ExecutionTrace take() { return std::move(trace_); }

private:
    TraceBuilder& push(const std::string& symbol, AccessKind kind, std::optional<std::vector<SerializedValue>> args,
        std::optional<SerializedValue> value, int line)
    {
        ApiCallRecord r;
        r.script_id = trace_.script_id;
        r.symbol = symbol;
        r.access_kind = kind;
        r.arguments = std::move(args);
        r.value = std::move(value);
        r.call_index = counters_[{symbol, kind}]++;
        r.stack.push_back({script_url_, "", line, 0});
        trace_.records.push_back(std::move(r));
        return *this;
    }

    std::string script_url_;
    ExecutionTrace trace_;
    std::map<std::pair<std::string, AccessKind>, std::int64_t> counters_;
};

} // namespace fpkit
