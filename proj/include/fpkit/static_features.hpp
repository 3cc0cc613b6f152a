#pragma once

// Static analysis: parsing, eval/Function unpacking and parent:child
// features filtered by a Web API keyword vocabulary.

#include <fpkit/corpus.hpp>
#include <fpkit/js/parser.hpp>

#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#ifndef FPKIT_DATA_DIR
#define FPKIT_DATA_DIR "data"
#endif

namespace fpkit {

using js::AstNode;

struct KeywordVocabulary {
    std::unordered_set<std::string> keywords;
    std::string version;

    bool contains(const std::string& s) const { return keywords.count(s) != 0; }
    std::size_t size() const { return keywords.size(); }
};

/// One keyword per line; `#` starts a comment. A `# version: <tag>` comment
/// sets the version tag.
inline KeywordVocabulary parse_vocabulary(std::string_view text, std::string default_version = "custom")
{
    KeywordVocabulary v;
    v.version = std::move(default_version);
    for (auto line : split_lines(text)) {
        auto t = trim(line);
        if (t.empty())
            continue;
        if (t.front() == '#') {
            auto body = trim(t.substr(1));
            if (body.rfind("version:", 0) == 0)
                v.version = std::string(trim(body.substr(8)));
            continue;
        }
        if (auto hash = t.find('#'); hash != std::string_view::npos)
            t = trim(t.substr(0, hash));
        if (!t.empty())
            v.keywords.emplace(t);
    }
    if (v.keywords.empty())
        throw std::invalid_argument("keyword vocabulary is empty");
    return v;
}

inline KeywordVocabulary load_vocabulary(const std::filesystem::path& path)
{
    return parse_vocabulary(read_file(path), path.stem().string());
}

inline std::filesystem::path data_dir()
{
    if (const char* env = std::getenv("FPKIT_DATA"))
        return env;
    return FPKIT_DATA_DIR;
}

inline const KeywordVocabulary& default_vocabulary()
{
    static const KeywordVocabulary v = load_vocabulary(data_dir() / "web_api_keywords.txt");
    return v;
}

struct ParseResult {
    std::optional<AstNode> ast;
    std::string error;

    bool ok() const { return ast.has_value(); }
};

inline ParseResult parse_source(std::string_view source)
{
    ParseResult r;
    try {
        r.ast = js::parse(source);
    } catch (const js::SyntaxError& e) {
        r.error = e.what();
    }
    return r;
}

inline ParseResult parse_script(const ScriptRecord& s)
{
    if (s.decode_error)
        return {std::nullopt, "content is not valid UTF-8"};
    return parse_source(s.content);
}

inline constexpr std::size_t max_label_bytes = 64;

inline bool is_control_flow(const std::string& type)
{
    static const std::unordered_set<std::string> types = {"ForStatement", "ForInStatement", "ForOfStatement", "WhileStatement",
        "DoWhileStatement", "IfStatement", "TryStatement", "CatchClause", "SwitchStatement"};
    return types.count(type) != 0;
}

/// Label of a node in the child position of a pair.
inline std::string child_label(const AstNode& n)
{
    if (n.terminal)
        return truncate_utf8(n.label, max_label_bytes);
    return n.label.empty() ? n.type : n.label;
}

struct StaticFeatureOptions {
    // keep every pair under a control-flow node whose subtree holds a match
    bool context_retention = true;
};

namespace detail {

// Returns whether the subtree under `n` contains a vocabulary match.
inline bool collect_pairs(const AstNode& n, const KeywordVocabulary& vocab, const StaticFeatureOptions& opt, std::set<std::string>& out)
{
    bool matched = false;
    const std::string& parent = n.type;
    const bool parent_hit = vocab.contains(parent);
    for (const auto& c : n.children) {
        if (collect_pairs(c, vocab, opt, out))
            matched = true;
        std::string child = child_label(c);
        if (parent_hit || vocab.contains(child)) {
            out.insert(parent + ":" + child);
            matched = true;
        }
    }
    if (matched && opt.context_retention && is_control_flow(n.type))
        for (const auto& c : n.children)
            out.insert(parent + ":" + child_label(c));
    return matched;
}

} // namespace detail

inline std::set<std::string> extract_static_features(const AstNode& ast, const KeywordVocabulary& vocab, const StaticFeatureOptions& opt = {})
{
    std::set<std::string> out;
    detail::collect_pairs(ast, vocab, opt, out);
    return out;
}

// ---- unpacking ------------------------------------------------------------

/// Statically resolves a string-valued expression built from string
/// literals, `+` concatenation and substitution-only templates.
inline std::optional<std::string> resolve_string(const AstNode& n)
{
    if (n.type == "Literal" && n.op == "string")
        return n.label;
    if (n.type == "BinaryExpression" && n.op == "+" && n.children.size() == 2) {
        auto l = resolve_string(n.children[0]);
        if (!l)
            return std::nullopt;
        auto r = resolve_string(n.children[1]);
        if (!r)
            return std::nullopt;
        return *l + *r;
    }
    if (n.type == "TemplateLiteral") {
        std::string s;
        for (const auto& c : n.children) {
            if (c.type == "TemplateElement") {
                s += c.label;
            } else if (auto v = resolve_string(c)) {
                s += *v;
            } else {
                return std::nullopt;
            }
        }
        return s;
    }
    return std::nullopt;
}

struct UnpackedScript {
    ScriptRecord record;
    std::optional<AstNode> ast;
    std::string parse_error;
    int depth = 1;
};

struct UnpackResult {
    std::vector<UnpackedScript> children;
    std::size_t unresolved = 0;
};

inline constexpr int default_unpack_depth = 5;

namespace detail {

inline bool is_callee(const AstNode& call, std::string_view name)
{
    return !call.children.empty() && call.children[0].type == "Identifier" && call.children[0].label == name;
}

// Code payloads of eval(...) and [new] Function(...) calls, in source order.
inline void find_payloads(const AstNode& n, std::vector<std::optional<std::string>>& out)
{
    const bool call = n.type == "CallExpression" || n.type == "NewExpression";
    if (call && n.children.size() >= 2 && n.type == "CallExpression" && is_callee(n, "eval")) {
        out.push_back(resolve_string(n.children[1]));
    } else if (call && is_callee(n, "Function")) {
        if (n.children.size() >= 2)
            out.push_back(resolve_string(n.children.back()));
    }
    for (const auto& c : n.children)
        find_payloads(c, out);
}

inline void unpack_into(const ScriptRecord& parent, const AstNode& ast, int depth, int max_depth, std::set<std::string>& seen, UnpackResult& out)
{
    std::vector<std::optional<std::string>> payloads;
    find_payloads(ast, payloads);
    for (auto& p : payloads) {
        if (!p) {
            ++out.unresolved;
            continue;
        }
        UnpackedScript child;
        child.record.script_id = sha256_hex(*p);
        child.record.kind = ScriptKind::unpacked_child;
        child.record.parent_script_id = parent.script_id;
        child.record.occurrences = parent.occurrences;
        child.record.content = std::move(*p);
        child.depth = depth;
        if (!seen.insert(child.record.script_id).second)
            continue;
        auto parsed = parse_source(child.record.content);
        child.ast = std::move(parsed.ast);
        child.parse_error = std::move(parsed.error);
        out.children.push_back(std::move(child));
        if (depth < max_depth && out.children.back().ast) {
            // copy: the recursive call may grow out.children
            ScriptRecord rec = out.children.back().record;
            AstNode sub = *out.children.back().ast;
            unpack_into(rec, sub, depth + 1, max_depth, seen, out);
        }
    }
}

} // namespace detail

/// Children discovered through eval/Function payloads down to `max_depth`
/// nesting levels, in discovery order. Identical payloads appear once.
inline UnpackResult unpack(const ScriptRecord& script, const AstNode& ast, int max_depth = default_unpack_depth)
{
    UnpackResult out;
    std::set<std::string> seen {script.script_id};
    if (max_depth >= 1)
        detail::unpack_into(script, ast, 1, max_depth, seen, out);
    return out;
}

inline UnpackResult unpack(const ScriptRecord& script, int max_depth = default_unpack_depth)
{
    auto parsed = parse_script(script);
    if (!parsed.ok())
        return {};
    return unpack(script, *parsed.ast, max_depth);
}

struct StaticFeatureVector {
    std::string script_id;
    std::set<std::string> features;

    bool operator==(const StaticFeatureVector&) const = default;
};

/// Result of featurizing one corpus script. `parse_failure` is set when the
/// script itself does not parse; it then has no static vector.
struct StaticAnalysis {
    std::string script_id;
    std::optional<StaticFeatureVector> vector;
    std::string parse_failure;
    std::size_t children = 0;
    std::size_t child_parse_failures = 0;
    std::size_t unresolved = 0;
};

/// Features of the script and of every unpacked child, merged.
inline StaticAnalysis analyze_static(const ScriptRecord& s, const KeywordVocabulary& vocab, int max_depth = default_unpack_depth,
    const StaticFeatureOptions& opt = {})
{
    StaticAnalysis a;
    a.script_id = s.script_id;
    auto parsed = parse_script(s);
    if (!parsed.ok()) {
        a.parse_failure = parsed.error;
        return a;
    }
    StaticFeatureVector v {s.script_id, extract_static_features(*parsed.ast, vocab, opt)};
    auto unpacked = unpack(s, *parsed.ast, max_depth);
    a.children = unpacked.children.size();
    a.unresolved = unpacked.unresolved;
    for (const auto& c : unpacked.children) {
        if (!c.ast) {
            ++a.child_parse_failures;
            continue;
        }
        auto f = extract_static_features(*c.ast, vocab, opt);
        v.features.insert(f.begin(), f.end());
    }
    a.vector = std::move(v);
    return a;
}

inline json to_json(const StaticAnalysis& a)
{
    json j;
    j["script_id"] = a.script_id;
    if (a.vector)
        j["features"] = std::vector<std::string>(a.vector->features.begin(), a.vector->features.end());
    else
        j["parse_failure"] = a.parse_failure;
    return j;
}

} // namespace fpkit
