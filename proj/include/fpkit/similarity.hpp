#pragma once

// Jaccard similarity baseline against reference library versions.

#include <fpkit/js/lexer.hpp>
#include <fpkit/util.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpkit {

namespace detail {

inline bool attaches_left(std::string_view t)
{
    return t == ";" || t == "," || t == ")" || t == "]" || t == "." || t == "?.";
}

inline bool ends_operand(const js::RawToken& t)
{
    using js::TokenKind;
    if (t.kind == TokenKind::identifier || t.kind == TokenKind::numeric || t.kind == TokenKind::string || t.kind == TokenKind::regex
        || t.kind == TokenKind::private_name)
        return true;
    if (t.kind == TokenKind::keyword)
        return t.text == "this" || t.text == "super" || t.text == "null" || t.text == "true" || t.text == "false";
    if (t.kind == TokenKind::template_part)
        return t.text.back() == '`';
    return t.text == ")" || t.text == "]";
}

inline std::string beautify_tokens(const std::vector<js::RawToken>& toks)
{
    std::string out;
    int indent = 0;
    int parens = 0;
    // paren depth saved at each open brace
    std::vector<int> saved;
    bool line_start = true;
    bool glue_next = false;
    auto newline = [&] {
        if (!line_start) {
            out += '\n';
            line_start = true;
        }
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        const std::string_view s = t.text;
        const js::RawToken* prev = i ? &toks[i - 1] : nullptr;

        if (s == "}") {
            newline();
            indent = std::max(0, indent - 1);
            if (!saved.empty()) {
                parens = saved.back();
                saved.pop_back();
            }
        }
        if (line_start) {
            out.append(static_cast<std::size_t>(indent) * 2, ' ');
        } else {
            bool space = !glue_next && !attaches_left(s);
            if (space && (s == "(" || s == "[") && prev && ends_operand(*prev))
                space = false;
            if (space && (s == "++" || s == "--") && prev && ends_operand(*prev))
                space = false;
            if (space)
                out += ' ';
        }
        out += s;
        line_start = false;
        glue_next = s == "(" || s == "[" || s == "." || s == "?." || s == "!" || s == "~" || s == "..."
            || ((s == "++" || s == "--") && !(prev && ends_operand(*prev)));

        if (s == "(" || s == "[")
            ++parens;
        else if ((s == ")" || s == "]") && parens > 0)
            --parens;

        if (s == "{") {
            saved.push_back(parens);
            parens = 0;
            ++indent;
            newline();
        } else if (s == ";" && parens == 0) {
            newline();
        } else if (s == "}") {
            const bool follows = i + 1 < toks.size() && attaches_left(toks[i + 1].text);
            if (!follows)
                newline();
        }
    }
    if (!line_start)
        out += '\n';
    return out;
}

} // namespace detail

/// Canonical formatting: the output depends only on the token sequence, so
/// whitespace, comments and line breaks in the input do not matter. Throws
/// js::SyntaxError on lexical errors.
inline std::string beautify(std::string_view source)
{
    return detail::beautify_tokens(js::tokenize(source));
}

struct TokenSet {
    std::set<std::string> tokens;
    // true when the source could not be tokenized and raw text was split
    bool fallback = false;
};

inline std::set<std::string> split_whitespace(std::string_view text)
{
    std::set<std::string> out;
    std::size_t i = 0;
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < text.size()) {
        while (i < text.size() && ws(text[i]))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !ws(text[j]))
            ++j;
        if (j > i)
            out.emplace(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline TokenSet tokenize_script(std::string_view source)
{
    try {
        return {split_whitespace(beautify(source)), false};
    } catch (const js::SyntaxError&) {
        return {split_whitespace(source), true};
    }
}

/// |a ∩ b| / |a ∪ b|; 0 when both are empty.
inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    if (a.empty() && b.empty())
        return 0.0;
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

struct LibraryVersion {
    std::string id;
    std::set<std::string> tokens;
};

/// Every regular file in `dir` is one version, named by its file name.
inline std::vector<LibraryVersion> load_library_versions(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file())
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<LibraryVersion> out;
    for (const auto& f : files)
        out.push_back({f.filename().string(), tokenize_script(read_file(f)).tokens});
    return out;
}

struct Similarity {
    double score = 0.0;
    std::string version;
};

/// Highest Jaccard score over the versions; the first version wins ties.
inline Similarity best_similarity(const std::set<std::string>& tokens, const std::vector<LibraryVersion>& versions)
{
    if (versions.empty())
        throw std::invalid_argument("best_similarity needs at least one library version");
    Similarity best {-1.0, {}};
    for (const auto& v : versions) {
        double s = jaccard(tokens, v.tokens);
        if (s > best.score)
            best = {s, v.id};
    }
    return best;
}

struct SweepPoint {
    double threshold = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double tpr() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    double fpr() const { return fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0; }
    double accuracy() const { return static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn); }
};

struct SweepResult {
    SweepPoint best;
    std::vector<SweepPoint> curve;
};

/// Scores above the threshold are predicted fingerprinting. Candidate
/// thresholds are the midpoints between consecutive distinct scores plus
/// min - 1 (everything positive) and max (nothing positive). The best point
/// maximizes accuracy; ties go to the smallest threshold.
inline SweepResult threshold_sweep(const std::vector<double>& scores, const std::vector<bool>& labels)
{
    if (scores.size() != labels.size())
        throw std::invalid_argument("threshold_sweep: scores and labels differ in length");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0 || positives == labels.size())
        throw std::invalid_argument("threshold_sweep needs both classes");
    std::vector<double> distinct(scores.begin(), scores.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> thresholds {distinct.front() - 1.0};
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
        thresholds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2);
    thresholds.push_back(distinct.back());

    SweepResult r;
    for (double th : thresholds) {
        SweepPoint p;
        p.threshold = th;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool predicted = scores[i] > th;
            if (labels[i])
                ++(predicted ? p.tp : p.fn);
            else
                ++(predicted ? p.fp : p.tn);
        }
        r.curve.push_back(p);
    }
    r.best = r.curve.front();
    for (const auto& p : r.curve)
        if (p.tp + p.tn > r.best.tp + r.best.tn)
            r.best = p;
    return r;
}

inline nlohmann::json to_json(const SweepPoint& p)
{
    return {{"threshold", p.threshold}, {"tpr", p.tpr()}, {"fpr", p.fpr()}, {"accuracy", p.accuracy()},
        {"tp", p.tp}, {"fp", p.fp}, {"tn", p.tn}, {"fn", p.fn}};
}

inline nlohmann::json to_json(const SweepResult& r)
{
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.curve)
        curve.push_back(to_json(p));
    return {{"threshold", r.best.threshold}, {"tpr", r.best.tpr()}, {"fpr", r.best.fpr()}, {"accuracy", r.best.accuracy()}, {"curve", curve}};
}

inline std::string curve_csv(const SweepResult& r)
{
    std::string out = "threshold,tpr,fpr,accuracy,tp,fp,tn,fn\n";
    for (const auto& p : r.curve) {
        nlohmann::json row = {p.threshold, p.tpr(), p.fpr(), p.accuracy()};
        out += row[0].dump() + "," + row[1].dump() + "," + row[2].dump() + "," + row[3].dump() + "," + std::to_string(p.tp) + ","
            + std::to_string(p.fp) + "," + std::to_string(p.tn) + "," + std::to_string(p.fn) + "\n";
    }
    return out;
}

} // namespace fpkit
