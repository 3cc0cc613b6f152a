#pragma once

// Registrable-domain (eTLD+1) lookup and filter-list emission.

#include <fpkit/corpus.hpp>
#include <fpkit/labeler.hpp>
#include <fpkit/static_features.hpp>
#include <fpkit/util.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpkit {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace punycode {

inline std::uint32_t adapt(std::uint32_t delta, std::uint32_t points, bool first)
{
    constexpr std::uint32_t base = 36, tmin = 1, tmax = 26, skew = 38, damp = 700;
    delta = first ? delta / damp : delta / 2;
    delta += delta / points;
    std::uint32_t k = 0;
    while (delta > ((base - tmin) * tmax) / 2) {
        delta /= base - tmin;
        k += base;
    }
    return k + (base - tmin + 1) * delta / (delta + skew);
}

/// RFC 3492 encoding of one label given as code points.
inline std::string encode(const std::u32string& input)
{
    constexpr std::uint32_t base = 36, tmin = 1, tmax = 26;
    auto digit = [](std::uint32_t d) { return static_cast<char>(d < 26 ? 'a' + d : '0' + (d - 26)); };
    std::string out;
    for (char32_t c : input)
        if (c < 0x80)
            out += static_cast<char>(c);
    const std::uint32_t b = static_cast<std::uint32_t>(out.size());
    std::uint32_t h = b;
    if (b > 0)
        out += '-';
    std::uint32_t n = 0x80, delta = 0, bias = 72;
    while (h < input.size()) {
        std::uint32_t m = UINT32_MAX;
        for (char32_t c : input)
            if (c >= n && c < m)
                m = c;
        if ((m - n) > (UINT32_MAX - delta) / (h + 1))
            throw DomainError("punycode overflow");
        delta += (m - n) * (h + 1);
        n = m;
        for (char32_t c : input) {
            if (c < n && ++delta == 0)
                throw DomainError("punycode overflow");
            if (c == n) {
                std::uint32_t q = delta;
                for (std::uint32_t k = base;; k += base) {
                    const std::uint32_t t = k <= bias ? tmin : (k >= bias + tmax ? tmax : k - bias);
                    if (q < t)
                        break;
                    out += digit(t + (q - t) % (base - t));
                    q = (q - t) / (base - t);
                }
                out += digit(q);
                bias = adapt(delta, h + 1, h == b);
                delta = 0;
                ++h;
            }
        }
        ++delta;
        ++n;
    }
    return out;
}

inline std::u32string decode_utf8(std::string_view s)
{
    std::u32string out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t n = c < 0x80 ? 0 : (c & 0xE0) == 0xC0 ? 1 : (c & 0xF0) == 0xE0 ? 2 : 3;
        char32_t cp = n == 0 ? c : n == 1 ? (c & 0x1F) : n == 2 ? (c & 0x0F) : (c & 0x07);
        for (std::size_t k = 1; k <= n && i + k < s.size(); ++k)
            cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out += cp;
        i += n + 1;
    }
    return out;
}

/// ASCII form of a label: unchanged if ASCII, else "xn--" + punycode.
inline std::string to_ascii_label(std::string_view label)
{
    bool ascii = true;
    for (char c : label)
        if (static_cast<unsigned char>(c) >= 0x80)
            ascii = false;
    if (ascii)
        return std::string(label);
    return "xn--" + encode(decode_utf8(label));
}

} // namespace punycode

namespace detail {

inline std::vector<std::string> split_labels(std::string_view host)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto dot = host.find('.', start);
        out.emplace_back(host.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos)
            break;
        start = dot + 1;
    }
    return out;
}

inline std::string ascii_lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return out;
}

} // namespace detail

/// Public suffix rules in their standard text format. Rules are held in
/// ASCII (punycode) form.
class PublicSuffixList {
public:
    static PublicSuffixList parse(std::string_view text)
    {
        PublicSuffixList psl;
        for (auto line : split_lines(text)) {
            auto t = trim(line);
            if (t.empty() || t.substr(0, 2) == "//")
                continue;
            if (auto sp = t.find_first_of(" \t"); sp != std::string_view::npos)
                t = t.substr(0, sp);
            Kind kind = Kind::normal;
            if (t.front() == '!') {
                kind = Kind::exception;
                t.remove_prefix(1);
            }
            std::string rule;
            for (const auto& label : detail::split_labels(t)) {
                if (!rule.empty())
                    rule += '.';
                rule += label == "*" ? label : punycode::to_ascii_label(detail::ascii_lower(label));
            }
            if (kind == Kind::exception)
                psl.rules_[rule] = kind;
            else
                psl.rules_.emplace(rule, kind);
        }
        if (psl.rules_.empty())
            throw DomainError("public suffix list is empty");
        return psl;
    }

    static PublicSuffixList load(const std::filesystem::path& path) { return parse(read_file(path)); }

    std::size_t size() const { return rules_.size(); }

    /// Number of trailing labels forming the public suffix of `labels`
    /// (ASCII, lower-case).
    std::size_t suffix_labels(const std::vector<std::string>& labels) const
    {
        std::size_t best = 1;
        std::optional<std::size_t> exception;
        const std::size_t n = labels.size();
        std::string candidate;
        for (std::size_t len = 1; len <= n; ++len) {
            // candidate = last `len` labels
            candidate = labels[n - len] + (len == 1 ? "" : "." + candidate);
            if (auto it = rules_.find(candidate); it != rules_.end()) {
                if (it->second == Kind::exception)
                    exception = std::max(exception.value_or(0), len);
                else
                    best = std::max(best, len);
            }
            if (len >= 2) {
                std::string wild = "*." + candidate.substr(labels[n - len].size() + 1);
                if (auto it = rules_.find(wild); it != rules_.end() && it->second != Kind::exception)
                    best = std::max(best, len);
            }
        }
        if (exception)
            return *exception - 1;
        return best;
    }

    /// Registrable domain of a host name, in the host's own form (Unicode
    /// labels stay Unicode). Throws DomainError for bare public suffixes.
    std::string registrable_domain(std::string_view host) const
    {
        std::string h = detail::ascii_lower(host);
        if (!h.empty() && h.back() == '.')
            h.pop_back();
        if (h.empty() || h.front() == '.')
            throw DomainError("invalid host '" + std::string(host) + "'");
        auto labels = detail::split_labels(h);
        std::vector<std::string> ascii;
        for (const auto& l : labels) {
            if (l.empty())
                throw DomainError("invalid host '" + std::string(host) + "'");
            ascii.push_back(punycode::to_ascii_label(l));
        }
        const std::size_t suffix = suffix_labels(ascii);
        if (labels.size() <= suffix)
            throw DomainError("'" + std::string(host) + "' is a public suffix");
        std::string out;
        for (std::size_t i = labels.size() - suffix - 1; i < labels.size(); ++i) {
            if (!out.empty())
                out += '.';
            out += labels[i];
        }
        return out;
    }

private:
    enum class Kind { normal, exception };
    std::unordered_map<std::string, Kind> rules_;
};

inline std::filesystem::path psl_path()
{
    if (const char* env = std::getenv("FPKIT_PSL"); env && *env)
        return env;
    return data_dir() / "public_suffix_list.dat";
}

inline const PublicSuffixList& default_psl()
{
    static const PublicSuffixList psl = PublicSuffixList::load(psl_path());
    return psl;
}

/// Host component of a URL; brackets are stripped from IPv6 literals.
inline std::string url_host(std::string_view url)
{
    auto scheme = url.find("://");
    std::string_view rest = scheme == std::string_view::npos ? url : url.substr(scheme + 3);
    if (scheme == std::string_view::npos && url.substr(0, 2) == "//")
        rest = url.substr(2);
    rest = rest.substr(0, rest.find_first_of("/?#"));
    if (auto at = rest.rfind('@'); at != std::string_view::npos)
        rest = rest.substr(at + 1);
    if (!rest.empty() && rest.front() == '[') {
        auto close = rest.find(']');
        if (close == std::string_view::npos)
            throw DomainError("malformed IPv6 host in '" + std::string(url) + "'");
        return std::string(rest.substr(1, close - 1));
    }
    rest = rest.substr(0, rest.find(':'));
    if (rest.empty())
        throw DomainError("URL has no host: '" + std::string(url) + "'");
    return detail::ascii_lower(rest);
}

inline bool is_ip_literal(std::string_view host)
{
    if (host.find(':') != std::string_view::npos)
        return true;
    auto labels = detail::split_labels(host);
    if (labels.size() != 4)
        return false;
    for (const auto& l : labels) {
        if (l.empty() || l.size() > 3 || l.find_first_not_of("0123456789") != std::string::npos || std::stoi(l) > 255)
            return false;
    }
    return true;
}

inline std::string etld1(std::string_view url, const PublicSuffixList& psl)
{
    std::string host = url_host(url);
    if (is_ip_literal(host))
        return host;
    return psl.registrable_domain(host);
}

inline std::string etld1(std::string_view url)
{
    return etld1(url, default_psl());
}

// ---- filter lists ---------------------------------------------------------

enum class ListFormat { plain, rules, extension };

inline ListFormat parse_list_format(const std::string& s)
{
    if (s == "plain")
        return ListFormat::plain;
    if (s == "rules" || s == "abp")
        return ListFormat::rules;
    if (s == "extension" || s == "json")
        return ListFormat::extension;
    throw std::invalid_argument("unsupported filter-list format '" + s + "' (plain, rules, extension)");
}

/// Final decision for one script with the models that flagged it.
struct ScriptVerdict {
    Verdict label = Verdict::non_fingerprinting;
    std::set<std::string> sources;
};

struct DomainEntry {
    bool first_party = false;
    std::set<std::string> script_ids;
    std::set<std::string> sources;

    bool operator==(const DomainEntry&) const = default;
};

struct FilterList {
    static constexpr int format_version = 1;
    std::map<std::string, DomainEntry> domains;
    std::string generated_at;

    std::set<std::string> domain_set() const
    {
        std::set<std::string> out;
        for (const auto& [d, _] : domains)
            out.insert(d);
        return out;
    }
};

/// SOURCE_DATE_EPOCH if set, else the Unix epoch.
inline std::string default_generated_at()
{
    std::time_t t = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env)
        t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    std::tm tm {};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects the registrable domains of fingerprinting scripts. Inline
/// scripts contribute their page's domain; any occurrence served from the
/// embedding page's own domain marks the entry first-party. Occurrences
/// whose URL yields no registrable domain are reported on `warn`.
inline FilterList build_filter_list(const std::map<std::string, ScriptVerdict>& verdicts, const CorpusManifest& manifest,
    const PublicSuffixList& psl, std::string generated_at = default_generated_at(), std::ostream* warn = &std::cerr)
{
    FilterList list;
    list.generated_at = std::move(generated_at);
    for (const auto& s : manifest.scripts) {
        auto v = verdicts.find(s.script_id);
        if (v == verdicts.end() || v->second.label != Verdict::fingerprinting)
            continue;
        for (const auto& o : s.occurrences) {
            try {
                const bool is_inline = s.kind == ScriptKind::inline_script;
                const std::string site = etld1(o.site_url, psl);
                const std::string domain = is_inline ? site : etld1(o.source_url, psl);
                auto& e = list.domains[domain];
                e.first_party = e.first_party || is_inline || domain == site;
                e.script_ids.insert(s.script_id);
                e.sources.insert(v->second.sources.begin(), v->second.sources.end());
            } catch (const DomainError& err) {
                if (warn)
                    *warn << "warning: " << s.script_id << ": " << err.what() << "\n";
            }
        }
    }
    return list;
}

inline std::string emit(const FilterList& list, ListFormat format)
{
    if (format == ListFormat::extension) {
        nlohmann::json domains = nlohmann::json::array();
        for (const auto& [d, e] : list.domains)
            domains.push_back({{"domain", d}, {"first_party", e.first_party}, {"script_ids", e.script_ids}, {"sources", e.sources}});
        nlohmann::json j = {{"version", FilterList::format_version}, {"generated_at", list.generated_at}, {"domains", domains}};
        return j.dump(2) + "\n";
    }
    std::string out;
    out += "! Title: fpkit fingerprinting domains\n";
    out += "! Version: " + std::to_string(FilterList::format_version) + "\n";
    out += "! Generated: " + list.generated_at + "\n";
    out += "! Domains: " + std::to_string(list.domains.size()) + "\n";
    for (const auto& [d, _] : list.domains)
        out += format == ListFormat::rules ? "||" + d + "^$script\n" : d + "\n";
    return out;
}

/// Reads the extension JSON format back.
inline FilterList parse_extension_list(std::string_view text)
{
    auto j = nlohmann::json::parse(text);
    if (!j.is_object() || j.value("version", 0) != FilterList::format_version || !j.contains("domains") || !j["domains"].is_array())
        throw std::runtime_error("not a version 1 extension filter list");
    FilterList list;
    list.generated_at = j.value("generated_at", "");
    for (const auto& d : j["domains"]) {
        DomainEntry e;
        e.first_party = d.at("first_party").get<bool>();
        for (const auto& id : d.value("script_ids", nlohmann::json::array()))
            e.script_ids.insert(id.get<std::string>());
        for (const auto& s : d.value("sources", nlohmann::json::array()))
            e.sources.insert(s.get<std::string>());
        auto name = d.at("domain").get<std::string>();
        if (!list.domains.emplace(name, std::move(e)).second)
            throw std::runtime_error("duplicate domain '" + name + "' in filter list");
    }
    return list;
}

} // namespace fpkit
