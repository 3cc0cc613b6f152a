#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpkit::js {

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& message, int line, int column)
        : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + message)
        , line_(line)
        , column_(column)
    {
    }

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

enum class TokenKind {
    eof,
    identifier,
    keyword,
    punctuator,
    numeric,
    string,
    template_part,
    regex,
    private_name,
};

struct Token {
    TokenKind kind = TokenKind::eof;
    // identifier name, keyword, punctuator text, cooked string / template
    // value, or the raw regex / numeric source
    std::string value;
    std::size_t start = 0;
    std::size_t end = 0;
    int line = 1;
    int column = 0;
    bool newline_before = false;
    // identifiers written with \u escapes cannot act as keywords
    bool escaped = false;
    // template parts
    bool template_tail = false;
    double number = 0.0;

    bool is(std::string_view punct) const
    {
        return kind == TokenKind::punctuator && value == punct;
    }
    bool is_keyword(std::string_view kw) const
    {
        return kind == TokenKind::keyword && value == kw;
    }
    bool is_name(std::string_view name) const
    {
        return kind == TokenKind::identifier && value == name && !escaped;
    }
};

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes one UTF-8 sequence at `pos`; malformed bytes decode as themselves
// (Latin-1) so that scanning never stalls.
inline std::uint32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len)
{
    auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= s.size())
            return -1;
        auto b = static_cast<unsigned char>(s[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        int c1 = cont(1);
        if (c1 >= 0) {
            len = 2;
            return ((b0 & 0x1F) << 6) | c1;
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            len = 3;
            return ((b0 & 0x0F) << 12) | (c1 << 6) | c2;
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            len = 4;
            return ((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3;
        }
    }
    len = 1;
    return b0;
}

inline bool is_line_terminator(std::uint32_t cp)
{
    return cp == '\n' || cp == '\r' || cp == 0x2028 || cp == 0x2029;
}

inline bool is_whitespace(std::uint32_t cp)
{
    switch (cp) {
    case '\t': case 0x0B: case 0x0C: case ' ': case 0xA0: case 0xFEFF: case 0x1680:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

inline bool is_id_start(std::uint32_t cp)
{
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || cp == '$' || cp == '_'
        || (cp >= 0x80 && !is_whitespace(cp) && !is_line_terminator(cp));
}

inline bool is_id_part(std::uint32_t cp)
{
    return is_id_start(cp) || (cp >= '0' && cp <= '9');
}

inline int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

inline bool is_keyword(std::string_view w)
{
    static constexpr std::string_view words[] = {
        "break", "case", "catch", "class", "const", "continue", "debugger", "default", "delete",
        "do", "else", "enum", "export", "extends", "false", "finally", "for", "function", "if",
        "import", "in", "instanceof", "new", "null", "return", "super", "switch", "this", "throw",
        "true", "try", "typeof", "var", "void", "while", "with",
    };
    for (auto k : words)
        if (k == w)
            return true;
    return false;
}

} // namespace detail

/// Formats a number the way JavaScript's Number::toString does for the
/// common cases: integers without a fraction, everything else as the
/// shortest round-trip representation.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "NaN";
    if (std::isinf(v))
        return v < 0 ? "-Infinity" : "Infinity";
    if (v == 0)
        return "0";
    if (std::floor(v) == v && std::fabs(v) < 1e21) {
        char buf[32];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 0);
        return std::string(buf, p);
    }
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

/// On-demand scanner. The parser decides whether a '/' starts a regular
/// expression and whether a '}' resumes a template literal, and asks for a
/// rescan in those cases.
class Lexer {
public:
    struct State {
        std::size_t pos;
        int line;
        std::size_t line_start;
    };

    explicit Lexer(std::string_view source) : src_(source)
    {
        // hashbang
        if (src_.substr(0, 2) == "#!") {
            while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r')
                ++pos_;
        }
    }

    State save() const { return {pos_, line_, line_start_}; }
    void restore(const State& s)
    {
        pos_ = s.pos;
        line_ = s.line;
        line_start_ = s.line_start;
    }

    std::string_view source() const { return src_; }

    Token next()
    {
        bool newline = skip_trivia();
        Token t;
        t.newline_before = newline;
        t.start = pos_;
        t.line = line_;
        t.column = static_cast<int>(pos_ - line_start_);
        if (pos_ >= src_.size()) {
            t.kind = TokenKind::eof;
            t.end = pos_;
            return t;
        }
        char c = src_[pos_];
        std::size_t len = 0;
        std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
        if (detail::is_id_start(cp) || c == '\\') {
            scan_identifier(t);
        } else if (c >= '0' && c <= '9') {
            scan_number(t);
        } else if (c == '.' && pos_ + 1 < src_.size() && src_[pos_ + 1] >= '0' && src_[pos_ + 1] <= '9') {
            scan_number(t);
        } else if (c == '"' || c == '\'') {
            scan_string(t);
        } else if (c == '`') {
            ++pos_;
            scan_template_rest(t);
        } else if (c == '#') {
            ++pos_;
            Token id;
            if (pos_ >= src_.size())
                fail("unexpected '#'");
            scan_identifier(id);
            t.kind = TokenKind::private_name;
            t.value = id.value;
        } else {
            scan_punctuator(t);
        }
        t.end = pos_;
        return t;
    }

    /// Rescans `slash` (a '/' or '/=' punctuator) as a regular expression.
    Token rescan_regex(const Token& slash)
    {
        pos_ = slash.start + 1;
        Token t = slash;
        bool in_class = false;
        while (true) {
            if (pos_ >= src_.size())
                fail("unterminated regular expression");
            char c = src_[pos_];
            if (c == '\n' || c == '\r')
                fail("unterminated regular expression");
            ++pos_;
            if (c == '\\') {
                if (pos_ >= src_.size() || src_[pos_] == '\n' || src_[pos_] == '\r')
                    fail("unterminated regular expression");
                ++pos_;
            } else if (c == '[') {
                in_class = true;
            } else if (c == ']') {
                in_class = false;
            } else if (c == '/' && !in_class) {
                break;
            }
        }
        while (pos_ < src_.size()) {
            std::size_t len = 0;
            std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
            if (!detail::is_id_part(cp))
                break;
            pos_ += len;
        }
        t.kind = TokenKind::regex;
        t.value = std::string(src_.substr(t.start, pos_ - t.start));
        t.end = pos_;
        return t;
    }

    /// Rescans a '}' token as the continuation of a template literal.
    Token rescan_template(const Token& brace)
    {
        pos_ = brace.start + 1;
        Token t = brace;
        scan_template_rest(t);
        t.end = pos_;
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const
    {
        throw SyntaxError(msg, line_, static_cast<int>(pos_ - line_start_));
    }

    void newline_at(std::size_t after)
    {
        ++line_;
        line_start_ = after;
    }

    // Skips whitespace and comments; returns whether a line terminator was seen.
    bool skip_trivia()
    {
        bool newline = false;
        bool line_start = pos_ == 0;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            std::size_t len = 1;
            std::uint32_t cp = static_cast<unsigned char>(c) < 0x80 ? static_cast<unsigned char>(c)
                                                                    : detail::decode_utf8(src_, pos_, len);
            if (detail::is_line_terminator(cp)) {
                pos_ += len;
                if (cp == '\r' && pos_ < src_.size() && src_[pos_] == '\n')
                    ++pos_;
                newline_at(pos_);
                newline = line_start = true;
            } else if (detail::is_whitespace(cp)) {
                pos_ += len;
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                skip_line_comment();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                if (skip_block_comment())
                    newline = line_start = true;
            } else if (c == '<' && src_.substr(pos_, 4) == "<!--") {
                skip_line_comment();
            } else if (c == '-' && line_start && src_.substr(pos_, 3) == "-->") {
                skip_line_comment();
            } else {
                break;
            }
        }
        return newline;
    }

    void skip_line_comment()
    {
        while (pos_ < src_.size()) {
            std::size_t len = 1;
            std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
            if (detail::is_line_terminator(cp))
                return;
            pos_ += len;
        }
    }

    bool skip_block_comment()
    {
        bool newline = false;
        pos_ += 2;
        while (true) {
            if (pos_ >= src_.size())
                fail("unterminated comment");
            if (src_[pos_] == '*' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                pos_ += 2;
                return newline;
            }
            std::size_t len = 1;
            std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
            pos_ += len;
            if (detail::is_line_terminator(cp)) {
                if (cp == '\r' && pos_ < src_.size() && src_[pos_] == '\n')
                    ++pos_;
                newline_at(pos_);
                newline = true;
            }
        }
    }

    std::uint32_t scan_unicode_escape()
    {
        // at the 'u' of \u
        ++pos_;
        std::uint32_t cp = 0;
        if (pos_ < src_.size() && src_[pos_] == '{') {
            ++pos_;
            int digits = 0;
            while (pos_ < src_.size() && src_[pos_] != '}') {
                int h = detail::hex_value(src_[pos_]);
                if (h < 0)
                    fail("invalid unicode escape");
                cp = cp * 16 + static_cast<std::uint32_t>(h);
                if (cp > 0x10FFFF)
                    fail("invalid unicode escape");
                ++pos_;
                ++digits;
            }
            if (pos_ >= src_.size() || digits == 0)
                fail("invalid unicode escape");
            ++pos_;
            return cp;
        }
        for (int i = 0; i < 4; ++i) {
            if (pos_ >= src_.size())
                fail("invalid unicode escape");
            int h = detail::hex_value(src_[pos_]);
            if (h < 0)
                fail("invalid unicode escape");
            cp = cp * 16 + static_cast<std::uint32_t>(h);
            ++pos_;
        }
        return cp;
    }

    void scan_identifier(Token& t)
    {
        std::string name;
        bool escaped = false;
        bool first = true;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\') {
                ++pos_;
                if (pos_ >= src_.size() || src_[pos_] != 'u')
                    fail("invalid identifier escape");
                std::uint32_t cp = scan_unicode_escape();
                if (first ? !detail::is_id_start(cp) : !detail::is_id_part(cp))
                    fail("invalid identifier escape");
                detail::append_utf8(name, cp);
                escaped = true;
            } else {
                std::size_t len = 1;
                std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
                if (first ? !detail::is_id_start(cp) : !detail::is_id_part(cp))
                    break;
                name.append(src_.substr(pos_, len));
                pos_ += len;
            }
            first = false;
        }
        if (name.empty())
            fail("unexpected character");
        t.escaped = escaped;
        t.kind = (!escaped && detail::is_keyword(name)) ? TokenKind::keyword : TokenKind::identifier;
        t.value = std::move(name);
    }

    void scan_number(Token& t)
    {
        std::size_t begin = pos_;
        auto digits = [&](auto pred) {
            while (pos_ < src_.size() && (pred(src_[pos_]) || src_[pos_] == '_'))
                ++pos_;
        };
        auto is_dec = [](char c) { return c >= '0' && c <= '9'; };
        double value = 0;
        bool bigint = false;
        char c = src_[pos_];
        char c1 = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
        if (c == '0' && (c1 == 'x' || c1 == 'X' || c1 == 'o' || c1 == 'O' || c1 == 'b' || c1 == 'B')) {
            int base = (c1 == 'x' || c1 == 'X') ? 16 : (c1 == 'o' || c1 == 'O') ? 8 : 2;
            pos_ += 2;
            std::size_t dstart = pos_;
            digits([&](char ch) {
                int h = detail::hex_value(ch);
                return h >= 0 && h < base;
            });
            if (pos_ == dstart)
                fail("invalid number");
            for (std::size_t i = dstart; i < pos_; ++i)
                if (src_[i] != '_')
                    value = value * base + detail::hex_value(src_[i]);
            if (pos_ < src_.size() && src_[pos_] == 'n') {
                bigint = true;
                ++pos_;
            }
        } else if (c == '0' && is_dec(c1)) {
            // legacy octal (or decimal with a leading zero when 8/9 present)
            ++pos_;
            std::size_t dstart = pos_;
            digits(is_dec);
            bool octal = true;
            for (std::size_t i = dstart; i < pos_; ++i)
                if (src_[i] == '8' || src_[i] == '9')
                    octal = false;
            for (std::size_t i = dstart; i < pos_; ++i)
                if (src_[i] != '_')
                    value = value * (octal ? 8 : 10) + (src_[i] - '0');
        } else {
            digits(is_dec);
            if (pos_ < src_.size() && src_[pos_] == 'n') {
                bigint = true;
                std::string raw;
                for (std::size_t i = begin; i < pos_; ++i)
                    if (src_[i] != '_')
                        raw += src_[i];
                ++pos_;
                t.kind = TokenKind::numeric;
                t.value = raw + "n";
                check_after_number();
                return;
            }
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                digits(is_dec);
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t save = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
                    ++pos_;
                std::size_t estart = pos_;
                digits(is_dec);
                if (pos_ == estart) {
                    pos_ = save;
                    fail("invalid number exponent");
                }
            }
            std::string clean;
            for (std::size_t i = begin; i < pos_; ++i)
                if (src_[i] != '_')
                    clean += src_[i];
            value = std::strtod(clean.c_str(), nullptr);
        }
        check_after_number();
        t.kind = TokenKind::numeric;
        t.number = value;
        if (bigint) {
            std::string raw(src_.substr(begin, pos_ - begin));
            t.value = raw;
        } else {
            t.value = format_number(value);
        }
    }

    void check_after_number()
    {
        if (pos_ < src_.size()) {
            std::size_t len = 1;
            std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
            if (detail::is_id_start(cp) || (cp >= '0' && cp <= '9'))
                fail("identifier directly after number");
        }
    }

    // Handles the escape at pos_ (just after the backslash); appends the
    // cooked value.
    void scan_escape(std::string& out, bool in_template)
    {
        if (pos_ >= src_.size())
            fail("unterminated string");
        char c = src_[pos_];
        switch (c) {
        case 'n': out += '\n'; ++pos_; return;
        case 't': out += '\t'; ++pos_; return;
        case 'r': out += '\r'; ++pos_; return;
        case 'b': out += '\b'; ++pos_; return;
        case 'f': out += '\f'; ++pos_; return;
        case 'v': out += '\v'; ++pos_; return;
        case '\r':
            ++pos_;
            if (pos_ < src_.size() && src_[pos_] == '\n')
                ++pos_;
            newline_at(pos_);
            return;
        case '\n':
            ++pos_;
            newline_at(pos_);
            return;
        case 'x': {
            int h1 = pos_ + 1 < src_.size() ? detail::hex_value(src_[pos_ + 1]) : -1;
            int h2 = pos_ + 2 < src_.size() ? detail::hex_value(src_[pos_ + 2]) : -1;
            if (h1 < 0 || h2 < 0)
                fail("invalid hex escape");
            detail::append_utf8(out, static_cast<std::uint32_t>(h1 * 16 + h2));
            pos_ += 3;
            return;
        }
        case 'u': {
            std::uint32_t cp = scan_unicode_escape();
            // combine surrogate pairs written as two \u escapes
            if (cp >= 0xD800 && cp <= 0xDBFF && src_.substr(pos_, 2) == "\\u") {
                State s = save();
                ++pos_;
                std::uint32_t lo = scan_unicode_escape();
                if (lo >= 0xDC00 && lo <= 0xDFFF)
                    cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
                else
                    restore(s);
            }
            detail::append_utf8(out, cp);
            return;
        }
        default:
            break;
        }
        if (c >= '0' && c <= '7') {
            if (in_template && !(c == '0' && !(pos_ + 1 < src_.size() && src_[pos_ + 1] >= '0' && src_[pos_ + 1] <= '9')))
                fail("octal escape in template");
            int v = 0;
            int max_len = c <= '3' ? 3 : 2;
            for (int i = 0; i < max_len && pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '7'; ++i) {
                v = v * 8 + (src_[pos_] - '0');
                ++pos_;
            }
            detail::append_utf8(out, static_cast<std::uint32_t>(v));
            return;
        }
        std::size_t len = 1;
        std::uint32_t cp = detail::decode_utf8(src_, pos_, len);
        if (cp == 0x2028 || cp == 0x2029) {
            pos_ += len;
            return;
        }
        out.append(src_.substr(pos_, len));
        pos_ += len;
    }

    void scan_string(Token& t)
    {
        char quote = src_[pos_++];
        std::string value;
        while (true) {
            if (pos_ >= src_.size())
                fail("unterminated string");
            char c = src_[pos_];
            if (c == quote) {
                ++pos_;
                break;
            }
            if (c == '\n' || c == '\r')
                fail("unterminated string");
            if (c == '\\') {
                ++pos_;
                scan_escape(value, false);
                continue;
            }
            value += c;
            ++pos_;
        }
        t.kind = TokenKind::string;
        t.value = std::move(value);
    }

    // Scans after '`' or after the '}' that closes a substitution.
    void scan_template_rest(Token& t)
    {
        std::string cooked;
        while (true) {
            if (pos_ >= src_.size())
                fail("unterminated template");
            char c = src_[pos_];
            if (c == '`') {
                ++pos_;
                t.template_tail = true;
                break;
            }
            if (c == '$' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '{') {
                pos_ += 2;
                t.template_tail = false;
                break;
            }
            if (c == '\\') {
                ++pos_;
                scan_escape(cooked, true);
                continue;
            }
            if (c == '\r') {
                cooked += '\n';
                ++pos_;
                if (pos_ < src_.size() && src_[pos_] == '\n')
                    ++pos_;
                newline_at(pos_);
                continue;
            }
            if (c == '\n') {
                newline_at(pos_ + 1);
            }
            cooked += c;
            ++pos_;
        }
        t.kind = TokenKind::template_part;
        t.value = std::move(cooked);
    }

    void scan_punctuator(Token& t)
    {
        static constexpr std::string_view puncts[] = {
            ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "?\?=",
            "=>", "==", "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=",
            "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**",
            "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%", "&",
            "|", "^", "!", "~", "?", ":", "=", ".", "@",
        };
        auto rest = src_.substr(pos_);
        for (auto p : puncts) {
            if (rest.substr(0, p.size()) == p) {
                // `a?.5:b` is a conditional, not optional chaining
                if (p == "?." && rest.size() > 2 && rest[2] >= '0' && rest[2] <= '9')
                    continue;
                t.kind = TokenKind::punctuator;
                t.value = std::string(p);
                pos_ += p.size();
                return;
            }
        }
        fail(std::string("unexpected character '") + src_[pos_] + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::size_t line_start_ = 0;
};

/// A token of the standalone token stream (no parser). Regex-vs-division is
/// decided from the previous significant token, templates are tracked with a
/// brace stack.
struct RawToken {
    TokenKind kind;
    std::string_view text;
    int line;
    bool newline_before;
};

inline bool regex_allowed_after(const RawToken* prev)
{
    if (prev == nullptr)
        return true;
    switch (prev->kind) {
    case TokenKind::numeric:
    case TokenKind::string:
    case TokenKind::regex:
    case TokenKind::identifier:
    case TokenKind::private_name:
        return false;
    case TokenKind::template_part:
        return prev->text.back() != '`';
    case TokenKind::keyword: {
        static constexpr std::string_view value_words[] = {"this", "super", "null", "true", "false"};
        for (auto w : value_words)
            if (prev->text == w)
                return false;
        return true;
    }
    case TokenKind::punctuator:
        return !(prev->text == ")" || prev->text == "]" || prev->text == "}" || prev->text == "++"
            || prev->text == "--");
    default:
        return true;
    }
}

/// Tokenizes without parsing. Throws SyntaxError on lexical errors.
inline std::vector<RawToken> tokenize(std::string_view source)
{
    Lexer lexer(source);
    std::vector<RawToken> out;
    std::vector<int> brace_depth; // one entry per open template substitution
    while (true) {
        Token t = lexer.next();
        if (t.kind == TokenKind::eof)
            break;
        const RawToken* prev = out.empty() ? nullptr : &out.back();
        if (t.kind == TokenKind::punctuator) {
            if ((t.value == "/" || t.value == "/=") && regex_allowed_after(prev)) {
                t = lexer.rescan_regex(t);
            } else if (t.value == "{" && !brace_depth.empty()) {
                ++brace_depth.back();
            } else if (t.value == "}" && !brace_depth.empty()) {
                if (brace_depth.back() == 0) {
                    brace_depth.pop_back();
                    t = lexer.rescan_template(t);
                } else {
                    --brace_depth.back();
                }
            }
        }
        if (t.kind == TokenKind::template_part && !t.template_tail)
            brace_depth.push_back(0);
        out.push_back({t.kind, source.substr(t.start, t.end - t.start), t.line, t.newline_before});
    }
    return out;
}

} // namespace fpkit::js
