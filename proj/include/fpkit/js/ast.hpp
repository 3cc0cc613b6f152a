#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fpkit::js {

/// A node of the syntax tree. `type` is the ESTree category name
/// (ForStatement, MemberExpression, ...). Terminals (Identifier, Literal,
/// TemplateElement, PrivateIdentifier) carry their text in `label` and have
/// no children. VariableDeclaration carries its declaration keyword
/// (var/let/const) in `label`.
struct AstNode {
    std::string type;
    std::string label;
    bool terminal = false;
    // operator of unary/binary/logical/assignment/update expressions, or
    // "string" on string literals; not part of the feature labels
    std::string op;
    std::vector<AstNode> children;

    AstNode() = default;
    explicit AstNode(std::string node_type) : type(std::move(node_type)) {}

    static AstNode make_terminal(std::string node_type, std::string text)
    {
        AstNode n(std::move(node_type));
        n.label = std::move(text);
        n.terminal = true;
        return n;
    }

    AstNode& add(AstNode child)
    {
        children.push_back(std::move(child));
        return *this;
    }

    bool operator==(const AstNode&) const = default;
};

/// Number of parent-child edges in the tree rooted at `node`.
inline std::size_t edge_count(const AstNode& node)
{
    std::size_t n = node.children.size();
    for (const auto& c : node.children)
        n += edge_count(c);
    return n;
}

/// Pre-order search for the first node of the given type.
inline const AstNode* find_first(const AstNode& node, std::string_view type)
{
    if (node.type == type)
        return &node;
    for (const auto& c : node.children)
        if (const auto* hit = find_first(c, type))
            return hit;
    return nullptr;
}

/// S-expression dump used by tests.
inline void dump(const AstNode& node, std::string& out)
{
    out += '(';
    out += node.type;
    if (!node.label.empty() || node.terminal) {
        out += " \"";
        out += node.label;
        out += '"';
    }
    for (const auto& c : node.children) {
        out += ' ';
        dump(c, out);
    }
    out += ')';
}

inline std::string dump(const AstNode& node)
{
    std::string out;
    dump(node, out);
    return out;
}

} // namespace fpkit::js
