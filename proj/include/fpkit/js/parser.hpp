#pragma once

#include <fpkit/js/ast.hpp>
#include <fpkit/js/lexer.hpp>

#include <string>
#include <string_view>
#include <utility>

namespace fpkit::js {

/// Recursive-descent parser for classic scripts and modules (ES2022 surface,
/// sloppy mode). Produces an ESTree-shaped AstNode tree rooted at Program.
/// Null ESTree fields and array holes produce no child.
class Parser {
public:
    explicit Parser(std::string_view source) : lex_(source) { tok_ = lex_.next(); }

    AstNode parse_program()
    {
        AstNode program("Program");
        while (tok_.kind != TokenKind::eof)
            program.add(parse_statement_list_item());
        return program;
    }

private:
    // ---- token plumbing -------------------------------------------------

    void advance()
    {
        prev_end_ = tok_.end;
        tok_ = lex_.next();
    }

    Token peek()
    {
        auto s = lex_.save();
        Token t = lex_.next();
        lex_.restore(s);
        return t;
    }

    [[noreturn]] void unexpected() const
    {
        if (tok_.kind == TokenKind::eof)
            throw SyntaxError("unexpected end of input", tok_.line, tok_.column);
        throw SyntaxError("unexpected token '" + std::string(lex_.source().substr(tok_.start, tok_.end - tok_.start)) + "'",
            tok_.line, tok_.column);
    }

    void expect(std::string_view punct)
    {
        if (!tok_.is(punct))
            unexpected();
        advance();
    }

    void expect_keyword(std::string_view kw)
    {
        if (!tok_.is_keyword(kw))
            unexpected();
        advance();
    }

    bool eat(std::string_view punct)
    {
        if (tok_.is(punct)) {
            advance();
            return true;
        }
        return false;
    }

    void consume_semicolon()
    {
        if (tok_.is(";")) {
            advance();
            return;
        }
        if (tok_.is("}") || tok_.kind == TokenKind::eof || tok_.newline_before)
            return;
        unexpected();
    }

    bool is_identifier_token(const Token& t) const
    {
        if (t.kind != TokenKind::identifier)
            return false;
        if (t.escaped)
            return true;
        if (in_generator_ && t.value == "yield")
            return false;
        if (in_async_ && t.value == "await")
            return false;
        return true;
    }

    static bool is_property_name_token(const Token& t)
    {
        return t.kind == TokenKind::identifier || t.kind == TokenKind::keyword || t.kind == TokenKind::string
            || t.kind == TokenKind::numeric || t.kind == TokenKind::private_name || t.is("[");
    }

    static bool is_assignment_operator(const Token& t)
    {
        if (t.kind != TokenKind::punctuator)
            return false;
        static constexpr std::string_view ops[] = {"=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=",
            ">>>=", "&=", "|=", "^=", "&&=", "||=", "?\?="};
        for (auto op : ops)
            if (t.value == op)
                return true;
        return false;
    }

    AstNode identifier_from_token()
    {
        AstNode id = AstNode::make_terminal("Identifier", tok_.value);
        advance();
        return id;
    }

    AstNode parse_identifier()
    {
        if (!is_identifier_token(tok_))
            unexpected();
        return identifier_from_token();
    }

    // ---- statements -----------------------------------------------------

    AstNode parse_statement_list_item()
    {
        if (tok_.is_keyword("function"))
            return parse_function(true, false);
        if (tok_.is_keyword("class"))
            return parse_class(true);
        if (tok_.is_keyword("const"))
            return parse_lexical_declaration_statement();
        if (tok_.is_name("let") && starts_let_declaration())
            return parse_lexical_declaration_statement();
        if (tok_.is_name("async")) {
            Token next = peek();
            if (next.is_keyword("function") && !next.newline_before) {
                advance();
                return parse_function(true, true);
            }
        }
        if (tok_.is_keyword("import")) {
            Token next = peek();
            if (!next.is("(") && !next.is("."))
                return parse_import_declaration();
        }
        if (tok_.is_keyword("export"))
            return parse_export_declaration();
        return parse_statement();
    }

    bool starts_let_declaration()
    {
        Token next = peek();
        return next.kind == TokenKind::identifier || next.is("[") || next.is("{")
            || (next.kind == TokenKind::keyword && (next.value == "yield" || next.value == "await"));
    }

    AstNode parse_lexical_declaration_statement()
    {
        AstNode decl = parse_variable_declaration();
        consume_semicolon();
        return decl;
    }

    // at var/let/const
    AstNode parse_variable_declaration()
    {
        AstNode decl("VariableDeclaration");
        decl.label = tok_.value;
        advance();
        while (true) {
            AstNode declarator("VariableDeclarator");
            declarator.add(parse_binding_target());
            if (eat("="))
                declarator.add(parse_assignment());
            decl.add(std::move(declarator));
            if (!eat(","))
                break;
        }
        return decl;
    }

    AstNode parse_statement()
    {
        if (tok_.kind == TokenKind::punctuator) {
            if (tok_.is("{"))
                return parse_block();
            if (tok_.is(";")) {
                advance();
                return AstNode("EmptyStatement");
            }
        }
        if (tok_.kind == TokenKind::keyword) {
            const std::string& kw = tok_.value;
            if (kw == "var") {
                AstNode decl = parse_variable_declaration();
                consume_semicolon();
                return decl;
            }
            if (kw == "if")
                return parse_if();
            if (kw == "for")
                return parse_for();
            if (kw == "while")
                return parse_while();
            if (kw == "do")
                return parse_do_while();
            if (kw == "return")
                return parse_return();
            if (kw == "break" || kw == "continue")
                return parse_break_continue();
            if (kw == "throw")
                return parse_throw();
            if (kw == "try")
                return parse_try();
            if (kw == "switch")
                return parse_switch();
            if (kw == "with")
                return parse_with();
            if (kw == "debugger") {
                advance();
                consume_semicolon();
                return AstNode("DebuggerStatement");
            }
            if (kw == "function")
                return parse_function(true, false);
            if (kw == "class")
                return parse_class(true);
        }
        if (is_identifier_token(tok_) && peek().is(":")) {
            AstNode labeled("LabeledStatement");
            labeled.add(identifier_from_token());
            advance(); // ':'
            labeled.add(parse_statement());
            return labeled;
        }
        AstNode stmt("ExpressionStatement");
        stmt.add(parse_expression());
        consume_semicolon();
        return stmt;
    }

    AstNode parse_block()
    {
        AstNode block("BlockStatement");
        expect("{");
        while (!tok_.is("}")) {
            if (tok_.kind == TokenKind::eof)
                unexpected();
            block.add(parse_statement_list_item());
        }
        advance();
        return block;
    }

    AstNode parse_paren_expression()
    {
        expect("(");
        AstNode e = parse_expression();
        expect(")");
        return e;
    }

    AstNode parse_if()
    {
        advance();
        AstNode node("IfStatement");
        node.add(parse_paren_expression());
        node.add(parse_statement());
        if (tok_.is_keyword("else")) {
            advance();
            node.add(parse_statement());
        }
        return node;
    }

    AstNode parse_while()
    {
        advance();
        AstNode node("WhileStatement");
        node.add(parse_paren_expression());
        node.add(parse_statement());
        return node;
    }

    AstNode parse_do_while()
    {
        advance();
        AstNode node("DoWhileStatement");
        node.add(parse_statement());
        expect_keyword("while");
        node.add(parse_paren_expression());
        eat(";");
        return node;
    }

    AstNode parse_for()
    {
        advance();
        bool is_await = false;
        if (tok_.is_name("await")) {
            is_await = true;
            advance();
        }
        expect("(");
        AstNode init;
        bool has_init = false;
        if (tok_.is(";")) {
            // no init
        } else {
            bool saved_in = allow_in_;
            allow_in_ = false;
            if (tok_.is_keyword("var") || tok_.is_keyword("const") || (tok_.is_name("let") && starts_let_declaration())) {
                init = parse_variable_declaration();
            } else {
                init = parse_expression();
            }
            allow_in_ = saved_in;
            has_init = true;
            bool is_of = tok_.is_name("of");
            if (tok_.is_keyword("in") || is_of) {
                AstNode node(is_of ? "ForOfStatement" : "ForInStatement");
                if (init.type != "VariableDeclaration")
                    init = to_pattern(std::move(init), false);
                advance();
                node.add(std::move(init));
                node.add(is_of ? parse_assignment() : parse_expression());
                expect(")");
                node.add(parse_statement());
                return node;
            }
        }
        if (is_await)
            unexpected();
        AstNode node("ForStatement");
        if (has_init)
            node.add(std::move(init));
        expect(";");
        if (!tok_.is(";"))
            node.add(parse_expression());
        expect(";");
        if (!tok_.is(")"))
            node.add(parse_expression());
        expect(")");
        node.add(parse_statement());
        return node;
    }

    AstNode parse_return()
    {
        advance();
        AstNode node("ReturnStatement");
        if (!tok_.is(";") && !tok_.is("}") && tok_.kind != TokenKind::eof && !tok_.newline_before)
            node.add(parse_expression());
        consume_semicolon();
        return node;
    }

    AstNode parse_break_continue()
    {
        AstNode node(tok_.value == "break" ? "BreakStatement" : "ContinueStatement");
        advance();
        if (is_identifier_token(tok_) && !tok_.newline_before)
            node.add(identifier_from_token());
        consume_semicolon();
        return node;
    }

    AstNode parse_throw()
    {
        advance();
        if (tok_.newline_before)
            throw SyntaxError("illegal newline after throw", tok_.line, tok_.column);
        AstNode node("ThrowStatement");
        node.add(parse_expression());
        consume_semicolon();
        return node;
    }

    AstNode parse_try()
    {
        advance();
        AstNode node("TryStatement");
        node.add(parse_block());
        bool handled = false;
        if (tok_.is_keyword("catch")) {
            advance();
            AstNode handler("CatchClause");
            if (eat("(")) {
                handler.add(parse_binding_target());
                expect(")");
            }
            handler.add(parse_block());
            node.add(std::move(handler));
            handled = true;
        }
        if (tok_.is_keyword("finally")) {
            advance();
            node.add(parse_block());
            handled = true;
        }
        if (!handled)
            unexpected();
        return node;
    }

    AstNode parse_switch()
    {
        advance();
        AstNode node("SwitchStatement");
        node.add(parse_paren_expression());
        expect("{");
        while (!tok_.is("}")) {
            AstNode kase("SwitchCase");
            if (tok_.is_keyword("case")) {
                advance();
                kase.add(parse_expression());
            } else if (tok_.is_keyword("default")) {
                advance();
            } else {
                unexpected();
            }
            expect(":");
            while (!tok_.is("}") && !tok_.is_keyword("case") && !tok_.is_keyword("default")) {
                if (tok_.kind == TokenKind::eof)
                    unexpected();
                kase.add(parse_statement_list_item());
            }
            node.add(std::move(kase));
        }
        advance();
        return node;
    }

    AstNode parse_with()
    {
        advance();
        AstNode node("WithStatement");
        node.add(parse_paren_expression());
        node.add(parse_statement());
        return node;
    }

    // ---- modules --------------------------------------------------------

    AstNode parse_module_source()
    {
        if (tok_.kind != TokenKind::string)
            unexpected();
        AstNode src = AstNode::make_terminal("Literal", tok_.value);
        advance();
        return src;
    }

    // `with { type: "json" }` after a module specifier
    void skip_import_attributes()
    {
        if (tok_.is_keyword("with") || (tok_.is_name("assert") && !tok_.newline_before)) {
            advance();
            if (!tok_.is("{"))
                unexpected();
            parse_primary();
        }
    }

    AstNode parse_module_name()
    {
        if (tok_.kind == TokenKind::string)
            return parse_module_source();
        if (tok_.kind != TokenKind::identifier && tok_.kind != TokenKind::keyword)
            unexpected();
        return identifier_from_token();
    }

    AstNode parse_import_declaration()
    {
        advance();
        AstNode node("ImportDeclaration");
        if (tok_.kind == TokenKind::string) {
            node.add(parse_module_source());
        skip_import_attributes();
            consume_semicolon();
            return node;
        }
        if (is_identifier_token(tok_)) {
            AstNode spec("ImportDefaultSpecifier");
            spec.add(identifier_from_token());
            node.add(std::move(spec));
            if (!eat(","))
                goto from;
        }
        if (eat("*")) {
            if (!tok_.is_name("as"))
                unexpected();
            advance();
            AstNode spec("ImportNamespaceSpecifier");
            spec.add(parse_identifier());
            node.add(std::move(spec));
        } else if (eat("{")) {
            while (!tok_.is("}")) {
                AstNode spec("ImportSpecifier");
                AstNode imported = parse_module_name();
                if (tok_.is_name("as")) {
                    advance();
                    spec.add(std::move(imported));
                    spec.add(parse_identifier());
                } else {
                    spec.add(imported);
                    spec.add(std::move(imported));
                }
                node.add(std::move(spec));
                if (!eat(","))
                    break;
            }
            expect("}");
        }
    from:
        if (!tok_.is_name("from"))
            unexpected();
        advance();
        node.add(parse_module_source());
        skip_import_attributes();
        consume_semicolon();
        return node;
    }

    AstNode parse_export_declaration()
    {
        advance();
        if (tok_.is_keyword("default")) {
            advance();
            AstNode node("ExportDefaultDeclaration");
            if (tok_.is_keyword("function")) {
                node.add(parse_function(false, false));
            } else if (tok_.is_keyword("class")) {
                node.add(parse_class(false));
            } else if (tok_.is_name("async") && peek().is_keyword("function")) {
                advance();
                node.add(parse_function(false, true));
            } else {
                node.add(parse_assignment());
                consume_semicolon();
            }
            return node;
        }
        if (eat("*")) {
            AstNode node("ExportAllDeclaration");
            if (tok_.is_name("as")) {
                advance();
                node.add(parse_module_name());
            }
            if (!tok_.is_name("from"))
                unexpected();
            advance();
            node.add(parse_module_source());
        skip_import_attributes();
            consume_semicolon();
            return node;
        }
        AstNode node("ExportNamedDeclaration");
        if (eat("{")) {
            while (!tok_.is("}")) {
                AstNode spec("ExportSpecifier");
                AstNode local = parse_module_name();
                if (tok_.is_name("as")) {
                    advance();
                    spec.add(std::move(local));
                    spec.add(parse_module_name());
                } else {
                    spec.add(local);
                    spec.add(std::move(local));
                }
                node.add(std::move(spec));
                if (!eat(","))
                    break;
            }
            expect("}");
            if (tok_.is_name("from")) {
                advance();
                node.add(parse_module_source());
        skip_import_attributes();
            }
            consume_semicolon();
            return node;
        }
        node.add(parse_statement_list_item());
        return node;
    }

    // ---- functions and classes ------------------------------------------

    struct FunctionContext {
        Parser& p;
        bool generator, async, in_fn;
        FunctionContext(Parser& parser, bool gen, bool asy)
            : p(parser), generator(parser.in_generator_), async(parser.in_async_), in_fn(parser.in_function_)
        {
            p.in_generator_ = gen;
            p.in_async_ = asy;
            p.in_function_ = true;
        }
        ~FunctionContext()
        {
            p.in_generator_ = generator;
            p.in_async_ = async;
            p.in_function_ = in_fn;
        }
        FunctionContext(const FunctionContext&) = delete;
        FunctionContext& operator=(const FunctionContext&) = delete;
    };

    // at `function`
    AstNode parse_function(bool declaration, bool is_async)
    {
        advance();
        bool generator = eat("*");
        AstNode fn(declaration ? "FunctionDeclaration" : "FunctionExpression");
        if (!tok_.is("(")) {
            // the name binds in the enclosing scope for declarations
            if (tok_.kind != TokenKind::identifier)
                unexpected();
            fn.add(identifier_from_token());
        }
        FunctionContext ctx(*this, generator, is_async);
        parse_params_and_body(fn);
        return fn;
    }

    void parse_params_and_body(AstNode& fn)
    {
        bool saved_in = allow_in_;
        allow_in_ = true;
        expect("(");
        while (!tok_.is(")")) {
            if (tok_.is("...")) {
                advance();
                AstNode rest("RestElement");
                rest.add(parse_binding_target());
                fn.add(std::move(rest));
                break;
            }
            fn.add(parse_binding_element());
            if (!eat(","))
                break;
        }
        expect(")");
        fn.add(parse_function_body());
        allow_in_ = saved_in;
    }

    AstNode parse_function_body()
    {
        bool saved_in = allow_in_;
        allow_in_ = true;
        AstNode body = parse_block();
        allow_in_ = saved_in;
        return body;
    }

    // at `class`
    AstNode parse_class(bool declaration)
    {
        advance();
        AstNode cls(declaration ? "ClassDeclaration" : "ClassExpression");
        if (tok_.kind == TokenKind::identifier && !tok_.is_name("extends"))
            cls.add(identifier_from_token());
        if (tok_.is_keyword("extends")) {
            advance();
            cls.add(parse_lhs());
        }
        AstNode body("ClassBody");
        expect("{");
        while (!tok_.is("}")) {
            if (eat(";"))
                continue;
            if (tok_.kind == TokenKind::eof)
                unexpected();
            body.add(parse_class_member());
        }
        advance();
        cls.add(std::move(body));
        return cls;
    }

    // Whether the current contextual word (get/set/static/async) modifies the
    // following member rather than naming it.
    bool is_modifier()
    {
        Token next = peek();
        if (next.is("(") || next.is("=") || next.is(";") || next.is("}") || next.is(":") || next.is(",")
            || next.is(")") || next.kind == TokenKind::eof)
            return false;
        if (tok_.value == "async" && next.newline_before)
            return false;
        return is_property_name_token(next) || next.is("*") || next.is("{");
    }

    AstNode parse_class_member()
    {
        bool is_static = false;
        if (tok_.is_name("static") && is_modifier()) {
            advance();
            is_static = true;
            if (tok_.is("{")) {
                AstNode block("StaticBlock");
                FunctionContext ctx(*this, false, false);
                AstNode b = parse_block();
                block.children = std::move(b.children);
                return block;
            }
        }
        (void)is_static;
        bool is_async = false, generator = false;
        if (tok_.is_name("async") && is_modifier()) {
            advance();
            is_async = true;
        }
        if (eat("*"))
            generator = true;
        if ((tok_.is_name("get") || tok_.is_name("set")) && !is_async && !generator && is_modifier())
            advance();
        AstNode key = parse_property_key();
        if (tok_.is("(")) {
            AstNode method("MethodDefinition");
            method.add(std::move(key));
            AstNode fn("FunctionExpression");
            {
                FunctionContext ctx(*this, generator, is_async);
                parse_params_and_body(fn);
            }
            method.add(std::move(fn));
            return method;
        }
        AstNode field("PropertyDefinition");
        field.add(std::move(key));
        if (eat("=")) {
            FunctionContext ctx(*this, false, false);
            field.add(parse_assignment());
        }
        consume_semicolon();
        return field;
    }

    AstNode parse_property_key()
    {
        switch (tok_.kind) {
        case TokenKind::identifier:
        case TokenKind::keyword:
            return identifier_from_token();
        case TokenKind::string: {
            AstNode lit = AstNode::make_terminal("Literal", tok_.value);
            lit.op = "string";
            advance();
            return lit;
        }
        case TokenKind::numeric: {
            AstNode lit = AstNode::make_terminal("Literal", tok_.value);
            advance();
            return lit;
        }
        case TokenKind::private_name: {
            AstNode id = AstNode::make_terminal("PrivateIdentifier", tok_.value);
            advance();
            return id;
        }
        default:
            break;
        }
        if (tok_.is("[")) {
            advance();
            bool saved_in = allow_in_;
            allow_in_ = true;
            AstNode key = parse_assignment();
            allow_in_ = saved_in;
            expect("]");
            return key;
        }
        unexpected();
    }

    // ---- patterns -------------------------------------------------------

    AstNode parse_binding_target()
    {
        if (tok_.is("["))
            return parse_array_pattern();
        if (tok_.is("{"))
            return parse_object_pattern();
        return parse_identifier();
    }

    AstNode parse_binding_element()
    {
        AstNode target = parse_binding_target();
        if (tok_.is("=")) {
            advance();
            AstNode pattern("AssignmentPattern");
            pattern.add(std::move(target));
            bool saved_in = allow_in_;
            allow_in_ = true;
            pattern.add(parse_assignment());
            allow_in_ = saved_in;
            return pattern;
        }
        return target;
    }

    AstNode parse_array_pattern()
    {
        advance();
        AstNode pattern("ArrayPattern");
        while (!tok_.is("]")) {
            if (eat(","))
                continue; // hole
            if (tok_.is("...")) {
                advance();
                AstNode rest("RestElement");
                rest.add(parse_binding_target());
                pattern.add(std::move(rest));
                break;
            }
            pattern.add(parse_binding_element());
            if (!tok_.is("]"))
                expect(",");
        }
        expect("]");
        return pattern;
    }

    AstNode parse_object_pattern()
    {
        advance();
        AstNode pattern("ObjectPattern");
        while (!tok_.is("}")) {
            if (tok_.is("...")) {
                advance();
                AstNode rest("RestElement");
                rest.add(parse_identifier());
                pattern.add(std::move(rest));
                break;
            }
            AstNode prop("Property");
            bool shorthand_ok = tok_.kind == TokenKind::identifier;
            AstNode key = parse_property_key();
            if (eat(":")) {
                prop.add(std::move(key));
                prop.add(parse_binding_element());
            } else {
                if (!shorthand_ok)
                    unexpected();
                AstNode value = key;
                if (tok_.is("=")) {
                    advance();
                    AstNode assign("AssignmentPattern");
                    assign.add(std::move(value));
                    assign.add(parse_assignment());
                    value = std::move(assign);
                }
                prop.add(std::move(key));
                prop.add(std::move(value));
            }
            pattern.add(std::move(prop));
            if (!tok_.is("}"))
                expect(",");
        }
        expect("}");
        return pattern;
    }

    // Reinterprets an expression parsed under the cover grammar as a pattern.
    AstNode to_pattern(AstNode node, bool binding)
    {
        if (node.type == "Identifier" || node.type == "AssignmentPattern" || node.type == "ObjectPattern"
            || node.type == "ArrayPattern")
            return node;
        if (node.type == "MemberExpression" && !binding)
            return node;
        if (node.type == "AssignmentExpression" && node.op == "=") {
            AstNode pattern("AssignmentPattern");
            pattern.add(to_pattern(std::move(node.children[0]), binding));
            pattern.add(std::move(node.children[1]));
            return pattern;
        }
        if (node.type == "ArrayExpression") {
            AstNode pattern("ArrayPattern");
            for (auto& el : node.children) {
                if (el.type == "SpreadElement") {
                    AstNode rest("RestElement");
                    rest.add(to_pattern(std::move(el.children[0]), binding));
                    pattern.add(std::move(rest));
                } else {
                    pattern.add(to_pattern(std::move(el), binding));
                }
            }
            return pattern;
        }
        if (node.type == "ObjectExpression") {
            AstNode pattern("ObjectPattern");
            for (auto& prop : node.children) {
                if (prop.type == "SpreadElement") {
                    AstNode rest("RestElement");
                    rest.add(to_pattern(std::move(prop.children[0]), binding));
                    pattern.add(std::move(rest));
                } else if (prop.type == "Property" && prop.children.size() == 2) {
                    AstNode p("Property");
                    p.add(std::move(prop.children[0]));
                    p.add(to_pattern(std::move(prop.children[1]), binding));
                    pattern.add(std::move(p));
                } else {
                    throw SyntaxError("invalid destructuring target", tok_.line, tok_.column);
                }
            }
            return pattern;
        }
        throw SyntaxError("invalid assignment target", tok_.line, tok_.column);
    }

    // ---- expressions ----------------------------------------------------

    AstNode parse_expression()
    {
        AstNode first = parse_assignment();
        if (!tok_.is(","))
            return first;
        AstNode seq("SequenceExpression");
        seq.add(std::move(first));
        while (eat(","))
            seq.add(parse_assignment());
        return seq;
    }

    AstNode parse_arrow(AstNode params_placeholder, bool is_async)
    {
        // at `=>`
        if (tok_.newline_before)
            unexpected();
        advance();
        AstNode arrow("ArrowFunctionExpression");
        for (auto& p : params_placeholder.children) {
            if (p.type == "SpreadElement") {
                AstNode rest("RestElement");
                rest.add(to_pattern(std::move(p.children[0]), true));
                arrow.add(std::move(rest));
            } else if (p.type == "RestElement") {
                arrow.add(std::move(p));
            } else {
                arrow.add(to_pattern(std::move(p), true));
            }
        }
        FunctionContext ctx(*this, false, is_async);
        if (tok_.is("{")) {
            arrow.add(parse_function_body());
        } else {
            arrow.add(parse_assignment());
        }
        return arrow;
    }

    AstNode parse_assignment()
    {
        if (in_generator_ && tok_.is_name("yield"))
            return parse_yield();

        // x => ...
        if (tok_.kind == TokenKind::identifier && peek().is("=>")) {
            AstNode params("ArrowParams");
            params.add(identifier_from_token());
            return parse_arrow(std::move(params), false);
        }
        // async x => ...
        if (tok_.is_name("async")) {
            auto s = lex_.save();
            Token saved = tok_;
            std::size_t saved_prev = prev_end_;
            advance();
            if (tok_.kind == TokenKind::identifier && !tok_.newline_before && peek().is("=>")) {
                AstNode params("ArrowParams");
                params.add(identifier_from_token());
                return parse_arrow(std::move(params), true);
            }
            lex_.restore(s);
            tok_ = saved;
            prev_end_ = saved_prev;
        }

        AstNode left = parse_conditional();
        if (left.type == "ArrowParams" || left.type == "AsyncArrowParams") {
            bool is_async = left.type == "AsyncArrowParams";
            return parse_arrow(std::move(left), is_async);
        }
        if (is_assignment_operator(tok_)) {
            std::string op = tok_.value;
            if (op == "=" && (left.type == "ArrayExpression" || left.type == "ObjectExpression"))
                left = to_pattern(std::move(left), false);
            else if (left.type != "Identifier" && left.type != "MemberExpression" && left.type != "CallExpression"
                && left.type != "ArrayPattern" && left.type != "ObjectPattern")
                throw SyntaxError("invalid assignment target", tok_.line, tok_.column);
            advance();
            AstNode assign("AssignmentExpression");
            assign.op = std::move(op);
            assign.add(std::move(left));
            assign.add(parse_assignment());
            return assign;
        }
        return left;
    }

    AstNode parse_yield()
    {
        advance();
        AstNode node("YieldExpression");
        if (tok_.newline_before)
            return node;
        if (eat("*")) {
            node.op = "*";
            node.add(parse_assignment());
            return node;
        }
        if (tok_.is(")") || tok_.is("]") || tok_.is("}") || tok_.is(",") || tok_.is(";") || tok_.is(":")
            || tok_.kind == TokenKind::eof || tok_.is_keyword("in"))
            return node;
        node.add(parse_assignment());
        return node;
    }

    AstNode parse_conditional()
    {
        AstNode test = parse_binary(1);
        if (!tok_.is("?"))
            return test;
        advance();
        AstNode node("ConditionalExpression");
        node.add(std::move(test));
        bool saved_in = allow_in_;
        allow_in_ = true;
        node.add(parse_assignment());
        allow_in_ = saved_in;
        expect(":");
        node.add(parse_assignment());
        return node;
    }

    int binary_precedence(const Token& t) const
    {
        if (t.kind == TokenKind::keyword) {
            if (t.value == "instanceof")
                return 8;
            if (t.value == "in")
                return allow_in_ ? 8 : 0;
            return 0;
        }
        if (t.kind != TokenKind::punctuator)
            return 0;
        const std::string& v = t.value;
        if (v == "??")
            return 1;
        if (v == "||")
            return 2;
        if (v == "&&")
            return 3;
        if (v == "|")
            return 4;
        if (v == "^")
            return 5;
        if (v == "&")
            return 6;
        if (v == "==" || v == "!=" || v == "===" || v == "!==")
            return 7;
        if (v == "<" || v == ">" || v == "<=" || v == ">=")
            return 8;
        if (v == "<<" || v == ">>" || v == ">>>")
            return 9;
        if (v == "+" || v == "-")
            return 10;
        if (v == "*" || v == "/" || v == "%")
            return 11;
        if (v == "**")
            return 12;
        return 0;
    }

    AstNode parse_binary(int min_prec)
    {
        AstNode left;
        if (tok_.kind == TokenKind::private_name) {
            // #x in obj
            left = AstNode::make_terminal("PrivateIdentifier", tok_.value);
            advance();
            if (!tok_.is_keyword("in"))
                unexpected();
        } else {
            left = parse_unary();
        }
        while (true) {
            int prec = binary_precedence(tok_);
            if (prec == 0 || prec < min_prec)
                break;
            std::string op = tok_.value;
            advance();
            AstNode right = op == "**" ? parse_binary(prec) : parse_binary(prec + 1);
            bool logical = op == "||" || op == "&&" || op == "??";
            AstNode bin(logical ? "LogicalExpression" : "BinaryExpression");
            bin.op = std::move(op);
            bin.add(std::move(left));
            bin.add(std::move(right));
            left = std::move(bin);
        }
        return left;
    }

    AstNode parse_unary()
    {
        if (tok_.kind == TokenKind::punctuator) {
            const std::string& v = tok_.value;
            if (v == "!" || v == "~" || v == "+" || v == "-") {
                AstNode node("UnaryExpression");
                node.op = v;
                advance();
                node.add(parse_unary());
                return node;
            }
            if (v == "++" || v == "--") {
                AstNode node("UpdateExpression");
                node.op = v;
                advance();
                node.add(parse_unary());
                return node;
            }
        } else if (tok_.kind == TokenKind::keyword) {
            const std::string& v = tok_.value;
            if (v == "delete" || v == "void" || v == "typeof") {
                AstNode node("UnaryExpression");
                node.op = v;
                advance();
                node.add(parse_unary());
                return node;
            }
        } else if (tok_.is_name("await") && (in_async_ || (!in_function_ && top_level_await()))) {
            advance();
            AstNode node("AwaitExpression");
            node.add(parse_unary());
            return node;
        }
        AstNode expr = parse_lhs();
        if ((tok_.is("++") || tok_.is("--")) && !tok_.newline_before) {
            AstNode node("UpdateExpression");
            node.op = tok_.value;
            advance();
            node.add(std::move(expr));
            return node;
        }
        return expr;
    }

    // Module code allows `await` outside functions; in scripts it is an
    // identifier. Treat it as an operator when an operand follows on the same
    // line.
    bool top_level_await()
    {
        Token next = peek();
        if (next.newline_before)
            return false;
        switch (next.kind) {
        case TokenKind::identifier:
        case TokenKind::string:
        case TokenKind::numeric:
        case TokenKind::template_part:
            return true;
        case TokenKind::keyword:
            return next.value != "in" && next.value != "instanceof";
        default:
            return false;
        }
    }

    AstNode parse_arguments(AstNode& call)
    {
        // at `(`
        bool saved_in = allow_in_;
        allow_in_ = true;
        advance();
        while (!tok_.is(")")) {
            if (tok_.is("...")) {
                advance();
                AstNode spread("SpreadElement");
                spread.add(parse_assignment());
                call.add(std::move(spread));
            } else {
                call.add(parse_assignment());
            }
            if (!eat(","))
                break;
        }
        expect(")");
        allow_in_ = saved_in;
        return call;
    }

    AstNode parse_member_name()
    {
        if (tok_.kind == TokenKind::identifier || tok_.kind == TokenKind::keyword)
            return identifier_from_token();
        if (tok_.kind == TokenKind::private_name) {
            AstNode id = AstNode::make_terminal("PrivateIdentifier", tok_.value);
            advance();
            return id;
        }
        unexpected();
    }

    AstNode parse_computed_member(AstNode object)
    {
        // at `[`
        advance();
        bool saved_in = allow_in_;
        allow_in_ = true;
        AstNode member("MemberExpression");
        member.add(std::move(object));
        member.add(parse_expression());
        allow_in_ = saved_in;
        expect("]");
        return member;
    }

    AstNode parse_lhs()
    {
        AstNode expr;
        bool maybe_async_arrow = false;
        if (tok_.is_keyword("new")) {
            expr = parse_new();
        } else if (tok_.is_keyword("super")) {
            advance();
            expr = AstNode("Super");
        } else if (tok_.is_keyword("import")) {
            advance();
            if (eat(".")) {
                AstNode meta("MetaProperty");
                meta.add(AstNode::make_terminal("Identifier", "import"));
                meta.add(parse_member_name());
                expr = std::move(meta);
            } else {
                expect("(");
                AstNode imp("ImportExpression");
                bool saved_in = allow_in_;
                allow_in_ = true;
                imp.add(parse_assignment());
                if (eat(",") && !tok_.is(")")) {
                    imp.add(parse_assignment());
                    eat(",");
                }
                allow_in_ = saved_in;
                expect(")");
                expr = std::move(imp);
            }
        } else {
            maybe_async_arrow = tok_.is_name("async");
            expr = parse_primary();
            if (maybe_async_arrow && (!tok_.is("(") || tok_.newline_before || expr.type != "Identifier"))
                maybe_async_arrow = false;
        }
        return parse_call_tail(std::move(expr), true, maybe_async_arrow);
    }

    AstNode parse_call_tail(AstNode expr, bool allow_call, bool maybe_async_arrow = false)
    {
        bool chain = false;
        while (true) {
            if (tok_.is(".")) {
                advance();
                AstNode member("MemberExpression");
                member.add(std::move(expr));
                member.add(parse_member_name());
                expr = std::move(member);
            } else if (tok_.is("?.")) {
                if (!allow_call)
                    unexpected();
                chain = true;
                advance();
                if (tok_.is("(")) {
                    AstNode call("CallExpression");
                    call.add(std::move(expr));
                    parse_arguments(call);
                    expr = std::move(call);
                } else if (tok_.is("[")) {
                    expr = parse_computed_member(std::move(expr));
                } else {
                    AstNode member("MemberExpression");
                    member.add(std::move(expr));
                    member.add(parse_member_name());
                    expr = std::move(member);
                }
            } else if (tok_.is("[")) {
                expr = parse_computed_member(std::move(expr));
            } else if (tok_.is("(") && allow_call) {
                AstNode call("CallExpression");
                call.add(std::move(expr));
                parse_arguments(call);
                if (maybe_async_arrow && tok_.is("=>") && !tok_.newline_before) {
                    AstNode params("AsyncArrowParams");
                    for (std::size_t i = 1; i < call.children.size(); ++i)
                        params.add(std::move(call.children[i]));
                    return params;
                }
                expr = std::move(call);
            } else if (tok_.kind == TokenKind::template_part && lex_.source()[tok_.start] == '`') {
                AstNode tagged("TaggedTemplateExpression");
                tagged.add(std::move(expr));
                tagged.add(parse_template());
                expr = std::move(tagged);
            } else {
                break;
            }
            maybe_async_arrow = false;
        }
        if (chain) {
            AstNode wrapped("ChainExpression");
            wrapped.add(std::move(expr));
            return wrapped;
        }
        return expr;
    }

    AstNode parse_new()
    {
        advance(); // new
        if (eat(".")) {
            AstNode meta("MetaProperty");
            meta.add(AstNode::make_terminal("Identifier", "new"));
            meta.add(parse_member_name());
            return meta;
        }
        AstNode callee;
        if (tok_.is_keyword("new")) {
            callee = parse_new();
        } else if (tok_.is_keyword("super")) {
            advance();
            callee = AstNode("Super");
        } else if (tok_.is_keyword("import")) {
            unexpected();
        } else {
            callee = parse_primary();
        }
        callee = parse_call_tail(std::move(callee), false);
        AstNode node("NewExpression");
        node.add(std::move(callee));
        if (tok_.is("("))
            parse_arguments(node);
        return node;
    }

    AstNode parse_template()
    {
        AstNode tpl("TemplateLiteral");
        while (true) {
            if (tok_.kind != TokenKind::template_part)
                unexpected();
            tpl.add(AstNode::make_terminal("TemplateElement", tok_.value));
            if (tok_.template_tail) {
                advance();
                return tpl;
            }
            advance();
            bool saved_in = allow_in_;
            allow_in_ = true;
            tpl.add(parse_expression());
            allow_in_ = saved_in;
            if (!tok_.is("}"))
                unexpected();
            tok_ = lex_.rescan_template(tok_);
        }
    }

    AstNode parse_group()
    {
        advance(); // (
        bool saved_in = allow_in_;
        allow_in_ = true;
        AstNode items("ArrowParams");
        bool rest_or_trailing = false;
        if (tok_.is(")")) {
            advance();
            allow_in_ = saved_in;
            if (tok_.is("=>"))
                return items;
            unexpected();
        }
        while (true) {
            if (tok_.is("...")) {
                advance();
                AstNode rest("RestElement");
                rest.add(parse_binding_target());
                items.add(std::move(rest));
                rest_or_trailing = true;
                break;
            }
            items.add(parse_assignment());
            if (!tok_.is(","))
                break;
            advance();
            if (tok_.is(")")) {
                rest_or_trailing = true;
                break;
            }
        }
        expect(")");
        allow_in_ = saved_in;
        if (tok_.is("=>") && !tok_.newline_before)
            return items;
        if (rest_or_trailing)
            unexpected();
        if (items.children.size() == 1)
            return std::move(items.children[0]);
        AstNode seq("SequenceExpression");
        seq.children = std::move(items.children);
        return seq;
    }

    AstNode parse_array_literal()
    {
        advance();
        bool saved_in = allow_in_;
        allow_in_ = true;
        AstNode arr("ArrayExpression");
        while (!tok_.is("]")) {
            if (eat(","))
                continue;
            if (tok_.is("...")) {
                advance();
                AstNode spread("SpreadElement");
                spread.add(parse_assignment());
                arr.add(std::move(spread));
            } else {
                arr.add(parse_assignment());
            }
            if (!tok_.is("]"))
                expect(",");
        }
        advance();
        allow_in_ = saved_in;
        return arr;
    }

    AstNode parse_object_literal()
    {
        advance();
        bool saved_in = allow_in_;
        allow_in_ = true;
        AstNode obj("ObjectExpression");
        while (!tok_.is("}")) {
            if (tok_.is("...")) {
                advance();
                AstNode spread("SpreadElement");
                spread.add(parse_assignment());
                obj.add(std::move(spread));
            } else {
                obj.add(parse_object_property());
            }
            if (!tok_.is("}"))
                expect(",");
        }
        advance();
        allow_in_ = saved_in;
        return obj;
    }

    AstNode parse_object_property()
    {
        bool is_async = false, generator = false, accessor = false;
        if (tok_.is_name("async") && is_modifier()) {
            advance();
            is_async = true;
        }
        if (eat("*"))
            generator = true;
        if ((tok_.is_name("get") || tok_.is_name("set")) && !is_async && !generator && is_modifier()) {
            advance();
            accessor = true;
        }
        bool shorthand_ok = tok_.kind == TokenKind::identifier && !is_async && !generator && !accessor;
        AstNode key = parse_property_key();
        AstNode prop("Property");
        if (tok_.is("(")) {
            AstNode fn("FunctionExpression");
            {
                FunctionContext ctx(*this, generator, is_async);
                parse_params_and_body(fn);
            }
            prop.add(std::move(key));
            prop.add(std::move(fn));
            return prop;
        }
        if (is_async || generator || accessor)
            unexpected();
        if (eat(":")) {
            prop.add(std::move(key));
            prop.add(parse_assignment());
            return prop;
        }
        if (!shorthand_ok)
            unexpected();
        AstNode value = key;
        if (tok_.is("=")) {
            // cover initialized name, only valid when reinterpreted as a pattern
            advance();
            AstNode assign("AssignmentPattern");
            assign.add(std::move(value));
            assign.add(parse_assignment());
            value = std::move(assign);
        }
        prop.add(std::move(key));
        prop.add(std::move(value));
        return prop;
    }

    AstNode parse_primary()
    {
        switch (tok_.kind) {
        case TokenKind::identifier: {
            if (tok_.is_name("async")) {
                Token next = peek();
                if (next.is_keyword("function") && !next.newline_before) {
                    advance();
                    return parse_function(false, true);
                }
            }
            if (!is_identifier_token(tok_))
                unexpected();
            return identifier_from_token();
        }
        case TokenKind::keyword: {
            const std::string& kw = tok_.value;
            if (kw == "this") {
                advance();
                return AstNode("ThisExpression");
            }
            if (kw == "null" || kw == "true" || kw == "false") {
                AstNode lit = AstNode::make_terminal("Literal", kw);
                advance();
                return lit;
            }
            if (kw == "function")
                return parse_function(false, false);
            if (kw == "class")
                return parse_class(false);
            unexpected();
        }
        case TokenKind::numeric:
        case TokenKind::string: {
            AstNode lit = AstNode::make_terminal("Literal", tok_.value);
            if (tok_.kind == TokenKind::string)
                lit.op = "string";
            advance();
            return lit;
        }
        case TokenKind::template_part:
            if (lex_.source()[tok_.start] != '`')
                unexpected();
            return parse_template();
        case TokenKind::punctuator:
            if (tok_.is("/") || tok_.is("/=")) {
                tok_ = lex_.rescan_regex(tok_);
                AstNode lit = AstNode::make_terminal("Literal", tok_.value);
                advance();
                return lit;
            }
            if (tok_.is("("))
                return parse_group();
            if (tok_.is("["))
                return parse_array_literal();
            if (tok_.is("{"))
                return parse_object_literal();
            unexpected();
        default:
            unexpected();
        }
    }

    Lexer lex_;
    Token tok_;
    std::size_t prev_end_ = 0;
    bool allow_in_ = true;
    bool in_function_ = false;
    bool in_generator_ = false;
    bool in_async_ = false;
};

/// Parses `source` as a script. Throws SyntaxError.
inline AstNode parse(std::string_view source)
{
    Parser parser(source);
    return parser.parse_program();
}

} // namespace fpkit::js
