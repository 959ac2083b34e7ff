#include "taskc/frontend/parser.hpp"

#include <cerrno>
#include <cstdlib>
#include <set>

namespace taskc::frontend {

namespace {

std::string join_expected(const std::vector<std::string>& expected) {
    std::string out;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) out += (i + 1 == expected.size()) ? " or " : ", ";
        out += "'" + expected[i] + "'";
    }
    return out;
}

const std::set<std::string_view> kTypeWords = {
    "void", "char", "signed", "unsigned", "short", "int", "long", "float", "double", "size_t",
};

const std::set<std::string_view> kSpecifierWords = {
    "void", "char", "signed", "unsigned", "short", "int", "long", "float", "double", "size_t",
    "const", "static", "extern", "__kernel", "__global",
};

int binary_precedence(const Token& t) {
    if (t.kind != TokenKind::Punct) return -1;
    const std::string& s = t.text;
    if (s == "||") return 3;
    if (s == "&&") return 4;
    if (s == "==" || s == "!=") return 8;
    if (s == "<" || s == ">" || s == "<=" || s == ">=") return 9;
    if (s == "+" || s == "-") return 11;
    if (s == "*" || s == "/" || s == "%") return 12;
    return -1;
}

bool is_assign_op(const Token& t) {
    return t.kind == TokenKind::Punct &&
           (t.text == "=" || t.text == "+=" || t.text == "-=" || t.text == "*=" || t.text == "/=" || t.text == "%=");
}

struct Specifiers {
    TypeExpr type;
    StorageClass storage = StorageClass::None;
    bool is_kernel = false;
    SourceLocation loc;
};

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {
        if (toks_.empty() || toks_.back().kind != TokenKind::End)
            throw ParseError(SourceLocation{}, "token stream must end with an end-of-input token");
    }

    TranslationUnit unit() {
        TranslationUnit tu;
        tu.file = toks_.back().loc.file;
        while (!at_end()) {
            if (cur().kind == TokenKind::Pragma) {
                TopLevel item;
                item.kind = TopLevel::Kind::Pragma;
                item.pragma = parse_pragma(next());
                tu.items.push_back(std::move(item));
                continue;
            }
            tu.items.push_back(top_level_declaration());
        }
        return tu;
    }

    Expr full_expression() {
        Expr e = expression();
        if (!at_end()) fail_expected({"end of pragma"});
        return e;
    }

private:
    // -- token helpers -----------------------------------------------------

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t n = 1) const { return toks_[std::min(pos_ + n, toks_.size() - 1)]; }
    bool at_end() const { return cur().kind == TokenKind::End; }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    bool accept_punct(std::string_view p) {
        if (!cur().is_punct(p)) return false;
        ++pos_;
        return true;
    }

    const Token& expect_punct(std::string_view p) {
        if (!cur().is_punct(p)) fail_expected({std::string(p)});
        return next();
    }

    std::string describe(const Token& t) const {
        switch (t.kind) {
            case TokenKind::End: return "end of input";
            case TokenKind::Pragma: return "'#pragma'";
            case TokenKind::StringLiteral: return "string literal";
            default: return "'" + t.text + "'";
        }
    }

    [[noreturn]] void fail_expected(std::vector<std::string> expected) const {
        throw ParseError(cur().loc, "expected " + join_expected(expected) + " before " + describe(cur()),
                         std::move(expected));
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(cur().loc, msg); }

    bool is_specifier_start(const Token& t) const {
        return t.kind == TokenKind::Keyword && kSpecifierWords.contains(t.text);
    }

    bool is_type_name_start(const Token& t) const {
        return t.kind == TokenKind::Keyword && (kTypeWords.contains(t.text) || t.text == "const");
    }

    // -- declarations ------------------------------------------------------

    Specifiers specifiers() {
        Specifiers spec;
        spec.loc = cur().loc;
        int n_void = 0, n_char = 0, n_signed = 0, n_unsigned = 0, n_short = 0, n_int = 0, n_long = 0;
        int n_float = 0, n_double = 0, n_size = 0;
        bool any_type = false;
        while (is_specifier_start(cur())) {
            const std::string& w = cur().text;
            if (w == "const") {
                spec.type.const_qualified = true;
            } else if (w == "static" || w == "extern") {
                if (spec.storage != StorageClass::None) fail("multiple storage classes in declaration");
                spec.storage = w == "static" ? StorageClass::Static : StorageClass::Extern;
            } else if (w == "__kernel") {
                spec.is_kernel = true;
            } else if (w == "__global") {
                spec.type.global_qualified = true;
            } else {
                any_type = true;
                if (w == "void") ++n_void;
                else if (w == "char") ++n_char;
                else if (w == "signed") ++n_signed;
                else if (w == "unsigned") ++n_unsigned;
                else if (w == "short") ++n_short;
                else if (w == "int") ++n_int;
                else if (w == "long") ++n_long;
                else if (w == "float") ++n_float;
                else if (w == "double") ++n_double;
                else if (w == "size_t") ++n_size;
            }
            ++pos_;
        }
        if (!any_type) fail_expected({"type specifier"});

        auto bad = [&]() { throw ParseError(spec.loc, "invalid combination of type specifiers"); };
        int n_sign = n_signed + n_unsigned;
        if (n_signed > 1 || n_unsigned > 1 || n_sign > 1) bad();
        int n_other = n_void + n_float + n_double + n_size;
        if (n_other > 1 || n_void > 1 || n_float > 1 || n_double > 1 || n_size > 1) bad();
        if (n_long > 1) throw ParseError(spec.loc, "'long long' is not supported");
        BaseType base = BaseType::Int;
        if (n_other == 1) {
            if (n_char + n_sign + n_short + n_int + n_long != 0) bad();
            base = n_void ? BaseType::Void : n_float ? BaseType::Float : n_double ? BaseType::Double : BaseType::SizeT;
        } else if (n_char) {
            if (n_char > 1 || n_short || n_int || n_long) bad();
            base = n_signed ? BaseType::SignedChar : n_unsigned ? BaseType::UnsignedChar : BaseType::Char;
        } else if (n_short) {
            if (n_short > 1 || n_long || n_int > 1) bad();
            base = n_unsigned ? BaseType::UnsignedShort : BaseType::Short;
        } else if (n_long) {
            if (n_int > 1) bad();
            base = n_unsigned ? BaseType::UnsignedLong : BaseType::Long;
        } else {
            if (n_int > 1) bad();
            base = n_unsigned ? BaseType::UnsignedInt : BaseType::Int;
        }
        spec.type.base = base;
        return spec;
    }

    int pointer_stars() {
        int depth = 0;
        while (cur().is_punct("*")) {
            ++pos_;
            ++depth;
            if (cur().is_keyword("const")) fail("const-qualified pointers are not supported");
        }
        return depth;
    }

    std::vector<ArrayDim> array_dims() {
        std::vector<ArrayDim> dims;
        while (accept_punct("[")) {
            ArrayDim d;
            if (cur().is_punct("]")) {
                d.kind = ArrayDim::Kind::Unsized;
            } else if (cur().kind == TokenKind::IntLiteral) {
                d.kind = ArrayDim::Kind::Constant;
                d.value = int_literal_value(cur());
                if (d.value <= 0) fail("array dimension must be positive");
                ++pos_;
            } else if (cur().kind == TokenKind::Identifier) {
                d.kind = ArrayDim::Kind::Symbol;
                d.symbol = next().text;
            } else {
                fail("array dimension must be an integer constant or a variable name");
            }
            expect_punct("]");
            dims.push_back(std::move(d));
        }
        return dims;
    }

    std::vector<Attribute> attributes() {
        std::vector<Attribute> out;
        while (cur().is_keyword("__attribute__")) {
            ++pos_;
            expect_punct("(");
            expect_punct("(");
            while (!cur().is_punct(")")) {
                if (cur().kind != TokenKind::Identifier && cur().kind != TokenKind::Keyword) fail_expected({"attribute name"});
                Attribute a;
                a.loc = cur().loc;
                a.name = next().text;
                a.kind = attr_kind(a.name);
                if (accept_punct("(")) {
                    a.has_args = true;
                    int depth = 1;
                    while (true) {
                        if (at_end()) fail_expected({")"});
                        if (cur().is_punct("(")) ++depth;
                        if (cur().is_punct(")") && --depth == 0) break;
                        a.raw.push_back(next());
                    }
                    expect_punct(")");
                }
                out.push_back(std::move(a));
                if (!accept_punct(",")) break;
            }
            expect_punct(")");
            expect_punct(")");
        }
        return out;
    }

    void reject_misplaced_attribute() {
        if (cur().is_keyword("__attribute__"))
            fail("attributes are only accepted after a declarator");
    }

    ParamDecl parameter() {
        reject_misplaced_attribute();
        Specifiers spec = specifiers();
        if (spec.storage != StorageClass::None) throw ParseError(spec.loc, "storage class on parameter");
        ParamDecl p;
        p.loc = spec.loc;
        p.type = spec.type;
        p.type.pointer_depth = pointer_stars();
        if (cur().kind == TokenKind::Identifier) {
            p.loc = cur().loc;
            p.name = next().text;
        }
        p.type.array_dims = array_dims();
        if (p.type.is_pointer() && p.type.is_array()) fail("arrays of pointers are not supported");
        p.attrs = attributes();
        return p;
    }

    std::vector<ParamDecl> parameter_list() {
        expect_punct("(");
        std::vector<ParamDecl> params;
        if (accept_punct(")")) return params;
        if (cur().is_keyword("void") && peek().is_punct(")")) {
            pos_ += 2;
            return params;
        }
        while (true) {
            params.push_back(parameter());
            if (accept_punct(")")) break;
            if (!accept_punct(",")) fail_expected({",", ")"});
        }
        return params;
    }

    VarDecl variable_declarator(const Specifiers& spec) {
        VarDecl v;
        v.type = spec.type;
        v.storage = spec.storage;
        v.type.pointer_depth = pointer_stars();
        if (cur().kind != TokenKind::Identifier) fail_expected({"identifier"});
        v.loc = cur().loc;
        v.name = next().text;
        v.type.array_dims = array_dims();
        if (v.type.is_pointer() && v.type.is_array()) fail("arrays of pointers are not supported");
        v.attrs = attributes();
        if (accept_punct("=")) v.init = assignment();
        return v;
    }

    TopLevel top_level_declaration() {
        reject_misplaced_attribute();
        Specifiers spec = specifiers();
        TopLevel item;
        // Function declarator: stars, identifier, then '('.
        std::size_t save = pos_;
        int stars = pointer_stars();
        if (cur().kind == TokenKind::Identifier && peek().is_punct("(")) {
            item.kind = TopLevel::Kind::Function;
            FunctionDecl& f = item.function;
            f.return_type = spec.type;
            f.return_type.pointer_depth = stars;
            f.storage = spec.storage;
            f.is_kernel = spec.is_kernel;
            f.loc = cur().loc;
            f.name = next().text;
            f.params = parameter_list();
            f.attrs = attributes();
            if (cur().is_punct("{")) {
                f.body = compound();
            } else {
                expect_punct(";");
            }
            return item;
        }
        pos_ = save;
        if (spec.is_kernel) fail("'__kernel' applies only to functions");
        item.kind = TopLevel::Kind::Variables;
        while (true) {
            item.variables.push_back(variable_declarator(spec));
            if (accept_punct(";")) break;
            if (!accept_punct(",")) fail_expected({",", ";"});
        }
        return item;
    }

    Stmt declaration_statement() {
        Stmt s;
        s.kind = Stmt::Kind::Decl;
        s.loc = cur().loc;
        Specifiers spec = specifiers();
        if (spec.is_kernel) fail("'__kernel' applies only to functions");
        while (true) {
            s.decls.push_back(variable_declarator(spec));
            if (cur().is_punct("(")) fail("nested function declarations are not supported");
            if (accept_punct(";")) break;
            if (!accept_punct(",")) fail_expected({",", ";"});
        }
        return s;
    }

    // -- statements --------------------------------------------------------

    Stmt compound() {
        Stmt s;
        s.kind = Stmt::Kind::Compound;
        s.loc = expect_punct("{").loc;
        while (!cur().is_punct("}")) {
            if (at_end()) fail_expected({"}"});
            s.body.push_back(statement());
        }
        ++pos_;
        return s;
    }

    Stmt statement() {
        const Token& t = cur();
        if (t.kind == TokenKind::Pragma) {
            Stmt s;
            s.kind = Stmt::Kind::Pragma;
            s.loc = t.loc;
            s.pragma = parse_pragma(next());
            return s;
        }
        if (t.is_punct("{")) return compound();
        if (t.is_punct(";")) {
            Stmt s;
            s.kind = Stmt::Kind::Empty;
            s.loc = next().loc;
            return s;
        }
        reject_misplaced_attribute();
        if (is_specifier_start(t)) return declaration_statement();
        if (t.is_keyword("if")) {
            Stmt s;
            s.kind = Stmt::Kind::If;
            s.loc = next().loc;
            expect_punct("(");
            s.expr = expression();
            expect_punct(")");
            s.body.push_back(statement());
            if (cur().is_keyword("else")) {
                ++pos_;
                s.body.push_back(statement());
            }
            return s;
        }
        if (t.is_keyword("while")) {
            Stmt s;
            s.kind = Stmt::Kind::While;
            s.loc = next().loc;
            expect_punct("(");
            s.expr = expression();
            expect_punct(")");
            s.body.push_back(statement());
            return s;
        }
        if (t.is_keyword("for")) {
            Stmt s;
            s.kind = Stmt::Kind::For;
            s.loc = next().loc;
            expect_punct("(");
            if (is_specifier_start(cur())) {
                s.init.push_back(declaration_statement());
            } else if (!accept_punct(";")) {
                Stmt init;
                init.kind = Stmt::Kind::Expr;
                init.loc = cur().loc;
                init.expr = expression();
                expect_punct(";");
                s.init.push_back(std::move(init));
            }
            if (!cur().is_punct(";")) s.expr = expression();
            expect_punct(";");
            if (!cur().is_punct(")")) s.step = expression();
            expect_punct(")");
            s.body.push_back(statement());
            return s;
        }
        if (t.is_keyword("return")) {
            Stmt s;
            s.kind = Stmt::Kind::Return;
            s.loc = next().loc;
            if (!cur().is_punct(";")) s.expr = expression();
            expect_punct(";");
            return s;
        }
        if (t.is_keyword("else")) fail("'else' without a previous 'if'");
        Stmt s;
        s.kind = Stmt::Kind::Expr;
        s.loc = t.loc;
        s.expr = expression();
        expect_punct(";");
        return s;
    }

    // -- expressions -------------------------------------------------------

    Expr expression() { return assignment(); }

    Expr assignment() {
        Expr lhs = binary(0);
        if (is_assign_op(cur())) {
            Expr e;
            e.kind = Expr::Kind::Assign;
            e.loc = cur().loc;
            e.text = next().text;
            e.operands.push_back(std::move(lhs));
            e.operands.push_back(assignment());
            return e;
        }
        return lhs;
    }

    Expr binary(int min_prec) {
        Expr lhs = unary();
        while (true) {
            int prec = binary_precedence(cur());
            if (prec < 0 || prec < min_prec) break;
            Expr e;
            e.kind = Expr::Kind::Binary;
            e.loc = cur().loc;
            e.text = next().text;
            e.operands.push_back(std::move(lhs));
            e.operands.push_back(binary(prec + 1));
            lhs = std::move(e);
        }
        return lhs;
    }

    TypeExpr type_name() {
        Specifiers spec = specifiers();
        if (spec.storage != StorageClass::None || spec.is_kernel) throw ParseError(spec.loc, "unexpected specifier in type name");
        TypeExpr t = spec.type;
        t.pointer_depth = pointer_stars();
        return t;
    }

    Expr unary() {
        const Token& t = cur();
        if (t.kind == TokenKind::Punct &&
            (t.text == "-" || t.text == "+" || t.text == "!" || t.text == "~" || t.text == "*" || t.text == "&" ||
             t.text == "++" || t.text == "--")) {
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.loc = t.loc;
            e.text = next().text;
            e.operands.push_back(unary());
            return e;
        }
        if (t.is_keyword("sizeof")) {
            Expr e;
            e.loc = next().loc;
            if (cur().is_punct("(") && is_type_name_start(peek())) {
                ++pos_;
                e.kind = Expr::Kind::SizeofType;
                e.type = type_name();
                expect_punct(")");
            } else {
                e.kind = Expr::Kind::SizeofExpr;
                e.operands.push_back(unary());
            }
            return e;
        }
        if (t.is_punct("(") && is_type_name_start(peek())) {
            Expr e;
            e.kind = Expr::Kind::Cast;
            e.loc = next().loc;
            e.type = type_name();
            expect_punct(")");
            e.operands.push_back(unary());
            return e;
        }
        return postfix();
    }

    Expr postfix() {
        Expr e = primary();
        while (true) {
            if (cur().is_punct("[")) {
                Expr s;
                s.kind = Expr::Kind::Subscript;
                s.loc = next().loc;
                s.operands.push_back(std::move(e));
                s.operands.push_back(expression());
                expect_punct("]");
                e = std::move(s);
            } else if (cur().is_punct("(")) {
                if (e.kind != Expr::Kind::Ident) fail("only named functions can be called");
                Expr c;
                c.kind = Expr::Kind::Call;
                c.loc = next().loc;
                c.text = e.text;
                if (!accept_punct(")")) {
                    while (true) {
                        c.operands.push_back(assignment());
                        if (accept_punct(")")) break;
                        if (!accept_punct(",")) fail_expected({",", ")"});
                    }
                }
                e = std::move(c);
            } else if (cur().is_punct("++") || cur().is_punct("--")) {
                Expr p;
                p.kind = Expr::Kind::Postfix;
                p.loc = cur().loc;
                p.text = next().text;
                p.operands.push_back(std::move(e));
                e = std::move(p);
            } else {
                break;
            }
        }
        return e;
    }

    Expr primary() {
        const Token& t = cur();
        Expr e;
        e.loc = t.loc;
        switch (t.kind) {
            case TokenKind::Identifier:
                e.kind = Expr::Kind::Ident;
                e.text = next().text;
                return e;
            case TokenKind::IntLiteral:
                e.kind = Expr::Kind::IntLit;
                e.text = t.text;
                e.int_value = int_literal_value(t);
                ++pos_;
                return e;
            case TokenKind::FloatLiteral: {
                e.kind = Expr::Kind::FloatLit;
                e.text = t.text;
                e.float_value = std::strtod(t.text.c_str(), nullptr);
                ++pos_;
                return e;
            }
            case TokenKind::StringLiteral:
                e.kind = Expr::Kind::StringLit;
                e.text = next().text;
                return e;
            case TokenKind::Punct:
                if (t.text == "(") {
                    ++pos_;
                    Expr inner = expression();
                    expect_punct(")");
                    return inner;
                }
                break;
            default:
                break;
        }
        fail_expected({"expression"});
    }

    std::int64_t int_literal_value(const Token& t) const {
        std::string digits = t.text;
        while (!digits.empty() && (digits.back() == 'u' || digits.back() == 'U' || digits.back() == 'l' || digits.back() == 'L'))
            digits.pop_back();
        errno = 0;
        unsigned long long v = std::strtoull(digits.c_str(), nullptr, 0);
        if (errno == ERANGE || v > static_cast<unsigned long long>(INT64_MAX))
            throw ParseError(t.loc, "integer literal '" + t.text + "' is too large");
        return static_cast<std::int64_t>(v);
    }

    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
};

}  // namespace

ParseError::ParseError(SourceLocation loc, std::string msg, std::vector<std::string> expected_tokens)
    : std::runtime_error(loc.str() + ": error: " + msg),
      location(std::move(loc)),
      message(std::move(msg)),
      expected(std::move(expected_tokens)) {}

TranslationUnit parse(const std::vector<Token>& tokens) {
    return Parser(tokens).unit();
}

TranslationUnit parse_source(std::string_view source, const std::string& file_name) {
    return parse(tokenize(source, file_name));
}

PragmaNode parse_pragma(const Token& tok) {
    PragmaNode p;
    p.loc = tok.loc;
    if (tok.text != "starpu" && tok.text.rfind("starpu ", 0) != 0 && tok.text.rfind("starpu\t", 0) != 0) {
        p.kind = PragmaKind::Unknown;
        p.raw = tok.text;
        return p;
    }
    std::vector<Token> toks = tokenize_at(tok.text, tok.payload);
    // toks[0] is "starpu".
    if (toks.size() < 3 || toks[1].kind != TokenKind::Identifier) {
        p.kind = PragmaKind::Unknown;
        p.raw = tok.text;
        return p;
    }
    const std::string& directive = toks[1].text;
    std::size_t i = 2;
    auto expect_ident = [&](const char* what) -> std::string {
        if (toks[i].kind != TokenKind::Identifier)
            throw ParseError(toks[i].loc, std::string("expected ") + what + " in '#pragma starpu " + directive + "'",
                             {what});
        return toks[i++].text;
    };
    auto expect_string = [&](const char* what) -> std::string {
        if (toks[i].kind != TokenKind::StringLiteral)
            throw ParseError(toks[i].loc, std::string("expected ") + what + " in '#pragma starpu " + directive + "'",
                             {what});
        return toks[i++].text;
    };
    auto expect_done = [&]() {
        if (toks[i].kind != TokenKind::End)
            throw ParseError(toks[i].loc, "extra tokens at end of '#pragma starpu " + directive + "'", {"end of line"});
    };

    if (directive == "register") {
        p.kind = PragmaKind::Register;
        p.var = expect_ident("variable name");
        if (toks[i].kind != TokenKind::End) {
            std::vector<Token> rest(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.end());
            p.size = Parser(rest).full_expression();
        }
    } else if (directive == "unregister" || directive == "acquire") {
        p.kind = directive == "unregister" ? PragmaKind::Unregister : PragmaKind::Acquire;
        p.var = expect_ident("variable name");
        expect_done();
    } else if (directive == "wait") {
        p.kind = PragmaKind::Wait;
        expect_done();
    } else if (directive == "opencl") {
        p.kind = PragmaKind::OpenCL;
        p.impl = expect_ident("implementation name");
        p.file = expect_string("kernel file name");
        p.kernel = expect_string("kernel name");
        if (toks[i].kind != TokenKind::IntLiteral)
            throw ParseError(toks[i].loc, "expected group size in '#pragma starpu opencl'", {"group size"});
        const Token& g = toks[i++];
        p.group_size = std::strtoll(g.text.c_str(), nullptr, 0);
        if (p.group_size < 1) throw ParseError(g.loc, "group size must be at least 1");
        expect_done();
    } else {
        p.kind = PragmaKind::Unknown;
        p.raw = tok.text;
    }
    return p;
}

}  // namespace taskc::frontend
