#include "taskc/frontend/printer.hpp"

namespace taskc::frontend {

namespace {

constexpr int kPrecAssign = 1;
constexpr int kPrecUnary = 13;
constexpr int kPrecPostfix = 14;
constexpr int kPrecPrimary = 15;

int binary_prec(const std::string& op) {
    if (op == "||") return 3;
    if (op == "&&") return 4;
    if (op == "==" || op == "!=") return 8;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 9;
    if (op == "+" || op == "-") return 11;
    return 12;
}

int precedence(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Assign: return kPrecAssign;
        case Expr::Kind::Binary: return binary_prec(e.text);
        case Expr::Kind::Unary:
        case Expr::Kind::Cast:
        case Expr::Kind::SizeofExpr:
        case Expr::Kind::SizeofType: return kPrecUnary;
        case Expr::Kind::Postfix:
        case Expr::Kind::Call:
        case Expr::Kind::Subscript: return kPrecPostfix;
        default: return kPrecPrimary;
    }
}

std::string type_name(const TypeExpr& t) {
    std::string out;
    if (t.global_qualified) out += "__global ";
    if (t.const_qualified) out += "const ";
    out += spelling(t.base);
    if (t.pointer_depth > 0) {
        out += ' ';
        out.append(static_cast<std::size_t>(t.pointer_depth), '*');
    }
    return out;
}

std::string dims(const TypeExpr& t) {
    std::string out;
    for (const ArrayDim& d : t.array_dims) {
        out += '[';
        if (d.kind == ArrayDim::Kind::Constant) out += std::to_string(d.value);
        if (d.kind == ArrayDim::Kind::Symbol) out += d.symbol;
        out += ']';
    }
    return out;
}

/// "const float *name[dims]"
std::string declarator(const TypeExpr& t, const std::string& name) {
    std::string out;
    if (t.global_qualified) out += "__global ";
    if (t.const_qualified) out += "const ";
    out += spelling(t.base);
    out += ' ';
    out.append(static_cast<std::size_t>(t.pointer_depth), '*');
    out += name;
    out += dims(t);
    return out;
}

std::string expr_at(const Expr& e, int min_prec);

std::string expr(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::IntLit:
        case Expr::Kind::FloatLit:
        case Expr::Kind::Ident: return e.text;
        case Expr::Kind::StringLit: return quote(e.text);
        case Expr::Kind::Unary: {
            std::string inner = expr_at(e.operands[0], kPrecUnary);
            std::string out = e.text;
            // Keep "- -x" from lexing as "--x".
            if (!inner.empty() && (inner[0] == '-' || inner[0] == '+' || inner[0] == '&' || inner[0] == '*'))
                out += ' ';
            return out + inner;
        }
        case Expr::Kind::Postfix: return expr_at(e.operands[0], kPrecPostfix) + e.text;
        case Expr::Kind::Binary: {
            int p = binary_prec(e.text);
            return expr_at(e.operands[0], p) + " " + e.text + " " + expr_at(e.operands[1], p + 1);
        }
        case Expr::Kind::Assign:
            return expr_at(e.operands[0], kPrecUnary) + " " + e.text + " " + expr_at(e.operands[1], kPrecAssign);
        case Expr::Kind::Call: {
            std::string out = e.text + " (";
            for (std::size_t i = 0; i < e.operands.size(); ++i) {
                if (i) out += ", ";
                out += expr_at(e.operands[i], kPrecAssign);
            }
            return out + ")";
        }
        case Expr::Kind::Subscript:
            return expr_at(e.operands[0], kPrecPostfix) + "[" + expr(e.operands[1]) + "]";
        case Expr::Kind::Cast: return "(" + type_name(e.type) + ") " + expr_at(e.operands[0], kPrecUnary);
        case Expr::Kind::SizeofExpr: return "sizeof " + expr_at(e.operands[0], kPrecUnary);
        case Expr::Kind::SizeofType: return "sizeof (" + type_name(e.type) + ")";
    }
    return "";
}

std::string expr_at(const Expr& e, int min_prec) {
    std::string s = expr(e);
    if (precedence(e) < min_prec) return "(" + s + ")";
    return s;
}

bool is_known_attr(const Attribute& a) {
    return a.kind != AttrKind::Unknown;
}

std::string attributes(const std::vector<Attribute>& attrs, const PrintOptions& opts) {
    std::string inner;
    for (const Attribute& a : attrs) {
        if (opts.strip_annotations && is_known_attr(a)) continue;
        if (!inner.empty()) inner += ", ";
        inner += a.name;
        if (a.has_args) {
            inner += " (";
            for (std::size_t i = 0; i < a.raw.size(); ++i) {
                const Token& t = a.raw[i];
                if (t.is_punct(",")) {
                    inner += ",";
                    continue;
                }
                if (i > 0) inner += ' ';
                inner += t.kind == TokenKind::StringLiteral ? quote(t.text) : t.text;
            }
            inner += ")";
        }
    }
    if (inner.empty()) return "";
    return " __attribute__ ((" + inner + "))";
}

std::string storage(StorageClass s) {
    switch (s) {
        case StorageClass::Static: return "static ";
        case StorageClass::Extern: return "extern ";
        case StorageClass::None: break;
    }
    return "";
}

class Printer {
public:
    explicit Printer(const PrintOptions& opts) : opts_(opts) {}

    std::string unit(const TranslationUnit& tu) {
        for (std::size_t i = 0; i < tu.items.size(); ++i) {
            const TopLevel& item = tu.items[i];
            switch (item.kind) {
                case TopLevel::Kind::Pragma:
                    if (!skip(item.pragma)) line(0, print_pragma(item.pragma), true);
                    break;
                case TopLevel::Kind::Variables:
                    line(0, var_decls(item.variables) + ";");
                    break;
                case TopLevel::Kind::Function:
                    function(item.function);
                    break;
            }
        }
        return out_;
    }

private:
    bool skip(const PragmaNode& p) const { return opts_.strip_annotations && p.is_starpu(); }

    void line(int indent, const std::string& text, bool pragma = false) {
        if (!pragma) out_.append(static_cast<std::size_t>(indent) * 2, ' ');
        out_ += text;
        out_ += '\n';
    }

    std::string var_decls(const std::vector<VarDecl>& vars) {
        std::string out = storage(vars.front().storage);
        TypeExpr base = vars.front().type;
        out += declarator(vars.front().type, vars.front().name);
        out += attributes(vars.front().attrs, opts_);
        if (vars.front().init) out += " = " + expr_at(*vars.front().init, kPrecAssign);
        for (std::size_t i = 1; i < vars.size(); ++i) {
            const VarDecl& v = vars[i];
            out += ", ";
            out.append(static_cast<std::size_t>(v.type.pointer_depth), '*');
            out += v.name + dims(v.type);
            out += attributes(v.attrs, opts_);
            if (v.init) out += " = " + expr_at(*v.init, kPrecAssign);
        }
        return out;
    }

    void function(const FunctionDecl& f) {
        std::string head = storage(f.storage);
        if (f.is_kernel) head += "__kernel ";
        head += declarator(f.return_type, f.name);
        head += " (";
        if (f.params.empty()) head += "void";
        for (std::size_t i = 0; i < f.params.size(); ++i) {
            const ParamDecl& p = f.params[i];
            if (i) head += ", ";
            if (p.name.empty()) {
                head += type_name(p.type) + dims(p.type);
            } else {
                head += declarator(p.type, p.name);
            }
            head += attributes(p.attrs, opts_);
        }
        head += ")";
        head += attributes(f.attrs, opts_);
        if (!f.body) {
            line(0, head + ";");
            return;
        }
        line(0, head);
        block(*f.body, 0);
    }

    void block(const Stmt& s, int indent) {
        line(indent, "{");
        for (const Stmt& c : s.body) stmt(c, indent + 1);
        line(indent, "}");
    }

    // Statement used as the body of if/for/while.
    void sub(const Stmt& s, int indent) {
        if (s.kind == Stmt::Kind::Compound) {
            block(s, indent);
        } else {
            stmt(s, indent + 1);
        }
    }

    std::string simple(const Stmt& s) {
        if (s.kind == Stmt::Kind::Decl) return var_decls(s.decls);
        return print_expr(*s.expr);
    }

    void stmt(const Stmt& s, int indent) {
        switch (s.kind) {
            case Stmt::Kind::Compound: block(s, indent); break;
            case Stmt::Kind::Decl: line(indent, var_decls(s.decls) + ";"); break;
            case Stmt::Kind::Expr: line(indent, print_expr(*s.expr) + ";"); break;
            case Stmt::Kind::Empty: line(indent, ";"); break;
            case Stmt::Kind::Pragma:
                if (skip(*s.pragma)) {
                    // Keep an empty statement so a stripped pragma that was an
                    // if/for body still leaves a well-formed program.
                    if (in_sub_) line(indent, ";");
                } else {
                    line(indent, print_pragma(*s.pragma), true);
                }
                break;
            case Stmt::Kind::Return:
                line(indent, s.expr ? "return " + print_expr(*s.expr) + ";" : "return;");
                break;
            case Stmt::Kind::If: {
                line(indent, "if (" + print_expr(*s.expr) + ")");
                nested(s.body[0], indent);
                if (s.body.size() > 1) {
                    line(indent, "else");
                    nested(s.body[1], indent);
                }
                break;
            }
            case Stmt::Kind::While:
                line(indent, "while (" + print_expr(*s.expr) + ")");
                nested(s.body[0], indent);
                break;
            case Stmt::Kind::For: {
                std::string head = "for (";
                head += s.init.empty() ? "" : simple(s.init[0]);
                head += ";";
                if (s.expr) head += " " + print_expr(*s.expr);
                head += ";";
                if (s.step) head += " " + print_expr(*s.step);
                head += ")";
                line(indent, head);
                nested(s.body[0], indent);
                break;
            }
        }
    }

    void nested(const Stmt& s, int indent) {
        bool saved = in_sub_;
        in_sub_ = s.kind != Stmt::Kind::Compound;
        sub(s, indent);
        in_sub_ = saved;
    }

    const PrintOptions& opts_;
    std::string out_;
    bool in_sub_ = false;
};

}  // namespace

std::string print_expr(const Expr& e) {
    return expr(e);
}

std::string print_pragma(const PragmaNode& p) {
    switch (p.kind) {
        case PragmaKind::Register:
            return "#pragma starpu register " + p.var + (p.size ? " " + print_expr(*p.size) : "");
        case PragmaKind::Unregister: return "#pragma starpu unregister " + p.var;
        case PragmaKind::Acquire: return "#pragma starpu acquire " + p.var;
        case PragmaKind::Wait: return "#pragma starpu wait";
        case PragmaKind::OpenCL:
            return "#pragma starpu opencl " + p.impl + " " + quote(p.file) + " " + quote(p.kernel) + " " +
                   std::to_string(p.group_size);
        case PragmaKind::Unknown: return "#pragma " + p.raw;
    }
    return "";
}

std::string print(const TranslationUnit& tu, const PrintOptions& opts) {
    return Printer(opts).unit(tu);
}

}  // namespace taskc::frontend
