#include "taskc/frontend/ast.hpp"

namespace taskc::frontend {

std::string_view spelling(BaseType b) {
    switch (b) {
        case BaseType::Void: return "void";
        case BaseType::Char: return "char";
        case BaseType::SignedChar: return "signed char";
        case BaseType::UnsignedChar: return "unsigned char";
        case BaseType::Short: return "short";
        case BaseType::UnsignedShort: return "unsigned short";
        case BaseType::Int: return "int";
        case BaseType::UnsignedInt: return "unsigned int";
        case BaseType::Long: return "long";
        case BaseType::UnsignedLong: return "unsigned long";
        case BaseType::Float: return "float";
        case BaseType::Double: return "double";
        case BaseType::SizeT: return "size_t";
    }
    return "?";
}

TypeExpr TypeExpr::element() const {
    TypeExpr e = *this;
    if (!e.array_dims.empty()) {
        e.array_dims.clear();
    } else if (e.pointer_depth > 0) {
        --e.pointer_depth;
    }
    return e;
}

std::string TypeExpr::str() const {
    std::string out;
    if (global_qualified) out += "__global ";
    if (const_qualified) out += "const ";
    out += spelling(base);
    if (pointer_depth > 0) {
        out += ' ';
        out.append(static_cast<std::size_t>(pointer_depth), '*');
    }
    if (!array_dims.empty()) {
        out += ' ';
        for (const ArrayDim& d : array_dims) {
            out += '[';
            if (d.kind == ArrayDim::Kind::Constant) out += std::to_string(d.value);
            if (d.kind == ArrayDim::Kind::Symbol) out += d.symbol;
            out += ']';
        }
    }
    return out;
}

AttrKind attr_kind(std::string_view name) {
    if (name == "task") return AttrKind::Task;
    if (name == "task_implementation") return AttrKind::TaskImplementation;
    if (name == "output") return AttrKind::Output;
    if (name == "heap_allocated") return AttrKind::HeapAllocated;
    if (name == "registered") return AttrKind::Registered;
    return AttrKind::Unknown;
}

bool Attribute::operator==(const Attribute& other) const {
    return name == other.name && kind == other.kind && has_args == other.has_args && equal_tokens(raw, other.raw) &&
           loc == other.loc;
}

std::vector<std::vector<Token>> Attribute::args() const {
    std::vector<std::vector<Token>> out;
    if (raw.empty()) return out;
    out.emplace_back();
    int depth = 0;
    for (const Token& t : raw) {
        if (t.is_punct("(")) ++depth;
        if (t.is_punct(")")) --depth;
        if (depth == 0 && t.is_punct(",")) {
            out.emplace_back();
            continue;
        }
        out.back().push_back(t);
    }
    return out;
}

bool equal_tokens(const std::vector<Token>& a, const std::vector<Token>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].kind != b[i].kind || a[i].text != b[i].text) return false;
    return true;
}

bool PragmaNode::is_starpu() const {
    return kind != PragmaKind::Unknown || raw.rfind("starpu", 0) == 0;
}

bool VarDecl::has_attr(AttrKind k) const {
    for (const Attribute& a : attrs)
        if (a.kind == k) return true;
    return false;
}

bool ParamDecl::has_attr(AttrKind k) const {
    for (const Attribute& a : attrs)
        if (a.kind == k) return true;
    return false;
}

bool FunctionDecl::has_attr(AttrKind k) const {
    return find_attr(k) != nullptr;
}

const Attribute* FunctionDecl::find_attr(AttrKind k) const {
    for (const Attribute& a : attrs)
        if (a.kind == k) return &a;
    return nullptr;
}

const FunctionDecl* TranslationUnit::find_function(std::string_view name) const {
    const FunctionDecl* found = nullptr;
    for (const TopLevel& item : items) {
        if (item.kind != TopLevel::Kind::Function || item.function.name != name) continue;
        // Prefer the definition when there are several declarations.
        if (!found || (item.function.body && !found->body)) found = &item.function;
    }
    return found;
}

namespace {

template <typename Fn>
void visit_expr(Expr& e, Fn& fn) {
    fn(e.loc);
    for (Expr& o : e.operands) visit_expr(o, fn);
}

template <typename Fn>
void visit_attrs(std::vector<Attribute>& attrs, Fn& fn) {
    for (Attribute& a : attrs) {
        fn(a.loc);
        for (Token& t : a.raw) fn(t.loc);
    }
}

template <typename Fn>
void visit_var(VarDecl& v, Fn& fn) {
    fn(v.loc);
    visit_attrs(v.attrs, fn);
    if (v.init) visit_expr(*v.init, fn);
}

template <typename Fn>
void visit_pragma(PragmaNode& p, Fn& fn) {
    fn(p.loc);
    if (p.size) visit_expr(*p.size, fn);
}

template <typename Fn>
void visit_stmt(Stmt& s, Fn& fn) {
    fn(s.loc);
    for (Stmt& i : s.init) visit_stmt(i, fn);
    if (s.expr) visit_expr(*s.expr, fn);
    if (s.step) visit_expr(*s.step, fn);
    for (VarDecl& v : s.decls) visit_var(v, fn);
    if (s.pragma) visit_pragma(*s.pragma, fn);
    for (Stmt& b : s.body) visit_stmt(b, fn);
}

template <typename Fn>
void visit_unit(TranslationUnit& tu, Fn& fn) {
    for (TopLevel& item : tu.items) {
        switch (item.kind) {
            case TopLevel::Kind::Function: {
                FunctionDecl& f = item.function;
                fn(f.loc);
                for (ParamDecl& p : f.params) {
                    fn(p.loc);
                    visit_attrs(p.attrs, fn);
                }
                visit_attrs(f.attrs, fn);
                if (f.body) visit_stmt(*f.body, fn);
                break;
            }
            case TopLevel::Kind::Variables:
                for (VarDecl& v : item.variables) visit_var(v, fn);
                break;
            case TopLevel::Kind::Pragma:
                visit_pragma(item.pragma, fn);
                break;
        }
    }
}

}  // namespace

void for_each_location(TranslationUnit& tu, const std::function<void(SourceLocation&)>& fn) {
    visit_unit(tu, fn);
}

void for_each_location(const TranslationUnit& tu, const std::function<void(const SourceLocation&)>& fn) {
    auto adapter = [&fn](SourceLocation& loc) { fn(loc); };
    visit_unit(const_cast<TranslationUnit&>(tu), adapter);
}

bool structurally_equal(const TranslationUnit& a, const TranslationUnit& b) {
    TranslationUnit x = a;
    TranslationUnit y = b;
    auto clear = [](SourceLocation& loc) { loc = SourceLocation{}; };
    for_each_location(x, clear);
    for_each_location(y, clear);
    x.file.clear();
    y.file.clear();
    return x == y;
}

void walk_stmts(const Stmt& s, const std::function<void(const Stmt&)>& fn) {
    fn(s);
    for (const Stmt& i : s.init) walk_stmts(i, fn);
    for (const Stmt& b : s.body) walk_stmts(b, fn);
}

void walk_exprs(const Expr& e, const std::function<void(const Expr&)>& fn) {
    fn(e);
    for (const Expr& o : e.operands) walk_exprs(o, fn);
}

std::vector<const Expr*> own_exprs(const Stmt& s) {
    std::vector<const Expr*> out;
    if (s.expr) out.push_back(&*s.expr);
    if (s.step) out.push_back(&*s.step);
    for (const VarDecl& v : s.decls)
        if (v.init) out.push_back(&*v.init);
    if (s.pragma && s.pragma->size) out.push_back(&*s.pragma->size);
    return out;
}

}  // namespace taskc::frontend
