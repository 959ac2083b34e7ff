#include "taskc/lowering/lower.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "taskc/frontend/parser.hpp"
#include "taskc/sema/sema.hpp"

namespace taskc::lowering {

using frontend::BaseType;
using frontend::Expr;
using frontend::Stmt;
using frontend::TypeExpr;
using frontend::VarDecl;

LoweringError::LoweringError(SourceLocation where, std::string msg, std::string_view c)
    : std::runtime_error(where.str() + ": error: " + msg), loc(std::move(where)), message(std::move(msg)), code(c) {}

Diagnostic LoweringError::diagnostic() const {
    return Diagnostic{Severity::Error, loc, message, code};
}

namespace {

[[noreturn]] void fail(const SourceLocation& loc, const std::string& msg) {
    throw LoweringError(loc, msg);
}

/// C-level type of a lowered value. Pointers have depth 1 and may point to
/// arrays (`dims` are then the pointee's dimensions).
struct Ty {
    ValType vt = ValType::I32;  // scalar, or element type of pointers/arrays
    BaseType base = BaseType::Int;
    int depth = 0;
    bool array = false;
    std::vector<std::int64_t> dims;

    bool scalar() const { return depth == 0 && !array; }
    bool pointer() const { return depth > 0; }
    ValType reg_type() const { return scalar() ? vt : ValType::Ptr; }
    std::uint64_t stride() const {
        std::uint64_t n = width(vt);
        for (auto d : dims) n *= static_cast<std::uint64_t>(d);
        return n;
    }
};

struct Var {
    Ty ty;
    int reg = -1;
};

struct Value {
    int reg = -1;
    Ty ty;
};

struct LValue {
    bool mem = false;
    int reg = -1;    // variable register, or base pointer
    int index = -1;  // I64 index (mem)
    Ty ty;           // scalar or pointer
    std::string name;
};

enum class Mode { Cpu, Device, Main };

std::int64_t product(const std::vector<std::int64_t>& dims) {
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

class Lowerer {
public:
    Lowerer(DataModel dm, Mode mode, const sema::ProgramModel* model = nullptr)
        : dm_(std::move(dm)), mode_(mode), model_(model) {}

    // --- registers and emission -------------------------------------------

    int new_reg(ValType t) {
        regs_.push_back(t);
        return static_cast<int>(regs_.size()) - 1;
    }

    Op& emit(OpKind k, ValType t, const SourceLocation& loc) {
        Op op;
        op.kind = k;
        op.type = t;
        op.loc = loc;
        out_->push_back(std::move(op));
        return out_->back();
    }

    int constant(ValType t, std::uint64_t bits, const SourceLocation& loc) {
        int r = new_reg(t);
        Op& op = emit(OpKind::Const, t, loc);
        op.dst = r;
        op.imm = bits;
        return r;
    }

    int convert(int reg, ValType from, ValType to, const SourceLocation& loc) {
        if (from == to) return reg;
        int r = new_reg(to);
        Op& op = emit(OpKind::Convert, to, loc);
        op.src = from;
        op.a = reg;
        op.dst = r;
        return r;
    }

    /// Runs `fn` with emission redirected into a fresh list.
    std::vector<Op> capture(const std::function<void()>& fn) {
        std::vector<Op> ops;
        std::vector<Op>* saved = out_;
        out_ = &ops;
        try {
            fn();
        } catch (...) {
            out_ = saved;
            throw;
        }
        out_ = saved;
        return ops;
    }

    // --- types ----------------------------------------------------------------

    Ty scalar_ty(BaseType b) const {
        Ty t;
        t.base = b;
        t.vt = dm_.scalar(b);
        return t;
    }

    Ty from_type(const TypeExpr& te, const SourceLocation& loc, bool param) const {
        Ty t = scalar_ty(te.base);
        if (te.pointer_depth > 1) fail(loc, "pointer-to-pointer types are not supported");
        if (te.pointer_depth == 1) {
            t.depth = 1;
            if (!te.array_dims.empty()) fail(loc, "arrays of pointers are not supported");
            return t;
        }
        if (te.array_dims.empty()) {
            if (te.base == BaseType::Void) fail(loc, "variable of type 'void'");
            return t;
        }
        for (std::size_t i = param ? 1 : 0; i < te.array_dims.size(); ++i) {
            const auto& d = te.array_dims[i];
            if (d.kind != frontend::ArrayDim::Kind::Constant) fail(loc, "variable-length arrays are not supported");
            t.dims.push_back(d.value);
        }
        if (param) {
            t.depth = 1;
        } else {
            t.array = true;
        }
        return t;
    }

    static Ty decay(Ty t) {
        if (t.array) {
            t.array = false;
            t.depth = 1;
            t.dims.erase(t.dims.begin());
        }
        return t;
    }

    std::uint64_t size_of(const Ty& t) const {
        if (t.array) return t.stride();
        if (t.pointer()) return dm_.device ? 8 : static_cast<std::uint64_t>(dm_.cfg.pointer_width_bits / 8);
        return width(t.vt);
    }

    static ValType promote(ValType t) {
        if (is_integer(t) && width(t) < 4) return ValType::I32;
        return t;
    }

    /// Usual arithmetic conversions on value types.
    static ValType common(ValType a, ValType b) {
        if (a == ValType::F64 || b == ValType::F64) return ValType::F64;
        if (a == ValType::F32 || b == ValType::F32) return ValType::F32;
        a = promote(a);
        b = promote(b);
        if (a == b) return a;
        if (is_signed(a) == is_signed(b)) return width(a) >= width(b) ? a : b;
        ValType u = is_signed(a) ? b : a;
        ValType s = is_signed(a) ? a : b;
        return width(u) >= width(s) ? u : s;
    }

    Ty arith_ty(ValType vt) const {
        Ty t;
        t.vt = vt;
        switch (vt) {
            case ValType::F32: t.base = BaseType::Float; break;
            case ValType::F64: t.base = BaseType::Double; break;
            case ValType::I64: t.base = BaseType::Long; break;
            case ValType::U64: t.base = BaseType::UnsignedLong; break;
            case ValType::U32: t.base = BaseType::UnsignedInt; break;
            default: t.base = BaseType::Int; break;
        }
        return t;
    }

    // --- scopes ---------------------------------------------------------------

    void push_scope() {
        scopes_.emplace_back();
        cleanups_.emplace_back();
    }
    void pop_scope() {
        scopes_.pop_back();
        cleanups_.pop_back();
    }

    void declare(const std::string& name, Var v) { scopes_.back()[name] = std::move(v); }

    const Var* lookup(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) return &f->second;
        }
        return nullptr;
    }

    const Var& var(const std::string& name, const SourceLocation& loc) const {
        const Var* v = lookup(name);
        if (!v) {
            if (mode_ != Mode::Main && model_ == nullptr && is_global_name(name))
                fail(loc, "global variable '" + name + "' cannot be used in a task implementation");
            fail(loc, "'" + name + "' undeclared");
        }
        return *v;
    }

    bool is_global_name(const std::string& name) const {
        for (const auto& g : globals_)
            if (g == name) return true;
        return false;
    }

    // --- expressions ----------------------------------------------------------

    Value rvalue(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::IntLit: return int_literal(e);
            case Expr::Kind::FloatLit: {
                bool f = !e.text.empty() && (e.text.back() == 'f' || e.text.back() == 'F');
                if (f) {
                    Ty t = scalar_ty(BaseType::Float);
                    return {constant(t.vt, from_double(ValType::F32, std::strtof(e.text.c_str(), nullptr)), e.loc), t};
                }
                Ty t = scalar_ty(BaseType::Double);
                return {constant(t.vt, from_double(ValType::F64, e.float_value), e.loc), t};
            }
            case Expr::Kind::StringLit: fail(e.loc, "string literals are not supported");
            case Expr::Kind::Ident: {
                const Var& v = var(e.text, e.loc);
                return {v.reg, decay(v.ty)};
            }
            case Expr::Kind::Subscript:
            case Expr::Kind::Unary:
                if (e.kind == Expr::Kind::Unary && e.text != "*") return unary(e);
                return load(place(e), e.loc);
            case Expr::Kind::Postfix: return incdec(e, false);
            case Expr::Kind::Binary: return binary(e);
            case Expr::Kind::Assign: return assign(e);
            case Expr::Kind::Call: return call(e);
            case Expr::Kind::Cast: return cast(e);
            case Expr::Kind::SizeofExpr: return sizeof_value(size_of(peek_type(e.operands[0])), e.loc);
            case Expr::Kind::SizeofType: {
                Ty t = from_type(e.type, e.loc, false);
                return sizeof_value(size_of(t), e.loc);
            }
        }
        fail(e.loc, "unsupported expression");
    }

    Value sizeof_value(std::uint64_t n, const SourceLocation& loc) {
        Ty t = scalar_ty(BaseType::SizeT);
        return {constant(t.vt, normalize(t.vt, n), loc), t};
    }

    Value int_literal(const Expr& e) {
        std::string suffix;
        for (auto it = e.text.rbegin(); it != e.text.rend() && (*it == 'u' || *it == 'U' || *it == 'l' || *it == 'L'); ++it)
            suffix.insert(suffix.begin(), static_cast<char>(std::tolower(*it)));
        bool is_unsigned = suffix.find('u') != std::string::npos;
        bool is_long = suffix.find('l') != std::string::npos;
        bool decimal = !(e.text.size() > 1 && e.text[0] == '0');
        auto v = static_cast<std::uint64_t>(e.int_value);
        std::vector<BaseType> candidates;
        if (!is_long && !is_unsigned) candidates = {BaseType::Int};
        if (!is_long && (is_unsigned || !decimal)) candidates.push_back(BaseType::UnsignedInt);
        if (!is_unsigned) candidates.push_back(BaseType::Long);
        if (is_unsigned || !decimal) candidates.push_back(BaseType::UnsignedLong);
        BaseType chosen = BaseType::UnsignedLong;
        for (BaseType b : candidates) {
            ValType vt = dm_.scalar(b);
            std::uint64_t max = is_signed(vt) ? (std::uint64_t{1} << (width(vt) * 8 - 1)) - 1
                                              : (width(vt) == 8 ? ~std::uint64_t{0} : (std::uint64_t{1} << (width(vt) * 8)) - 1);
            if (v <= max) {
                chosen = b;
                break;
            }
        }
        Ty t = scalar_ty(chosen);
        return {constant(t.vt, normalize(t.vt, v), e.loc), t};
    }

    /// Type of an expression without decaying arrays (for sizeof).
    Ty peek_type(const Expr& e) {
        if (e.kind == Expr::Kind::Ident) return var(e.text, e.loc).ty;
        if (e.kind == Expr::Kind::Subscript || (e.kind == Expr::Kind::Unary && e.text == "*")) {
            Ty base = decay(peek_type(e.operands[0]));
            if (e.kind == Expr::Kind::Subscript && !base.pointer()) base = decay(peek_type(e.operands[1]));
            if (!base.pointer()) fail(e.loc, "subscripted value is not an array or pointer");
            if (!base.dims.empty()) {
                base.depth = 0;
                base.array = true;
            } else {
                base.depth = 0;
            }
            return base;
        }
        std::size_t mark = regs_.size();
        Value v;
        capture([&] { v = rvalue(e); });
        regs_.resize(mark);
        return v.ty;
    }

    /// Address computation for subscript and dereference. Yields either a
    /// memory lvalue (scalar element) or, for partially indexed arrays, an
    /// address value flagged by `ty.array`.
    LValue place(const Expr& e) {
        Value base;
        Value index;
        if (e.kind == Expr::Kind::Subscript) {
            base = rvalue(e.operands[0]);
            index = rvalue(e.operands[1]);
            if (!base.ty.pointer() && index.ty.pointer()) std::swap(base, index);
        } else {
            base = rvalue(e.operands[0]);
            Ty t = scalar_ty(BaseType::Long);
            t.vt = ValType::I64;
            index = {constant(ValType::I64, 0, e.loc), t};
        }
        if (!base.ty.pointer()) fail(e.loc, "subscripted value is not an array or pointer");
        if (!index.ty.scalar() || !is_integer(index.ty.vt)) fail(e.loc, "array subscript is not an integer");
        if (base.ty.base == BaseType::Void && base.ty.dims.empty()) fail(e.loc, "dereferencing a 'void *' pointer");
        int idx = convert(index.reg, index.ty.vt, ValType::I64, e.loc);
        LValue lv;
        lv.mem = true;
        lv.reg = base.reg;
        lv.index = idx;
        lv.ty = base.ty;
        lv.ty.depth = 0;
        if (!base.ty.dims.empty()) lv.ty.array = true;
        return lv;
    }

    Value load(const LValue& lv, const SourceLocation& loc) {
        if (!lv.mem) return {lv.reg, lv.ty};
        if (lv.ty.array) {
            // Partially indexed array: the address of the selected row.
            int r = new_reg(ValType::Ptr);
            Op& op = emit(OpKind::PtrAdd, ValType::Ptr, loc);
            op.dst = r;
            op.a = lv.reg;
            op.b = lv.index;
            op.elem_size = lv.ty.stride();
            return {r, decay(lv.ty)};
        }
        int r = new_reg(lv.ty.vt);
        Op& op = emit(OpKind::Load, lv.ty.vt, loc);
        op.dst = r;
        op.a = lv.reg;
        op.b = lv.index;
        op.elem_size = width(lv.ty.vt);
        return {r, lv.ty};
    }

    LValue lvalue(const Expr& e) {
        if (e.kind == Expr::Kind::Ident) {
            const Var& v = var(e.text, e.loc);
            if (v.ty.array) fail(e.loc, "array '" + e.text + "' is not assignable");
            LValue lv;
            lv.reg = v.reg;
            lv.ty = v.ty;
            lv.name = e.text;
            return lv;
        }
        if (e.kind == Expr::Kind::Subscript || (e.kind == Expr::Kind::Unary && e.text == "*")) {
            LValue lv = place(e);
            if (lv.ty.array) fail(e.loc, "array is not assignable");
            return lv;
        }
        fail(e.loc, "expression is not assignable");
    }

    void store(const LValue& lv, const Value& v, const SourceLocation& loc) {
        int src = coerce(v, lv.ty, loc);
        if (!lv.mem) {
            Op& op = emit(OpKind::Mov, lv.ty.reg_type(), loc);
            op.dst = lv.reg;
            op.a = src;
            return;
        }
        Op& op = emit(OpKind::Store, lv.ty.vt, loc);
        op.a = lv.reg;
        op.b = lv.index;
        op.c = src;
        op.elem_size = width(lv.ty.vt);
    }

    /// Assignment conversion of `v` to type `to`.
    int coerce(const Value& v, const Ty& to, const SourceLocation& loc) {
        if (to.pointer()) {
            if (!v.ty.pointer()) fail(loc, "cannot convert a non-pointer value to a pointer");
            return v.reg;
        }
        if (!v.ty.scalar()) fail(loc, "cannot convert a pointer to '" + std::string(frontend::spelling(to.base)) + "'");
        return convert(v.reg, v.ty.vt, to.vt, loc);
    }

    Value arith(const std::string& op, const Value& l, const Value& r, const SourceLocation& loc) {
        if (l.ty.pointer() || r.ty.pointer()) return pointer_arith(op, l, r, loc);
        ValType t = common(l.ty.vt, r.ty.vt);
        if (op == "%" && is_float(t)) fail(loc, "invalid operands to binary %");
        int a = convert(l.reg, l.ty.vt, t, loc);
        int b = convert(r.reg, r.ty.vt, t, loc);
        int d = new_reg(t);
        Op& o = emit(OpKind::Bin, t, loc);
        o.op = op;
        o.a = a;
        o.b = b;
        o.dst = d;
        return {d, arith_ty(t)};
    }

    Value pointer_arith(const std::string& op, Value l, Value r, const SourceLocation& loc) {
        if (op == "-" && l.ty.pointer() && r.ty.pointer()) {
            int d = new_reg(ValType::I64);
            Op& o = emit(OpKind::PtrDiff, ValType::I64, loc);
            o.a = l.reg;
            o.b = r.reg;
            o.dst = d;
            o.elem_size = l.ty.stride();
            Ty t = scalar_ty(BaseType::Long);
            t.vt = ValType::I64;
            return {d, t};
        }
        if (op == "+" && !l.ty.pointer()) std::swap(l, r);
        if ((op != "+" && op != "-") || !l.ty.pointer() || r.ty.pointer() || !is_integer(r.ty.vt))
            fail(loc, "invalid operands to binary " + op);
        int idx = convert(r.reg, r.ty.vt, ValType::I64, loc);
        if (op == "-") {
            int n = new_reg(ValType::I64);
            Op& u = emit(OpKind::Unary, ValType::I64, loc);
            u.op = "-";
            u.a = idx;
            u.dst = n;
            idx = n;
        }
        int d = new_reg(ValType::Ptr);
        Op& o = emit(OpKind::PtrAdd, ValType::Ptr, loc);
        o.a = l.reg;
        o.b = idx;
        o.dst = d;
        o.elem_size = l.ty.stride();
        return {d, l.ty};
    }

    Value compare(const std::string& op, const Value& l, const Value& r, const SourceLocation& loc) {
        ValType t;
        int a, b;
        if (l.ty.pointer() || r.ty.pointer()) {
            t = ValType::Ptr;
            a = l.ty.pointer() ? l.reg : convert(l.reg, l.ty.vt, ValType::U64, loc);
            b = r.ty.pointer() ? r.reg : convert(r.reg, r.ty.vt, ValType::U64, loc);
        } else {
            t = common(l.ty.vt, r.ty.vt);
            a = convert(l.reg, l.ty.vt, t, loc);
            b = convert(r.reg, r.ty.vt, t, loc);
        }
        int d = new_reg(ValType::I32);
        Op& o = emit(OpKind::Cmp, t, loc);
        o.op = op;
        o.a = a;
        o.b = b;
        o.dst = d;
        return {d, scalar_ty(BaseType::Int)};
    }

    /// 0/1 truth value of `v` into register `dst`.
    void truth_into(const Value& v, int dst, const SourceLocation& loc) {
        ValType t = v.ty.reg_type();
        int z = constant(t, 0, loc);
        Op& o = emit(OpKind::Cmp, t, loc);
        o.op = "!=";
        o.a = v.reg;
        o.b = z;
        o.dst = dst;
    }

    Value binary(const Expr& e) {
        const std::string& op = e.text;
        if (op == "&&" || op == "||") {
            int d = new_reg(ValType::I32);
            Value l = rvalue(e.operands[0]);
            std::vector<Op> rhs = capture([&] { truth_into(rvalue(e.operands[1]), d, e.loc); });
            std::vector<Op> fixed = capture([&] {
                Op& c = emit(OpKind::Const, ValType::I32, e.loc);
                c.dst = d;
                c.imm = op == "||" ? 1 : 0;
            });
            Op& br = emit(OpKind::Branch, l.ty.reg_type(), e.loc);
            br.a = l.reg;
            if (op == "&&") {
                br.body = std::move(rhs);
                br.orelse = std::move(fixed);
            } else {
                br.body = std::move(fixed);
                br.orelse = std::move(rhs);
            }
            return {d, scalar_ty(BaseType::Int)};
        }
        Value l = rvalue(e.operands[0]);
        Value r = rvalue(e.operands[1]);
        if (op == "==" || op == "!=" || op == "<" || op == ">" || op == "<=" || op == ">=") return compare(op, l, r, e.loc);
        if (op == "+" || op == "-" || op == "*" || op == "/" || op == "%") return arith(op, l, r, e.loc);
        fail(e.loc, "unsupported operator '" + op + "'");
    }

    Value unary(const Expr& e) {
        const std::string& op = e.text;
        if (op == "++" || op == "--") return incdec(e, true);
        if (op == "&") {
            const Expr& o = e.operands[0];
            if (o.kind == Expr::Kind::Subscript || (o.kind == Expr::Kind::Unary && o.text == "*")) {
                LValue lv = place(o);
                int d = new_reg(ValType::Ptr);
                Op& p = emit(OpKind::PtrAdd, ValType::Ptr, e.loc);
                p.a = lv.reg;
                p.b = lv.index;
                p.dst = d;
                Ty t = lv.ty;
                t.array = false;
                t.depth = 1;
                p.elem_size = t.stride();
                return {d, t};
            }
            fail(e.loc, "taking the address of this expression is not supported");
        }
        Value v = rvalue(e.operands[0]);
        if (!v.ty.scalar()) {
            if (op == "!") {
                int d = new_reg(ValType::I32);
                Op& u = emit(OpKind::Unary, ValType::Ptr, e.loc);
                u.op = "!";
                u.a = v.reg;
                u.dst = d;
                return {d, scalar_ty(BaseType::Int)};
            }
            fail(e.loc, "invalid operand to unary " + op);
        }
        if (op == "!") {
            int d = new_reg(ValType::I32);
            Op& u = emit(OpKind::Unary, v.ty.vt, e.loc);
            u.op = "!";
            u.a = v.reg;
            u.dst = d;
            return {d, scalar_ty(BaseType::Int)};
        }
        ValType t = promote(v.ty.vt);
        if (op == "~" && !is_integer(t)) fail(e.loc, "invalid operand to unary ~");
        int a = convert(v.reg, v.ty.vt, t, e.loc);
        if (op == "+") return {a, arith_ty(t)};
        int d = new_reg(t);
        Op& u = emit(OpKind::Unary, t, e.loc);
        u.op = op;
        u.a = a;
        u.dst = d;
        return {d, arith_ty(t)};
    }

    Value incdec(const Expr& e, bool prefix) {
        LValue lv = lvalue(e.operands[0]);
        Value old = load(lv, e.loc);
        if (!prefix) {
            int copy = new_reg(old.ty.reg_type());
            Op& m = emit(OpKind::Mov, old.ty.reg_type(), e.loc);
            m.a = old.reg;
            m.dst = copy;
            old.reg = copy;
        }
        std::string op = e.text == "++" ? "+" : "-";
        Ty one_ty = scalar_ty(BaseType::Int);
        Value one{constant(ValType::I32, 1, e.loc), one_ty};
        Value nv = arith(op, old, one, e.loc);
        store(lv, nv, e.loc);
        if (prefix) return {coerce(nv, lv.ty, e.loc), lv.ty};
        return old;
    }

    Value assign(const Expr& e) {
        LValue lv = lvalue(e.operands[0]);
        Value rhs;
        if (e.text == "=") {
            rhs = rvalue(e.operands[1]);
        } else {
            Value cur = load(lv, e.loc);
            Value r = rvalue(e.operands[1]);
            rhs = arith(e.text.substr(0, e.text.size() - 1), cur, r, e.loc);
        }
        int v = coerce(rhs, lv.ty, e.loc);
        Value res{v, lv.ty};
        store(lv, res, e.loc);
        return res;
    }

    Value cast(const Expr& e) {
        Value v = rvalue(e.operands[0]);
        Ty to = from_type(e.type, e.loc, false);
        if (to.array) fail(e.loc, "cast to an array type");
        if (to.pointer()) {
            if (!v.ty.pointer()) fail(e.loc, "cast from integer to pointer is not supported");
            return {v.reg, to};
        }
        if (e.type.base == BaseType::Void) return v;
        if (!v.ty.scalar()) fail(e.loc, "cast from pointer to integer is not supported");
        return {convert(v.reg, v.ty.vt, to.vt, e.loc), to};
    }

    Value call(const Expr& e) {
        const std::string& f = e.text;
        if (f == "get_global_id" && mode_ == Mode::Device) {
            if (e.operands.size() != 1) fail(e.loc, "get_global_id takes one argument");
            Value dim = rvalue(e.operands[0]);
            if (!dim.ty.scalar() || !is_integer(dim.ty.vt)) fail(e.loc, "get_global_id dimension must be an integer");
            Ty t = scalar_ty(BaseType::SizeT);
            int d = new_reg(t.vt);
            Op& op = emit(OpKind::GlobalId, t.vt, e.loc);
            op.a = dim.reg;
            op.dst = d;
            return {d, t};
        }
        if (f == "get_global_id") fail(e.loc, "get_global_id is only available in OpenCL kernels");
        if (mode_ == Mode::Main && f == "malloc") {
            if (e.operands.size() != 1) fail(e.loc, "malloc takes one argument");
            Value n = rvalue(e.operands[0]);
            if (!n.ty.scalar() || !is_integer(n.ty.vt)) fail(e.loc, "malloc size must be an integer");
            int a = convert(n.reg, n.ty.vt, ValType::U64, e.loc);
            int d = new_reg(ValType::Ptr);
            Op& op = emit(OpKind::Malloc, ValType::Ptr, e.loc);
            op.a = a;
            op.dst = d;
            Ty t = scalar_ty(BaseType::Void);
            t.depth = 1;
            return {d, t};
        }
        if (mode_ == Mode::Main && f == "free") {
            if (e.operands.size() != 1) fail(e.loc, "free takes one argument");
            Value p = rvalue(e.operands[0]);
            if (!p.ty.pointer()) fail(e.loc, "free expects a pointer");
            Op& op = emit(OpKind::Free, ValType::Ptr, e.loc);
            op.a = p.reg;
            return {p.reg, scalar_ty(BaseType::Int)};
        }
        if (model_ && model_->find_task(f)) fail(e.loc, "task '" + f + "' must be invoked as a standalone statement");
        fail(e.loc, "call to function '" + f + "' cannot be lowered");
    }

    // --- statements -----------------------------------------------------------

    void decl(const VarDecl& v) {
        if (v.storage == frontend::StorageClass::Static && mode_ != Mode::Main)
            fail(v.loc, "static variables are not supported in task implementations");
        if (v.storage == frontend::StorageClass::Extern) fail(v.loc, "block-scope extern declarations are not supported");
        Ty t = from_type(v.type, v.loc, false);
        if (t.array) {
            if (v.init) fail(v.loc, "array initializers are not supported");
            int r = new_reg(ValType::Ptr);
            Op& op = emit(OpKind::Alloca, ValType::Ptr, v.loc);
            op.dst = r;
            op.imm = t.stride();
            op.op = v.name;
            declare(v.name, {t, r});
            return;
        }
        int r = new_reg(t.reg_type());
        if (v.init) {
            Value init = rvalue(*v.init);
            int src = coerce(init, t, v.loc);
            Op& op = emit(OpKind::Mov, t.reg_type(), v.loc);
            op.a = src;
            op.dst = r;
        } else {
            Op& op = emit(OpKind::Const, t.reg_type(), v.loc);
            op.dst = r;
        }
        declare(v.name, {t, r});
    }

    Value condition(const Expr& e) {
        Value v = rvalue(e);
        return v;
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
            case Stmt::Kind::Empty: break;
            case Stmt::Kind::Compound:
                push_scope();
                for (const Stmt& c : s.body) stmt(c);
                pop_scope();
                break;
            case Stmt::Kind::Decl:
                for (const VarDecl& v : s.decls) decl(v);
                break;
            case Stmt::Kind::Expr: rvalue(*s.expr); break;
            case Stmt::Kind::If: {
                Value c = condition(*s.expr);
                std::vector<Op> then_ops = capture([&] { sub_stmt(s.body[0]); });
                std::vector<Op> else_ops;
                if (s.body.size() > 1) else_ops = capture([&] { sub_stmt(s.body[1]); });
                Op& br = emit(OpKind::Branch, c.ty.reg_type(), s.loc);
                br.a = c.reg;
                br.body = std::move(then_ops);
                br.orelse = std::move(else_ops);
                break;
            }
            case Stmt::Kind::While: {
                Value c;
                std::vector<Op> cond = capture([&] { c = condition(*s.expr); });
                std::vector<Op> body = capture([&] { sub_stmt(s.body[0]); });
                Op& lp = emit(OpKind::Loop, c.ty.reg_type(), s.loc);
                lp.a = c.reg;
                lp.cond = std::move(cond);
                lp.body = std::move(body);
                break;
            }
            case Stmt::Kind::For: {
                push_scope();
                for (const Stmt& i : s.init) stmt(i);
                Value c;
                std::vector<Op> cond;
                if (s.expr) cond = capture([&] { c = condition(*s.expr); });
                std::vector<Op> body = capture([&] { sub_stmt(s.body[0]); });
                std::vector<Op> step;
                if (s.step) step = capture([&] { rvalue(*s.step); });
                Op& lp = emit(OpKind::Loop, s.expr ? c.ty.reg_type() : ValType::I32, s.loc);
                lp.a = s.expr ? c.reg : -1;
                lp.cond = std::move(cond);
                lp.body = std::move(body);
                lp.step = std::move(step);
                pop_scope();
                break;
            }
            case Stmt::Kind::Return:
                if (s.expr) rvalue(*s.expr);
                emit(OpKind::Ret, ValType::I32, s.loc);
                break;
            case Stmt::Kind::Pragma:
                if (s.pragma->kind == frontend::PragmaKind::Unknown) break;
                fail(s.loc, "starpu pragmas are only supported in main");
        }
    }

    void sub_stmt(const Stmt& s) {
        push_scope();
        stmt(s);
        pop_scope();
    }

    // --- functions ------------------------------------------------------------

    IrFunction function(const std::string& name, const std::vector<frontend::ParamDecl>& params, const Stmt& body) {
        IrFunction fn;
        fn.name = name;
        fn.device = mode_ == Mode::Device;
        std::vector<Op> ops;
        out_ = &ops;
        push_scope();
        for (const auto& p : params) {
            Ty t = from_type(p.type, p.loc, true);
            IrParam ip;
            ip.name = p.name;
            ip.buffer = t.pointer();
            ip.type = t.reg_type();
            if (ip.buffer) {
                if (t.base == BaseType::Void) fail(p.loc, "buffer parameter of type 'void *'");
                ip.elem = t.vt;
                ip.elem_size = width(t.vt);
            }
            ip.reg = new_reg(ip.type);
            fn.params.push_back(ip);
            declare(p.name, {t, ip.reg});
        }
        stmt(body);
        pop_scope();
        fn.regs = regs_;
        fn.ops = std::move(ops);
        number_ops(fn.ops);
        out_ = nullptr;
        return fn;
    }

    // --- main -----------------------------------------------------------------

    bool is_task_call(const Stmt& s) const {
        return s.kind == Stmt::Kind::Expr && s.expr->kind == Expr::Kind::Call && model_->find_task(s.expr->text);
    }

    bool host_effect(const Stmt& s) const {
        bool found = false;
        frontend::walk_stmts(s, [&](const Stmt& x) {
            if (x.kind == Stmt::Kind::Return || is_task_call(x)) found = true;
            if (x.kind == Stmt::Kind::Pragma && x.pragma->kind != frontend::PragmaKind::Unknown) found = true;
            if (x.kind == Stmt::Kind::Decl)
                for (const auto& v : x.decls)
                    if (model_->scoped_var_at(v.loc)) found = true;
        });
        return found;
    }

    void flush() {
        if (fragment_.empty()) return;
        MainOp m;
        m.kind = MainOp::Kind::Plain;
        m.loc = fragment_.front().loc;
        m.ops = std::move(fragment_);
        fragment_.clear();
        mout_->push_back(std::move(m));
    }

    void push_main(MainOp m) {
        flush();
        mout_->push_back(std::move(m));
    }

    std::vector<MainOp> capture_main(const std::function<void()>& fn) {
        flush();
        std::vector<MainOp> ops;
        std::vector<MainOp>* saved = mout_;
        mout_ = &ops;
        fn();
        flush();
        mout_ = saved;
        return ops;
    }

    std::vector<CleanupItem> frame_cleanup(std::size_t frame) const {
        const auto& items = cleanups_[frame];
        return {items.rbegin(), items.rend()};
    }

    void end_main_scope(const SourceLocation& loc) {
        if (!cleanups_.back().empty()) {
            MainOp m;
            m.kind = MainOp::Kind::ScopeEndCleanup;
            m.cleanup = frame_cleanup(cleanups_.size() - 1);
            m.loc = loc;
            push_main(std::move(m));
        }
        pop_scope();
    }

    int pointer_reg(const std::string& name, const SourceLocation& loc) {
        const Var& v = var(name, loc);
        if (v.ty.scalar()) fail(loc, "'" + name + "' is not an array or pointer");
        return v.reg;
    }

    void main_pragma(const frontend::PragmaNode& p, const SourceLocation& loc) {
        using frontend::PragmaKind;
        MainOp m;
        m.loc = p.loc;
        switch (p.kind) {
            case PragmaKind::Wait: m.kind = MainOp::Kind::Wait; break;
            case PragmaKind::Acquire:
            case PragmaKind::Unregister:
                m.kind = p.kind == PragmaKind::Acquire ? MainOp::Kind::Acquire : MainOp::Kind::Unregister;
                m.var = p.var;
                m.reg = pointer_reg(p.var, p.loc);
                break;
            case PragmaKind::Register: {
                const sema::RegistrationSite* site = model_->registration_at(p.loc);
                if (!site) fail(p.loc, "unresolved registration of '" + p.var + "'");
                m.kind = MainOp::Kind::Register;
                m.var = p.var;
                m.reg = pointer_reg(p.var, p.loc);
                out_ = &fragment_;
                if (site->count_expr) {
                    Value n = rvalue(*site->count_expr);
                    if (!n.ty.scalar() || !is_integer(n.ty.vt)) fail(p.loc, "registration size must be an integer");
                    m.count_reg = convert(n.reg, n.ty.vt, ValType::U64, p.loc);
                } else {
                    m.count_reg = constant(ValType::U64, static_cast<std::uint64_t>(site->static_count.value_or(0)), p.loc);
                }
                m.type = dm_.scalar(site->elem_type.base);
                if (site->elem_type.pointer_depth > 0) fail(p.loc, "registering an array of pointers is not supported");
                m.elem_size = width(m.type);
                break;
            }
            default: fail(loc, "unsupported pragma");
        }
        push_main(std::move(m));
    }

    void main_decl(const VarDecl& v) {
        const sema::ScopedVarSite* site = model_->scoped_var_at(v.loc);
        if (!site) {
            out_ = &fragment_;
            decl(v);
            return;
        }
        Ty t = from_type(v.type, v.loc, false);
        int r = new_reg(ValType::Ptr);
        MainOp a;
        a.kind = MainOp::Kind::Alloc;
        a.var = v.name;
        a.reg = r;
        a.shape = t.dims;
        a.elem_size = width(t.vt);
        a.bytes = t.stride();
        a.pinned = site->heap_allocated;
        a.loc = v.loc;
        push_main(std::move(a));
        declare(v.name, {t, r});
        if (site->registered) {
            MainOp g;
            g.kind = MainOp::Kind::Register;
            g.var = v.name;
            g.reg = r;
            out_ = &fragment_;
            g.count_reg = constant(ValType::U64, static_cast<std::uint64_t>(product(t.dims)), v.loc);
            g.type = t.vt;
            g.elem_size = width(t.vt);
            g.loc = v.loc;
            push_main(std::move(g));
        }
        cleanups_.back().push_back({v.name, r, site->registered, true});
    }

    void main_call(const Expr& call) {
        const sema::TaskDecl* task = model_->find_task(call.text);
        if (call.operands.size() != task->params.size())
            fail(call.loc, "wrong number of arguments to task '" + task->name + "'");
        MainOp m;
        m.kind = MainOp::Kind::CallTask;
        m.task = task->name;
        m.loc = call.loc;
        out_ = &fragment_;
        for (std::size_t i = 0; i < task->params.size(); ++i) {
            const auto& param = task->params[i];
            Value v = rvalue(call.operands[i]);
            if (param.mode != sema::AccessMode::ScalarValue) {
                if (!v.ty.pointer()) fail(call.operands[i].loc, "argument " + std::to_string(i + 1) + " of task '" + task->name + "' must be a pointer");
                m.args.push_back(v.reg);
            } else {
                if (!v.ty.scalar()) fail(call.operands[i].loc, "argument " + std::to_string(i + 1) + " of task '" + task->name + "' must be a scalar");
                m.args.push_back(convert(v.reg, v.ty.vt, dm_.scalar(param.type.base), call.operands[i].loc));
            }
        }
        push_main(std::move(m));
    }

    void main_stmt(const Stmt& s) {
        out_ = &fragment_;
        if (!host_effect(s)) {
            stmt(s);
            return;
        }
        switch (s.kind) {
            case Stmt::Kind::Compound: {
                push_scope();
                for (const Stmt& c : s.body) main_stmt(c);
                end_main_scope(s.loc);
                break;
            }
            case Stmt::Kind::Decl:
                for (const VarDecl& v : s.decls) main_decl(v);
                break;
            case Stmt::Kind::Expr: main_call(*s.expr); break;
            case Stmt::Kind::Pragma: main_pragma(*s.pragma, s.loc); break;
            case Stmt::Kind::Return: {
                if (s.expr) rvalue(*s.expr);
                MainOp m;
                m.kind = MainOp::Kind::Return;
                m.loc = s.loc;
                for (std::size_t f = cleanups_.size(); f-- > 0;) {
                    auto items = frame_cleanup(f);
                    m.cleanup.insert(m.cleanup.end(), items.begin(), items.end());
                }
                push_main(std::move(m));
                break;
            }
            case Stmt::Kind::If: {
                Value c = condition(*s.expr);
                MainOp m;
                m.kind = MainOp::Kind::HostBranch;
                m.reg = c.reg;
                m.type = c.ty.reg_type();
                m.loc = s.loc;
                m.body = capture_main([&] { main_sub(s.body[0]); });
                if (s.body.size() > 1) m.orelse = capture_main([&] { main_sub(s.body[1]); });
                push_main(std::move(m));
                break;
            }
            case Stmt::Kind::While:
            case Stmt::Kind::For: {
                push_scope();
                if (s.kind == Stmt::Kind::For)
                    for (const Stmt& i : s.init) main_stmt(i);
                flush();
                MainOp m;
                m.kind = MainOp::Kind::HostLoop;
                m.loc = s.loc;
                m.type = ValType::I32;
                if (s.expr) {
                    Value c;
                    m.ops = capture([&] { c = condition(*s.expr); });
                    m.reg = c.reg;
                    m.type = c.ty.reg_type();
                }
                m.body = capture_main([&] { main_sub(s.body[0]); });
                if (s.step) m.step = capture([&] { rvalue(*s.step); });
                push_main(std::move(m));
                end_main_scope(s.loc);
                break;
            }
            case Stmt::Kind::Empty: break;
        }
        out_ = &fragment_;
    }

    void main_sub(const Stmt& s) {
        push_scope();
        main_stmt(s);
        end_main_scope(s.loc);
    }

    MainLowering main_function(const frontend::FunctionDecl& fn) {
        MainLowering res;
        mout_ = &res.ops;
        out_ = &fragment_;
        push_scope();
        for (const VarDecl& g : model_->globals) {
            if (g.storage == frontend::StorageClass::Extern) continue;
            decl(g);
        }
        if (!fn.params.empty()) fail(fn.loc, "'main' must not take parameters");
        main_stmt(*fn.body);
        flush();
        pop_scope();
        res.regs = regs_;
        int next = 0;
        std::function<void(std::vector<MainOp>&)> number = [&](std::vector<MainOp>& ops) {
            for (MainOp& m : ops) {
                number_ops(m.ops, next);
                next += static_cast<int>(count_ops(m.ops));
                number(m.body);
                number_ops(m.step, next);
                next += static_cast<int>(count_ops(m.step));
                number(m.orelse);
            }
        };
        number(res.ops);
        return res;
    }

    std::vector<std::string> globals_;

private:
    DataModel dm_;
    Mode mode_;
    const sema::ProgramModel* model_;
    std::vector<ValType> regs_;
    std::vector<Op>* out_ = nullptr;
    std::vector<std::map<std::string, Var>> scopes_;
    std::vector<std::vector<CleanupItem>> cleanups_;
    std::vector<Op> fragment_;
    std::vector<MainOp>* mout_ = nullptr;
};

std::string read_file(const std::filesystem::path& p, bool& ok) {
    std::ifstream in(p, std::ios::binary);
    ok = static_cast<bool>(in);
    if (!ok) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Kernel parameter types as buffer/scalar for compatibility checks.
TypeExpr compat_type(TypeExpr t) {
    t = sema::normalize_param_type(t);
    t.const_qualified = false;
    t.global_qualified = false;
    for (auto& d : t.array_dims) d = frontend::ArrayDim{};
    return t;
}

}  // namespace

IrFunction lower_kernel_body(const std::string& name, const std::vector<frontend::ParamDecl>& params,
                             const frontend::Stmt& body, const DataModel& dm) {
    Lowerer l(dm, dm.device ? Mode::Device : Mode::Cpu);
    return l.function(name, params, body);
}

std::vector<ParamInfo> task_params(const sema::TaskDecl& task, const sema::TargetConfig& cfg) {
    DataModel dm = DataModel::host(cfg);
    std::vector<ParamInfo> out;
    for (const auto& p : task.params) {
        ParamInfo info;
        info.name = p.name;
        info.mode = p.mode;
        info.buffer = p.mode != sema::AccessMode::ScalarValue;
        if (info.buffer) {
            info.type = ValType::Ptr;
            info.elem = dm.scalar(p.type.base);
            info.elem_size = width(info.elem);
        } else {
            info.type = dm.scalar(p.type.base);
        }
        out.push_back(std::move(info));
    }
    return out;
}

TaskBodyPlan lower_task_body(const sema::TaskDecl& task) {
    TaskBodyPlan plan;
    for (std::size_t i = 0; i < task.params.size(); ++i)
        if (task.params[i].mode != sema::AccessMode::ScalarValue) plan.lookups.push_back({i, kUnregisteredPointer});
    plan.codelet = task.name;
    plan.submit_error = "failed to insert task '" + task.name + "'";
    return plan;
}

WrapperPlan lower_wrapper(const sema::TaskDecl& task, const sema::TargetConfig& cfg) {
    WrapperPlan plan;
    std::size_t offset = 0;
    auto params = task_params(task, cfg);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].buffer) {
            plan.buffer_slots.push_back(i);
        } else {
            std::size_t w = width(params[i].type);
            plan.scalar_pack.push_back({i, params[i].type, w, offset});
            offset += w;
        }
    }
    return plan;
}

EmbeddedKernel embed_kernel(const sema::TaskImpl& impl, const sema::TaskDecl& task, const std::string& base_dir) {
    const sema::KernelBinding& kb = *impl.kernel_binding;
    std::filesystem::path path(kb.file);
    if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
    bool ok = false;
    std::string text = read_file(path, ok);
    if (!ok) throw LoweringError(kb.loc, "kernel file '" + kb.file + "' not found", diag::KernelFile);

    frontend::TranslationUnit tu;
    try {
        tu = frontend::parse_source(text, kb.file);
    } catch (const frontend::ParseError& e) {
        throw LoweringError(e.location, e.message, diag::KernelFile);
    } catch (const frontend::LexError& e) {
        throw LoweringError(e.location, e.message, diag::KernelFile);
    }
    const frontend::FunctionDecl* fn = nullptr;
    for (const auto& item : tu.items)
        if (item.kind == frontend::TopLevel::Kind::Function && item.function.name == kb.kernel && item.function.body)
            fn = &item.function;
    if (!fn) throw LoweringError(kb.loc, "kernel '" + kb.kernel + "' not found in " + kb.file, diag::KernelMissing);

    std::vector<TypeExpr> want, got;
    for (const auto& p : task.params) want.push_back(compat_type(p.type));
    for (const auto& p : fn->params) got.push_back(compat_type(p.type));
    if (want != got) {
        std::size_t at = 0;
        while (at < want.size() && at < got.size() && want[at] == got[at]) ++at;
        throw LoweringError(kb.loc,
                            "kernel '" + kb.kernel + "' of type '" + sema::signature_string(got) +
                                "' is incompatible with task '" + task.name + "' of type '" +
                                sema::signature_string(want) + "' at parameter " + std::to_string(at + 1),
                            diag::KernelSignature);
    }

    EmbeddedKernel k;
    k.impl = impl.function;
    k.file = kb.file;
    k.kernel_name = kb.kernel;
    k.group_size = kb.group_size;
    k.source_text = std::move(text);
    k.ir = lower_kernel_body(fn->name, fn->params, *fn->body, DataModel::opencl());
    return k;
}

MainLowering lower_main(const sema::ProgramModel& model) {
    if (!model.main || !model.main->body) return {};
    Lowerer l(DataModel::host(model.config), Mode::Main, &model);
    return l.main_function(*model.main);
}

TaskProgram emit_program(const sema::ProgramModel& model) {
    TaskProgram prog;
    prog.source = model.file;
    prog.config = model.config;
    std::string base_dir = std::filesystem::path(model.file).parent_path().string();
    DataModel host = DataModel::host(model.config);

    for (std::size_t t = 0; t < model.tasks.size(); ++t) {
        const sema::TaskDecl& task = model.tasks[t];
        const sema::CodeletDescriptor& cd = model.codelets[t];
        CodeletProgram c;
        c.name = task.name;
        c.nbuffers = cd.nbuffers;
        c.modes = cd.modes;
        c.params = task_params(task, model.config);
        c.wrapper = lower_wrapper(task, model.config);
        c.body = lower_task_body(task);
        for (const auto& [target, idx] : cd.impls) {
            const sema::TaskImpl& impl = model.impls[idx];
            ImplProgram ip;
            ip.function = impl.function;
            ip.target = target;
            ip.implicit = impl.implicit;
            if (impl.kernel_binding) {
                ip.kernel = embed_kernel(impl, task, base_dir);
            } else if (!sema::is_device(target) && impl.body) {
                Lowerer l(host, Mode::Cpu);
                for (const auto& g : model.globals) l.globals_.push_back(g.name);
                ip.ir = l.function(impl.function, impl.params, *impl.body);
            } else {
                throw LoweringError(impl.loc, "task implementation '" + impl.function + "' has no body");
            }
            c.impls.push_back(std::move(ip));
        }
        prog.codelets.push_back(std::move(c));
    }

    MainLowering m = lower_main(model);
    prog.main_ops = std::move(m.ops);
    prog.main_regs = std::move(m.regs);
    return prog;
}

}  // namespace taskc::lowering
