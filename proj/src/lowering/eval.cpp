#include "taskc/lowering/eval.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>

#include <omp.h>

namespace taskc::lowering {

KernelFault::KernelFault(int op, SourceLocation where, std::string what)
    : std::runtime_error("kernel fault at op " + std::to_string(op) + " (" + where.str() + "): " + what),
      op_index(op),
      loc(std::move(where)),
      detail(std::move(what)) {}

std::uint64_t AddressSpace::allocate(std::size_t bytes, bool pinned, std::string name) {
    std::uint64_t base = next_;
    std::uint64_t span = bytes == 0 ? 1 : bytes;
    next_ = (base + span + 63) & ~std::uint64_t{63};
    Region r;
    r.base = base;
    r.bytes.assign(bytes, 0);
    r.pinned = pinned;
    r.name = std::move(name);
    regions_.emplace(base, std::move(r));
    return base;
}

bool AddressSpace::release(std::uint64_t base) {
    return regions_.erase(base) > 0;
}

Region* AddressSpace::region_at(std::uint64_t base) {
    auto it = regions_.find(base);
    return it == regions_.end() ? nullptr : &it->second;
}

const Region* AddressSpace::region_at(std::uint64_t base) const {
    auto it = regions_.find(base);
    return it == regions_.end() ? nullptr : &it->second;
}

const Region* AddressSpace::find(std::uint64_t addr) const {
    auto it = regions_.upper_bound(addr);
    if (it == regions_.begin()) return nullptr;
    --it;
    const Region& r = it->second;
    if (addr - r.base < r.bytes.size()) return &r;
    return nullptr;
}

std::uint8_t* AddressSpace::span(std::uint64_t addr, std::size_t n) {
    auto it = regions_.upper_bound(addr);
    if (it == regions_.begin()) return nullptr;
    --it;
    Region& r = it->second;
    std::uint64_t off = addr - r.base;
    if (off > r.bytes.size() || r.bytes.size() - off < n || n == 0) return nullptr;
    return r.bytes.data() + off;
}

namespace {

float f32(std::uint64_t b) {
    auto u = static_cast<std::uint32_t>(b);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

double f64(std::uint64_t b) {
    double d;
    std::memcpy(&d, &b, 8);
    return d;
}

std::uint64_t bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

std::uint64_t bits(double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    return u;
}

[[noreturn]] void fault(const Op& op, const std::string& what) {
    throw KernelFault(op.index, op.loc, what);
}

std::uint64_t binop(const Op& op, std::uint64_t x, std::uint64_t y) {
    char c = op.op[0];
    ValType t = op.type;
    if (t == ValType::F32) {
        float a = f32(x), b = f32(y);
        switch (c) {
            case '+': return bits(a + b);
            case '-': return bits(a - b);
            case '*': return bits(a * b);
            case '/': return bits(a / b);
        }
        fault(op, "invalid float operator " + op.op);
    }
    if (t == ValType::F64) {
        double a = f64(x), b = f64(y);
        switch (c) {
            case '+': return bits(a + b);
            case '-': return bits(a - b);
            case '*': return bits(a * b);
            case '/': return bits(a / b);
        }
        fault(op, "invalid float operator " + op.op);
    }
    if ((c == '/' || c == '%') && normalize(t, y) == 0) fault(op, "integer division by zero");
    if (is_signed(t)) {
        auto a = static_cast<std::int64_t>(x), b = static_cast<std::int64_t>(y);
        if ((c == '/' || c == '%') && b == -1) {
            // Avoid the INT64_MIN / -1 trap; narrower types cannot overflow here.
            if (c == '%') return 0;
            return normalize(t, 0 - static_cast<std::uint64_t>(a));
        }
        switch (c) {
            case '+': return normalize(t, x + y);
            case '-': return normalize(t, x - y);
            case '*': return normalize(t, x * y);
            case '/': return normalize(t, static_cast<std::uint64_t>(a / b));
            case '%': return normalize(t, static_cast<std::uint64_t>(a % b));
        }
    } else {
        switch (c) {
            case '+': return normalize(t, x + y);
            case '-': return normalize(t, x - y);
            case '*': return normalize(t, x * y);
            case '/': return normalize(t, x / y);
            case '%': return normalize(t, x % y);
        }
    }
    fault(op, "invalid operator " + op.op);
}

template <typename T>
bool compare(const std::string& o, T a, T b) {
    if (o == "==") return a == b;
    if (o == "!=") return a != b;
    if (o == "<") return a < b;
    if (o == ">") return a > b;
    if (o == "<=") return a <= b;
    return a >= b;
}

bool cmpop(const Op& op, std::uint64_t x, std::uint64_t y) {
    switch (op.type) {
        case ValType::F32: return compare(op.op, f32(x), f32(y));
        case ValType::F64: return compare(op.op, f64(x), f64(y));
        default:
            if (is_signed(op.type)) return compare(op.op, static_cast<std::int64_t>(x), static_cast<std::int64_t>(y));
            return compare(op.op, x, y);
    }
}

std::uint64_t unop(const Op& op, std::uint64_t x) {
    ValType t = op.type;
    if (op.op == "!") {
        if (t == ValType::F32) return f32(x) == 0.0f ? 1 : 0;
        if (t == ValType::F64) return f64(x) == 0.0 ? 1 : 0;
        return x == 0 ? 1 : 0;
    }
    if (op.op == "-") {
        if (t == ValType::F32) return bits(-f32(x));
        if (t == ValType::F64) return bits(-f64(x));
        return normalize(t, 0 - x);
    }
    if (op.op == "~" && is_integer(t)) return normalize(t, ~x);
    fault(op, "invalid unary operator " + op.op);
}

std::uint64_t address(const Op& op, std::uint64_t base, std::uint64_t index) {
    return base + index * op.elem_size;  // two's-complement wrap handles negative indices
}

bool truthy(ValType t, std::uint64_t v) {
    if (t == ValType::F32) return f32(v) != 0.0f;
    if (t == ValType::F64) return f64(v) != 0.0;
    return v != 0;
}

}  // namespace

bool execute(const std::vector<Op>& ops, std::vector<std::uint64_t>& r, ExecContext& ctx) {
    auto reg = [&](int i) -> std::uint64_t& { return r[static_cast<std::size_t>(i)]; };
    for (const Op& op : ops) {
        switch (op.kind) {
            case OpKind::Const: reg(op.dst) = op.imm; break;
            case OpKind::Mov: reg(op.dst) = reg(op.a); break;
            case OpKind::Convert: reg(op.dst) = convert(op.type, op.src, reg(op.a)); break;
            case OpKind::Bin: reg(op.dst) = binop(op, reg(op.a), reg(op.b)); break;
            case OpKind::Cmp: reg(op.dst) = cmpop(op, reg(op.a), reg(op.b)) ? 1 : 0; break;
            case OpKind::Unary: reg(op.dst) = unop(op, reg(op.a)); break;
            case OpKind::Load: {
                std::size_t w = width(op.type);
                std::uint8_t* p = ctx.mem->span(address(op, reg(op.a), reg(op.b)), w);
                if (!p) fault(op, "out-of-bounds load");
                std::uint64_t v = 0;
                std::memcpy(&v, p, w);
                reg(op.dst) = normalize(op.type, v);
                break;
            }
            case OpKind::Store: {
                std::size_t w = width(op.type);
                std::uint8_t* p = ctx.mem->span(address(op, reg(op.a), reg(op.b)), w);
                if (!p) fault(op, "out-of-bounds store");
                std::uint64_t v = reg(op.c);
                std::memcpy(p, &v, w);
                break;
            }
            case OpKind::PtrAdd: reg(op.dst) = address(op, reg(op.a), reg(op.b)); break;
            case OpKind::PtrDiff: {
                auto d = static_cast<std::int64_t>(reg(op.a) - reg(op.b));
                reg(op.dst) = static_cast<std::uint64_t>(d / static_cast<std::int64_t>(op.elem_size));
                break;
            }
            case OpKind::Loop:
                while (true) {
                    if (!execute(op.cond, r, ctx)) return false;
                    if (op.a >= 0 && !truthy(op.type, reg(op.a))) break;
                    if (!execute(op.body, r, ctx)) return false;
                    if (!execute(op.step, r, ctx)) return false;
                }
                break;
            case OpKind::Branch:
                if (!execute(truthy(op.type, reg(op.a)) ? op.body : op.orelse, r, ctx)) return false;
                break;
            case OpKind::GlobalId:
                // Kernels run over a one-dimensional range; other dimensions have id 0.
                reg(op.dst) = op.a >= 0 && reg(op.a) != 0 ? 0 : normalize(op.type, ctx.global_id);
                break;
            case OpKind::Ret: return false;
            case OpKind::Alloca: {
                std::uint64_t base = ctx.mem->allocate(static_cast<std::size_t>(op.imm), false, op.op);
                ctx.allocas.push_back(base);
                reg(op.dst) = base;
                break;
            }
            case OpKind::Malloc: {
                std::uint64_t n = reg(op.a);
                if (n > (std::uint64_t{1} << 32)) fault(op, "allocation too large");
                reg(op.dst) = ctx.mem->allocate(static_cast<std::size_t>(n), false, "malloc");
                break;
            }
            case OpKind::Free:
                if (reg(op.a) != 0 && !ctx.mem->release(reg(op.a))) fault(op, "free of an invalid pointer");
                break;
        }
    }
    return true;
}

void run_function(const IrFunction& fn, const std::vector<std::uint64_t>& args, ExecContext& ctx) {
    std::vector<std::uint64_t> regs(fn.regs.size(), 0);
    for (std::size_t i = 0; i < fn.params.size() && i < args.size(); ++i)
        regs[static_cast<std::size_t>(fn.params[i].reg)] = args[i];
    std::size_t mark = ctx.allocas.size();
    try {
        execute(fn.ops, regs, ctx);
    } catch (...) {
        for (std::size_t i = mark; i < ctx.allocas.size(); ++i) ctx.mem->release(ctx.allocas[i]);
        ctx.allocas.resize(mark);
        throw;
    }
    for (std::size_t i = mark; i < ctx.allocas.size(); ++i) ctx.mem->release(ctx.allocas[i]);
    ctx.allocas.resize(mark);
}

bool parallel_safe(const IrFunction& fn) {
    bool ok = true;
    std::function<void(const std::vector<Op>&)> scan = [&](const std::vector<Op>& ops) {
        for (const Op& op : ops) {
            if (op.kind == OpKind::Alloca || op.kind == OpKind::Malloc || op.kind == OpKind::Free) ok = false;
            scan(op.cond);
            scan(op.body);
            scan(op.step);
            scan(op.orelse);
        }
    };
    scan(fn.ops);
    return ok;
}

void run_ndrange(const IrFunction& fn, const std::vector<std::uint64_t>& args, AddressSpace& mem, std::uint64_t n,
                 std::uint64_t group, bool parallel) {
    if (!parallel || !parallel_safe(fn) || n < 2) {
        ExecContext ctx;
        ctx.mem = &mem;
        for (std::uint64_t gid = 0; gid < n; ++gid) {
            ctx.global_id = gid;
            run_function(fn, args, ctx);
        }
        return;
    }
    if (group == 0) group = 1;
    std::uint64_t first_fault = std::numeric_limits<std::uint64_t>::max();
    std::optional<KernelFault> fault;
    auto count = static_cast<std::int64_t>(n);
    auto chunk = static_cast<int>(std::min<std::uint64_t>(group, 1u << 20));
#pragma omp parallel for schedule(static, chunk)
    for (std::int64_t i = 0; i < count; ++i) {
        auto gid = static_cast<std::uint64_t>(i);
        ExecContext ctx;
        ctx.mem = &mem;
        ctx.global_id = gid;
        try {
            run_function(fn, args, ctx);
        } catch (const KernelFault& f) {
#pragma omp critical(taskc_ndrange_fault)
            if (gid < first_fault) {
                first_fault = gid;
                fault = f;
            }
        }
    }
    if (fault) throw *fault;
}

}  // namespace taskc::lowering
