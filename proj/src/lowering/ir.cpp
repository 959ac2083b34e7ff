#include "taskc/lowering/ir.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

namespace taskc::lowering {

namespace {

constexpr std::array<std::string_view, 11> kValTypeNames{"i8",  "u8",  "i16", "u16", "i32", "u32",
                                                         "i64", "u64", "f32", "f64", "ptr"};

constexpr std::array<std::string_view, 17> kOpNames{"const", "mov",    "convert",   "bin",  "cmp", "unary",
                                                    "load",  "store",  "ptradd",    "ptrdiff", "loop", "branch",
                                                    "global_id", "ret", "alloca", "malloc", "free"};

float as_f32(std::uint64_t bits) {
    auto u = static_cast<std::uint32_t>(bits);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
}

double as_f64(std::uint64_t bits) {
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

std::uint64_t bits_of(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    return u;
}

std::uint64_t bits_of(double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    return u;
}

// Float to integer with truncation; NaN becomes 0 and out-of-range values
// saturate to the 64-bit range before wrapping to the target width.
std::uint64_t float_to_int(ValType to, double x) {
    if (std::isnan(x)) return 0;
    double t = std::trunc(x);
    if (!is_signed(to) && t >= 0) {
        if (t >= 18446744073709551616.0) return normalize(to, std::numeric_limits<std::uint64_t>::max());
        return normalize(to, static_cast<std::uint64_t>(t));
    }
    if (t >= 9223372036854775808.0) return normalize(to, static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()));
    if (t < -9223372036854775808.0) return normalize(to, static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::min()));
    return normalize(to, static_cast<std::uint64_t>(static_cast<std::int64_t>(t)));
}

}  // namespace

std::string_view to_string(ValType t) {
    return kValTypeNames[static_cast<std::size_t>(t)];
}

std::optional<ValType> val_type_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kValTypeNames.size(); ++i)
        if (kValTypeNames[i] == s) return static_cast<ValType>(i);
    return std::nullopt;
}

std::string_view to_string(OpKind k) {
    return kOpNames[static_cast<std::size_t>(k)];
}

std::optional<OpKind> op_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == s) return static_cast<OpKind>(i);
    return std::nullopt;
}

std::size_t width(ValType t) {
    switch (t) {
        case ValType::I8:
        case ValType::U8: return 1;
        case ValType::I16:
        case ValType::U16: return 2;
        case ValType::I32:
        case ValType::U32:
        case ValType::F32: return 4;
        default: return 8;
    }
}

bool is_float(ValType t) {
    return t == ValType::F32 || t == ValType::F64;
}

bool is_signed(ValType t) {
    switch (t) {
        case ValType::I8:
        case ValType::I16:
        case ValType::I32:
        case ValType::I64:
        case ValType::F32:
        case ValType::F64: return true;
        default: return false;
    }
}

DataModel DataModel::opencl() {
    DataModel m;
    m.device = true;
    return m;
}

ValType DataModel::scalar(frontend::BaseType b) const {
    using frontend::BaseType;
    bool long64 = device || cfg.long_width_bits == 64;
    bool ptr64 = device || cfg.pointer_width_bits == 64;
    switch (b) {
        case BaseType::Void: return ValType::U8;
        case BaseType::Char: return device || cfg.char_signed ? ValType::I8 : ValType::U8;
        case BaseType::SignedChar: return ValType::I8;
        case BaseType::UnsignedChar: return ValType::U8;
        case BaseType::Short: return ValType::I16;
        case BaseType::UnsignedShort: return ValType::U16;
        case BaseType::Int: return ValType::I32;
        case BaseType::UnsignedInt: return ValType::U32;
        case BaseType::Long: return long64 ? ValType::I64 : ValType::I32;
        case BaseType::UnsignedLong: return long64 ? ValType::U64 : ValType::U32;
        case BaseType::Float: return ValType::F32;
        case BaseType::Double: return ValType::F64;
        case BaseType::SizeT: return ptr64 ? ValType::U64 : ValType::U32;
    }
    return ValType::I32;
}

std::size_t DataModel::size_of(const frontend::TypeExpr& t) const {
    if (t.pointer_depth > 0) return device ? 8 : static_cast<std::size_t>(cfg.pointer_width_bits / 8);
    std::size_t n = width(scalar(t.base));
    for (const auto& d : t.array_dims)
        if (d.kind == frontend::ArrayDim::Kind::Constant) n *= static_cast<std::size_t>(d.value);
    return n;
}

void number_ops(std::vector<Op>& ops, int start) {
    int next = start;
    auto visit = [&](auto& self, std::vector<Op>& list) -> void {
        for (Op& op : list) {
            op.index = next++;
            self(self, op.cond);
            self(self, op.body);
            self(self, op.step);
            self(self, op.orelse);
        }
    };
    visit(visit, ops);
}

std::size_t count_ops(const std::vector<Op>& ops) {
    std::size_t n = 0;
    for (const Op& op : ops) n += 1 + count_ops(op.cond) + count_ops(op.body) + count_ops(op.step) + count_ops(op.orelse);
    return n;
}

std::uint64_t normalize(ValType t, std::uint64_t bits) {
    switch (t) {
        case ValType::I8: return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int8_t>(bits)));
        case ValType::U8: return bits & 0xffu;
        case ValType::I16: return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int16_t>(bits)));
        case ValType::U16: return bits & 0xffffu;
        case ValType::I32: return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(bits)));
        case ValType::U32:
        case ValType::F32: return bits & 0xffffffffu;
        default: return bits;
    }
}

std::uint64_t from_int(ValType t, std::int64_t v) {
    if (t == ValType::F32) return bits_of(static_cast<float>(v));
    if (t == ValType::F64) return bits_of(static_cast<double>(v));
    return normalize(t, static_cast<std::uint64_t>(v));
}

std::uint64_t from_uint(ValType t, std::uint64_t v) {
    if (t == ValType::F32) return bits_of(static_cast<float>(v));
    if (t == ValType::F64) return bits_of(static_cast<double>(v));
    return normalize(t, v);
}

std::uint64_t from_double(ValType t, double v) {
    if (t == ValType::F32) return bits_of(static_cast<float>(v));
    if (t == ValType::F64) return bits_of(v);
    return float_to_int(t, v);
}

double to_double(ValType t, std::uint64_t bits) {
    if (t == ValType::F32) return as_f32(bits);
    if (t == ValType::F64) return as_f64(bits);
    if (is_signed(t)) return static_cast<double>(static_cast<std::int64_t>(bits));
    return static_cast<double>(bits);
}

std::int64_t to_int(ValType t, std::uint64_t bits) {
    if (is_float(t)) return static_cast<std::int64_t>(float_to_int(ValType::I64, to_double(t, bits)));
    return static_cast<std::int64_t>(bits);
}

std::uint64_t convert(ValType to, ValType from, std::uint64_t bits) {
    if (to == from) return bits;
    if (from == ValType::F32) {
        float f = as_f32(bits);
        if (to == ValType::F64) return bits_of(static_cast<double>(f));
        return float_to_int(to, static_cast<double>(f));
    }
    if (from == ValType::F64) {
        double d = as_f64(bits);
        if (to == ValType::F32) return bits_of(static_cast<float>(d));
        return float_to_int(to, d);
    }
    if (is_signed(from)) return from_int(to, static_cast<std::int64_t>(bits));
    return from_uint(to, bits);
}

std::string format_value(ValType t, std::uint64_t bits) {
    char buf[64];
    std::to_chars_result r{};
    if (t == ValType::F32) {
        r = std::to_chars(buf, buf + sizeof buf, as_f32(bits));
    } else if (t == ValType::F64) {
        r = std::to_chars(buf, buf + sizeof buf, as_f64(bits));
    } else if (is_signed(t)) {
        r = std::to_chars(buf, buf + sizeof buf, static_cast<std::int64_t>(bits));
    } else {
        r = std::to_chars(buf, buf + sizeof buf, bits);
    }
    return std::string(buf, r.ptr);
}

}  // namespace taskc::lowering
