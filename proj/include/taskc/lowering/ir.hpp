#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskc/sema/model.hpp"
#include "taskc/support/source_location.hpp"

namespace taskc::lowering {

/// Register and memory value types. Integers are kept sign- or
/// zero-extended to 64 bits; F32 lives in the low 32 bits; Ptr is a
/// simulated address.
enum class ValType : std::uint8_t { I8, U8, I16, U16, I32, U32, I64, U64, F32, F64, Ptr };

std::string_view to_string(ValType t);
std::optional<ValType> val_type_from_string(std::string_view s);

std::size_t width(ValType t);  // bytes; Ptr is 8
bool is_float(ValType t);
bool is_signed(ValType t);
inline bool is_integer(ValType t) { return !is_float(t) && t != ValType::Ptr; }

/// Data model used to map C types onto ValTypes: the host's TargetConfig,
/// or the OpenCL device model (64-bit long and size_t, signed char).
struct DataModel {
    sema::TargetConfig cfg;
    bool device = false;

    static DataModel host(const sema::TargetConfig& c) { return {c, false}; }
    static DataModel opencl();

    ValType scalar(frontend::BaseType b) const;
    std::size_t size_of(const frontend::TypeExpr& t) const;
    ValType size_type() const { return scalar(frontend::BaseType::SizeT); }
};

enum class OpKind : std::uint8_t {
    Const,    // dst = imm
    Mov,      // dst = a
    Convert,  // dst:type = (type) a:src
    Bin,      // dst = a op b, operands of `type`; op in + - * / %
    Cmp,      // dst:I32 = a op b; op in == != < > <= >=
    Unary,    // dst = op a; op in - ~ !  (! yields I32)
    Load,     // dst:type = *(a + b * elem_size)
    Store,    // *(a + b * elem_size) = c
    PtrAdd,   // dst = a + b * elem_size   (b is I64)
    PtrDiff,  // dst:I64 = (a - b) / elem_size
    Loop,     // for (;;) { cond; if (!a) break; body; step }   a < 0: no test
    Branch,   // if (a) body else orelse
    GlobalId, // dst = current work-item id
    Ret,      // leave the function
    Alloca,   // dst = fresh zeroed region of imm bytes, released when the function ends
    Malloc,   // dst = fresh zeroed region of a bytes (host only)
    Free,     // release region a (host only)
};

std::string_view to_string(OpKind k);
std::optional<OpKind> op_kind_from_string(std::string_view s);

struct Op {
    OpKind kind = OpKind::Const;
    ValType type = ValType::I32;
    ValType src = ValType::I32;  // Convert
    int dst = -1;
    int a = -1;
    int b = -1;
    int c = -1;
    std::uint64_t imm = 0;
    std::uint64_t elem_size = 0;
    std::string op;
    std::vector<Op> cond;    // Loop
    std::vector<Op> body;    // Loop, Branch
    std::vector<Op> step;    // Loop
    std::vector<Op> orelse;  // Branch
    int index = 0;           // pre-order position within the function
    SourceLocation loc;

    bool operator==(const Op&) const = default;
};

struct IrParam {
    std::string name;
    bool buffer = false;
    ValType type = ValType::I32;  // scalar type, or Ptr for buffers
    ValType elem = ValType::I32;  // buffers: element type
    std::uint64_t elem_size = 0;
    int reg = -1;

    bool operator==(const IrParam&) const = default;
};

struct IrFunction {
    std::string name;
    std::vector<IrParam> params;
    std::vector<ValType> regs;  // type of each register
    std::vector<Op> ops;
    bool device = false;

    bool operator==(const IrFunction&) const = default;
};

/// Assigns pre-order indices to every op (nested ops included).
void number_ops(std::vector<Op>& ops, int start = 0);
std::size_t count_ops(const std::vector<Op>& ops);

// Bit-level helpers for register values.
std::uint64_t normalize(ValType t, std::uint64_t bits);
std::uint64_t from_int(ValType t, std::int64_t v);
std::uint64_t from_uint(ValType t, std::uint64_t v);
std::uint64_t from_double(ValType t, double v);
double to_double(ValType t, std::uint64_t bits);
std::int64_t to_int(ValType t, std::uint64_t bits);
std::uint64_t convert(ValType to, ValType from, std::uint64_t bits);
std::string format_value(ValType t, std::uint64_t bits);

}  // namespace taskc::lowering
