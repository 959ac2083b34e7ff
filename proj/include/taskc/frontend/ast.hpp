#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskc/frontend/lexer.hpp"
#include "taskc/support/source_location.hpp"

namespace taskc::frontend {

enum class BaseType {
    Void,
    Char,
    SignedChar,
    UnsignedChar,
    Short,
    UnsignedShort,
    Int,
    UnsignedInt,
    Long,
    UnsignedLong,
    Float,
    Double,
    SizeT,
};

/// C spelling, e.g. "unsigned long".
std::string_view spelling(BaseType b);

struct ArrayDim {
    enum class Kind { Constant, Symbol, Unsized };

    Kind kind = Kind::Unsized;
    std::int64_t value = 0;
    std::string symbol;  // Symbol: names an earlier parameter or variable

    bool operator==(const ArrayDim&) const = default;
};

/// `const_qualified` qualifies the base (element) type; pointers themselves
/// are never const in TaskC. Arrays and pointers are mutually exclusive.
struct TypeExpr {
    BaseType base = BaseType::Int;
    int pointer_depth = 0;
    std::vector<ArrayDim> array_dims;
    bool const_qualified = false;
    bool global_qualified = false;  // device dialect `__global`

    bool operator==(const TypeExpr&) const = default;

    bool is_pointer() const { return pointer_depth > 0; }
    bool is_array() const { return !array_dims.empty(); }
    bool is_buffer() const { return is_pointer() || is_array(); }
    bool is_scalar() const { return !is_buffer() && base != BaseType::Void; }

    /// The type with one level of pointer/array stripped (array: all dims).
    TypeExpr element() const;

    /// "const float *", "int [123][234]" style rendering for messages.
    std::string str() const;
};

enum class AttrKind { Task, TaskImplementation, Output, HeapAllocated, Registered, Unknown };

AttrKind attr_kind(std::string_view name);

/// One attribute inside `__attribute__ ((...))`. `raw` holds the tokens
/// between the attribute's parentheses verbatim (commas included).
struct Attribute {
    std::string name;
    AttrKind kind = AttrKind::Unknown;
    bool has_args = false;
    std::vector<Token> raw;
    SourceLocation loc;

    bool operator==(const Attribute& other) const;

    /// Comma-separated argument token groups.
    std::vector<std::vector<Token>> args() const;
};

bool equal_tokens(const std::vector<Token>& a, const std::vector<Token>& b);

struct Expr {
    enum class Kind {
        IntLit,
        FloatLit,
        StringLit,
        Ident,
        Unary,      // text: "-", "+", "!", "~", "*", "&", "++", "--"
        Postfix,    // text: "++", "--"
        Binary,     // text: operator spelling
        Assign,     // text: "=", "+=", ...
        Call,       // text: callee name; operands: arguments
        Subscript,  // operands: base, index
        Cast,       // type; operands: operand
        SizeofExpr,
        SizeofType,
    };

    Kind kind = Kind::IntLit;
    SourceLocation loc;
    std::string text;  // identifier, operator, or literal spelling
    std::int64_t int_value = 0;
    double float_value = 0.0;
    TypeExpr type;     // Cast and SizeofType
    std::vector<Expr> operands;

    bool operator==(const Expr&) const = default;
};

enum class PragmaKind { Register, Unregister, Acquire, Wait, OpenCL, Unknown };

struct PragmaNode {
    PragmaKind kind = PragmaKind::Unknown;
    std::string var;                 // register, unregister, acquire
    std::optional<Expr> size;        // register
    std::string impl;                // opencl
    std::string file;                // opencl
    std::string kernel;              // opencl
    std::int64_t group_size = 0;     // opencl
    std::string raw;                 // the full payload as written
    SourceLocation loc;

    bool operator==(const PragmaNode&) const = default;

    bool is_starpu() const;
};

enum class StorageClass { None, Static, Extern };

struct VarDecl {
    std::string name;
    TypeExpr type;
    StorageClass storage = StorageClass::None;
    std::vector<Attribute> attrs;
    std::optional<Expr> init;
    SourceLocation loc;

    bool operator==(const VarDecl&) const = default;

    bool has_attr(AttrKind k) const;
};

struct Stmt {
    enum class Kind { Compound, Decl, Expr, If, For, While, Return, Pragma, Empty };

    Kind kind = Kind::Empty;
    SourceLocation loc;
    std::vector<Stmt> body;          // Compound: items; If: then [, else]; For/While: loop body
    std::vector<Stmt> init;          // For: zero or one Decl/Expr statement
    std::optional<Expr> expr;        // Expr statement, Return value, If/For/While condition
    std::optional<Expr> step;        // For
    std::vector<VarDecl> decls;      // Decl
    std::optional<PragmaNode> pragma;

    bool operator==(const Stmt&) const = default;
};

struct ParamDecl {
    std::string name;
    TypeExpr type;
    std::vector<Attribute> attrs;
    SourceLocation loc;

    bool operator==(const ParamDecl&) const = default;

    bool has_attr(AttrKind k) const;
};

struct FunctionDecl {
    std::string name;
    TypeExpr return_type;
    StorageClass storage = StorageClass::None;
    bool is_kernel = false;  // device dialect `__kernel`
    std::vector<ParamDecl> params;
    std::vector<Attribute> attrs;
    std::optional<Stmt> body;
    SourceLocation loc;

    bool operator==(const FunctionDecl&) const = default;

    bool has_attr(AttrKind k) const;
    const Attribute* find_attr(AttrKind k) const;
};

struct TopLevel {
    enum class Kind { Function, Variables, Pragma };

    Kind kind = Kind::Function;
    FunctionDecl function;
    std::vector<VarDecl> variables;
    PragmaNode pragma;

    bool operator==(const TopLevel&) const = default;
};

struct TranslationUnit {
    std::string file;
    std::vector<TopLevel> items;

    bool operator==(const TranslationUnit&) const = default;

    const FunctionDecl* find_function(std::string_view name) const;
};

/// Visits every SourceLocation in the unit (mutable), in source order.
void for_each_location(TranslationUnit& tu, const std::function<void(SourceLocation&)>& fn);
void for_each_location(const TranslationUnit& tu, const std::function<void(const SourceLocation&)>& fn);

/// Equality ignoring source locations.
bool structurally_equal(const TranslationUnit& a, const TranslationUnit& b);

/// Pre-order walk over all statements nested in `s` (including `s`).
void walk_stmts(const Stmt& s, const std::function<void(const Stmt&)>& fn);

/// Pre-order walk over every expression nested in `e` (including `e`).
void walk_exprs(const Expr& e, const std::function<void(const Expr&)>& fn);

/// Expressions directly owned by a statement (not those of nested statements).
std::vector<const Expr*> own_exprs(const Stmt& s);

}  // namespace taskc::frontend
