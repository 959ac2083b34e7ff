#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taskc/frontend/ast.hpp"
#include "taskc/support/source_location.hpp"

namespace taskc::sema {

using frontend::BaseType;
using frontend::TypeExpr;

enum class AccessMode { R, W, RW, ScalarValue };

std::string_view to_string(AccessMode m);
std::optional<AccessMode> access_mode_from_string(std::string_view s);

inline bool reads(AccessMode m) { return m == AccessMode::R || m == AccessMode::RW; }
inline bool writes(AccessMode m) { return m == AccessMode::W || m == AccessMode::RW; }

enum class Target { Cpu, OpenCL, Cuda };

std::string_view to_string(Target t);
std::optional<Target> target_from_string(std::string_view s);
inline bool is_device(Target t) { return t != Target::Cpu; }

/// Data model knobs of the compilation target.
struct TargetConfig {
    int pointer_width_bits = 64;
    int long_width_bits = 64;
    bool char_signed = true;

    bool operator==(const TargetConfig&) const = default;

    /// sizeof for a base type under this configuration.
    std::size_t size_of(BaseType b) const;
    /// sizeof for a full type (pointers use the pointer width; arrays multiply
    /// constant dimensions, symbolic dimensions count as one).
    std::size_t size_of(const TypeExpr& t) const;
    bool is_signed(BaseType b) const;
};

struct TaskParam {
    std::string name;
    TypeExpr type;
    AccessMode mode = AccessMode::ScalarValue;
    SourceLocation loc;
};

struct TaskDecl {
    std::string name;
    std::vector<TaskParam> params;
    SourceLocation loc;
    bool is_extern = false;
    /// Body of a task-qualified definition; it becomes the CPU implementation.
    std::optional<frontend::Stmt> implicit_cpu_body;

    std::size_t buffer_count() const;
};

struct KernelBinding {
    std::string file;
    std::string kernel;
    std::int64_t group_size = 1;
    SourceLocation loc;
};

struct TaskImpl {
    std::string task;
    Target target = Target::Cpu;
    std::string function;
    bool defined = false;
    bool implicit = false;  // synthesized from a task definition's body
    std::vector<frontend::ParamDecl> params;
    std::optional<frontend::Stmt> body;
    std::optional<KernelBinding> kernel_binding;
    SourceLocation loc;
};

struct CodeletDescriptor {
    std::string name;
    std::size_t nbuffers = 0;
    std::vector<AccessMode> modes;
    std::map<Target, std::size_t> impls;  // index into ProgramModel::impls
};

struct RegistrationSite {
    std::string function;
    std::string var;
    std::optional<frontend::Expr> count_expr;  // explicit element count
    std::optional<std::int64_t> static_count;  // inferred from the array type
    TypeExpr elem_type;
    std::size_t elem_size = 0;
    SourceLocation loc;
};

struct ScopedVarSite {
    std::string function;
    std::string var;
    TypeExpr type;
    bool heap_allocated = false;
    bool registered = false;
    std::int64_t count = 0;
    std::size_t elem_size = 0;
    SourceLocation loc;
};

struct ProgramModel {
    std::string file;
    TargetConfig config;
    std::vector<TaskDecl> tasks;
    std::vector<TaskImpl> impls;
    std::vector<CodeletDescriptor> codelets;  // parallel to `tasks`
    std::vector<RegistrationSite> registrations;
    std::vector<ScopedVarSite> scoped_vars;
    std::vector<frontend::VarDecl> globals;
    std::optional<frontend::FunctionDecl> main;

    const TaskDecl* find_task(std::string_view name) const;
    std::optional<std::size_t> task_index(std::string_view name) const;
    const RegistrationSite* registration_at(const SourceLocation& loc) const;
    const ScopedVarSite* scoped_var_at(const SourceLocation& loc) const;
};

}  // namespace taskc::sema
