#pragma once

#include "taskc/frontend/ast.hpp"
#include "taskc/sema/model.hpp"
#include "taskc/support/diagnostic.hpp"

namespace taskc::sema {

struct AnalyzeOptions {
    /// Treat the unit as the whole program: every task needs an
    /// implementation and every declared implementation must be defined or
    /// bound to a kernel here. `check` leaves this off, since declarations may
    /// legitimately refer to other units; `build` turns it on.
    bool complete_unit = false;
};

struct AnalysisResult {
    ProgramModel model;
    Diagnostics diagnostics;
};

/// Builds the program model and reports every annotation-related
/// diagnostic (except the registration dataflow warning). Never throws on
/// bad input; all problems become diagnostics, sorted by location.
AnalysisResult analyze(const frontend::TranslationUnit& tu, const TargetConfig& cfg, const AnalyzeOptions& opts = {});

struct ModeResult {
    AccessMode mode = AccessMode::ScalarValue;
    Diagnostics diagnostics;
};

ModeResult derive_access_mode(const frontend::ParamDecl& param);

Diagnostics check_signature(const TaskDecl& task, const frontend::FunctionDecl& impl_fn);

Diagnostics check_opencl_types(const TaskDecl& task, const TargetConfig& cfg);

struct VarInfo {
    TypeExpr type;
    frontend::StorageClass storage = frontend::StorageClass::None;
    bool is_param = false;
    bool is_global = false;
    bool heap_allocated = false;
    SourceLocation loc;
};

/// Lexical scopes of variables visible at a program point.
class Scope {
public:
    void push() { frames_.emplace_back(); }
    void pop() { frames_.pop_back(); }
    void declare(const std::string& name, VarInfo info);
    const VarInfo* lookup(std::string_view name) const;
    bool empty() const { return frames_.empty(); }

private:
    std::vector<std::vector<std::pair<std::string, VarInfo>>> frames_;
};

struct RegistrationResult {
    std::optional<RegistrationSite> site;
    Diagnostics diagnostics;
};

/// Resolves `#pragma starpu register` against the variables in scope.
RegistrationResult resolve_registration(const frontend::PragmaNode& pragma, const Scope& scope, const TargetConfig& cfg,
                                        const std::string& function);

/// Splits a task definition into its declaration and synthesized CPU
/// implementation (named "<task>.cpu_implementation").
std::pair<TaskDecl, TaskImpl> attach_implicit_cpu_impl(const frontend::FunctionDecl& task_def);

/// C signature rendering used in diagnostics, e.g. "void (int, float *)".
std::string signature_string(const std::vector<TypeExpr>& params);

/// Parameter type normalized for signature matching: a one-dimensional array
/// parameter decays to a pointer; `__global` is dropped.
TypeExpr normalize_param_type(const TypeExpr& t);

}  // namespace taskc::sema
