#include "taskc/sema/sema.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace taskc::sema {

using frontend::Attribute;
using frontend::AttrKind;
using frontend::Expr;
using frontend::FunctionDecl;
using frontend::ParamDecl;
using frontend::PragmaKind;
using frontend::PragmaNode;
using frontend::Stmt;
using frontend::StorageClass;
using frontend::TokenKind;
using frontend::TopLevel;
using frontend::TranslationUnit;
using frontend::VarDecl;

namespace {

Diagnostic error(const SourceLocation& loc, std::string_view code, std::string msg) {
    return Diagnostic{Severity::Error, loc, std::move(msg), std::string(code)};
}

Diagnostic warning(const SourceLocation& loc, std::string_view code, std::string msg) {
    return Diagnostic{Severity::Warning, loc, std::move(msg), std::string(code)};
}

std::string q(std::string_view s) {
    return "'" + std::string(s) + "'";
}

bool no_arg_attr(AttrKind k) {
    return k == AttrKind::Task || k == AttrKind::Output || k == AttrKind::HeapAllocated || k == AttrKind::Registered;
}

void check_attr_args(const std::vector<Attribute>& attrs, Diagnostics& out) {
    for (const Attribute& a : attrs)
        if (no_arg_attr(a.kind) && a.has_args)
            out.push_back(error(a.loc, diag::AttrArgs, q(a.name) + " attribute takes no arguments"));
}

bool all_constant_dims(const TypeExpr& t) {
    if (t.array_dims.empty()) return false;
    for (const auto& d : t.array_dims)
        if (d.kind != frontend::ArrayDim::Kind::Constant) return false;
    return true;
}

std::int64_t dims_product(const TypeExpr& t) {
    std::int64_t n = 1;
    for (const auto& d : t.array_dims) n *= d.value;
    return n;
}

// Attributes that make no sense on an object declaration.
void check_var_attrs(const VarDecl& v, bool block_scope, Diagnostics& out) {
    check_attr_args(v.attrs, out);
    for (const Attribute& a : v.attrs) {
        switch (a.kind) {
            case AttrKind::Task:
                out.push_back(error(v.loc, diag::TaskOnNonFunction, "task attribute on non-function"));
                break;
            case AttrKind::TaskImplementation:
                out.push_back(error(v.loc, diag::ImplOnNonFunction, "task_implementation attribute on non-function"));
                break;
            case AttrKind::Output:
                out.push_back(error(v.loc, diag::OutputPlacement,
                                    "output attribute only applies to task parameters"));
                break;
            case AttrKind::HeapAllocated:
            case AttrKind::Registered:
                if (!block_scope || v.storage != StorageClass::None || !all_constant_dims(v.type))
                    out.push_back(error(v.loc, diag::ScopedAttr,
                                        q(a.name) + " attribute requires a block-scope automatic array of constant size"));
                break;
            case AttrKind::Unknown: break;
        }
    }
}

struct MergedFunction {
    FunctionDecl fn;  // the definition if there is one, else the first declaration
    std::vector<Attribute> attrs;
    SourceLocation first_loc;
    bool defined = false;
    bool any_extern = false;
};

// What the body walker needs to know about the program.
struct Context {
    const TargetConfig& cfg;
    const std::map<std::string, const TaskDecl*>& tasks;
    const std::vector<VarDecl>& globals;
    ProgramModel& model;
    Diagnostics& diags;
};

class BodyChecker {
public:
    BodyChecker(Context& ctx, const std::string& function) : ctx_(ctx), function_(function) {}

    void run(const std::vector<ParamDecl>& params, const Stmt& body) {
        scope_.push();
        for (const VarDecl& g : ctx_.globals) {
            VarInfo info;
            info.type = g.type;
            info.storage = g.storage;
            info.is_global = true;
            info.loc = g.loc;
            scope_.declare(g.name, info);
        }
        scope_.push();
        for (const ParamDecl& p : params) {
            VarInfo info;
            info.type = p.type;
            info.is_param = true;
            info.loc = p.loc;
            scope_.declare(p.name, info);
        }
        // The outermost compound shares the parameter scope.
        for (const Stmt& s : body.body) stmt(s);
        scope_.pop();
        scope_.pop();
    }

private:
    void stmt(const Stmt& s) {
        for (const Expr* e : frontend::own_exprs(s)) expr(*e);
        switch (s.kind) {
            case Stmt::Kind::Compound:
                scope_.push();
                for (const Stmt& c : s.body) stmt(c);
                scope_.pop();
                break;
            case Stmt::Kind::Decl:
                for (const VarDecl& v : s.decls) decl(v);
                break;
            case Stmt::Kind::For:
                scope_.push();
                for (const Stmt& c : s.init) stmt(c);
                for (const Stmt& c : s.body) stmt(c);
                scope_.pop();
                break;
            case Stmt::Kind::If:
            case Stmt::Kind::While:
                for (const Stmt& c : s.body) {
                    scope_.push();
                    stmt(c);
                    scope_.pop();
                }
                break;
            case Stmt::Kind::Pragma: pragma(*s.pragma); break;
            case Stmt::Kind::Expr:
            case Stmt::Kind::Return:
            case Stmt::Kind::Empty: break;
        }
    }

    void decl(const VarDecl& v) {
        check_var_attrs(v, true, ctx_.diags);
        VarInfo info;
        info.type = v.type;
        info.storage = v.storage;
        info.heap_allocated = v.has_attr(AttrKind::HeapAllocated);
        info.loc = v.loc;
        scope_.declare(v.name, info);

        bool heap = v.has_attr(AttrKind::HeapAllocated);
        bool reg = v.has_attr(AttrKind::Registered);
        if ((heap || reg) && v.storage == StorageClass::None && all_constant_dims(v.type)) {
            ScopedVarSite site;
            site.function = function_;
            site.var = v.name;
            site.type = v.type;
            site.heap_allocated = heap;
            site.registered = reg;
            site.count = dims_product(v.type);
            site.elem_size = ctx_.cfg.size_of(v.type.element());
            site.loc = v.loc;
            ctx_.model.scoped_vars.push_back(std::move(site));
        }
    }

    void pragma(const PragmaNode& p) {
        switch (p.kind) {
            case PragmaKind::Register: {
                RegistrationResult r = resolve_registration(p, scope_, ctx_.cfg, function_);
                ctx_.diags.insert(ctx_.diags.end(), r.diagnostics.begin(), r.diagnostics.end());
                if (r.site) ctx_.model.registrations.push_back(std::move(*r.site));
                if (p.size) expr(*p.size);
                break;
            }
            case PragmaKind::Unregister:
            case PragmaKind::Acquire: {
                const VarInfo* v = scope_.lookup(p.var);
                if (!v) {
                    ctx_.diags.push_back(error(p.loc, diag::Undeclared, q(p.var) + " undeclared"));
                } else if (!v->type.is_buffer()) {
                    ctx_.diags.push_back(error(p.loc, diag::RegisterType,
                                               q(p.var) + " is not a pointer or array"));
                }
                break;
            }
            case PragmaKind::Wait: break;
            case PragmaKind::OpenCL:
                ctx_.diags.push_back(error(p.loc, diag::OpenclPragma, "opencl pragma is only allowed at file scope"));
                break;
            case PragmaKind::Unknown:
                if (p.is_starpu())
                    ctx_.diags.push_back(warning(p.loc, diag::UnknownPragma, "unknown starpu pragma '" + p.raw + "'"));
                break;
        }
    }

    void expr(const Expr& root) {
        frontend::walk_exprs(root, [&](const Expr& e) {
            if (e.kind != Expr::Kind::Call) return;
            auto it = ctx_.tasks.find(e.text);
            if (it == ctx_.tasks.end()) return;
            // A local declaration shadows the task name.
            if (const VarInfo* v = scope_.lookup(e.text); v && !v->is_global) return;
            std::size_t want = it->second->params.size();
            if (e.operands.size() != want)
                ctx_.diags.push_back(error(e.loc, diag::CallArity,
                                           "task " + q(e.text) + " expects " + std::to_string(want) + " argument" +
                                               (want == 1 ? "" : "s") + ", got " + std::to_string(e.operands.size())));
        });
    }

    Context& ctx_;
    std::string function_;
    Scope scope_;
};

struct ImplTarget {
    std::string target;
    std::string task;
};

std::optional<ImplTarget> impl_args(const Attribute& a) {
    if (!a.has_args) return std::nullopt;
    auto groups = a.args();
    if (groups.size() != 2 || groups[0].size() != 1 || groups[1].size() != 1) return std::nullopt;
    if (groups[0][0].kind != TokenKind::StringLiteral || groups[1][0].kind != TokenKind::Identifier) return std::nullopt;
    return ImplTarget{groups[0][0].text, groups[1][0].text};
}

std::string pragma_name(PragmaKind k) {
    switch (k) {
        case PragmaKind::Register: return "register";
        case PragmaKind::Unregister: return "unregister";
        case PragmaKind::Acquire: return "acquire";
        case PragmaKind::Wait: return "wait";
        case PragmaKind::OpenCL: return "opencl";
        case PragmaKind::Unknown: break;
    }
    return "?";
}

}  // namespace

void Scope::declare(const std::string& name, VarInfo info) {
    auto& frame = frames_.back();
    for (auto& [n, v] : frame) {
        if (n == name) {
            v = std::move(info);
            return;
        }
    }
    frame.emplace_back(name, std::move(info));
}

const VarInfo* Scope::lookup(std::string_view name) const {
    for (auto f = frames_.rbegin(); f != frames_.rend(); ++f)
        for (const auto& [n, v] : *f)
            if (n == name) return &v;
    return nullptr;
}

ModeResult derive_access_mode(const ParamDecl& param) {
    ModeResult r;
    bool output = param.has_attr(AttrKind::Output);
    if (!param.type.is_buffer()) {
        r.mode = AccessMode::ScalarValue;
        if (output)
            r.diagnostics.push_back(error(param.loc, diag::OutputPlacement,
                                          "output attribute on non-pointer parameter " + q(param.name)));
        return r;
    }
    if (output && param.type.const_qualified) {
        r.diagnostics.push_back(error(param.loc, diag::ModeConflict,
                                      "parameter " + q(param.name) + " is both const-qualified and output"));
        r.mode = AccessMode::R;
        return r;
    }
    r.mode = output ? AccessMode::W : param.type.const_qualified ? AccessMode::R : AccessMode::RW;
    return r;
}

TypeExpr normalize_param_type(const TypeExpr& t) {
    TypeExpr n = t;
    n.global_qualified = false;
    if (!n.array_dims.empty()) {
        n.array_dims.erase(n.array_dims.begin());
        n.pointer_depth += 1;
    }
    for (auto& d : n.array_dims)
        if (d.kind == frontend::ArrayDim::Kind::Symbol) d.symbol.clear();
    return n;
}

std::string signature_string(const std::vector<TypeExpr>& params) {
    std::string out = "void (";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ", ";
        out += params[i].str();
    }
    if (params.empty()) out += "void";
    return out + ")";
}

Diagnostics check_signature(const TaskDecl& task, const FunctionDecl& impl_fn) {
    std::vector<TypeExpr> want, got;
    for (const auto& p : task.params) want.push_back(normalize_param_type(p.type));
    for (const auto& p : impl_fn.params) got.push_back(normalize_param_type(p.type));
    std::size_t n = std::min(want.size(), got.size());
    std::size_t pos = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(want[i] == got[i])) {
            pos = i;
            break;
        }
    }
    if (pos == n && want.size() == got.size()) return {};
    std::string msg = "signature mismatch between task " + q(task.name) + " of type '" + signature_string(want) +
                      "' and implementation " + q(impl_fn.name) + " of type '" + signature_string(got) +
                      "' at parameter " + std::to_string(pos + 1);
    return {error(impl_fn.loc, diag::SigMismatch, msg)};
}

Diagnostics check_opencl_types(const TaskDecl& task, const TargetConfig& cfg) {
    Diagnostics out;
    for (const auto& p : task.params) {
        BaseType b = p.type.base;
        if (b == BaseType::SizeT) {
            out.push_back(warning(p.loc, diag::OpenclType, "'size_t' does not correspond to a known OpenCL type"));
        } else if ((b == BaseType::Long || b == BaseType::UnsignedLong) && cfg.long_width_bits != 64) {
            std::string c = b == BaseType::Long ? "long int" : "long unsigned int";
            out.push_back(warning(p.loc, diag::OpenclType, "C type '" + c + "' differs from the same-named OpenCL type"));
        } else if (b == BaseType::Char && !cfg.char_signed) {
            out.push_back(warning(p.loc, diag::OpenclType, "C type 'char' differs from the same-named OpenCL type"));
        }
    }
    return out;
}

RegistrationResult resolve_registration(const PragmaNode& pragma, const Scope& scope, const TargetConfig& cfg,
                                        const std::string& function) {
    RegistrationResult r;
    const VarInfo* v = scope.lookup(pragma.var);
    if (!v) {
        r.diagnostics.push_back(error(pragma.loc, diag::Undeclared, q(pragma.var) + " undeclared"));
        return r;
    }
    if (!v->type.is_buffer()) {
        r.diagnostics.push_back(error(pragma.loc, diag::RegisterType,
                                      q(pragma.var) + " is not a pointer or array and cannot be registered"));
        return r;
    }
    TypeExpr elem = v->type.element();
    if (elem.base == BaseType::Void && elem.pointer_depth == 0) {
        r.diagnostics.push_back(error(pragma.loc, diag::RegisterType,
                                      "cannot register " + q(pragma.var) + ": element type is void"));
        return r;
    }
    RegistrationSite site;
    site.function = function;
    site.var = pragma.var;
    site.elem_type = elem;
    site.elem_size = cfg.size_of(elem);
    site.loc = pragma.loc;
    if (pragma.size) {
        site.count_expr = pragma.size;
    } else if (!v->is_param && all_constant_dims(v->type)) {
        site.static_count = dims_product(v->type);
    } else {
        r.diagnostics.push_back(error(pragma.loc, diag::RegisterSize,
                                      "size of " + q(pragma.var) + " is unknown; specify the number of elements"));
        return r;
    }
    bool automatic = !v->is_param && !v->is_global && v->type.is_array() && v->storage == StorageClass::None &&
                     !v->heap_allocated;
    if (automatic)
        r.diagnostics.push_back(warning(pragma.loc, diag::AutomaticRegister,
                                        "storage of automatic variable " + q(pragma.var) +
                                            " may be reclaimed before tasks that use it have completed"));
    r.site = std::move(site);
    return r;
}

std::pair<TaskDecl, TaskImpl> attach_implicit_cpu_impl(const FunctionDecl& task_def) {
    TaskDecl decl;
    decl.name = task_def.name;
    decl.loc = task_def.loc;
    decl.is_extern = task_def.storage == StorageClass::Extern;
    for (const ParamDecl& p : task_def.params)
        decl.params.push_back(TaskParam{p.name, p.type, derive_access_mode(p).mode, p.loc});
    decl.implicit_cpu_body = task_def.body;

    TaskImpl impl;
    impl.task = task_def.name;
    impl.target = Target::Cpu;
    impl.function = task_def.name + ".cpu_implementation";
    impl.defined = task_def.body.has_value();
    impl.implicit = true;
    impl.params = task_def.params;
    impl.body = task_def.body;
    impl.loc = task_def.loc;
    return {std::move(decl), std::move(impl)};
}

AnalysisResult analyze(const TranslationUnit& tu, const TargetConfig& cfg, const AnalyzeOptions& opts) {
    AnalysisResult result;
    ProgramModel& model = result.model;
    Diagnostics& diags = result.diagnostics;
    model.file = tu.file;
    model.config = cfg;

    // Merge all declarations of each function, in order of first appearance.
    std::vector<MergedFunction> functions;
    std::map<std::string, std::size_t> fn_index;
    std::vector<const PragmaNode*> file_pragmas;
    for (const TopLevel& item : tu.items) {
        switch (item.kind) {
            case TopLevel::Kind::Variables:
                for (const VarDecl& v : item.variables) {
                    check_var_attrs(v, false, diags);
                    model.globals.push_back(v);
                }
                break;
            case TopLevel::Kind::Pragma: file_pragmas.push_back(&item.pragma); break;
            case TopLevel::Kind::Function: {
                const FunctionDecl& f = item.function;
                auto [it, fresh] = fn_index.try_emplace(f.name, functions.size());
                if (fresh) {
                    functions.push_back(MergedFunction{f, f.attrs, f.loc, f.body.has_value(), f.storage == StorageClass::Extern});
                    break;
                }
                MergedFunction& m = functions[it->second];
                m.any_extern = m.any_extern || f.storage == StorageClass::Extern;
                for (const Attribute& a : f.attrs) m.attrs.push_back(a);
                if (f.body) {
                    if (m.defined) {
                        diags.push_back(error(f.loc, diag::Redefinition, "redefinition of " + q(f.name)));
                    } else {
                        m.fn = f;
                        m.defined = true;
                    }
                }
                break;
            }
        }
    }
    for (MergedFunction& m : functions) m.fn.attrs = m.attrs;

    // Attribute sanity on every function and parameter.
    for (const MergedFunction& m : functions) {
        check_attr_args(m.attrs, diags);
        for (const ParamDecl& p : m.fn.params) {
            check_attr_args(p.attrs, diags);
            for (const Attribute& a : p.attrs) {
                if (a.kind == AttrKind::Task)
                    diags.push_back(error(p.loc, diag::TaskOnNonFunction, "task attribute on non-function"));
                if (a.kind == AttrKind::TaskImplementation)
                    diags.push_back(
                        error(p.loc, diag::ImplOnNonFunction, "task_implementation attribute on non-function"));
                if (a.kind == AttrKind::HeapAllocated || a.kind == AttrKind::Registered)
                    diags.push_back(error(p.loc, diag::ScopedAttr,
                                          q(a.name) + " attribute requires a block-scope automatic array of constant size"));
            }
        }
    }

    // Tasks.
    std::vector<std::optional<TaskImpl>> implicit_impls;
    for (const MergedFunction& m : functions) {
        const FunctionDecl& f = m.fn;
        if (!f.has_attr(AttrKind::Task)) continue;
        if (f.has_attr(AttrKind::TaskImplementation))
            diags.push_back(error(f.loc, diag::ImplArgs,
                                  q(f.name) + " cannot be both a task and a task implementation"));
        if (!(f.return_type.base == BaseType::Void && !f.return_type.is_buffer()))
            diags.push_back(error(f.loc, diag::TaskReturnType,
                                  "task " + q(f.name) + " must have return type void, not '" + f.return_type.str() + "'"));
        std::set<std::string> seen;
        for (const ParamDecl& p : f.params) {
            ModeResult mr = derive_access_mode(p);
            diags.insert(diags.end(), mr.diagnostics.begin(), mr.diagnostics.end());
            if (p.type.is_buffer()) {
                TypeExpr elem = p.type.element();
                if (p.type.pointer_depth > 1 || (elem.base == BaseType::Void))
                    diags.push_back(error(p.loc, diag::ParamType,
                                          "task parameter " + q(p.name) + " of type '" + p.type.str() +
                                              "' is not a buffer of scalars"));
                for (const auto& d : p.type.array_dims)
                    if (d.kind == frontend::ArrayDim::Kind::Symbol && !seen.count(d.symbol))
                        diags.push_back(error(p.loc, diag::ParamType,
                                              "array bound " + q(d.symbol) + " of parameter " + q(p.name) +
                                                  " does not name an earlier parameter"));
            } else if (p.type.base == BaseType::Void) {
                diags.push_back(error(p.loc, diag::ParamType, "task parameter " + q(p.name) + " has type void"));
            } else if (cfg.size_of(p.type) > 8) {
                diags.push_back(error(p.loc, diag::ScalarWidth,
                                      "scalar task parameter " + q(p.name) + " is wider than 8 bytes"));
            }
            seen.insert(p.name);
        }
        auto [decl, impl] = attach_implicit_cpu_impl(f);
        decl.loc = m.first_loc;
        decl.is_extern = m.any_extern;
        model.tasks.push_back(std::move(decl));
        if (f.body) {
            implicit_impls.push_back(std::move(impl));
        } else {
            implicit_impls.push_back(std::nullopt);
        }
    }
    std::map<std::string, std::size_t> task_idx;
    for (std::size_t i = 0; i < model.tasks.size(); ++i) task_idx[model.tasks[i].name] = i;

    std::vector<std::map<Target, std::size_t>> per_task(model.tasks.size());
    for (std::size_t i = 0; i < model.tasks.size(); ++i) {
        if (!implicit_impls[i]) continue;
        per_task[i][Target::Cpu] = model.impls.size();
        model.impls.push_back(std::move(*implicit_impls[i]));
    }

    // Explicit implementations.
    std::map<std::string, std::size_t> impl_by_fn;
    for (const MergedFunction& m : functions) {
        const FunctionDecl& f = m.fn;
        const Attribute* a = f.find_attr(AttrKind::TaskImplementation);
        if (!a || f.has_attr(AttrKind::Task)) continue;
        auto args = impl_args(*a);
        if (!args) {
            diags.push_back(error(a->loc, diag::ImplArgs,
                                  "task_implementation attribute takes a target string and a task name"));
            continue;
        }
        auto target = target_from_string(args->target);
        if (!target) {
            diags.push_back(error(a->loc, diag::ImplTarget,
                                  "invalid task implementation target '" + args->target +
                                      "'; expected 'cpu', 'opencl', or 'cuda'"));
            continue;
        }
        auto ti = task_idx.find(args->task);
        if (ti == task_idx.end()) {
            diags.push_back(error(a->loc, diag::ImplUnknownTask, q(args->task) + " is not a task"));
            continue;
        }
        const TaskDecl& task = model.tasks[ti->second];
        auto& slots = per_task[ti->second];
        if (slots.count(*target)) {
            const TaskImpl& prev = model.impls[slots[*target]];
            if (prev.implicit) {
                diags.push_back(error(f.loc, diag::ImplAmbiguous,
                                      "task " + q(task.name) + " has both a body and an explicit cpu implementation " +
                                          q(f.name)));
            } else {
                diags.push_back(error(f.loc, diag::ImplDuplicate,
                                      "duplicate " + std::string(to_string(*target)) + " implementation " + q(f.name) +
                                          " for task " + q(task.name) + "; previous one is " + q(prev.function)));
            }
            continue;
        }
        if (!(f.return_type.base == BaseType::Void && !f.return_type.is_buffer()))
            diags.push_back(error(f.loc, diag::TaskReturnType,
                                  "task implementation " + q(f.name) + " must have return type void"));
        Diagnostics sig = check_signature(task, f);
        diags.insert(diags.end(), sig.begin(), sig.end());
        if (is_device(*target) && f.body)
            diags.push_back(error(f.loc, diag::DeviceImplBody,
                                  std::string(to_string(*target)) + " implementation " + q(f.name) +
                                      " must not have a body; bind it to a kernel with '#pragma starpu opencl'"));
        TaskImpl impl;
        impl.task = task.name;
        impl.target = *target;
        impl.function = f.name;
        impl.defined = *target == Target::Cpu && f.body.has_value();
        impl.params = f.params;
        if (*target == Target::Cpu) impl.body = f.body;
        impl.loc = f.loc;
        slots[*target] = model.impls.size();
        impl_by_fn[f.name] = model.impls.size();
        model.impls.push_back(std::move(impl));
    }

    // File-scope pragmas.
    for (const PragmaNode* p : file_pragmas) {
        if (p->kind == PragmaKind::Unknown) {
            if (p->is_starpu())
                diags.push_back(warning(p->loc, diag::UnknownPragma, "unknown starpu pragma '" + p->raw + "'"));
            continue;
        }
        if (p->kind != PragmaKind::OpenCL) {
            diags.push_back(error(p->loc, diag::PragmaPlacement,
                                  "'" + pragma_name(p->kind) + "' pragma is only allowed inside a function"));
            continue;
        }
        auto it = impl_by_fn.find(p->impl);
        if (it == impl_by_fn.end() || !is_device(model.impls[it->second].target)) {
            diags.push_back(error(p->loc, diag::OpenclPragma,
                                  q(p->impl) + " is not an opencl or cuda task implementation"));
            continue;
        }
        TaskImpl& impl = model.impls[it->second];
        if (impl.kernel_binding) {
            diags.push_back(error(p->loc, diag::OpenclPragma, q(p->impl) + " is already bound to a kernel"));
            continue;
        }
        if (p->group_size <= 0) {
            diags.push_back(error(p->loc, diag::OpenclPragma, "group size must be positive"));
            continue;
        }
        impl.kernel_binding = KernelBinding{p->file, p->kernel, p->group_size, p->loc};
        impl.defined = true;
    }

    // Completeness and codelets.
    for (std::size_t i = 0; i < model.tasks.size(); ++i) {
        const TaskDecl& task = model.tasks[i];
        CodeletDescriptor c;
        c.name = task.name;
        for (const auto& p : task.params)
            if (p.mode != AccessMode::ScalarValue) c.modes.push_back(p.mode);
        c.nbuffers = c.modes.size();
        c.impls = per_task[i];
        bool device = false;
        for (const auto& [t, idx] : c.impls) {
            if (is_device(t)) device = true;
            const TaskImpl& impl = model.impls[idx];
            if (!impl.defined && opts.complete_unit) {
                std::string how = is_device(t) ? "has no kernel binding" : "is declared but not defined";
                diags.push_back(error(impl.loc, diag::ImplUndefined, "task implementation " + q(impl.function) + " " + how));
            }
        }
        if (device) {
            Diagnostics w = check_opencl_types(task, cfg);
            diags.insert(diags.end(), w.begin(), w.end());
        }
        if (c.impls.empty() && (!task.is_extern || opts.complete_unit))
            diags.push_back(error(task.loc, diag::NoImpl, "task " + q(task.name) + " has no implementation"));
        model.codelets.push_back(std::move(c));
    }

    // Function bodies.
    std::map<std::string, const TaskDecl*> tasks;
    for (const TaskDecl& t : model.tasks) tasks[t.name] = &t;
    Context ctx{cfg, tasks, model.globals, model, diags};
    for (const MergedFunction& m : functions) {
        if (!m.fn.body) continue;
        std::string name = m.fn.has_attr(AttrKind::Task) ? m.fn.name + ".cpu_implementation" : m.fn.name;
        BodyChecker(ctx, name).run(m.fn.params, *m.fn.body);
        if (m.fn.name == "main") model.main = m.fn;
    }

    sort_diagnostics(diags);
    return result;
}

}  // namespace taskc::sema
