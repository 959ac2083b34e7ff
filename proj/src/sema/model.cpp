#include "taskc/sema/model.hpp"

namespace taskc::sema {

std::string_view to_string(AccessMode m) {
    switch (m) {
        case AccessMode::R: return "R";
        case AccessMode::W: return "W";
        case AccessMode::RW: return "RW";
        case AccessMode::ScalarValue: return "VALUE";
    }
    return "?";
}

std::optional<AccessMode> access_mode_from_string(std::string_view s) {
    if (s == "R") return AccessMode::R;
    if (s == "W") return AccessMode::W;
    if (s == "RW") return AccessMode::RW;
    if (s == "VALUE") return AccessMode::ScalarValue;
    return std::nullopt;
}

std::string_view to_string(Target t) {
    switch (t) {
        case Target::Cpu: return "cpu";
        case Target::OpenCL: return "opencl";
        case Target::Cuda: return "cuda";
    }
    return "?";
}

std::optional<Target> target_from_string(std::string_view s) {
    if (s == "cpu") return Target::Cpu;
    if (s == "opencl") return Target::OpenCL;
    if (s == "cuda") return Target::Cuda;
    return std::nullopt;
}

std::size_t TargetConfig::size_of(BaseType b) const {
    switch (b) {
        case BaseType::Void: return 1;
        case BaseType::Char:
        case BaseType::SignedChar:
        case BaseType::UnsignedChar: return 1;
        case BaseType::Short:
        case BaseType::UnsignedShort: return 2;
        case BaseType::Int:
        case BaseType::UnsignedInt:
        case BaseType::Float: return 4;
        case BaseType::Long:
        case BaseType::UnsignedLong: return static_cast<std::size_t>(long_width_bits / 8);
        case BaseType::SizeT: return static_cast<std::size_t>(pointer_width_bits / 8);
        case BaseType::Double: return 8;
    }
    return 0;
}

std::size_t TargetConfig::size_of(const TypeExpr& t) const {
    if (t.pointer_depth > 0) return static_cast<std::size_t>(pointer_width_bits / 8);
    std::size_t n = size_of(t.base);
    for (const auto& d : t.array_dims)
        if (d.kind == frontend::ArrayDim::Kind::Constant) n *= static_cast<std::size_t>(d.value);
    return n;
}

bool TargetConfig::is_signed(BaseType b) const {
    switch (b) {
        case BaseType::Char: return char_signed;
        case BaseType::SignedChar:
        case BaseType::Short:
        case BaseType::Int:
        case BaseType::Long:
        case BaseType::Float:
        case BaseType::Double: return true;
        default: return false;
    }
}

std::size_t TaskDecl::buffer_count() const {
    std::size_t n = 0;
    for (const auto& p : params)
        if (p.mode != AccessMode::ScalarValue) ++n;
    return n;
}

const TaskDecl* ProgramModel::find_task(std::string_view name) const {
    for (const auto& t : tasks)
        if (t.name == name) return &t;
    return nullptr;
}

std::optional<std::size_t> ProgramModel::task_index(std::string_view name) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].name == name) return i;
    return std::nullopt;
}

const RegistrationSite* ProgramModel::registration_at(const SourceLocation& loc) const {
    for (const auto& r : registrations)
        if (r.loc == loc) return &r;
    return nullptr;
}

const ScopedVarSite* ProgramModel::scoped_var_at(const SourceLocation& loc) const {
    for (const auto& s : scoped_vars)
        if (s.loc == loc) return &s;
    return nullptr;
}

}  // namespace taskc::sema
