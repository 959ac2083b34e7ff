#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "taskc/support/source_location.hpp"

namespace taskc {

enum class Severity { Error, Warning };

std::string_view to_string(Severity s);

/// A compiler diagnostic. `code` is a stable identifier (E_*, W_*) meant for
/// machine consumers; `message` is the human text printed after the
/// "file:line:col: severity: " prefix.
struct Diagnostic {
    Severity severity = Severity::Error;
    SourceLocation location;
    std::string message;
    std::string code;

    bool operator==(const Diagnostic&) const = default;

    std::string format() const;
};

using Diagnostics = std::vector<Diagnostic>;

/// Stable sort by (file, line, column); emission order breaks ties.
void sort_diagnostics(Diagnostics& diags);

bool has_errors(const Diagnostics& diags);
std::size_t count(const Diagnostics& diags, Severity s);

// Stable diagnostic codes.
namespace diag {
inline constexpr std::string_view TaskOnNonFunction = "E_TASK_NON_FUNCTION";
inline constexpr std::string_view ImplOnNonFunction = "E_IMPL_NON_FUNCTION";
inline constexpr std::string_view TaskReturnType = "E_TASK_RETURN_TYPE";
inline constexpr std::string_view ImplArgs = "E_IMPL_ARGS";
inline constexpr std::string_view ImplTarget = "E_IMPL_TARGET";
inline constexpr std::string_view ImplUnknownTask = "E_IMPL_UNKNOWN_TASK";
inline constexpr std::string_view ImplDuplicate = "E_IMPL_DUPLICATE";
inline constexpr std::string_view ImplAmbiguous = "E_IMPL_AMBIGUOUS";
inline constexpr std::string_view ImplUndefined = "E_IMPL_UNDEFINED";
inline constexpr std::string_view DeviceImplBody = "E_DEVICE_IMPL_BODY";
inline constexpr std::string_view NoImpl = "E_NO_IMPL";
inline constexpr std::string_view SigMismatch = "E_SIG_MISMATCH";
inline constexpr std::string_view ParamType = "E_PARAM_TYPE";
inline constexpr std::string_view ScalarWidth = "E_SCALAR_WIDTH";
inline constexpr std::string_view ModeConflict = "E_MODE_CONFLICT";
inline constexpr std::string_view OutputPlacement = "E_OUTPUT_PLACEMENT";
inline constexpr std::string_view AttrArgs = "E_ATTR_ARGS";
inline constexpr std::string_view CallArity = "E_CALL_ARITY";
inline constexpr std::string_view Undeclared = "E_UNDECLARED";
inline constexpr std::string_view RegisterType = "E_REGISTER_TYPE";
inline constexpr std::string_view RegisterSize = "E_REGISTER_SIZE";
inline constexpr std::string_view ScopedAttr = "E_SCOPED_ATTR";
inline constexpr std::string_view OpenclPragma = "E_OPENCL_PRAGMA";
inline constexpr std::string_view KernelFile = "E_KERNEL_FILE";
inline constexpr std::string_view KernelMissing = "E_KERNEL_MISSING";
inline constexpr std::string_view KernelSignature = "E_KERNEL_SIGNATURE";
inline constexpr std::string_view Lowering = "E_LOWERING";
inline constexpr std::string_view PragmaPlacement = "E_PRAGMA_PLACEMENT";
inline constexpr std::string_view Redefinition = "E_REDEFINITION";
inline constexpr std::string_view AutomaticRegister = "W_AUTOMATIC_REGISTER";
inline constexpr std::string_view OpenclType = "W_OPENCL_TYPE";
inline constexpr std::string_view UnknownPragma = "W_UNKNOWN_PRAGMA";
inline constexpr std::string_view MaybeUnregistered = "W_MAYBE_UNREGISTERED";
}  // namespace diag

}  // namespace taskc
