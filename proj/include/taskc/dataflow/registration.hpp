#pragma once

#include <map>
#include <optional>
#include <string>

#include "taskc/dataflow/cfg.hpp"
#include "taskc/sema/model.hpp"
#include "taskc/support/diagnostic.hpp"

namespace taskc::dataflow {

/// For every pointer- or array-valued identifier use, the memory region it
/// must point to on all paths reaching it: a variable name for parameters,
/// arrays and uninitialized pointers, "malloc@line:col" for heap blocks.
/// nullopt when the region is unknown or differs between paths.
std::map<const frontend::Expr*, std::optional<std::string>> must_alias_roots(const CFG& cfg);

/// Warns on every task-call buffer argument that may reach the call without
/// its region being registered.
Diagnostics check_registration(const CFG& cfg, const sema::ProgramModel& model);

/// Runs check_registration over every function defined in the unit.
Diagnostics check_registration(const frontend::TranslationUnit& tu, const sema::ProgramModel& model);

}  // namespace taskc::dataflow
