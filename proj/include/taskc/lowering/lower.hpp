#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "taskc/lowering/program.hpp"
#include "taskc/sema/model.hpp"
#include "taskc/support/diagnostic.hpp"

namespace taskc::lowering {

class LoweringError : public std::runtime_error {
public:
    LoweringError(SourceLocation where, std::string msg, std::string_view code = diag::Lowering);

    SourceLocation loc;
    std::string message;
    std::string code;

    Diagnostic diagnostic() const;
};

/// Lowers a function body written in TaskC (or, with the OpenCL data model,
/// an OpenCL kernel) to IR. Globals are not visible.
IrFunction lower_kernel_body(const std::string& name, const std::vector<frontend::ParamDecl>& params,
                             const frontend::Stmt& body, const DataModel& dm);

TaskBodyPlan lower_task_body(const sema::TaskDecl& task);

WrapperPlan lower_wrapper(const sema::TaskDecl& task, const sema::TargetConfig& cfg);

std::vector<ParamInfo> task_params(const sema::TaskDecl& task, const sema::TargetConfig& cfg);

/// Reads and parses the bound kernel file (relative paths resolve against
/// `base_dir`), checks it against the task, and lowers it.
EmbeddedKernel embed_kernel(const sema::TaskImpl& impl, const sema::TaskDecl& task, const std::string& base_dir);

struct MainLowering {
    std::vector<MainOp> ops;
    std::vector<ValType> regs;
};

/// Lowers `main` (with file-scope variables) to submitter ops, including
/// scoped allocation, registration and cleanup.
MainLowering lower_main(const sema::ProgramModel& model);

/// Whole-program lowering. The model must come from an analysis with no
/// errors. Kernel files resolve against the source file's directory.
TaskProgram emit_program(const sema::ProgramModel& model);

}  // namespace taskc::lowering
