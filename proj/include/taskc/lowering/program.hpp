#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskc/lowering/ir.hpp"
#include "taskc/sema/model.hpp"

namespace taskc::lowering {

inline constexpr const char* kUnregisteredPointer = "attempt to use unregistered pointer";

/// A task parameter as seen by the runtime (host data model).
struct ParamInfo {
    std::string name;
    bool buffer = false;
    ValType type = ValType::I32;  // scalars
    ValType elem = ValType::I32;  // buffers
    std::uint64_t elem_size = 0;  // buffers
    sema::AccessMode mode = sema::AccessMode::ScalarValue;

    bool operator==(const ParamInfo&) const = default;
};

struct ScalarSlot {
    std::size_t param = 0;  // index into the task's parameters
    ValType type = ValType::I32;
    std::size_t width = 0;
    std::size_t offset = 0;

    bool operator==(const ScalarSlot&) const = default;
};

struct WrapperPlan {
    std::vector<std::size_t> buffer_slots;  // slot k -> parameter index
    std::vector<ScalarSlot> scalar_pack;

    bool operator==(const WrapperPlan&) const = default;

    std::size_t pack_size() const;
};

struct LookupStep {
    std::size_t param = 0;
    std::string message = kUnregisteredPointer;

    bool operator==(const LookupStep&) const = default;
};

struct TaskBodyPlan {
    std::vector<LookupStep> lookups;
    std::string codelet;
    std::string submit_error;

    bool operator==(const TaskBodyPlan&) const = default;
};

struct EmbeddedKernel {
    std::string impl;
    std::string file;
    std::string kernel_name;
    std::int64_t group_size = 1;
    std::string source_text;
    IrFunction ir;

    bool operator==(const EmbeddedKernel&) const = default;
};

struct ImplProgram {
    std::string function;
    sema::Target target = sema::Target::Cpu;
    bool implicit = false;
    std::optional<IrFunction> ir;            // implementations written in TaskC
    std::optional<EmbeddedKernel> kernel;    // OpenCL kernels

    bool operator==(const ImplProgram&) const = default;

    const IrFunction& function_ir() const { return kernel ? kernel->ir : *ir; }
};

struct CodeletProgram {
    std::string name;
    std::size_t nbuffers = 0;
    std::vector<sema::AccessMode> modes;
    std::vector<ParamInfo> params;
    WrapperPlan wrapper;
    TaskBodyPlan body;
    std::vector<ImplProgram> impls;  // ordered by target

    bool operator==(const CodeletProgram&) const = default;

    const ImplProgram* impl_for(sema::Target t) const;
};

struct CleanupItem {
    std::string var;
    int reg = -1;
    bool unregister = false;
    bool free = true;

    bool operator==(const CleanupItem&) const = default;
};

/// One step of the main procedure, executed by the submitter.
struct MainOp {
    enum class Kind { Plain, Alloc, Register, Unregister, Acquire, Wait, CallTask, ScopeEndCleanup, HostLoop, HostBranch, Return };

    Kind kind = Kind::Plain;
    std::vector<Op> ops;  // Plain: fragment; HostLoop: condition fragment
    std::vector<Op> step;  // HostLoop
    std::string var;
    int reg = -1;          // Alloc: destination; Register/Unregister/Acquire: pointer; loop/branch: test
    int count_reg = -1;    // Register
    ValType type = ValType::I32;  // loop/branch test type; Register element type
    std::uint64_t bytes = 0;       // Alloc
    std::vector<std::int64_t> shape;  // Alloc
    std::uint64_t elem_size = 0;   // Alloc, Register
    bool pinned = false;           // Alloc
    std::string task;              // CallTask
    std::vector<int> args;         // CallTask
    std::vector<CleanupItem> cleanup;  // ScopeEndCleanup, Return
    std::vector<MainOp> body;          // HostLoop, HostBranch
    std::vector<MainOp> orelse;        // HostBranch
    SourceLocation loc;

    bool operator==(const MainOp&) const = default;
};

std::string_view to_string(MainOp::Kind k);

struct TaskProgram {
    std::string source;
    sema::TargetConfig config;
    std::vector<CodeletProgram> codelets;
    std::vector<ValType> main_regs;
    std::vector<MainOp> main_ops;

    bool operator==(const TaskProgram&) const = default;

    const CodeletProgram* find_codelet(std::string_view name) const;
};

class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Serialized artifact (JSON text, stable key order, trailing newline).
std::string serialize(const TaskProgram& p);
/// Throws ArtifactError on malformed input.
TaskProgram deserialize(std::string_view text);

// Scalar packing: fixed little-endian layout, no padding.
std::vector<std::uint8_t> pack_scalars(const WrapperPlan& plan, const std::vector<std::uint64_t>& values);
std::vector<std::uint64_t> unpack_scalars(const WrapperPlan& plan, const std::vector<std::uint8_t>& bytes);

}  // namespace taskc::lowering
