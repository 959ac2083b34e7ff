#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskc/lowering/program.hpp"
#include "taskc/sim/machine.hpp"
#include "taskc/sim/trace.hpp"

namespace taskc::sim {

enum class Policy { Eager, Heft };

std::string_view to_string(Policy p);
std::optional<Policy> policy_from_string(std::string_view s);

struct KernelBuffer {
    std::uint8_t* data = nullptr;
    std::uint64_t bytes = 0;
};

/// Runs one implementation on private copies of `buffers` (one per buffer
/// slot; slots sharing storage alias) and copies the results back only if
/// it finishes. Device kernels run once per element of the first buffer.
/// Throws lowering::KernelFault.
void evaluate_kernel(const lowering::CodeletProgram& c, const lowering::ImplProgram& impl,
                     const std::vector<KernelBuffer>& buffers, const std::vector<std::uint8_t>& scalars,
                     bool parallel = false);

struct RunOptions {
    Policy policy = Policy::Eager;
    bool parallel_kernels = true;
};

struct TaskRecord {
    int id = 0;
    std::string codelet;
    int worker = -1;
    double start = 0;
    double end = 0;
    std::vector<int> deps;
};

struct HandleDump {
    int id = 0;
    std::string name;
    lowering::ValType elem = lowering::ValType::U8;
    std::vector<std::uint8_t> bytes;

    /// Decimal element values separated by spaces.
    std::string values() const;
};

struct RunResult {
    bool ok = true;
    std::string error;
    SourceLocation error_loc;

    Trace trace;
    double makespan = 0;
    std::vector<TaskRecord> tasks;
    std::vector<HandleDump> buffers;  // every handle ever registered, by id

    std::uint64_t coherence_checks = 0;
    std::uint64_t coherence_violations = 0;
    std::size_t live_handles = 0;
    std::uint64_t registered = 0;
    std::uint64_t unregistered = 0;
    std::uint64_t allocs = 0;
    std::uint64_t frees = 0;
    std::size_t live_scoped = 0;
};

/// Simulates `program` on `machine`. Throws ConfigError when the machine or
/// performance model cannot run the program; runtime failures are reported
/// in the result (with an error event in the trace).
RunResult run(const lowering::TaskProgram& program, const Machine& machine, const PerfModel& perf,
              const RunOptions& options = {});

}  // namespace taskc::sim
