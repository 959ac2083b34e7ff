#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskc/lowering/ir.hpp"

namespace taskc::lowering {

/// Raised by the evaluator on an invalid memory access or integer division
/// by zero. `op_index` is the faulting op's pre-order index.
class KernelFault : public std::runtime_error {
public:
    KernelFault(int op, SourceLocation where, std::string what);

    int op_index;
    SourceLocation loc;
    std::string detail;
};

struct Region {
    std::uint64_t base = 0;
    std::vector<std::uint8_t> bytes;
    bool pinned = false;
    std::string name;
};

/// Flat simulated address space made of disjoint regions. Addresses come
/// from a bump allocator (64-byte aligned, never reused).
class AddressSpace {
public:
    explicit AddressSpace(std::uint64_t first = 0x10000) : next_(first) {}

    std::uint64_t allocate(std::size_t bytes, bool pinned = false, std::string name = {});
    /// Releases the region based at `base`; false if there is none.
    bool release(std::uint64_t base);

    Region* region_at(std::uint64_t base);
    const Region* region_at(std::uint64_t base) const;
    /// Region containing `addr`, if any.
    const Region* find(std::uint64_t addr) const;
    /// The `n` bytes at `addr`, or nullptr unless they lie in one region.
    std::uint8_t* span(std::uint64_t addr, std::size_t n);

    const std::map<std::uint64_t, Region>& regions() const { return regions_; }

private:
    std::map<std::uint64_t, Region> regions_;
    std::uint64_t next_;
};

struct ExecContext {
    AddressSpace* mem = nullptr;
    std::uint64_t global_id = 0;
    std::vector<std::uint64_t> allocas;  // released by run_function
};

/// Executes ops over a register file. Returns false once a Ret has run.
bool execute(const std::vector<Op>& ops, std::vector<std::uint64_t>& regs, ExecContext& ctx);

/// Runs a whole function: fresh zeroed registers with parameter registers
/// taken from `args` (in parameter order), allocas released at the end.
void run_function(const IrFunction& fn, const std::vector<std::uint64_t>& args, ExecContext& ctx);

/// Runs a device kernel once per global id in 0..n-1. With `parallel`, work
/// items are spread over OpenMP threads in chunks of `group` ids. Either way
/// a fault is reported for the smallest faulting global id; memory is left
/// in an unspecified state after a fault.
void run_ndrange(const IrFunction& fn, const std::vector<std::uint64_t>& args, AddressSpace& mem, std::uint64_t n,
                 std::uint64_t group, bool parallel);

/// Whether `fn` may run its work items concurrently (it allocates nothing).
bool parallel_safe(const IrFunction& fn);

}  // namespace taskc::lowering
