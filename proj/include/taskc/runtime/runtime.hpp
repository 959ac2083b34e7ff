#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskc/lowering/eval.hpp"
#include "taskc/lowering/program.hpp"

namespace taskc::runtime {

using lowering::AddressSpace;
using sema::AccessMode;

class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OverlapError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class UseAfterUnregister : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class SubmitError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Raised by the blocking operations when a task has failed.
class TaskFailure : public RuntimeError {
public:
    TaskFailure(int task, std::string msg, SourceLocation where)
        : RuntimeError(msg), task(task), message(std::move(msg)), loc(std::move(where)) {}

    int task;
    std::string message;
    SourceLocation loc;
};

class CoherenceError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class NodeKind { Host, Device };

struct MemoryNode {
    int id = 0;
    NodeKind kind = NodeKind::Host;
    std::optional<std::uint64_t> capacity;
};

enum class Coherence { Invalid, Shared, Owner };

std::string_view to_string(Coherence c);

struct DataHandle {
    int id = 0;
    std::string name;
    std::uint64_t base = 0;
    std::uint64_t elem_size = 0;
    std::uint64_t nx = 0;
    lowering::ValType elem = lowering::ValType::U8;
    bool pinned = false;
    std::vector<Coherence> state;                  // per node
    std::vector<std::vector<std::uint8_t>> copy;   // per device node; host data lives in the heap

    std::uint64_t bytes() const { return elem_size * nx; }
    int owner() const;
    bool valid_on(int node) const { return state[static_cast<std::size_t>(node)] != Coherence::Invalid; }
    /// Preferred source when `node` needs a copy: the owner, else the lowest valid node.
    int source_for(int node) const;
};

/// Map from base address to live handle, plus the live scoped allocations.
class Registry {
public:
    struct Scoped {
        std::string var;
        std::uint64_t base = 0;
        std::uint64_t bytes = 0;
        bool pinned = false;
    };

    /// Throws OverlapError if [base, base + bytes) meets a live handle.
    DataHandle& add(DataHandle h);
    DataHandle* lookup(std::uint64_t base);
    const DataHandle* lookup(std::uint64_t base) const;
    DataHandle* by_id(int id);
    void remove(int id);

    std::size_t live() const { return live_.size(); }
    const std::map<std::uint64_t, int>& live_handles() const { return live_; }

    std::vector<Scoped> scoped;

private:
    friend class Runtime;
    std::map<int, DataHandle> handles_;  // all handles ever registered, by id
    std::map<std::uint64_t, int> live_;  // base -> id
};

enum class TaskState { Blocked, Ready, Running, Done, Failed };

std::string_view to_string(TaskState s);

struct BufferArg {
    int handle = 0;
    AccessMode mode = AccessMode::R;
};

struct TaskInstance {
    int id = 0;
    const lowering::CodeletProgram* codelet = nullptr;
    std::vector<std::uint8_t> scalars;
    std::vector<BufferArg> buffers;  // one per buffer slot
    std::set<int> deps;
    std::set<int> dependents;
    TaskState state = TaskState::Blocked;
    std::string error;
    SourceLocation loc;
    SourceLocation error_loc;
};

/// The hooks a runtime needs from whatever executes its tasks.
class Engine {
public:
    virtual ~Engine() = default;
    /// Makes progress until `done()` holds.
    virtual void run_until(const std::function<bool()>& done) = 0;
    /// Brings a valid copy of `h` to the host node; called with no task using `h` in flight.
    virtual void fetch_to_host(DataHandle& h) = 0;
};

struct DepRecord {
    int last_writer = -1;
    std::vector<int> readers;  // since the last writer
    std::vector<int> users;    // possibly unfinished tasks touching the handle
};

/// Tracks handles, tasks and coherence for one program execution. Host
/// copies of handle data live in `heap`; device copies are owned here.
class Runtime {
public:
    Runtime(AddressSpace& heap, std::vector<MemoryNode> nodes);

    void set_engine(Engine* e) { engine_ = e; }

    const std::vector<MemoryNode>& nodes() const { return nodes_; }
    Registry& registry() { return registry_; }
    const Registry& registry() const { return registry_; }
    AddressSpace& heap() { return heap_; }

    // -- data
    DataHandle& register_buffer(std::uint64_t base, std::uint64_t nx, std::uint64_t elem_size, std::string name = {},
                                lowering::ValType elem = lowering::ValType::U8);
    DataHandle* lookup(std::uint64_t base) { return registry_.lookup(base); }
    void acquire(DataHandle& h);
    void unregister(DataHandle& h);

    std::uint64_t scoped_alloc(const std::string& var, const std::vector<std::int64_t>& shape, std::uint64_t elem_size,
                               bool pinned);
    /// Frees the scoped allocation of `var` at `base`. Throws std::logic_error for unknown variables.
    void scoped_free(const std::string& var, std::uint64_t base);

    // -- tasks
    int submit(const lowering::CodeletProgram& c, std::vector<std::uint8_t> scalars, std::vector<BufferArg> buffers,
               SourceLocation loc = {});
    void wait_all();

    const std::vector<TaskInstance>& tasks() const { return tasks_; }
    TaskInstance& task(int id) { return tasks_[static_cast<std::size_t>(id)]; }
    bool finished(int id) const;
    bool all_finished() const { return unfinished_ == 0; }

    void start(int id);
    /// Marks `id` done, or failed (poisoning its dependents) when `error` is
    /// set. Returns tasks that became ready, in id order.
    std::vector<int> finish(int id, const std::optional<std::string>& error = {}, SourceLocation where = {});

    // -- coherence
    std::uint8_t* bytes_on(DataHandle& h, int node);
    /// Copies the data from `from` to `to` and marks both Shared.
    void replicate(DataHandle& h, int from, int to);
    /// Makes `node` the owner: space is allocated if needed, no data moves,
    /// every other copy is invalidated.
    void take_ownership(DataHandle& h, int node);
    /// Throws CoherenceError if any live handle breaks the MSI invariant.
    void check_coherence();

    /// Handles ever registered, by id (unregistered ones included).
    const std::map<int, DataHandle>& all_handles() const { return registry_.handles_; }

    std::uint64_t registered_count() const { return registered_; }
    std::uint64_t unregistered_count() const { return unregistered_; }
    std::uint64_t alloc_count() const { return allocs_; }
    std::uint64_t free_count() const { return frees_; }

    /// Snapshot of a handle's host bytes taken at unregistration.
    const std::map<int, std::vector<std::uint8_t>>& final_contents() const { return final_; }

private:
    void surface_failures(const std::function<bool(const TaskInstance&)>& relevant);
    void drop_device_copies(DataHandle& h);

    AddressSpace& heap_;
    std::vector<MemoryNode> nodes_;
    Engine* engine_ = nullptr;
    Registry registry_;
    std::vector<TaskInstance> tasks_;
    std::map<int, DepRecord> deps_;
    std::size_t unfinished_ = 0;
    std::set<int> surfaced_;
    int next_handle_ = 0;
    std::uint64_t registered_ = 0, unregistered_ = 0, allocs_ = 0, frees_ = 0;
    std::map<int, std::vector<std::uint8_t>> final_;
};

}  // namespace taskc::runtime
