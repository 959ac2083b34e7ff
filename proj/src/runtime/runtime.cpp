#include "taskc/runtime/runtime.hpp"

#include <algorithm>
#include <cstring>

namespace taskc::runtime {

std::string_view to_string(Coherence c) {
    switch (c) {
        case Coherence::Invalid: return "invalid";
        case Coherence::Shared: return "shared";
        case Coherence::Owner: return "owner";
    }
    return "?";
}

std::string_view to_string(TaskState s) {
    switch (s) {
        case TaskState::Blocked: return "blocked";
        case TaskState::Ready: return "ready";
        case TaskState::Running: return "running";
        case TaskState::Done: return "done";
        case TaskState::Failed: return "failed";
    }
    return "?";
}

int DataHandle::owner() const {
    for (std::size_t i = 0; i < state.size(); ++i)
        if (state[i] == Coherence::Owner) return static_cast<int>(i);
    return -1;
}

int DataHandle::source_for(int node) const {
    int o = owner();
    if (o >= 0) return o;
    for (std::size_t i = 0; i < state.size(); ++i)
        if (state[i] == Coherence::Shared && static_cast<int>(i) != node) return static_cast<int>(i);
    return -1;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t extent(const DataHandle& h) { return std::max<std::uint64_t>(h.bytes(), 1); }

}  // namespace

DataHandle& Registry::add(DataHandle h) {
    std::uint64_t lo = h.base, hi = h.base + extent(h);
    auto it = live_.lower_bound(lo);
    if (it != live_.end() && it->first < hi) throw OverlapError("registration of '" + h.name + "' overlaps '" + handles_.at(it->second).name + "'");
    if (it != live_.begin()) {
        const DataHandle& prev = handles_.at(std::prev(it)->second);
        if (prev.base + extent(prev) > lo) throw OverlapError("registration of '" + h.name + "' overlaps '" + prev.name + "'");
    }
    int id = h.id;
    live_[h.base] = id;
    return handles_[id] = std::move(h);
}

DataHandle* Registry::lookup(std::uint64_t base) {
    auto it = live_.find(base);
    return it == live_.end() ? nullptr : &handles_.at(it->second);
}

const DataHandle* Registry::lookup(std::uint64_t base) const {
    auto it = live_.find(base);
    return it == live_.end() ? nullptr : &handles_.at(it->second);
}

DataHandle* Registry::by_id(int id) {
    auto it = handles_.find(id);
    return it == handles_.end() ? nullptr : &it->second;
}

void Registry::remove(int id) {
    const DataHandle& h = handles_.at(id);
    auto it = live_.find(h.base);
    if (it != live_.end() && it->second == id) live_.erase(it);
}

// ---------------------------------------------------------------------------

Runtime::Runtime(AddressSpace& heap, std::vector<MemoryNode> nodes) : heap_(heap), nodes_(std::move(nodes)) {
    if (nodes_.empty() || nodes_[0].kind != NodeKind::Host) throw std::invalid_argument("node 0 must be the host");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (nodes_[i].kind == NodeKind::Host) throw std::invalid_argument("only node 0 may be a host node");
}

DataHandle& Runtime::register_buffer(std::uint64_t base, std::uint64_t nx, std::uint64_t elem_size, std::string name,
                                     lowering::ValType elem) {
    const lowering::Region* r = heap_.find(base);
    if (!r || base + nx * elem_size > r->base + r->bytes.size())
        throw RuntimeError("registered range of '" + name + "' (" + std::to_string(nx * elem_size) +
                           " bytes) is not inside one allocation");
    DataHandle h;
    h.id = next_handle_;
    h.name = std::move(name);
    h.base = base;
    h.nx = nx;
    h.elem_size = elem_size;
    h.elem = elem;
    h.pinned = r->pinned;
    h.state.assign(nodes_.size(), Coherence::Invalid);
    h.state[0] = Coherence::Owner;
    h.copy.resize(nodes_.size());
    DataHandle& out = registry_.add(std::move(h));
    ++next_handle_;
    ++registered_;
    return out;
}

void Runtime::surface_failures(const std::function<bool(const TaskInstance&)>& relevant) {
    for (const TaskInstance& t : tasks_) {
        if (t.state != TaskState::Failed || surfaced_.count(t.id) || !relevant(t)) continue;
        surfaced_.insert(t.id);
        throw TaskFailure(t.id, t.error, t.error_loc);
    }
}

void Runtime::acquire(DataHandle& h) {
    if (registry_.lookup(h.base) != &h) throw UseAfterUnregister("'" + h.name + "' is not registered");
    int id = h.id;
    auto busy = [this, id] {
        auto it = deps_.find(id);
        if (it == deps_.end()) return false;
        auto& u = it->second.users;
        u.erase(std::remove_if(u.begin(), u.end(), [this](int t) { return finished(t); }), u.end());
        return !u.empty();
    };
    if (busy()) {
        if (!engine_) throw std::logic_error("runtime has no engine");
        engine_->run_until([&] { return !busy(); });
    }
    surface_failures([](const TaskInstance&) { return true; });
    if (!h.valid_on(0)) {
        if (!engine_) throw std::logic_error("runtime has no engine");
        engine_->fetch_to_host(h);
    }
    take_ownership(h, 0);
}

void Runtime::unregister(DataHandle& h) {
    acquire(h);
    const std::uint8_t* p = bytes_on(h, 0);
    final_[h.id].assign(p, p + h.bytes());
    drop_device_copies(h);
    registry_.remove(h.id);
    ++unregistered_;
}

std::uint64_t Runtime::scoped_alloc(const std::string& var, const std::vector<std::int64_t>& shape,
                                    std::uint64_t elem_size, bool pinned) {
    std::uint64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 1) throw RuntimeError("scoped variable '" + var + "' has an empty dimension");
        n *= static_cast<std::uint64_t>(d);
    }
    std::uint64_t bytes = n * elem_size;
    std::uint64_t base = heap_.allocate(bytes, pinned, var);
    registry_.scoped.push_back({var, base, bytes, pinned});
    ++allocs_;
    return base;
}

void Runtime::scoped_free(const std::string& var, std::uint64_t base) {
    auto& s = registry_.scoped;
    auto it = std::find_if(s.begin(), s.end(), [&](const Registry::Scoped& x) { return x.var == var && x.base == base; });
    if (it == s.end()) throw std::logic_error("cleanup of unknown scoped variable '" + var + "'");
    if (registry_.lookup(base)) throw RuntimeError("'" + var + "' is freed while still registered");
    heap_.release(base);
    s.erase(it);
    ++frees_;
}

int Runtime::submit(const lowering::CodeletProgram& c, std::vector<std::uint8_t> scalars, std::vector<BufferArg> buffers,
                    SourceLocation loc) {
    for (const BufferArg& b : buffers) {
        DataHandle* h = registry_.by_id(b.handle);
        if (!h || registry_.lookup(h->base) != h) throw SubmitError("handle " + std::to_string(b.handle) + " is not registered");
    }
    TaskInstance t;
    t.id = static_cast<int>(tasks_.size());
    t.codelet = &c;
    t.scalars = std::move(scalars);
    t.buffers = std::move(buffers);
    t.loc = std::move(loc);

    std::map<int, std::pair<bool, bool>> access;  // handle -> (reads, writes)
    for (const BufferArg& b : t.buffers) {
        auto& a = access[b.handle];
        a.first |= b.mode != AccessMode::W;
        a.second |= b.mode != AccessMode::R;
    }
    for (const auto& [h, rw] : access) {
        DepRecord& d = deps_[h];
        d.users.push_back(t.id);
        if (d.last_writer >= 0) t.deps.insert(d.last_writer);
        if (rw.second) {
            t.deps.insert(d.readers.begin(), d.readers.end());
            d.last_writer = t.id;
            d.readers.clear();
        } else {
            d.readers.push_back(t.id);
        }
    }
    t.deps.erase(t.id);

    bool poisoned = false, ready = true;
    for (int d : t.deps) {
        TaskInstance& dep = tasks_[static_cast<std::size_t>(d)];
        dep.dependents.insert(t.id);
        poisoned |= dep.state == TaskState::Failed;
        ready &= dep.state == TaskState::Done;
    }
    if (poisoned) {
        t.state = TaskState::Failed;
        t.error = "dependency failed";
        t.error_loc = t.loc;
    } else {
        t.state = ready ? TaskState::Ready : TaskState::Blocked;
        ++unfinished_;
    }
    tasks_.push_back(std::move(t));
    return tasks_.back().id;
}

void Runtime::wait_all() {
    if (!all_finished()) {
        if (!engine_) throw std::logic_error("runtime has no engine");
        engine_->run_until([this] { return all_finished(); });
    }
    surface_failures([](const TaskInstance&) { return true; });
}

bool Runtime::finished(int id) const {
    TaskState s = tasks_[static_cast<std::size_t>(id)].state;
    return s == TaskState::Done || s == TaskState::Failed;
}

void Runtime::start(int id) {
    TaskInstance& t = task(id);
    if (t.state != TaskState::Ready) throw std::logic_error("task " + std::to_string(id) + " started while " + std::string(to_string(t.state)));
    t.state = TaskState::Running;
}

std::vector<int> Runtime::finish(int id, const std::optional<std::string>& error, SourceLocation where) {
    TaskInstance& t = task(id);
    if (t.state != TaskState::Running) throw std::logic_error("task " + std::to_string(id) + " finished while " + std::string(to_string(t.state)));
    --unfinished_;
    std::vector<int> ready;
    if (error) {
        t.state = TaskState::Failed;
        t.error = *error;
        t.error_loc = std::move(where);
        // Poison everything downstream.
        std::vector<int> stack(t.dependents.begin(), t.dependents.end());
        while (!stack.empty()) {
            TaskInstance& d = task(stack.back());
            stack.pop_back();
            if (d.state != TaskState::Blocked && d.state != TaskState::Ready) continue;
            d.state = TaskState::Failed;
            d.error = "dependency failed";
            d.error_loc = d.loc;
            --unfinished_;
            stack.insert(stack.end(), d.dependents.begin(), d.dependents.end());
        }
        return ready;
    }
    t.state = TaskState::Done;
    for (int d : t.dependents) {
        TaskInstance& dep = task(d);
        if (dep.state != TaskState::Blocked) continue;
        bool all = std::all_of(dep.deps.begin(), dep.deps.end(), [this](int x) { return task(x).state == TaskState::Done; });
        if (all) {
            dep.state = TaskState::Ready;
            ready.push_back(d);
        }
    }
    return ready;
}

std::uint8_t* Runtime::bytes_on(DataHandle& h, int node) {
    static std::uint8_t empty = 0;
    if (h.bytes() == 0) return &empty;
    if (node == 0) {
        std::uint8_t* p = heap_.span(h.base, h.bytes());
        if (!p) throw std::logic_error("host data of '" + h.name + "' is gone");
        return p;
    }
    auto& c = h.copy[static_cast<std::size_t>(node)];
    if (c.size() != h.bytes()) c.assign(h.bytes(), 0);
    return c.data();
}

void Runtime::replicate(DataHandle& h, int from, int to) {
    if (!h.valid_on(from)) throw CoherenceError("replicating '" + h.name + "' from an invalid node");
    if (from != to) std::memcpy(bytes_on(h, to), bytes_on(h, from), h.bytes());
    if (h.state[static_cast<std::size_t>(from)] == Coherence::Owner) h.state[static_cast<std::size_t>(from)] = Coherence::Shared;
    h.state[static_cast<std::size_t>(to)] = Coherence::Shared;
}

void Runtime::take_ownership(DataHandle& h, int node) {
    bytes_on(h, node);
    for (std::size_t i = 0; i < h.state.size(); ++i) {
        if (static_cast<int>(i) == node) {
            h.state[i] = Coherence::Owner;
        } else {
            h.state[i] = Coherence::Invalid;
            if (i > 0) {
                h.copy[i].clear();
                h.copy[i].shrink_to_fit();
            }
        }
    }
}

void Runtime::drop_device_copies(DataHandle& h) {
    for (std::size_t i = 1; i < h.copy.size(); ++i) {
        h.copy[i].clear();
        h.copy[i].shrink_to_fit();
        h.state[i] = Coherence::Invalid;
    }
}

void Runtime::check_coherence() {
    for (const auto& [base, id] : registry_.live_) {
        DataHandle& h = registry_.handles_.at(id);
        int owners = 0, shared = 0, first_shared = -1;
        for (std::size_t i = 0; i < h.state.size(); ++i) {
            if (h.state[i] == Coherence::Owner) ++owners;
            if (h.state[i] == Coherence::Shared) {
                if (first_shared < 0) first_shared = static_cast<int>(i);
                ++shared;
            }
            if (i > 0 && h.state[i] != Coherence::Invalid && h.copy[i].size() != h.bytes())
                throw CoherenceError("'" + h.name + "' is valid on node " + std::to_string(i) + " without a copy");
        }
        if (!((owners == 1 && shared == 0) || (owners == 0 && shared >= 1)))
            throw CoherenceError("'" + h.name + "' has " + std::to_string(owners) + " owners and " + std::to_string(shared) +
                                 " shared copies");
        for (std::size_t i = 0; i < h.state.size() && shared > 1; ++i)
            if (h.state[i] == Coherence::Shared && static_cast<int>(i) != first_shared &&
                std::memcmp(bytes_on(h, first_shared), bytes_on(h, static_cast<int>(i)), h.bytes()) != 0)
                throw CoherenceError("shared copies of '" + h.name + "' differ");
    }
}

}  // namespace taskc::runtime
