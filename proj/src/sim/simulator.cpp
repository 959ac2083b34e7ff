#include "taskc/sim/simulator.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <queue>

#include "taskc/lowering/eval.hpp"
#include "taskc/runtime/runtime.hpp"

namespace taskc::sim {

using lowering::MainOp;
using lowering::ValType;

std::string_view to_string(Policy p) { return p == Policy::Eager ? "eager" : "heft"; }

std::optional<Policy> policy_from_string(std::string_view s) {
    if (s == "eager") return Policy::Eager;
    if (s == "heft") return Policy::Heft;
    return std::nullopt;
}

std::string HandleDump::values() const {
    std::size_t w = lowering::width(elem);
    std::string out;
    for (std::size_t off = 0; off + w <= bytes.size(); off += w) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + off, w);
        if (!out.empty()) out += ' ';
        out += lowering::format_value(elem, lowering::normalize(elem, bits));
    }
    return out;
}

void evaluate_kernel(const lowering::CodeletProgram& c, const lowering::ImplProgram& impl,
                     const std::vector<KernelBuffer>& buffers, const std::vector<std::uint8_t>& scalars, bool parallel) {
    const lowering::IrFunction& fn = impl.function_ir();
    if (fn.params.size() != c.params.size()) throw std::logic_error("implementation of '" + c.name + "' has the wrong arity");
    if (buffers.size() != c.wrapper.buffer_slots.size()) throw std::logic_error("wrong number of buffers for '" + c.name + "'");

    lowering::AddressSpace scratch;
    std::map<std::uint8_t*, std::uint64_t> placed;
    std::vector<std::uint64_t> args(fn.params.size(), 0);
    for (std::size_t k = 0; k < buffers.size(); ++k) {
        auto [it, fresh] = placed.try_emplace(buffers[k].data, 0);
        if (fresh) {
            it->second = scratch.allocate(buffers[k].bytes);
            if (buffers[k].bytes) std::memcpy(scratch.span(it->second, buffers[k].bytes), buffers[k].data, buffers[k].bytes);
        }
        args[c.wrapper.buffer_slots[k]] = it->second;
    }
    std::vector<std::uint64_t> values = lowering::unpack_scalars(c.wrapper, scalars);
    for (std::size_t i = 0; i < c.wrapper.scalar_pack.size(); ++i) {
        const auto& s = c.wrapper.scalar_pack[i];
        args[s.param] = lowering::convert(fn.params[s.param].type, s.type, values[i]);
    }

    if (fn.device) {
        std::uint64_t n = 1;
        if (!buffers.empty()) {
            std::uint64_t es = c.params[c.wrapper.buffer_slots[0]].elem_size;
            n = buffers[0].bytes / std::max<std::uint64_t>(es, 1);
        }
        std::uint64_t group = impl.kernel ? static_cast<std::uint64_t>(std::max<std::int64_t>(impl.kernel->group_size, 1)) : 1;
        lowering::run_ndrange(fn, args, scratch, n, group, parallel && lowering::parallel_safe(fn));
    } else {
        lowering::ExecContext ctx;
        ctx.mem = &scratch;
        lowering::run_function(fn, args, ctx);
    }

    for (const KernelBuffer& b : buffers)
        if (b.bytes) std::memcpy(b.data, scratch.span(placed.at(b.data), b.bytes), b.bytes);
}

namespace {

struct Fatal {
    std::string message;
    SourceLocation loc;
};

bool truthy(ValType t, std::uint64_t bits) {
    if (lowering::is_float(t)) return lowering::to_double(t, bits) != 0.0;
    return lowering::normalize(t, bits) != 0;
}

class Simulator final : public runtime::Engine {
public:
    Simulator(const lowering::TaskProgram& p, const Machine& m, const PerfModel& perf, const RunOptions& o)
        : prog_(p), m_(m), perf_(perf), opt_(o), rt_(heap_, m.memory_nodes()) {
        rt_.set_engine(this);
        avail_.assign(m_.workers.size(), 0);
        for (const auto& c : prog_.codelets) {
            auto& ws = capable_[c.name];
            for (const Worker& w : m_.workers)
                if (c.impl_for(*arch_target(w.arch))) ws.push_back(&w);
            if (ws.empty()) throw ConfigError("no worker in the machine can run codelet '" + c.name + "'");
            for (const Worker* w : ws)
                if (!perf_.find(c.name, w->arch)) throw ConfigError("perf: no entry for '" + c.name + "/" + w->arch + "'");
        }
    }

    RunResult run() {
        RunResult res;
        regs_.assign(prog_.main_regs.size(), 0);
        try {
            try {
                exec(prog_.main_ops);
                rt_.wait_all();
                std::vector<int> live;
                for (const auto& [base, id] : rt_.registry().live_handles()) live.push_back(id);
                std::sort(live.begin(), live.end());
                for (int id : live) {
                    runtime::DataHandle& h = *rt_.registry().by_id(id);
                    rt_.acquire(h);
                    host_time_ = std::max(host_time_, valid_at_[id][0]);
                }
                check();
            } catch (const lowering::KernelFault& f) {
                throw Fatal{f.detail, f.loc};
            } catch (const runtime::TaskFailure&) {
                throw;
            } catch (const runtime::RuntimeError& e) {
                throw Fatal{e.what(), loc_};
            }
        } catch (const Fatal& f) {
            trace_.error(f.message, f.loc);
            res.ok = false;
            res.error = f.message;
            res.error_loc = f.loc;
        } catch (const runtime::TaskFailure& f) {
            res.ok = false;
            res.error = f.message;
            res.error_loc = f.loc;
        }

        res.trace = std::move(trace_);
        res.makespan = res.trace.makespan();
        for (const auto& t : rt_.tasks()) {
            TaskRecord r = records_.count(t.id) ? records_.at(t.id) : TaskRecord{};
            r.id = t.id;
            r.codelet = t.codelet->name;
            r.deps.assign(t.deps.begin(), t.deps.end());
            res.tasks.push_back(std::move(r));
        }
        const auto& finals = rt_.final_contents();
        for (const auto& [id, h] : rt_.all_handles()) {
            HandleDump d{id, h.name, h.elem, {}};
            auto f = finals.find(id);
            if (f != finals.end()) {
                d.bytes = f->second;
            } else if (const std::uint8_t* p = heap_.span(h.base, h.bytes()); p || h.bytes() == 0) {
                if (p) d.bytes.assign(p, p + h.bytes());
            }
            res.buffers.push_back(std::move(d));
        }
        res.coherence_checks = checks_;
        res.coherence_violations = violations_;
        res.live_handles = rt_.registry().live();
        res.registered = rt_.registered_count();
        res.unregistered = rt_.unregistered_count();
        res.allocs = rt_.alloc_count();
        res.frees = rt_.free_count();
        res.live_scoped = rt_.registry().scoped.size();
        return res;
    }

    void run_until(const std::function<bool()>& done) override {
        while (!done())
            if (!step()) throw std::logic_error("simulation stalled with unfinished tasks");
        host_time_ = std::max(host_time_, now_);
    }

    void fetch_to_host(runtime::DataHandle& h) override {
        int src = h.source_for(0);
        if (src < 0) throw runtime::CoherenceError("'" + h.name + "' has no valid copy");
        auto& va = valid_at_[h.id];
        double start = std::max({host_time_, va[src], link_free_[{src, 0}]});
        if (!h.pinned) start = std::max(start, node_busy(src));
        double end = start + estimate_transfer(h.bytes(), src, 0, m_);
        link_free_[{src, 0}] = end;
        rt_.replicate(h, src, 0);
        va[0] = end;
        trace_.transfer(h.id, src, 0, h.bytes(), start, end);
        host_time_ = end;
    }

private:
    // -- main procedure

    void plain(const std::vector<lowering::Op>& ops) {
        if (ops.empty()) return;
        lowering::ExecContext ctx;
        ctx.mem = &heap_;
        lowering::execute(ops, regs_, ctx);
    }

    runtime::DataHandle& handle_for(const std::string& var, int reg) {
        runtime::DataHandle* h = rt_.lookup(regs_[static_cast<std::size_t>(reg)]);
        if (!h) throw runtime::UseAfterUnregister("'" + var + "' is not registered");
        return *h;
    }

    void cleanup(const std::vector<lowering::CleanupItem>& items) {
        for (const auto& c : items) {
            if (c.unregister) unregister(handle_for(c.var, c.reg), c.var);
            if (c.free) {
                rt_.scoped_free(c.var, regs_[static_cast<std::size_t>(c.reg)]);
                trace_.free(c.var, host_time_);
            }
        }
    }

    void unregister(runtime::DataHandle& h, const std::string& var) {
        int id = h.id;
        rt_.unregister(h);
        host_time_ = std::max(host_time_, valid_at_[id][0]);
        trace_.unregistered(id, var, host_time_);
    }

    /// Returns true once main has returned.
    bool exec(const std::vector<MainOp>& ops) {
        for (const MainOp& op : ops) {
            loc_ = op.loc;
            switch (op.kind) {
                case MainOp::Kind::Plain: plain(op.ops); break;
                case MainOp::Kind::Alloc: {
                    std::uint64_t base = rt_.scoped_alloc(op.var, op.shape, op.elem_size, op.pinned);
                    regs_[static_cast<std::size_t>(op.reg)] = base;
                    trace_.alloc(op.var, op.bytes, op.pinned, host_time_);
                    break;
                }
                case MainOp::Kind::Register: {
                    std::uint64_t base = regs_[static_cast<std::size_t>(op.reg)];
                    std::uint64_t n = regs_[static_cast<std::size_t>(op.count_reg)];
                    runtime::DataHandle& h = rt_.register_buffer(base, n, op.elem_size, op.var, op.type);
                    valid_at_[h.id].assign(m_.memory_nodes().size(), 0);
                    valid_at_[h.id][0] = host_time_;
                    trace_.registered(h.id, op.var, h.bytes(), h.pinned, host_time_);
                    break;
                }
                case MainOp::Kind::Unregister: unregister(handle_for(op.var, op.reg), op.var); break;
                case MainOp::Kind::Acquire: {
                    runtime::DataHandle& h = handle_for(op.var, op.reg);
                    rt_.acquire(h);
                    host_time_ = std::max(host_time_, valid_at_[h.id][0]);
                    break;
                }
                case MainOp::Kind::Wait: rt_.wait_all(); break;
                case MainOp::Kind::CallTask: call(op); break;
                case MainOp::Kind::ScopeEndCleanup: cleanup(op.cleanup); break;
                case MainOp::Kind::HostLoop:
                    for (;;) {
                        if (op.reg >= 0) {
                            plain(op.ops);
                            if (!truthy(op.type, regs_[static_cast<std::size_t>(op.reg)])) break;
                        }
                        if (exec(op.body)) return true;
                        plain(op.step);
                    }
                    break;
                case MainOp::Kind::HostBranch:
                    if (exec(truthy(op.type, regs_[static_cast<std::size_t>(op.reg)]) ? op.body : op.orelse)) return true;
                    break;
                case MainOp::Kind::Return:
                    cleanup(op.cleanup);
                    check();
                    return true;
            }
            check();
        }
        return false;
    }

    void call(const MainOp& op) {
        const lowering::CodeletProgram& c = *prog_.find_codelet(op.task);
        std::map<std::size_t, int> handle_of;  // parameter -> handle
        for (const auto& step : c.body.lookups) {
            runtime::DataHandle* h = rt_.lookup(regs_[static_cast<std::size_t>(op.args[step.param])]);
            if (!h) throw Fatal{step.message, op.loc};
            handle_of[step.param] = h->id;
        }
        std::vector<runtime::BufferArg> bufs;
        for (std::size_t p : c.wrapper.buffer_slots) bufs.push_back({handle_of.at(p), c.params[p].mode});
        std::vector<std::uint64_t> values;
        for (const auto& s : c.wrapper.scalar_pack)
            values.push_back(lowering::normalize(s.type, regs_[static_cast<std::size_t>(op.args[s.param])]));

        advance_to(host_time_);
        int id;
        try {
            id = rt_.submit(c, lowering::pack_scalars(c.wrapper, values), std::move(bufs), op.loc);
        } catch (const runtime::SubmitError&) {
            throw Fatal{c.body.submit_error, op.loc};
        }
        ranks_valid_ = false;
        if (rt_.task(id).state == runtime::TaskState::Ready) dispatch({id}, host_time_);
    }

    // -- scheduling

    struct Event {
        double time;
        int task;
        bool operator>(const Event& o) const { return time != o.time ? time > o.time : task > o.task; }
    };

    void check() {
        ++checks_;
        try {
            rt_.check_coherence();
        } catch (const runtime::CoherenceError& e) {
            ++violations_;
            throw Fatal{std::string("coherence violation: ") + e.what(), loc_};
        }
    }

    bool step() {
        if (queue_.empty()) return false;
        double t = queue_.top().time;
        std::vector<int> done;
        while (!queue_.empty() && queue_.top().time == t) {
            done.push_back(queue_.top().task);
            queue_.pop();
        }
        now_ = t;
        std::vector<int> ready;
        for (int id : done) {
            auto f = faults_.find(id);
            std::vector<int> r;
            if (f != faults_.end()) {
                trace_.error(f->second.message, f->second.loc);
                r = rt_.finish(id, f->second.message, f->second.loc);
            } else {
                r = rt_.finish(id);
            }
            ready.insert(ready.end(), r.begin(), r.end());
        }
        dispatch(std::move(ready), t);
        check();
        return true;
    }

    void advance_to(double t) {
        while (!queue_.empty() && queue_.top().time <= t) step();
    }

    double node_busy(int node) const {
        double b = 0;
        for (const Worker& w : m_.workers)
            if (w.node == node) b = std::max(b, avail_[static_cast<std::size_t>(w.id)]);
        return b;
    }

    /// Distinct handles of a task with their combined access.
    static std::vector<std::pair<int, std::pair<bool, bool>>> accesses(const runtime::TaskInstance& t) {
        std::vector<std::pair<int, std::pair<bool, bool>>> out;
        for (const auto& b : t.buffers) {
            auto it = std::find_if(out.begin(), out.end(), [&](const auto& x) { return x.first == b.handle; });
            if (it == out.end()) {
                out.push_back({b.handle, {false, false}});
                it = std::prev(out.end());
            }
            it->second.first |= b.mode != sema::AccessMode::W;
            it->second.second |= b.mode != sema::AccessMode::R;
        }
        return out;
    }

    /// Time at which every input of `t` is valid on `node`. With `commit`,
    /// the transfers are performed and traced.
    double data_ready(const runtime::TaskInstance& t, int node, double at, bool commit) {
        std::map<std::pair<int, int>, double> tentative;
        double ready = at;
        for (const auto& [hid, rw] : accesses(t)) {
            if (!rw.first) continue;
            runtime::DataHandle& h = *rt_.registry().by_id(hid);
            auto& va = valid_at_[hid];
            if (h.valid_on(node)) {
                ready = std::max(ready, va[node]);
                continue;
            }
            int src = h.source_for(node);
            std::pair<int, int> link{src, node};
            double lf = link_free_[link];
            if (auto it = tentative.find(link); it != tentative.end()) lf = it->second;
            double start = std::max({at, va[src], lf});
            if (!h.pinned) start = std::max(start, node_busy(src));
            double end = start + estimate_transfer(h.bytes(), src, node, m_);
            ready = std::max(ready, end);
            if (commit) {
                link_free_[link] = end;
                rt_.replicate(h, src, node);
                va[node] = end;
                trace_.transfer(hid, src, node, h.bytes(), start, end);
            } else {
                tentative[link] = end;
            }
        }
        return ready;
    }

    std::uint64_t task_bytes(const runtime::TaskInstance& t) {
        std::uint64_t b = 0;
        for (const auto& a : t.buffers) b += rt_.registry().by_id(a.handle)->bytes();
        return b;
    }

    double exec_cost(const runtime::TaskInstance& t, const Worker& w) { return perf_.cost(t.codelet->name, w, task_bytes(t)); }

    double eft(const runtime::TaskInstance& t, const Worker& w, double at) {
        double ready = data_ready(t, w.node, at, false);
        return std::max({avail_[static_cast<std::size_t>(w.id)], at, ready}) + exec_cost(t, w);
    }

    const Worker& choose(const runtime::TaskInstance& t, double at) {
        const Worker* best = nullptr;
        double best_v = 0;
        for (const Worker* w : capable_.at(t.codelet->name)) {
            double v = opt_.policy == Policy::Eager ? std::max(avail_[static_cast<std::size_t>(w->id)], at) : eft(t, *w, at);
            if (!best || v < best_v) {
                best = w;
                best_v = v;
            }
        }
        return *best;
    }

    const std::vector<double>& ranks() {
        if (ranks_valid_) return ranks_;
        const auto& tasks = rt_.tasks();
        std::vector<DagTask> dag(tasks.size());
        std::vector<std::vector<const Worker*>> capable(tasks.size());
        for (const auto& t : tasks) {
            DagTask& d = dag[static_cast<std::size_t>(t.id)];
            d.codelet = t.codelet->name;
            d.bytes = task_bytes(t);
            capable[static_cast<std::size_t>(t.id)] = capable_.at(d.codelet);
            auto mine = accesses(t);
            for (int s : t.dependents) {
                std::uint64_t bytes = 0;
                for (const auto& [hid, rw] : accesses(rt_.task(s)))
                    for (const auto& [h2, rw2] : mine)
                        if (h2 == hid && rw2.second && rw.first) bytes += rt_.registry().by_id(hid)->bytes();
                d.succs.push_back({s, bytes});
            }
        }
        ranks_ = upward_rank(dag, capable, perf_, m_);
        ranks_valid_ = true;
        return ranks_;
    }

    void dispatch(std::vector<int> ids, double at) {
        std::sort(ids.begin(), ids.end());
        if (opt_.policy == Policy::Heft && ids.size() > 1) {
            const auto& r = ranks();
            std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
                return r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(b)];
            });
        }
        for (int id : ids) assign(id, at);
    }

    void assign(int id, double at) {
        runtime::TaskInstance& t = rt_.task(id);
        const lowering::CodeletProgram& c = *t.codelet;
        const Worker& w = choose(t, at);
        double ready = data_ready(t, w.node, at, true);
        double start = std::max({avail_[static_cast<std::size_t>(w.id)], at, ready});
        double end = start + exec_cost(t, w);
        rt_.start(id);

        std::vector<KernelBuffer> bufs;
        for (const auto& a : t.buffers) {
            runtime::DataHandle& h = *rt_.registry().by_id(a.handle);
            bufs.push_back({rt_.bytes_on(h, w.node), h.bytes()});
        }
        try {
            evaluate_kernel(c, *c.impl_for(*arch_target(w.arch)), bufs, t.scalars, opt_.parallel_kernels);
            for (const auto& [hid, rw] : accesses(t)) {
                if (!rw.second) continue;
                rt_.take_ownership(*rt_.registry().by_id(hid), w.node);
                valid_at_[hid][w.node] = end;
            }
        } catch (const lowering::KernelFault& f) {
            faults_[id] = Fatal{f.what(), t.loc};
        }
        avail_[static_cast<std::size_t>(w.id)] = end;
        records_[id] = TaskRecord{id, c.name, w.id, start, end, {}};
        trace_.task(id, c.name, w.id, start, end);
        queue_.push({end, id});
    }

    const lowering::TaskProgram& prog_;
    const Machine& m_;
    const PerfModel& perf_;
    RunOptions opt_;
    lowering::AddressSpace heap_;
    runtime::Runtime rt_;
    Trace trace_;
    std::vector<std::uint64_t> regs_;
    SourceLocation loc_;

    std::map<std::string, std::vector<const Worker*>> capable_;
    std::vector<double> avail_;
    std::map<std::pair<int, int>, double> link_free_;
    std::map<int, std::vector<double>> valid_at_;  // handle -> per node
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::map<int, Fatal> faults_;
    std::map<int, TaskRecord> records_;
    std::vector<double> ranks_;
    bool ranks_valid_ = false;
    double host_time_ = 0;
    double now_ = 0;
    std::uint64_t checks_ = 0, violations_ = 0;
};

}  // namespace

RunResult run(const lowering::TaskProgram& program, const Machine& machine, const PerfModel& perf,
              const RunOptions& options) {
    machine.validate();
    Simulator sim(program, machine, perf, options);
    return sim.run();
}

}  // namespace taskc::sim
