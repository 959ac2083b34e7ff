#include "taskc/dataflow/registration.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace taskc::dataflow {

using frontend::Expr;
using frontend::PragmaKind;

namespace {

constexpr int kUnknown = -1;
constexpr std::size_t kMaxStates = 256;

// One path's facts: the region each variable points to, and the set of
// registered regions. Regions below decls.size() are variables' own
// storage; the rest are malloc sites.
struct State {
    std::vector<int> roots;
    std::vector<int> reg;  // sorted

    auto operator<=>(const State&) const = default;

    bool registered(int r) const { return std::binary_search(reg.begin(), reg.end(), r); }
    void add(int r) {
        auto it = std::lower_bound(reg.begin(), reg.end(), r);
        if (it == reg.end() || *it != r) reg.insert(it, r);
    }
    void remove(int r) {
        auto it = std::lower_bound(reg.begin(), reg.end(), r);
        if (it != reg.end() && *it == r) reg.erase(it);
    }
};

State join(const State& a, const State& b) {
    State out;
    out.roots.resize(a.roots.size());
    for (std::size_t i = 0; i < a.roots.size(); ++i) out.roots[i] = a.roots[i] == b.roots[i] ? a.roots[i] : kUnknown;
    std::set_intersection(a.reg.begin(), a.reg.end(), b.reg.begin(), b.reg.end(), std::back_inserter(out.reg));
    return out;
}

struct Finding {
    SourceLocation loc;
    std::string var;
    auto operator<=>(const Finding&) const = default;
};

class Analysis {
public:
    Analysis(const CFG& cfg, const sema::ProgramModel* model) : cfg_(cfg), model_(model) {
        int next = static_cast<int>(cfg.decls.size());
        for (const Block& b : cfg.blocks)
            for (const Item& it : b.items)
                if (it.expr)
                    frontend::walk_exprs(*it.expr, [&](const Expr& e) {
                        if (is_malloc(e, it.scope)) sites_.emplace(&e, next++);
                    });
    }

    void solve() {
        std::size_t n = cfg_.blocks.size();
        in_.assign(n, {});
        collapsed_.assign(n, false);
        State init;
        init.roots.resize(cfg_.decls.size());
        for (std::size_t i = 0; i < init.roots.size(); ++i) init.roots[i] = static_cast<int>(i);
        in_[cfg_.entry].insert(init);

        std::vector<std::size_t> rpo = reverse_postorder(cfg_);
        std::vector<std::size_t> order(n, 0);
        for (std::size_t i = 0; i < rpo.size(); ++i) order[rpo[i]] = i;
        std::set<std::pair<std::size_t, std::size_t>> work{{0, cfg_.entry}};
        while (!work.empty()) {
            std::size_t b = work.begin()->second;
            work.erase(work.begin());
            std::set<State> out;
            for (State s : in_[b]) {
                for (const Item& it : cfg_.blocks[b].items) step(it, s, false);
                out.insert(std::move(s));
            }
            for (std::size_t succ : cfg_.blocks[b].succs)
                if (merge(succ, out)) work.emplace(order[succ], succ);
        }
    }

    // Replays every block from its fixpoint input, recording findings.
    void record() {
        for (std::size_t b = 0; b < cfg_.blocks.size(); ++b) {
            for (State s : in_[b])
                for (const Item& it : cfg_.blocks[b].items) step(it, s, true);
        }
    }

    std::set<Finding> findings;
    std::map<const Expr*, int> uses;

    std::optional<std::string> root_name(int r) const {
        if (r == kUnknown) return std::nullopt;
        if (static_cast<std::size_t>(r) < cfg_.decls.size()) return cfg_.decls[static_cast<std::size_t>(r)].name;
        for (const auto& [e, id] : sites_)
            if (id == r) return "malloc@" + std::to_string(e->loc.line) + ":" + std::to_string(e->loc.column);
        return std::nullopt;
    }

private:
    bool merge(std::size_t b, const std::set<State>& states) {
        auto& in = in_[b];
        if (collapsed_[b]) {
            State j = *in.begin();
            for (const State& s : states) j = join(j, s);
            if (j == *in.begin()) return false;
            in = {j};
            return true;
        }
        bool changed = false;
        for (const State& s : states) changed = in.insert(s).second || changed;
        if (in.size() > kMaxStates) {
            State j = *in.begin();
            for (const State& s : in) j = join(j, s);
            in = {j};
            collapsed_[b] = true;
        }
        return changed;
    }

    static bool is_malloc(const Expr& e, const ScopePtr& scope) {
        return e.kind == Expr::Kind::Call && e.text == "malloc" && lookup(scope, "malloc") < 0;
    }

    const DeclInfo* decl(int id) const { return id < 0 ? nullptr : &cfg_.decls[static_cast<std::size_t>(id)]; }

    static const Expr& strip_casts(const Expr& e) {
        const Expr* p = &e;
        while (p->kind == Expr::Kind::Cast) p = &p->operands[0];
        return *p;
    }

    // Evaluates `e` for its effect on `s`; returns the region it points to.
    int visit(const Expr& e, State& s, const ScopePtr& scope, bool rec) {
        switch (e.kind) {
            case Expr::Kind::Ident: {
                int id = lookup(scope, e.text);
                const DeclInfo* d = decl(id);
                if (!d) return kUnknown;
                int r = kUnknown;
                if (d->type.is_array()) r = id;
                else if (d->type.is_pointer()) r = s.roots[static_cast<std::size_t>(id)];
                else return kUnknown;
                if (rec) note_use(e, r);
                return r;
            }
            case Expr::Kind::Cast: return visit(e.operands[0], s, scope, rec);
            case Expr::Kind::Assign: {
                const Expr& lhs = strip_casts(e.operands[0]);
                int id = lhs.kind == Expr::Kind::Ident ? lookup(scope, lhs.text) : -1;
                const DeclInfo* d = decl(id);
                if (!d || !d->type.is_pointer()) {
                    for (const Expr& o : e.operands) visit(o, s, scope, rec);
                    return kUnknown;
                }
                int r = visit(e.operands[1], s, scope, rec);
                if (e.text != "=") r = kUnknown;
                s.roots[static_cast<std::size_t>(id)] = r;
                return r;
            }
            case Expr::Kind::Unary:
            case Expr::Kind::Postfix: {
                if (e.text == "++" || e.text == "--") {
                    const Expr& t = strip_casts(e.operands[0]);
                    int id = t.kind == Expr::Kind::Ident ? lookup(scope, t.text) : -1;
                    if (const DeclInfo* d = decl(id); d && d->type.is_pointer()) {
                        s.roots[static_cast<std::size_t>(id)] = kUnknown;
                        return kUnknown;
                    }
                }
                visit(e.operands[0], s, scope, rec);
                return kUnknown;
            }
            case Expr::Kind::Call: {
                std::vector<int> args;
                for (const Expr& a : e.operands) args.push_back(visit(a, s, scope, rec));
                if (is_malloc(e, scope)) return sites_.at(&e);
                if (rec) check_call(e, args, s, scope);
                return kUnknown;
            }
            case Expr::Kind::SizeofExpr:
            case Expr::Kind::SizeofType:
            case Expr::Kind::IntLit:
            case Expr::Kind::FloatLit:
            case Expr::Kind::StringLit: return kUnknown;
            default:
                for (const Expr& o : e.operands) visit(o, s, scope, rec);
                return kUnknown;
        }
    }

    void check_call(const Expr& call, const std::vector<int>& args, const State& s, const ScopePtr& scope) {
        if (!model_ || lookup(scope, call.text) >= 0) return;
        const sema::TaskDecl* task = model_->find_task(call.text);
        if (!task || task->params.size() != args.size()) return;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (task->params[i].mode == sema::AccessMode::ScalarValue) continue;
            const Expr& a = strip_casts(call.operands[i]);
            if (a.kind != Expr::Kind::Ident || args[i] == kUnknown) continue;
            if (!s.registered(args[i])) findings.insert({call.loc, a.text});
        }
    }

    void note_use(const Expr& e, int r) {
        auto [it, fresh] = uses.emplace(&e, r);
        if (!fresh && it->second != r) it->second = kUnknown;
    }

    int region_of(const std::string& var, const State& s, const ScopePtr& scope) const {
        int id = lookup(scope, var);
        const DeclInfo* d = decl(id);
        if (!d) return kUnknown;
        if (d->type.is_array()) return id;
        if (d->type.is_pointer()) return s.roots[static_cast<std::size_t>(id)];
        return kUnknown;
    }

    void step(const Item& it, State& s, bool rec) {
        switch (it.kind) {
            case Item::Kind::Decl: {
                const DeclInfo& d = cfg_.decls[static_cast<std::size_t>(it.decl)];
                int r = it.expr ? visit(*it.expr, s, it.scope, rec) : it.decl;
                if (d.type.is_pointer()) s.roots[static_cast<std::size_t>(it.decl)] = r;
                if (d.type.is_array()) s.roots[static_cast<std::size_t>(it.decl)] = it.decl;
                if (d.registered_attr) s.add(it.decl);
                break;
            }
            case Item::Kind::ScopeExit:
                for (int id : it.exiting) s.remove(id);
                break;
            case Item::Kind::Cond:
            case Item::Kind::Step: visit(*it.expr, s, it.scope, rec); break;
            case Item::Kind::Simple: {
                if (it.expr) visit(*it.expr, s, it.scope, rec);
                if (!it.stmt || !it.stmt->pragma) break;
                const auto& p = *it.stmt->pragma;
                int r = region_of(p.var, s, it.scope);
                if (r == kUnknown) break;
                if (p.kind == PragmaKind::Register) s.add(r);
                if (p.kind == PragmaKind::Unregister) s.remove(r);
                break;
            }
        }
    }

    const CFG& cfg_;
    const sema::ProgramModel* model_;
    std::map<const Expr*, int> sites_;
    std::vector<std::set<State>> in_;
    std::vector<bool> collapsed_;
};

}  // namespace

std::map<const Expr*, std::optional<std::string>> must_alias_roots(const CFG& cfg) {
    Analysis a(cfg, nullptr);
    a.solve();
    a.record();
    std::map<const Expr*, std::optional<std::string>> out;
    for (const auto& [e, r] : a.uses) out[e] = a.root_name(r);
    return out;
}

Diagnostics check_registration(const CFG& cfg, const sema::ProgramModel& model) {
    Analysis a(cfg, &model);
    a.solve();
    a.record();
    Diagnostics out;
    for (const Finding& f : a.findings)
        out.push_back(Diagnostic{Severity::Warning, f.loc, "variable '" + f.var + "' may be used unregistered",
                                 std::string(diag::MaybeUnregistered)});
    return out;
}

Diagnostics check_registration(const frontend::TranslationUnit& tu, const sema::ProgramModel& model) {
    Diagnostics out;
    for (const auto& item : tu.items) {
        if (item.kind != frontend::TopLevel::Kind::Function || !item.function.body) continue;
        CFG cfg = build_cfg(item.function, model.globals);
        Diagnostics d = check_registration(cfg, model);
        out.insert(out.end(), d.begin(), d.end());
    }
    sort_diagnostics(out);
    return out;
}

}  // namespace taskc::dataflow
