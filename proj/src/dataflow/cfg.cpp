#include "taskc/dataflow/cfg.hpp"

#include <algorithm>

namespace taskc::dataflow {

using frontend::AttrKind;
using frontend::Stmt;

int lookup(const ScopePtr& scope, std::string_view name) {
    for (const ScopeNode* n = scope.get(); n; n = n->parent.get())
        if (n->name == name) return n->decl;
    return -1;
}

bool CFG::dominates(std::size_t a, std::size_t b) const {
    if (!reachable(a) || !reachable(b)) return false;
    while (true) {
        if (a == b) return true;
        if (b == entry) return false;
        b = idom[b];
    }
}

namespace {

class Builder {
public:
    CFG build(const frontend::FunctionDecl& fn, const std::vector<frontend::VarDecl>& globals) {
        cur_ = new_block();
        for (const auto& g : globals) {
            DeclInfo d{g.name, g.type, g.loc, false, true, false};
            bind(g.name, std::move(d));
        }
        for (const auto& p : fn.params) {
            DeclInfo d{p.name, p.type, p.loc, true, false, false};
            bind(p.name, std::move(d));
        }
        if (fn.body) {
            // The outermost block shares the parameter scope.
            frames_.push_back({});
            for (const Stmt& s : fn.body->body) stmt(s);
            close_frame();
        }
        cfg_.idom = compute_idom(cfg_);
        return std::move(cfg_);
    }

private:
    std::size_t new_block() {
        cfg_.blocks.emplace_back();
        return cfg_.blocks.size() - 1;
    }

    void edge(std::size_t from, std::size_t to, bool back = false) {
        cfg_.blocks[from].succs.push_back(to);
        cfg_.blocks[to].preds.push_back(from);
        if (back) cfg_.back_edges.emplace_back(from, to);
    }

    int bind(const std::string& name, DeclInfo info) {
        int id = static_cast<int>(cfg_.decls.size());
        cfg_.decls.push_back(std::move(info));
        scope_ = std::make_shared<ScopeNode>(ScopeNode{name, id, scope_});
        if (!frames_.empty()) frames_.back().push_back(id);
        return id;
    }

    void add(Item item) {
        item.scope = scope_;
        cfg_.blocks[cur_].items.push_back(std::move(item));
    }

    void open_frame() {
        saved_.push_back(scope_);
        frames_.push_back({});
    }

    // Emits the cleanup of registered variables declared in the frame.
    void close_frame() {
        std::vector<int> exiting;
        for (int id : frames_.back())
            if (cfg_.decls[static_cast<std::size_t>(id)].registered_attr) exiting.push_back(id);
        frames_.pop_back();
        if (!exiting.empty()) {
            Item it;
            it.kind = Item::Kind::ScopeExit;
            it.exiting = std::move(exiting);
            add(std::move(it));
        }
        if (!saved_.empty()) {
            scope_ = saved_.back();
            saved_.pop_back();
        }
    }

    void nested(const Stmt& s) {
        open_frame();
        if (s.kind == Stmt::Kind::Compound) {
            for (const Stmt& c : s.body) stmt(c);
        } else {
            stmt(s);
        }
        close_frame();
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
            case Stmt::Kind::Compound: nested(s); break;
            case Stmt::Kind::Decl:
                for (const auto& v : s.decls) {
                    Item it;
                    it.kind = Item::Kind::Decl;
                    it.stmt = &s;
                    it.var = &v;
                    it.expr = v.init ? &*v.init : nullptr;
                    it.decl = bind(v.name, DeclInfo{v.name, v.type, v.loc, false, false,
                                                    v.has_attr(AttrKind::Registered)});
                    add(std::move(it));
                }
                break;
            case Stmt::Kind::Expr:
            case Stmt::Kind::Pragma:
            case Stmt::Kind::Empty: {
                Item it;
                it.stmt = &s;
                it.expr = s.expr ? &*s.expr : nullptr;
                add(std::move(it));
                break;
            }
            case Stmt::Kind::Return: {
                Item it;
                it.stmt = &s;
                it.expr = s.expr ? &*s.expr : nullptr;
                add(std::move(it));
                cur_ = new_block();  // anything after a return is unreachable
                break;
            }
            case Stmt::Kind::If: {
                cond(s, *s.expr);
                std::size_t head = cur_;
                std::size_t then_b = new_block();
                edge(head, then_b);
                cur_ = then_b;
                nested(s.body[0]);
                std::size_t then_end = cur_;
                std::size_t else_b = new_block();
                edge(head, else_b);
                cur_ = else_b;
                if (s.body.size() > 1) nested(s.body[1]);
                std::size_t else_end = cur_;
                std::size_t join = new_block();
                edge(then_end, join);
                edge(else_end, join);
                cur_ = join;
                break;
            }
            case Stmt::Kind::While:
            case Stmt::Kind::For: {
                bool is_for = s.kind == Stmt::Kind::For;
                if (is_for) {
                    open_frame();
                    for (const Stmt& i : s.init) stmt(i);
                }
                std::size_t header = new_block();
                edge(cur_, header);
                cur_ = header;
                if (s.expr) cond(s, *s.expr);
                std::size_t body = new_block();
                edge(header, body);
                cur_ = body;
                nested(s.body[0]);
                if (s.step) {
                    Item it;
                    it.kind = Item::Kind::Step;
                    it.stmt = &s;
                    it.expr = &*s.step;
                    add(std::move(it));
                }
                edge(cur_, header, true);
                std::size_t exit = new_block();
                if (s.expr) edge(header, exit);
                cur_ = exit;
                if (is_for) close_frame();
                break;
            }
        }
    }

    void cond(const Stmt& s, const frontend::Expr& e) {
        Item it;
        it.kind = Item::Kind::Cond;
        it.stmt = &s;
        it.expr = &e;
        add(std::move(it));
    }

    CFG cfg_;
    std::size_t cur_ = 0;
    ScopePtr scope_;
    std::vector<ScopePtr> saved_;
    std::vector<std::vector<int>> frames_;
};

}  // namespace

CFG build_cfg(const frontend::FunctionDecl& fn, const std::vector<frontend::VarDecl>& globals) {
    return Builder().build(fn, globals);
}

std::vector<std::size_t> reverse_postorder(const CFG& cfg) {
    std::vector<std::size_t> post;
    std::vector<char> seen(cfg.blocks.size(), 0);
    // Iterative DFS: (block, next successor index).
    std::vector<std::pair<std::size_t, std::size_t>> stack{{cfg.entry, 0}};
    seen[cfg.entry] = 1;
    while (!stack.empty()) {
        auto& [b, i] = stack.back();
        if (i < cfg.blocks[b].succs.size()) {
            std::size_t s = cfg.blocks[b].succs[i++];
            if (!seen[s]) {
                seen[s] = 1;
                stack.emplace_back(s, 0);
            }
        } else {
            post.push_back(b);
            stack.pop_back();
        }
    }
    std::reverse(post.begin(), post.end());
    return post;
}

std::vector<std::size_t> compute_idom(const CFG& cfg) {
    std::vector<std::size_t> rpo = reverse_postorder(cfg);
    std::vector<std::size_t> order(cfg.blocks.size(), kNoBlock);
    for (std::size_t i = 0; i < rpo.size(); ++i) order[rpo[i]] = i;

    std::vector<std::size_t> idom(cfg.blocks.size(), kNoBlock);
    idom[cfg.entry] = cfg.entry;
    auto intersect = [&](std::size_t a, std::size_t b) {
        while (a != b) {
            while (order[a] > order[b]) a = idom[a];
            while (order[b] > order[a]) b = idom[b];
        }
        return a;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t b : rpo) {
            if (b == cfg.entry) continue;
            std::size_t nd = kNoBlock;
            for (std::size_t p : cfg.blocks[b].preds) {
                if (idom[p] == kNoBlock) continue;
                nd = nd == kNoBlock ? p : intersect(p, nd);
            }
            if (nd != idom[b]) {
                idom[b] = nd;
                changed = true;
            }
        }
    }
    return idom;
}

}  // namespace taskc::dataflow
