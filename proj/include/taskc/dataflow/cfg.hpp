#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "taskc/frontend/ast.hpp"

namespace taskc::dataflow {

inline constexpr std::size_t kNoBlock = std::numeric_limits<std::size_t>::max();

/// A variable declaration visible in the function: global, parameter, or local.
struct DeclInfo {
    std::string name;
    frontend::TypeExpr type;
    SourceLocation loc;
    bool is_param = false;
    bool is_global = false;
    bool registered_attr = false;
};

/// Persistent chain of lexical bindings; each block item keeps the chain
/// that was in effect where it appeared.
struct ScopeNode {
    std::string name;
    int decl = -1;
    std::shared_ptr<const ScopeNode> parent;
};
using ScopePtr = std::shared_ptr<const ScopeNode>;

int lookup(const ScopePtr& scope, std::string_view name);

struct Item {
    enum class Kind {
        Simple,     // expression, pragma, return, or empty statement
        Decl,       // one declarator of a declaration statement
        Cond,       // if/while/for condition
        Step,       // for-loop step expression
        ScopeExit,  // registered variables going out of scope
    };

    Kind kind = Kind::Simple;
    const frontend::Stmt* stmt = nullptr;
    const frontend::Expr* expr = nullptr;
    const frontend::VarDecl* var = nullptr;
    int decl = -1;             // Decl
    std::vector<int> exiting;  // ScopeExit
    ScopePtr scope;
};

struct Block {
    std::vector<Item> items;
    std::vector<std::size_t> succs;
    std::vector<std::size_t> preds;
};

struct CFG {
    std::vector<Block> blocks;
    std::size_t entry = 0;
    std::vector<DeclInfo> decls;
    /// Immediate dominator per block; the entry is its own idom and
    /// unreachable blocks get kNoBlock.
    std::vector<std::size_t> idom;
    std::vector<std::pair<std::size_t, std::size_t>> back_edges;

    bool reachable(std::size_t b) const { return idom[b] != kNoBlock; }
    bool dominates(std::size_t a, std::size_t b) const;
};

/// Builds the control-flow graph of a function definition and fills in its
/// dominator tree. Globals become the outermost scope.
CFG build_cfg(const frontend::FunctionDecl& fn, const std::vector<frontend::VarDecl>& globals = {});

/// Reverse postorder of the blocks reachable from the entry.
std::vector<std::size_t> reverse_postorder(const CFG& cfg);

/// Immediate dominators (Cooper, Harvey and Kennedy).
std::vector<std::size_t> compute_idom(const CFG& cfg);

}  // namespace taskc::dataflow
