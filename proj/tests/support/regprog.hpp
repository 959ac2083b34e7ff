#pragma once

// Random structured functions over three pointers, with an independent
// all-paths oracle for the "may be used unregistered" warning.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "taskc/support/diagnostic.hpp"

namespace taskc::testing {

struct GStmt {
    enum Kind { Malloc, Copy, Arith, Reg, Unreg, Call, If, While, Return, RegBlock } kind;
    std::string a, b;
    std::vector<GStmt> body, orelse;
    int line = 0;
    int id = 0;
};

class Gen {
public:
    Gen(std::uint64_t seed, bool loops) : rng_(seed), loops_(loops) {}

    std::vector<GStmt> program() {
        blocks_ = 1;
        return list(0, {"p0", "p1", "p2", "a0"});
    }

private:
    std::vector<GStmt> list(int depth, std::vector<std::string> vars) {
        std::vector<GStmt> out;
        int n = pick(1, 5);
        for (int i = 0; i < n; ++i) out.push_back(stmt(depth, vars));
        return out;
    }

    GStmt stmt(int depth, const std::vector<std::string>& vars) {
        std::vector<std::string> ptrs{"p0", "p1", "p2"};
        GStmt s{};
        int r = pick(0, 99);
        auto any = [&] { return vars[static_cast<std::size_t>(pick(0, static_cast<int>(vars.size()) - 1))]; };
        auto ptr = [&] { return ptrs[static_cast<std::size_t>(pick(0, 2))]; };
        if (depth < 2 && r < 14 && blocks_ + 3 <= 6) {
            blocks_ += 3;
            s.kind = GStmt::If;
            s.body = list(depth + 1, vars);
            if (pick(0, 1)) s.orelse = list(depth + 1, vars);
            return s;
        }
        if (loops_ && depth < 2 && r < 22) {
            s.kind = GStmt::While;
            s.body = list(depth + 1, vars);
            return s;
        }
        if (depth < 2 && r < 26) {
            s.kind = GStmt::RegBlock;
            s.a = "r" + std::to_string(next_reg_++);
            auto inner = vars;
            inner.push_back(s.a);
            s.body = list(depth + 1, inner);
            return s;
        }
        if (r < 29) {
            s.kind = GStmt::Return;
            return s;
        }
        if (r < 42) s.kind = GStmt::Malloc, s.a = ptr();
        else if (r < 55) s.kind = GStmt::Copy, s.a = ptr(), s.b = any();
        else if (r < 60) s.kind = GStmt::Arith, s.a = ptr(), s.b = any();
        else if (r < 75) s.kind = GStmt::Reg, s.a = any();
        else if (r < 80) s.kind = GStmt::Unreg, s.a = any();
        else s.kind = GStmt::Call, s.a = any(), s.b = any();
        return s;
    }

    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    std::mt19937_64 rng_;
    bool loops_;
    int blocks_ = 1;
    int next_reg_ = 0;
};

class Emitter {
public:
    std::string emit(std::vector<GStmt>& prog) {
        out_ << "extern void t (double *x, double *y) __attribute__ ((task));\n";
        line_ = 2;
        put(0, "void f (int c)");
        put(0, "{");
        put(1, "double *p0, *p1, *p2;");
        put(1, "double a0[4];");
        list(prog, 1);
        put(0, "}");
        return out_.str();
    }

private:
    void put(int indent, const std::string& text) {
        out_ << std::string(static_cast<std::size_t>(indent) * 2, ' ') << text << "\n";
        ++line_;
    }

    void list(std::vector<GStmt>& l, int ind) {
        for (GStmt& s : l) stmt(s, ind);
    }

    void stmt(GStmt& s, int ind) {
        s.line = line_;
        s.id = line_;
        switch (s.kind) {
            case GStmt::Malloc: put(ind, s.a + " = malloc (32);"); break;
            case GStmt::Copy: put(ind, s.a + " = " + s.b + ";"); break;
            case GStmt::Arith: put(ind, s.a + " = " + s.b + " + 1;"); break;
            case GStmt::Reg: out_ << "#pragma starpu register " << s.a << " 4\n", ++line_; break;
            case GStmt::Unreg: out_ << "#pragma starpu unregister " << s.a << "\n", ++line_; break;
            case GStmt::Call: put(ind, "t (" + s.a + ", " + s.b + ");"); break;
            case GStmt::Return: put(ind, "return;"); break;
            case GStmt::If:
                put(ind, "if (c)");
                put(ind, "{");
                list(s.body, ind + 1);
                put(ind, "}");
                if (!s.orelse.empty()) {
                    put(ind, "else");
                    put(ind, "{");
                    list(s.orelse, ind + 1);
                    put(ind, "}");
                }
                break;
            case GStmt::While:
                put(ind, "while (c)");
                put(ind, "{");
                list(s.body, ind + 1);
                put(ind, "}");
                break;
            case GStmt::RegBlock:
                put(ind, "{");
                put(ind + 1, "double " + s.a + "[4] __attribute__ ((registered));");
                list(s.body, ind + 1);
                put(ind, "}");
                break;
        }
    }

    std::ostringstream out_;
    int line_ = 1;
};

struct PathState {
    std::map<std::string, std::string> root;  // "?" is unknown
    std::set<std::string> reg;
    auto operator<=>(const PathState&) const = default;
};

class PathOracle {
public:
    std::set<std::pair<int, std::string>> findings;

    std::set<PathState> run(const std::vector<GStmt>& prog) {
        PathState s;
        for (const char* v : {"p0", "p1", "p2", "a0"}) s.root[v] = v;
        return list(prog, {s});
    }

private:
    std::string region(const PathState& s, const std::string& v) const {
        auto it = s.root.find(v);
        return it == s.root.end() ? v : it->second;  // arrays are their own region
    }

    std::set<PathState> list(const std::vector<GStmt>& l, std::set<PathState> states) {
        for (const GStmt& g : l) states = stmt(g, states);
        return states;
    }

    std::set<PathState> stmt(const GStmt& g, const std::set<PathState>& in) {
        std::set<PathState> out;
        switch (g.kind) {
            case GStmt::Return: return {};
            case GStmt::If: {
                out = list(g.body, in);
                auto e = list(g.orelse, in);
                out.insert(e.begin(), e.end());
                return out;
            }
            case GStmt::While: {
                std::set<PathState> all = in, frontier = in;
                while (!frontier.empty()) {
                    auto next = list(g.body, frontier);
                    frontier.clear();
                    for (const auto& s : next)
                        if (all.insert(s).second) frontier.insert(s);
                }
                return all;
            }
            case GStmt::RegBlock: {
                std::set<PathState> entry;
                for (PathState s : in) {
                    s.reg.insert(g.a);
                    entry.insert(s);
                }
                for (PathState s : list(g.body, entry)) {
                    s.reg.erase(g.a);
                    out.insert(s);
                }
                return out;
            }
            default: break;
        }
        for (PathState s : in) {
            switch (g.kind) {
                case GStmt::Malloc: s.root[g.a] = "m" + std::to_string(g.id); break;
                case GStmt::Copy: s.root[g.a] = region(s, g.b); break;
                case GStmt::Arith: s.root[g.a] = "?"; break;
                case GStmt::Reg:
                    if (region(s, g.a) != "?") s.reg.insert(region(s, g.a));
                    break;
                case GStmt::Unreg: s.reg.erase(region(s, g.a)); break;
                case GStmt::Call:
                    for (const auto& v : {g.a, g.b}) {
                        std::string r = region(s, v);
                        if (r != "?" && !s.reg.count(r)) findings.emplace(g.line, v);
                    }
                    break;
                default: break;
            }
            out.insert(s);
        }
        return out;
    }
};

inline std::set<std::pair<int, std::string>> as_set(const Diagnostics& d) {
    std::set<std::pair<int, std::string>> out;
    for (const auto& w : d) {
        auto a = w.message.find('\'');
        auto b = w.message.find('\'', a + 1);
        out.emplace(w.location.line, w.message.substr(a + 1, b - a - 1));
    }
    return out;
}

}  // namespace taskc::testing
