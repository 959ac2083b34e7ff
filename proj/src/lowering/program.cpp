#include "taskc/lowering/program.hpp"

#include <array>

#include "json.hpp"

namespace taskc::lowering {

using json = nlohmann::ordered_json;

std::size_t WrapperPlan::pack_size() const {
    std::size_t n = 0;
    for (const auto& s : scalar_pack) n += s.width;
    return n;
}

const ImplProgram* CodeletProgram::impl_for(sema::Target t) const {
    for (const auto& i : impls)
        if (i.target == t) return &i;
    return nullptr;
}

const CodeletProgram* TaskProgram::find_codelet(std::string_view name) const {
    for (const auto& c : codelets)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

constexpr std::array<std::string_view, 11> kMainKinds{"plain",    "alloc", "register",          "unregister",
                                                      "acquire",  "wait",  "call_task",         "scope_end_cleanup",
                                                      "host_loop", "host_branch", "return"};

[[noreturn]] void bad(const std::string& what) {
    throw ArtifactError("malformed artifact: " + what);
}

const json& field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) bad(std::string("missing '") + key + "'");
    return *it;
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception&) {
        bad(std::string("bad '") + key + "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
    auto it = j.find(key);
    if (it == j.end()) return def;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        bad(std::string("bad '") + key + "'");
    }
}

ValType val_type(const json& j) {
    if (!j.is_string()) bad("value type");
    auto t = val_type_from_string(j.get<std::string>());
    if (!t) bad("value type '" + j.get<std::string>() + "'");
    return *t;
}

json loc_json(const SourceLocation& l) {
    return json::array({l.file, l.line, l.column});
}

SourceLocation loc_from(const json& j) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_string() || !j[1].is_number_integer() || !j[2].is_number_integer())
        bad("location");
    return {j[0].get<std::string>(), j[1].get<int>(), j[2].get<int>()};
}

json ops_json(const std::vector<Op>& ops);

json op_json(const Op& op) {
    const Op def;
    json j;
    j["kind"] = std::string(to_string(op.kind));
    j["type"] = std::string(to_string(op.type));
    if (op.src != def.src) j["src"] = std::string(to_string(op.src));
    if (op.dst >= 0) j["dst"] = op.dst;
    if (op.a >= 0) j["a"] = op.a;
    if (op.b >= 0) j["b"] = op.b;
    if (op.c >= 0) j["c"] = op.c;
    if (op.imm != 0) j["imm"] = op.imm;
    if (op.elem_size != 0) j["elem_size"] = op.elem_size;
    if (!op.op.empty()) j["op"] = op.op;
    if (!op.cond.empty()) j["cond"] = ops_json(op.cond);
    if (!op.body.empty()) j["body"] = ops_json(op.body);
    if (!op.step.empty()) j["step"] = ops_json(op.step);
    if (!op.orelse.empty()) j["orelse"] = ops_json(op.orelse);
    j["index"] = op.index;
    j["loc"] = loc_json(op.loc);
    return j;
}

json ops_json(const std::vector<Op>& ops) {
    json a = json::array();
    for (const Op& op : ops) a.push_back(op_json(op));
    return a;
}

std::vector<Op> ops_from(const json& j);

Op op_from(const json& j) {
    if (!j.is_object()) bad("op");
    Op op;
    auto k = op_kind_from_string(get<std::string>(j, "kind"));
    if (!k) bad("op kind");
    op.kind = *k;
    op.type = val_type(field(j, "type"));
    if (j.contains("src")) op.src = val_type(j["src"]);
    op.dst = get_or(j, "dst", -1);
    op.a = get_or(j, "a", -1);
    op.b = get_or(j, "b", -1);
    op.c = get_or(j, "c", -1);
    op.imm = get_or<std::uint64_t>(j, "imm", 0);
    op.elem_size = get_or<std::uint64_t>(j, "elem_size", 0);
    op.op = get_or<std::string>(j, "op", "");
    if (j.contains("cond")) op.cond = ops_from(j["cond"]);
    if (j.contains("body")) op.body = ops_from(j["body"]);
    if (j.contains("step")) op.step = ops_from(j["step"]);
    if (j.contains("orelse")) op.orelse = ops_from(j["orelse"]);
    op.index = get<int>(j, "index");
    op.loc = loc_from(field(j, "loc"));
    return op;
}

std::vector<Op> ops_from(const json& j) {
    if (!j.is_array()) bad("op list");
    std::vector<Op> ops;
    for (const auto& o : j) ops.push_back(op_from(o));
    return ops;
}

json types_json(const std::vector<ValType>& ts) {
    json a = json::array();
    for (ValType t : ts) a.push_back(std::string(to_string(t)));
    return a;
}

std::vector<ValType> types_from(const json& j) {
    if (!j.is_array()) bad("type list");
    std::vector<ValType> ts;
    for (const auto& t : j) ts.push_back(val_type(t));
    return ts;
}

json function_json(const IrFunction& f) {
    json j;
    j["name"] = f.name;
    j["device"] = f.device;
    json ps = json::array();
    for (const auto& p : f.params) {
        json pj;
        pj["name"] = p.name;
        pj["buffer"] = p.buffer;
        pj["type"] = std::string(to_string(p.type));
        if (p.buffer) {
            pj["elem"] = std::string(to_string(p.elem));
            pj["elem_size"] = p.elem_size;
        }
        pj["reg"] = p.reg;
        ps.push_back(std::move(pj));
    }
    j["params"] = std::move(ps);
    j["regs"] = types_json(f.regs);
    j["ops"] = ops_json(f.ops);
    return j;
}

IrFunction function_from(const json& j) {
    if (!j.is_object()) bad("function");
    IrFunction f;
    f.name = get<std::string>(j, "name");
    f.device = get<bool>(j, "device");
    const json& ps = field(j, "params");
    if (!ps.is_array()) bad("params");
    for (const auto& pj : ps) {
        IrParam p;
        p.name = get<std::string>(pj, "name");
        p.buffer = get<bool>(pj, "buffer");
        p.type = val_type(field(pj, "type"));
        if (p.buffer) {
            p.elem = val_type(field(pj, "elem"));
            p.elem_size = get<std::uint64_t>(pj, "elem_size");
        }
        p.reg = get<int>(pj, "reg");
        f.params.push_back(std::move(p));
    }
    f.regs = types_from(field(j, "regs"));
    f.ops = ops_from(field(j, "ops"));
    return f;
}

sema::AccessMode mode_from(const json& j) {
    if (!j.is_string()) bad("access mode");
    auto m = sema::access_mode_from_string(j.get<std::string>());
    if (!m) bad("access mode '" + j.get<std::string>() + "'");
    return *m;
}

sema::Target target_from(const json& j) {
    if (!j.is_string()) bad("target");
    auto t = sema::target_from_string(j.get<std::string>());
    if (!t) bad("target '" + j.get<std::string>() + "'");
    return *t;
}

json codelet_json(const CodeletProgram& c) {
    json j;
    j["name"] = c.name;
    j["nbuffers"] = c.nbuffers;
    json modes = json::array();
    for (auto m : c.modes) modes.push_back(std::string(sema::to_string(m)));
    j["modes"] = std::move(modes);

    json params = json::array();
    for (const auto& p : c.params) {
        json pj;
        pj["name"] = p.name;
        pj["buffer"] = p.buffer;
        if (p.buffer) {
            pj["elem"] = std::string(to_string(p.elem));
            pj["elem_size"] = p.elem_size;
        } else {
            pj["type"] = std::string(to_string(p.type));
        }
        pj["mode"] = std::string(sema::to_string(p.mode));
        params.push_back(std::move(pj));
    }
    j["params"] = std::move(params);

    json w;
    w["buffer_slots"] = c.wrapper.buffer_slots;
    json pack = json::array();
    for (const auto& s : c.wrapper.scalar_pack)
        pack.push_back(json{{"param", s.param}, {"type", std::string(to_string(s.type))}, {"width", s.width}, {"offset", s.offset}});
    w["scalar_pack"] = std::move(pack);
    j["wrapper"] = std::move(w);

    json b;
    json lookups = json::array();
    for (const auto& l : c.body.lookups) lookups.push_back(json{{"param", l.param}, {"message", l.message}});
    b["lookups"] = std::move(lookups);
    b["codelet"] = c.body.codelet;
    b["submit_error"] = c.body.submit_error;
    j["task_body"] = std::move(b);

    json impls = json::array();
    for (const auto& i : c.impls) {
        json ij;
        ij["function"] = i.function;
        ij["target"] = std::string(sema::to_string(i.target));
        ij["implicit"] = i.implicit;
        if (i.ir) ij["ir"] = function_json(*i.ir);
        if (i.kernel) {
            const auto& k = *i.kernel;
            ij["kernel"] = json{{"impl", k.impl},
                                {"file", k.file},
                                {"kernel_name", k.kernel_name},
                                {"group_size", k.group_size},
                                {"source_text", k.source_text},
                                {"ir", function_json(k.ir)}};
        }
        impls.push_back(std::move(ij));
    }
    j["impls"] = std::move(impls);
    return j;
}

CodeletProgram codelet_from(const json& j) {
    if (!j.is_object()) bad("codelet");
    CodeletProgram c;
    c.name = get<std::string>(j, "name");
    c.nbuffers = get<std::size_t>(j, "nbuffers");
    for (const auto& m : field(j, "modes")) c.modes.push_back(mode_from(m));
    for (const auto& pj : field(j, "params")) {
        ParamInfo p;
        p.name = get<std::string>(pj, "name");
        p.buffer = get<bool>(pj, "buffer");
        if (p.buffer) {
            p.type = ValType::Ptr;
            p.elem = val_type(field(pj, "elem"));
            p.elem_size = get<std::uint64_t>(pj, "elem_size");
        } else {
            p.type = val_type(field(pj, "type"));
        }
        p.mode = mode_from(field(pj, "mode"));
        c.params.push_back(std::move(p));
    }
    const json& w = field(j, "wrapper");
    c.wrapper.buffer_slots = get<std::vector<std::size_t>>(w, "buffer_slots");
    for (const auto& sj : field(w, "scalar_pack")) {
        ScalarSlot s;
        s.param = get<std::size_t>(sj, "param");
        s.type = val_type(field(sj, "type"));
        s.width = get<std::size_t>(sj, "width");
        s.offset = get<std::size_t>(sj, "offset");
        c.wrapper.scalar_pack.push_back(s);
    }
    const json& b = field(j, "task_body");
    for (const auto& lj : field(b, "lookups"))
        c.body.lookups.push_back({get<std::size_t>(lj, "param"), get<std::string>(lj, "message")});
    c.body.codelet = get<std::string>(b, "codelet");
    c.body.submit_error = get<std::string>(b, "submit_error");
    for (const auto& ij : field(j, "impls")) {
        ImplProgram i;
        i.function = get<std::string>(ij, "function");
        i.target = target_from(field(ij, "target"));
        i.implicit = get<bool>(ij, "implicit");
        if (ij.contains("ir")) i.ir = function_from(ij["ir"]);
        if (ij.contains("kernel")) {
            const json& kj = ij["kernel"];
            EmbeddedKernel k;
            k.impl = get<std::string>(kj, "impl");
            k.file = get<std::string>(kj, "file");
            k.kernel_name = get<std::string>(kj, "kernel_name");
            k.group_size = get<std::int64_t>(kj, "group_size");
            k.source_text = get<std::string>(kj, "source_text");
            k.ir = function_from(field(kj, "ir"));
            i.kernel = std::move(k);
        }
        if (!i.ir && !i.kernel) bad("implementation '" + i.function + "' has no code");
        c.impls.push_back(std::move(i));
    }
    for (std::size_t s : c.wrapper.buffer_slots)
        if (s >= c.params.size()) bad("buffer slot");
    for (const auto& s : c.wrapper.scalar_pack)
        if (s.param >= c.params.size() || s.width == 0 || s.width > 8) bad("scalar slot");
    return c;
}

json main_ops_json(const std::vector<MainOp>& ops);

json main_op_json(const MainOp& m) {
    using K = MainOp::Kind;
    json j;
    j["kind"] = std::string(to_string(m.kind));
    switch (m.kind) {
        case K::Plain: j["ops"] = ops_json(m.ops); break;
        case K::Alloc:
            j["var"] = m.var;
            j["reg"] = m.reg;
            j["shape"] = m.shape;
            j["elem_size"] = m.elem_size;
            j["bytes"] = m.bytes;
            j["pinned"] = m.pinned;
            break;
        case K::Register:
            j["var"] = m.var;
            j["reg"] = m.reg;
            j["count_reg"] = m.count_reg;
            j["elem"] = std::string(to_string(m.type));
            j["elem_size"] = m.elem_size;
            break;
        case K::Unregister:
        case K::Acquire:
            j["var"] = m.var;
            j["reg"] = m.reg;
            break;
        case K::Wait: break;
        case K::CallTask:
            j["task"] = m.task;
            j["args"] = m.args;
            break;
        case K::ScopeEndCleanup:
        case K::Return: {
            json items = json::array();
            for (const auto& c : m.cleanup)
                items.push_back(json{{"var", c.var}, {"reg", c.reg}, {"unregister", c.unregister}, {"free", c.free}});
            j["cleanup"] = std::move(items);
            break;
        }
        case K::HostLoop:
            j["cond"] = ops_json(m.ops);
            j["test"] = m.reg;
            j["test_type"] = std::string(to_string(m.type));
            j["body"] = main_ops_json(m.body);
            j["step"] = ops_json(m.step);
            break;
        case K::HostBranch:
            j["test"] = m.reg;
            j["test_type"] = std::string(to_string(m.type));
            j["body"] = main_ops_json(m.body);
            j["orelse"] = main_ops_json(m.orelse);
            break;
    }
    j["loc"] = loc_json(m.loc);
    return j;
}

json main_ops_json(const std::vector<MainOp>& ops) {
    json a = json::array();
    for (const auto& m : ops) a.push_back(main_op_json(m));
    return a;
}

std::vector<MainOp> main_ops_from(const json& j);

MainOp main_op_from(const json& j) {
    using K = MainOp::Kind;
    if (!j.is_object()) bad("main op");
    MainOp m;
    std::string kind = get<std::string>(j, "kind");
    bool found = false;
    for (std::size_t i = 0; i < kMainKinds.size(); ++i)
        if (kMainKinds[i] == kind) {
            m.kind = static_cast<K>(i);
            found = true;
        }
    if (!found) bad("main op kind '" + kind + "'");
    switch (m.kind) {
        case K::Plain: m.ops = ops_from(field(j, "ops")); break;
        case K::Alloc:
            m.var = get<std::string>(j, "var");
            m.reg = get<int>(j, "reg");
            m.shape = get<std::vector<std::int64_t>>(j, "shape");
            m.elem_size = get<std::uint64_t>(j, "elem_size");
            m.bytes = get<std::uint64_t>(j, "bytes");
            m.pinned = get<bool>(j, "pinned");
            break;
        case K::Register:
            m.var = get<std::string>(j, "var");
            m.reg = get<int>(j, "reg");
            m.count_reg = get<int>(j, "count_reg");
            m.type = val_type(field(j, "elem"));
            m.elem_size = get<std::uint64_t>(j, "elem_size");
            break;
        case K::Unregister:
        case K::Acquire:
            m.var = get<std::string>(j, "var");
            m.reg = get<int>(j, "reg");
            break;
        case K::Wait: break;
        case K::CallTask:
            m.task = get<std::string>(j, "task");
            m.args = get<std::vector<int>>(j, "args");
            break;
        case K::ScopeEndCleanup:
        case K::Return:
            for (const auto& cj : field(j, "cleanup"))
                m.cleanup.push_back({get<std::string>(cj, "var"), get<int>(cj, "reg"), get<bool>(cj, "unregister"),
                                     get<bool>(cj, "free")});
            break;
        case K::HostLoop:
            m.ops = ops_from(field(j, "cond"));
            m.reg = get<int>(j, "test");
            m.type = val_type(field(j, "test_type"));
            m.body = main_ops_from(field(j, "body"));
            m.step = ops_from(field(j, "step"));
            break;
        case K::HostBranch:
            m.reg = get<int>(j, "test");
            m.type = val_type(field(j, "test_type"));
            m.body = main_ops_from(field(j, "body"));
            m.orelse = main_ops_from(field(j, "orelse"));
            break;
    }
    m.loc = loc_from(field(j, "loc"));
    return m;
}

std::vector<MainOp> main_ops_from(const json& j) {
    if (!j.is_array()) bad("main op list");
    std::vector<MainOp> ops;
    for (const auto& m : j) ops.push_back(main_op_from(m));
    return ops;
}

void check_regs(const std::vector<Op>& ops, std::size_t nregs) {
    auto ok = [&](int r) { return r < static_cast<int>(nregs); };
    for (const Op& op : ops) {
        if (!ok(op.dst) || !ok(op.a) || !ok(op.b) || !ok(op.c)) bad("register out of range");
        check_regs(op.cond, nregs);
        check_regs(op.body, nregs);
        check_regs(op.step, nregs);
        check_regs(op.orelse, nregs);
    }
}

void check_main(const std::vector<MainOp>& ops, const TaskProgram& p) {
    auto n = static_cast<int>(p.main_regs.size());
    for (const auto& m : ops) {
        check_regs(m.ops, p.main_regs.size());
        check_regs(m.step, p.main_regs.size());
        if (m.reg >= n || m.count_reg >= n) bad("register out of range");
        for (int a : m.args)
            if (a < 0 || a >= n) bad("register out of range");
        for (const auto& c : m.cleanup)
            if (c.reg < 0 || c.reg >= n) bad("register out of range");
        if (m.kind == MainOp::Kind::CallTask) {
            const CodeletProgram* c = p.find_codelet(m.task);
            if (!c) bad("call to unknown codelet '" + m.task + "'");
            if (c->params.size() != m.args.size()) bad("argument count for '" + m.task + "'");
        }
        check_main(m.body, p);
        check_main(m.orelse, p);
    }
}

}  // namespace

std::string_view to_string(MainOp::Kind k) {
    return kMainKinds[static_cast<std::size_t>(k)];
}

std::string serialize(const TaskProgram& p) {
    json j;
    json codelets = json::array();
    for (const auto& c : p.codelets) codelets.push_back(codelet_json(c));
    j["codelets"] = std::move(codelets);
    j["main_ops"] = main_ops_json(p.main_ops);
    json meta;
    meta["format"] = "taskc-program";
    meta["version"] = 1;
    meta["source"] = p.source;
    meta["target"] = json{{"pointer_width_bits", p.config.pointer_width_bits},
                          {"long_width_bits", p.config.long_width_bits},
                          {"char_signed", p.config.char_signed}};
    meta["main_regs"] = types_json(p.main_regs);
    j["metadata"] = std::move(meta);
    return j.dump(1) + "\n";
}

TaskProgram deserialize(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ArtifactError(std::string("malformed artifact: ") + e.what());
    }
    if (!j.is_object()) bad("top level");
    TaskProgram p;
    const json& meta = field(j, "metadata");
    if (get<std::string>(meta, "format") != "taskc-program") bad("format tag");
    if (get<int>(meta, "version") != 1) bad("unsupported version");
    p.source = get<std::string>(meta, "source");
    const json& t = field(meta, "target");
    p.config.pointer_width_bits = get<int>(t, "pointer_width_bits");
    p.config.long_width_bits = get<int>(t, "long_width_bits");
    p.config.char_signed = get<bool>(t, "char_signed");
    p.main_regs = types_from(field(meta, "main_regs"));
    const json& cs = field(j, "codelets");
    if (!cs.is_array()) bad("codelets");
    for (const auto& c : cs) p.codelets.push_back(codelet_from(c));
    p.main_ops = main_ops_from(field(j, "main_ops"));
    for (const auto& c : p.codelets)
        for (const auto& i : c.impls) check_regs(i.function_ir().ops, i.function_ir().regs.size());
    check_main(p.main_ops, p);
    return p;
}

std::vector<std::uint8_t> pack_scalars(const WrapperPlan& plan, const std::vector<std::uint64_t>& values) {
    std::vector<std::uint8_t> out(plan.pack_size(), 0);
    for (std::size_t i = 0; i < plan.scalar_pack.size() && i < values.size(); ++i) {
        const ScalarSlot& s = plan.scalar_pack[i];
        for (std::size_t b = 0; b < s.width; ++b) out[s.offset + b] = static_cast<std::uint8_t>(values[i] >> (8 * b));
    }
    return out;
}

std::vector<std::uint64_t> unpack_scalars(const WrapperPlan& plan, const std::vector<std::uint8_t>& bytes) {
    std::vector<std::uint64_t> out;
    for (const ScalarSlot& s : plan.scalar_pack) {
        std::uint64_t v = 0;
        for (std::size_t b = 0; b < s.width; ++b) v |= std::uint64_t{bytes.at(s.offset + b)} << (8 * b);
        out.push_back(normalize(s.type, v));
    }
    return out;
}

}  // namespace taskc::lowering
