#include "taskc/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "taskc/dataflow/registration.hpp"
#include "taskc/frontend/parser.hpp"
#include "taskc/lowering/lower.hpp"
#include "taskc/sema/sema.hpp"
#include "taskc/sim/simulator.hpp"

namespace taskc::cli {

namespace {

struct CompileFlags {
    int target_bits = 64;
    std::string char_sign = "signed";
    bool no_registration_check = false;
    bool werror = false;
    std::string diag_format = "text";

    sema::TargetConfig config() const {
        sema::TargetConfig c;
        c.pointer_width_bits = target_bits;
        c.long_width_bits = target_bits;
        c.char_signed = char_sign == "signed";
        return c;
    }
};

struct RunFlags {
    std::string machine;
    std::string perf;
    std::string sched = "eager";
    std::string trace;
    bool dump_buffers = false;
};

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return ss.str();
}

void print_diagnostics(const Diagnostics& diags, const std::string& format, std::ostream& err) {
    if (format == "json") {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& d : diags) {
            nlohmann::ordered_json j;
            j["file"] = d.location.file;
            j["line"] = d.location.line;
            j["column"] = d.location.column;
            j["severity"] = std::string(to_string(d.severity));
            j["code"] = d.code;
            j["message"] = d.message;
            arr.push_back(std::move(j));
        }
        err << arr.dump(2) << "\n";
        return;
    }
    for (const auto& d : diags) err << d.format() << "\n";
}

struct Compiled {
    Diagnostics diags;
    std::optional<lowering::TaskProgram> program;
};

/// Front half of check and build. Returns nullopt when the file is unreadable.
std::optional<Compiled> compile(const std::string& file, const CompileFlags& f, bool emit) {
    auto text = read_file(file);
    if (!text) return std::nullopt;
    Compiled c;
    frontend::TranslationUnit tu;
    try {
        tu = frontend::parse_source(*text, file);
    } catch (const frontend::LexError& e) {
        c.diags.push_back({Severity::Error, e.location, e.message, "E_SYNTAX"});
        return c;
    } catch (const frontend::ParseError& e) {
        c.diags.push_back({Severity::Error, e.location, e.message, "E_SYNTAX"});
        return c;
    }
    sema::AnalyzeOptions opts;
    opts.complete_unit = emit;
    auto r = sema::analyze(tu, f.config(), opts);
    c.diags = std::move(r.diagnostics);
    if (!f.no_registration_check) {
        auto w = dataflow::check_registration(tu, r.model);
        c.diags.insert(c.diags.end(), w.begin(), w.end());
    }
    sort_diagnostics(c.diags);
    bool failed = has_errors(c.diags) || (f.werror && count(c.diags, Severity::Warning) > 0);
    if (emit && !failed) {
        try {
            c.program = lowering::emit_program(r.model);
        } catch (const lowering::LoweringError& e) {
            c.diags.push_back(e.diagnostic());
            sort_diagnostics(c.diags);
        }
    }
    return c;
}

int exit_for(const Diagnostics& diags, const CompileFlags& f) {
    if (has_errors(diags)) return Errors;
    if (f.werror && count(diags, Severity::Warning) > 0) return Errors;
    return Success;
}

int cmd_check(const std::string& file, const CompileFlags& f, std::ostream& err) {
    auto c = compile(file, f, false);
    if (!c) {
        err << "taskc: cannot read '" << file << "'\n";
        return Usage;
    }
    print_diagnostics(c->diags, f.diag_format, err);
    return exit_for(c->diags, f);
}

int cmd_build(const std::string& file, const std::string& output, const CompileFlags& f, std::ostream& err) {
    auto c = compile(file, f, true);
    if (!c) {
        err << "taskc: cannot read '" << file << "'\n";
        return Usage;
    }
    print_diagnostics(c->diags, f.diag_format, err);
    int code = exit_for(c->diags, f);
    if (code != Success) return code;
    if (!c->program) return Errors;

    std::string text = lowering::serialize(*c->program);
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (out) out << text;
    if (out) out.flush();
    if (!out) {
        err << "taskc: cannot write '" << output << "'\n";
        std::error_code ec;
        if (out.is_open()) std::filesystem::remove(output, ec);
        return Usage;
    }
    return Success;
}

template <class T>
std::optional<T> load_config(const std::string& path, const char* what, std::ostream& err) {
    auto text = read_file(path);
    if (!text) {
        err << "taskc: cannot read " << what << " file '" << path << "'\n";
        return std::nullopt;
    }
    try {
        return T::from_json(nlohmann::json::parse(*text));
    } catch (const nlohmann::json::exception& e) {
        err << "taskc: " << path << ": " << e.what() << "\n";
    } catch (const sim::ConfigError& e) {
        err << "taskc: " << path << ": " << e.what() << "\n";
    }
    return std::nullopt;
}

int cmd_run(const std::string& artifact, const RunFlags& f, std::ostream& out, std::ostream& err) {
    auto text = read_file(artifact);
    if (!text) {
        err << "taskc: cannot read '" << artifact << "'\n";
        return Usage;
    }
    lowering::TaskProgram program;
    try {
        program = lowering::deserialize(*text);
    } catch (const lowering::ArtifactError& e) {
        err << "taskc: " << artifact << ": " << e.what() << "\n";
        return Usage;
    }

    sim::Machine machine = sim::Machine::single_cpu();
    if (!f.machine.empty()) {
        auto m = load_config<sim::Machine>(f.machine, "machine", err);
        if (!m) return Usage;
        machine = std::move(*m);
    }
    sim::PerfModel perf = sim::PerfModel::defaults();
    if (!f.perf.empty()) {
        auto p = load_config<sim::PerfModel>(f.perf, "perf", err);
        if (!p) return Usage;
        perf = std::move(*p);
    }

    sim::RunOptions opts;
    opts.policy = *sim::policy_from_string(f.sched);
    sim::RunResult r;
    try {
        r = sim::run(program, machine, perf, opts);
    } catch (const sim::ConfigError& e) {
        err << "taskc: " << e.what() << "\n";
        return Usage;
    }

    if (!f.trace.empty()) {
        std::ofstream t(f.trace, std::ios::binary | std::ios::trunc);
        if (t) t << r.trace.jsonl();
        if (t) t.flush();
        if (!t) {
            err << "taskc: cannot write trace '" << f.trace << "'\n";
            return Usage;
        }
    }

    if (!r.ok) {
        if (r.error_loc.file.empty())
            err << "error: " << r.error << "\n";
        else
            err << r.error_loc.str() << ": error: " << r.error << "\n";
        return RuntimeFailure;
    }
    out << "makespan: " << sim::format_seconds(r.makespan) << "\n";
    if (f.dump_buffers)
        for (const auto& b : r.buffers) out << b.name << ": " << b.values() << "\n";
    return Success;
}

int cmd_trace_summary(const std::string& file, std::ostream& out, std::ostream& err) {
    auto text = read_file(file);
    if (!text) {
        err << "taskc: cannot read '" << file << "'\n";
        return Usage;
    }
    try {
        out << sim::summarize(sim::parse_trace(*text)).format();
    } catch (const sim::TraceError& e) {
        err << "taskc: " << file << ": " << e.what() << "\n";
        return Usage;
    }
    return Success;
}

void add_compile_flags(CLI::App* cmd, CompileFlags& f) {
    cmd->add_option("--target-bits", f.target_bits, "Pointer and long width of the target")
        ->check(CLI::IsMember({32, 64}));
    cmd->add_option("--char", f.char_sign, "Signedness of plain char")->check(CLI::IsMember({"signed", "unsigned"}));
    cmd->add_flag("--no-registration-check", f.no_registration_check, "Skip the 'may be used unregistered' analysis");
    cmd->add_flag("--werror", f.werror, "Treat warnings as errors");
    cmd->add_option("--diag-format", f.diag_format, "Diagnostic output format")->check(CLI::IsMember({"text", "json"}));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"TaskC compiler and heterogeneous machine simulator", "taskc"};
    app.require_subcommand(1);

    std::string input, output;
    CompileFlags cf;
    RunFlags rf;

    auto* check = app.add_subcommand("check", "Report diagnostics for a source file");
    check->add_option("file", input, "TaskC source file")->required();
    add_compile_flags(check, cf);

    auto* build = app.add_subcommand("build", "Compile a source file into a task program artifact");
    build->add_option("file", input, "TaskC source file")->required();
    build->add_option("-o", output, "Artifact path")->required();
    add_compile_flags(build, cf);

    auto* run = app.add_subcommand("run", "Simulate an artifact");
    run->add_option("artifact", input, "Artifact produced by build")->required();
    run->add_option("--machine", rf.machine, "Machine description (JSON)");
    run->add_option("--perf", rf.perf, "Performance model (JSON)");
    run->add_option("--sched", rf.sched, "Scheduling policy")->check(CLI::IsMember({"eager", "heft"}));
    run->add_option("--trace", rf.trace, "Write the JSON-lines trace here");
    run->add_flag("--dump-buffers", rf.dump_buffers, "Print final contents of every handle");

    auto* summary = app.add_subcommand("trace-summary", "Validate and summarize a trace");
    summary->add_option("trace", input, "Trace file")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? Success : Usage;
    }

    if (check->parsed()) return cmd_check(input, cf, err);
    if (build->parsed()) return cmd_build(input, output, cf, err);
    if (run->parsed()) return cmd_run(input, rf, out, err);
    return cmd_trace_summary(input, out, err);
}

}  // namespace taskc::cli
