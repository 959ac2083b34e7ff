#pragma once

// Shared by the test binaries: source text to TaskProgram, with kernel files
// placed next to a temporary source file.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>

#include "taskc/frontend/parser.hpp"
#include "taskc/lowering/lower.hpp"
#include "taskc/sema/sema.hpp"

namespace taskc::testing {

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("taskc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    std::filesystem::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path_ / name, std::ios::binary) << text;
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

inline lowering::TaskProgram compile_file(const std::filesystem::path& file, sema::TargetConfig cfg = {}) {
    auto tu = frontend::parse_source(slurp(file), file.string());
    sema::AnalyzeOptions opts;
    opts.complete_unit = true;
    auto r = sema::analyze(tu, cfg, opts);
    if (has_errors(r.diagnostics)) {
        std::string msg;
        for (const auto& d : r.diagnostics) msg += d.format() + "\n";
        throw std::runtime_error(msg);
    }
    return lowering::emit_program(r.model);
}

/// Compiles `source` as `<tmp>/prog.tc`, with `files` (name -> text) beside it.
inline lowering::TaskProgram compile_source(const std::string& source, const std::map<std::string, std::string>& files = {}) {
    TempDir dir("compile");
    for (const auto& [name, text] : files) dir.write(name, text);
    return compile_file(dir.write("prog.tc", source));
}

}  // namespace taskc::testing
