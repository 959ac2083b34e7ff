#pragma once

#include <string>

#include "taskc/frontend/ast.hpp"

namespace taskc::frontend {

struct PrintOptions {
    /// Drop `#pragma starpu` lines and the known task attributes, leaving the
    /// plain sequential C program.
    bool strip_annotations = false;
};

std::string print(const TranslationUnit& tu, const PrintOptions& opts = {});
std::string print_expr(const Expr& e);
std::string print_pragma(const PragmaNode& p);

}  // namespace taskc::frontend
