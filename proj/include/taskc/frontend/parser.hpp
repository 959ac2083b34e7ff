#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taskc/frontend/ast.hpp"
#include "taskc/frontend/lexer.hpp"

namespace taskc::frontend {

class ParseError : public std::runtime_error {
public:
    ParseError(SourceLocation loc, std::string msg, std::vector<std::string> expected_tokens = {});

    SourceLocation location;
    std::string message;
    std::vector<std::string> expected;
};

/// Parses a token stream produced by `tokenize` into a TranslationUnit.
TranslationUnit parse(const std::vector<Token>& tokens);

/// Convenience: tokenize + parse.
TranslationUnit parse_source(std::string_view source, const std::string& file_name);

/// Parses the payload of a `#pragma` line.
PragmaNode parse_pragma(const Token& pragma_token);

}  // namespace taskc::frontend
