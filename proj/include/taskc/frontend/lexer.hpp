#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taskc/support/source_location.hpp"

namespace taskc::frontend {

enum class TokenKind {
    Identifier,
    Keyword,
    IntLiteral,
    FloatLiteral,
    StringLiteral,  // text holds the decoded contents, without quotes
    Punct,
    Pragma,         // text holds the payload after "#pragma", trimmed
    End,
};

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    SourceLocation loc;
    SourceLocation payload;  // Pragma only: where the payload text starts

    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_punct(std::string_view t) const { return is(TokenKind::Punct, t); }
    bool is_keyword(std::string_view t) const { return is(TokenKind::Keyword, t); }
};

class LexError : public std::runtime_error {
public:
    LexError(SourceLocation loc, std::string msg)
        : std::runtime_error(loc.str() + ": error: " + msg), location(std::move(loc)), message(std::move(msg)) {}

    SourceLocation location;
    std::string message;
};

bool is_keyword(std::string_view word);

/// Splits TaskC source into tokens. Comments are dropped; each `#pragma`
/// line becomes one Pragma token. The result always ends with an End token.
std::vector<Token> tokenize(std::string_view source, const std::string& file_name);

/// Tokenizes a pragma payload, placing tokens relative to `start`.
std::vector<Token> tokenize_at(std::string_view source, SourceLocation start);

/// Quote and escape a string for re-emission as a TaskC literal.
std::string quote(std::string_view text);

}  // namespace taskc::frontend
