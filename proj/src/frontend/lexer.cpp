#include "taskc/frontend/lexer.hpp"

#include <array>
#include <cctype>

namespace taskc::frontend {

namespace {

constexpr std::array kKeywords = {
    "void",   "char",   "signed", "unsigned", "short",  "int",    "long",          "float",
    "double", "size_t", "const",  "static",   "extern", "for",    "if",            "else",
    "while",  "return", "sizeof", "__kernel", "__global", "__attribute__",
};

// Longest first so that maximal munch falls out of a linear scan.
constexpr std::array kPuncts = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=",  "/=",  "%=",  "&=", "|=", "^=", "(",  ")",  "{",  "}",  "[",  "]",  ";",  ",",  ".",  "=",
    "+",   "-",   "*",   "/",  "%",  "<",  ">",  "!",  "&",  "|",  "^",  "~",  "?",  ":",
};

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

class Lexer {
public:
    Lexer(std::string_view src, SourceLocation start) : src_(src), file_(start.file), line_(start.line), col_(start.column) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        bool line_start = true;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                advance();
                line_start = true;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                advance();
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                SourceLocation at = here();
                advance();
                advance();
                while (true) {
                    if (pos_ >= src_.size()) throw LexError(at, "unterminated comment");
                    if (src_[pos_] == '*' && peek(1) == '/') {
                        advance();
                        advance();
                        break;
                    }
                    advance();
                }
                continue;
            }
            if (c == '#') {
                if (!line_start) throw LexError(here(), "stray '#' in program");
                out.push_back(lex_directive());
                continue;
            }
            line_start = false;
            if (ident_start(c)) {
                out.push_back(lex_word());
            } else if (digit(c) || (c == '.' && digit(peek(1)))) {
                out.push_back(lex_number());
            } else if (c == '"') {
                out.push_back(lex_string());
            } else {
                out.push_back(lex_punct());
            }
        }
        out.push_back(Token{TokenKind::End, "", here(), {}});
        return out;
    }

private:
    SourceLocation here() const { return SourceLocation{file_, line_, col_}; }

    char peek(std::size_t n) const { return pos_ + n < src_.size() ? src_[pos_ + n] : '\0'; }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    Token lex_directive() {
        SourceLocation at = here();
        advance();  // '#'
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) advance();
        std::size_t word_start = pos_;
        while (pos_ < src_.size() && ident_char(src_[pos_])) advance();
        std::string_view word = src_.substr(word_start, pos_ - word_start);
        if (word != "pragma") throw LexError(at, "unsupported preprocessor directive '#" + std::string(word) + "'");
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) advance();
        SourceLocation payload_at = here();
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        std::string payload(src_.substr(start, pos_ - start));
        // Trailing comments and whitespace are not part of the payload.
        if (auto cut = payload.find("//"); cut != std::string::npos) payload.resize(cut);
        while (!payload.empty() && std::isspace(static_cast<unsigned char>(payload.back()))) payload.pop_back();
        return Token{TokenKind::Pragma, std::move(payload), at, payload_at};
    }

    Token lex_word() {
        SourceLocation at = here();
        std::size_t start = pos_;
        while (pos_ < src_.size() && ident_char(src_[pos_])) advance();
        std::string word(src_.substr(start, pos_ - start));
        TokenKind kind = is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
        return Token{kind, std::move(word), at, {}};
    }

    Token lex_number() {
        SourceLocation at = here();
        std::size_t start = pos_;
        bool is_float = false;
        if (src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
            advance();
            advance();
            if (!std::isxdigit(static_cast<unsigned char>(peek(0)))) throw LexError(at, "malformed hexadecimal literal");
            while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        } else {
            while (pos_ < src_.size() && digit(src_[pos_])) advance();
            if (pos_ < src_.size() && src_[pos_] == '.') {
                is_float = true;
                advance();
                while (pos_ < src_.size() && digit(src_[pos_])) advance();
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                is_float = true;
                advance();
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
                if (!digit(peek(0))) throw LexError(at, "malformed exponent in floating literal");
                while (pos_ < src_.size() && digit(src_[pos_])) advance();
            }
        }
        if (is_float) {
            if (pos_ < src_.size() && (src_[pos_] == 'f' || src_[pos_] == 'F')) advance();
        } else {
            while (pos_ < src_.size() && (src_[pos_] == 'u' || src_[pos_] == 'U' || src_[pos_] == 'l' || src_[pos_] == 'L'))
                advance();
        }
        if (pos_ < src_.size() && ident_char(src_[pos_])) throw LexError(at, "invalid suffix on numeric literal");
        return Token{is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral,
                     std::string(src_.substr(start, pos_ - start)), at, {}};
    }

    Token lex_string() {
        SourceLocation at = here();
        advance();  // opening quote
        std::string text;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') throw LexError(at, "unterminated string literal");
            char c = src_[pos_];
            if (c == '"') {
                advance();
                break;
            }
            if (c == '\\') {
                advance();
                if (pos_ >= src_.size()) throw LexError(at, "unterminated string literal");
                char e = src_[pos_];
                switch (e) {
                    case 'n': text += '\n'; break;
                    case 't': text += '\t'; break;
                    case '\\': text += '\\'; break;
                    case '"': text += '"'; break;
                    case '\'': text += '\''; break;
                    case '0': text += '\0'; break;
                    default: throw LexError(here(), std::string("unknown escape sequence '\\") + e + "'");
                }
                advance();
                continue;
            }
            text += c;
            advance();
        }
        return Token{TokenKind::StringLiteral, std::move(text), at, {}};
    }

    Token lex_punct() {
        SourceLocation at = here();
        for (std::string_view p : kPuncts) {
            if (src_.substr(pos_, p.size()) == p) {
                for (std::size_t i = 0; i < p.size(); ++i) advance();
                return Token{TokenKind::Punct, std::string(p), at, {}};
            }
        }
        unsigned char c = static_cast<unsigned char>(src_[pos_]);
        std::string shown = std::isprint(c) ? std::string(1, static_cast<char>(c)) : "\\x" + std::to_string(c);
        throw LexError(at, "illegal character '" + shown + "'");
    }

    std::string_view src_;
    std::string file_;
    int line_;
    int col_;
    std::size_t pos_ = 0;
};

}  // namespace

bool is_keyword(std::string_view word) {
    for (std::string_view k : kKeywords)
        if (k == word) return true;
    return false;
}

std::vector<Token> tokenize(std::string_view source, const std::string& file_name) {
    return Lexer(source, SourceLocation{file_name, 1, 1}).run();
}

std::vector<Token> tokenize_at(std::string_view source, SourceLocation start) {
    return Lexer(source, std::move(start)).run();
}

std::string quote(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\0': out += "\\0"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

}  // namespace taskc::frontend
