#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "taskc/frontend/lexer.hpp"
#include "taskc/frontend/parser.hpp"
#include "taskc/frontend/printer.hpp"

using namespace taskc;
using namespace taskc::frontend;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::filesystem::path> corpus_files() {
    std::vector<std::filesystem::path> out;
    for (const char* dir : {"samples", "tests/corpus"}) {
        for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(TASKC_SOURCE_DIR) / dir)) {
            auto ext = e.path().extension();
            if (ext == ".tc" || ext == ".cl") out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

const char* kFuncExample = R"(int
func (void)
{
  int matrix[123][234][77]
    __attribute__ ((registered, heap_allocated));

  some_task (matrix);
#pragma starpu wait

#pragma starpu acquire matrix

  dump_matrix (matrix, 123, 234, 77);
}
)";

}  // namespace

TEST_CASE("tokenize: minimal declaration") {
    auto toks = tokenize("float x;", "t.tc");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0].is_keyword("float"));
    CHECK(toks[1].kind == TokenKind::Identifier);
    CHECK(toks[1].text == "x");
    CHECK(toks[2].is_punct(";"));
    CHECK(toks[3].kind == TokenKind::End);
    CHECK(toks[1].loc == SourceLocation{"t.tc", 1, 7});
}

TEST_CASE("tokenize: pragma line becomes one token") {
    auto toks = tokenize("#pragma starpu wait\n", "t.tc");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].kind == TokenKind::Pragma);
    CHECK(toks[0].text == "starpu wait");
    CHECK(toks[0].payload.column == 9);
}

TEST_CASE("tokenize: errors carry locations") {
    try {
        tokenize("\"unterminated", "t.tc");
        FAIL("expected LexError");
    } catch (const LexError& e) {
        CHECK(e.location == SourceLocation{"t.tc", 1, 1});
    }
    CHECK_THROWS_AS(tokenize("int x = 1 @ 2;", "t.tc"), LexError);
    CHECK_THROWS_AS(tokenize("#include <stdio.h>\n", "t.tc"), LexError);
}

TEST_CASE("tokenize: comments and literals") {
    auto toks = tokenize("/* a */ x = 3.14f + 0x10u; // tail\n\"a\\\"b\"", "t.tc");
    CHECK(toks[0].text == "x");
    CHECK(toks[2].kind == TokenKind::FloatLiteral);
    CHECK(toks[2].text == "3.14f");
    CHECK(toks[4].kind == TokenKind::IntLiteral);
    CHECK(toks[4].text == "0x10u");
    CHECK(toks[6].kind == TokenKind::StringLiteral);
    CHECK(toks[6].text == "a\"b");
}

TEST_CASE("parse: task declaration carries the task attribute") {
    auto tu = parse_source(
        "void scale_vector (int size, float vector[size], float factor)\n"
        "  __attribute__ ((task));\n",
        "s.tc");
    REQUIRE(tu.items.size() == 1);
    const FunctionDecl& f = tu.items[0].function;
    CHECK(f.name == "scale_vector");
    REQUIRE(f.attrs.size() == 1);
    CHECK(f.attrs[0].kind == AttrKind::Task);
    REQUIRE(f.params.size() == 3);
    CHECK(f.params[1].type.array_dims.size() == 1);
    CHECK(f.params[1].type.array_dims[0].kind == ArrayDim::Kind::Symbol);
    CHECK(f.params[1].type.array_dims[0].symbol == "size");
}

TEST_CASE("parse: empty input") {
    CHECK(parse_source("", "e.tc").items.empty());
    CHECK(print(parse_source("", "e.tc")).empty());
}

TEST_CASE("parse: register pragma at statement position") {
    auto tu = parse_source("void f (void)\n{\n  double *p;\n#pragma starpu register p 12\n}\n", "r.tc");
    const Stmt& body = *tu.items[0].function.body;
    REQUIRE(body.body.size() == 2);
    const Stmt& s = body.body[1];
    REQUIRE(s.kind == Stmt::Kind::Pragma);
    CHECK(s.pragma->kind == PragmaKind::Register);
    CHECK(s.pragma->var == "p");
    REQUIRE(s.pragma->size.has_value());
    CHECK(s.pragma->size->int_value == 12);
    CHECK(s.pragma->loc == SourceLocation{"r.tc", 4, 1});
    CHECK(s.pragma->size->loc == SourceLocation{"r.tc", 4, 27});
}

TEST_CASE("parse: opencl pragma") {
    auto tu = parse_source("#pragma starpu opencl my_task_opencl \"my-kernel.cl\" \"kern\" 8\n", "o.tc");
    const PragmaNode& p = tu.items[0].pragma;
    CHECK(p.kind == PragmaKind::OpenCL);
    CHECK(p.impl == "my_task_opencl");
    CHECK(p.file == "my-kernel.cl");
    CHECK(p.kernel == "kern");
    CHECK(p.group_size == 8);
    CHECK_THROWS_AS(parse_source("#pragma starpu opencl f \"k.cl\" \"k\" 0\n", "o.tc"), ParseError);
    CHECK_THROWS_AS(parse_source("#pragma starpu wait now\n", "o.tc"), ParseError);
}

TEST_CASE("parse: unknown pragmas and attributes are inert") {
    auto tu = parse_source(
        "#pragma omp parallel for\n"
        "int x __attribute__ ((aligned (16), deprecated));\n",
        "u.tc");
    REQUIRE(tu.items.size() == 2);
    CHECK(tu.items[0].pragma.kind == PragmaKind::Unknown);
    CHECK(tu.items[0].pragma.raw == "omp parallel for");
    const VarDecl& v = tu.items[1].variables[0];
    REQUIRE(v.attrs.size() == 2);
    CHECK(v.attrs[0].kind == AttrKind::Unknown);
    CHECK(v.attrs[0].raw.size() == 1);
    CHECK(v.attrs[0].raw[0].text == "16");
    std::string printed = print(tu, {.strip_annotations = true});
    CHECK(printed.find("aligned (16)") != std::string::npos);
    CHECK(printed.find("#pragma omp parallel for") != std::string::npos);
}

TEST_CASE("parse: attribute outside declarator suffix is rejected") {
    CHECK_THROWS_AS(parse_source("__attribute__ ((task)) void f (void);", "a.tc"), ParseError);
    CHECK_THROWS_AS(parse_source("void f (void) { __attribute__ ((task)) int x; }", "a.tc"), ParseError);
}

TEST_CASE("parse: errors report expected tokens") {
    try {
        parse_source("int x", "p.tc");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.location == SourceLocation{"p.tc", 1, 6});
        CHECK(std::find(e.expected.begin(), e.expected.end(), ";") != e.expected.end());
    }
    CHECK_THROWS_AS(parse_source("long long x;", "p.tc"), ParseError);
    CHECK_THROWS_AS(parse_source("float *a[3];", "p.tc"), ParseError);
}

TEST_CASE("parse: expressions") {
    auto tu = parse_source("void f (int n, float *v) { v[n - 1] += (float) n * -2.5f / sizeof (double); }", "e.tc");
    const Expr& e = *tu.items[0].function.body->body[0].expr;
    CHECK(e.kind == Expr::Kind::Assign);
    CHECK(e.text == "+=");
    CHECK(e.operands[0].kind == Expr::Kind::Subscript);
    const Expr& rhs = e.operands[1];
    CHECK(rhs.kind == Expr::Kind::Binary);
    CHECK(rhs.text == "/");
    CHECK(rhs.operands[0].text == "*");
    CHECK(rhs.operands[0].operands[0].kind == Expr::Kind::Cast);
    CHECK(rhs.operands[1].kind == Expr::Kind::SizeofType);
}

TEST_CASE("print: round trip of the scoped allocation example") {
    auto tu = parse_source(kFuncExample, "func.tc");
    auto again = parse_source(print(tu), "func2.tc");
    CHECK(structurally_equal(tu, again));
}

TEST_CASE("print: strip annotations leaves the sequential program") {
    const char* src = R"(extern void my_task (size_t a, double *x, size_t b, double *y)
  __attribute__ ((task));
void
one_unregistered_pointer (void)
{
  double *p, *q;
  p = malloc (12 * sizeof *p);
  q = malloc (23 * sizeof *q);
#pragma starpu register p 12
  my_task (12, p, 23, q);
}
)";
    auto tu = parse_source(src, "x.tc");
    std::string stripped = print(tu, {.strip_annotations = true});
    CHECK(stripped.find("pragma") == std::string::npos);
    CHECK(stripped.find("__attribute__") == std::string::npos);
    CHECK(stripped.find("my_task (12, p, 23, q);") != std::string::npos);

    // Same unit minus the pragma statement and the task attribute.
    auto expected = tu;
    expected.items[0].function.attrs.clear();
    auto& stmts = expected.items[1].function.body->body;
    stmts.erase(stmts.begin() + 3);
    CHECK(structurally_equal(parse_source(stripped, "y.tc"), expected));
}

TEST_CASE("corpus: round trip and location bounds") {
    auto files = corpus_files();
    REQUIRE(files.size() >= 6);
    for (const auto& path : files) {
        CAPTURE(path.string());
        std::string src = slurp(path);
        auto tu = parse_source(src, path.string());
        auto again = parse_source(print(tu), path.string());
        CHECK(structurally_equal(tu, again));

        // Every location lies inside the file.
        std::vector<std::string> lines;
        std::istringstream ss(src);
        for (std::string l; std::getline(ss, l);) lines.push_back(l);
        bool in_bounds = true;
        for_each_location(tu, [&](const SourceLocation& loc) {
            if (loc.line < 1 || loc.line > static_cast<int>(lines.size())) in_bounds = false;
            else if (loc.column < 1 || loc.column > static_cast<int>(lines[loc.line - 1].size()) + 1) in_bounds = false;
        });
        CHECK(in_bounds);

        // Stripping annotations keeps every non-annotation node.
        auto stripped = parse_source(print(tu, {.strip_annotations = true}), "s");
        auto plain = parse_source(print(stripped), "s");
        CHECK(structurally_equal(stripped, plain));
    }
}

namespace {

Expr random_expr(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 9);
    Expr e;
    switch (pick(rng)) {
        case 0:
            e.kind = Expr::Kind::IntLit;
            e.int_value = rng() % 100;
            e.text = std::to_string(e.int_value);
            break;
        case 1:
            e.kind = Expr::Kind::FloatLit;
            e.text = std::to_string(rng() % 100) + ".5f";
            e.float_value = std::strtod(e.text.c_str(), nullptr);
            break;
        case 2:
            e.kind = Expr::Kind::Ident;
            e.text = std::string(1, static_cast<char>('a' + rng() % 4));
            break;
        case 3:
        case 4:
        case 5: {
            static const char* ops[] = {"+", "-", "*", "/", "%", "<", "<=", "==", "!=", "&&", "||"};
            e.kind = Expr::Kind::Binary;
            e.text = ops[rng() % 11];
            e.operands.push_back(random_expr(rng, depth - 1));
            e.operands.push_back(random_expr(rng, depth - 1));
            break;
        }
        case 6: {
            static const char* ops[] = {"-", "!", "*", "&"};
            e.kind = Expr::Kind::Unary;
            e.text = ops[rng() % 4];
            e.operands.push_back(random_expr(rng, depth - 1));
            break;
        }
        case 7: {
            e.kind = Expr::Kind::Subscript;
            Expr base;
            base.kind = Expr::Kind::Ident;
            base.text = "v";
            e.operands.push_back(base);
            e.operands.push_back(random_expr(rng, depth - 1));
            break;
        }
        case 8:
            e.kind = Expr::Kind::Call;
            e.text = "g";
            for (unsigned i = 0; i < rng() % 3; ++i) e.operands.push_back(random_expr(rng, depth - 1));
            break;
        default:
            e.kind = Expr::Kind::Cast;
            e.type.base = BaseType::Float;
            e.operands.push_back(random_expr(rng, depth - 1));
            break;
    }
    return e;
}

}  // namespace

TEST_CASE("print: random expressions survive print/parse") {
    std::mt19937 rng(1234);
    for (int i = 0; i < 500; ++i) {
        Expr e = random_expr(rng, 4);
        std::string text = print_expr(e);
        CAPTURE(text);
        auto tu = parse_source("void f (void) { " + text + "; }", "r.tc");
        TranslationUnit expected;
        expected.items.resize(1);
        expected.items[0].function.name = "f";
        expected.items[0].function.return_type.base = BaseType::Void;
        Stmt body;
        body.kind = Stmt::Kind::Compound;
        Stmt s;
        s.kind = Stmt::Kind::Expr;
        s.expr = e;
        body.body.push_back(s);
        expected.items[0].function.body = body;
        CHECK(structurally_equal(tu, expected));
    }
}
