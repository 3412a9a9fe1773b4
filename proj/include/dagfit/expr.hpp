#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dagfit/errors.hpp"

namespace dagfit {
namespace expr {

// ---------------------------------------------------------------------------
// tokens
// ---------------------------------------------------------------------------

enum class TokenKind { Ident, Number, LParen, RParen, LBrack, RBrack, Pipe, Comma, Plus, Star, End };

struct Token {
    TokenKind kind;
    std::string text;
    double number = 0.0;
    int line = 1;
    int col = 1;
};

/// Identifiers are [A-Za-z_][A-Za-z0-9_.]* (dots join namespace segments and
/// index labels). Throws LexError with line/column on any other character.
std::vector<Token> tokenize(const std::string& src);

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Name, Number, Call, Mul, Add, SumReduce };

    Kind kind;
    std::string name;                 // Name: identifier; SumReduce: axis variable
    std::vector<std::string> indices; // Name only
    double number = 0.0;              // Number only
    ExprPtr callee;                   // Call only
    std::vector<ExprPtr> operands;    // Call args, Mul/Add operands, SumReduce body[0]

    static ExprPtr make_name(std::string n, std::vector<std::string> idx = {});
    static ExprPtr make_number(double v);
    static ExprPtr make_call(ExprPtr callee, std::vector<ExprPtr> args);
    static ExprPtr make_mul(std::vector<ExprPtr> ops);
    static ExprPtr make_add(std::vector<ExprPtr> ops);
    static ExprPtr make_sum(std::string axis_var, ExprPtr body);
};

bool equal(const Expr& a, const Expr& b);
inline bool equal(const ExprPtr& a, const ExprPtr& b) { return equal(*a, *b); }

// ---------------------------------------------------------------------------
// parser / printer
// ---------------------------------------------------------------------------

/// Grammar (precedence low -> high), left-associative:
///   expr    := term ('+' term)*
///   term    := factor ('*' factor)*
///   factor  := 'sum' '[' ident '|' expr ']' | primary
///   primary := ident ('[' ident (',' ident)* ']')? ('(' args? ')')?
///            | number | '(' expr ')'
/// A sum variable shadowing an enclosing one is a ParseError.
ExprPtr parse(const std::vector<Token>& tokens);
ExprPtr parse(const std::string& src);

/// Canonical text form; parse(pretty_print(e)) is structurally equal to e.
std::string pretty_print(const ExprPtr& e);

/// Indented tree dump for diagnostics.
std::string dump_ast(const ExprPtr& e);

// ---------------------------------------------------------------------------
// index space & expansion
// ---------------------------------------------------------------------------

/// Named axes with label lists over which model fragments replicate.
class IndexSpace {
public:
    void add_axis(std::string name, std::vector<std::string> labels);
    bool has(const std::string& axis) const;
    const std::vector<std::string>& labels(const std::string& axis) const; // UnknownAxis
    const std::vector<std::pair<std::string, std::vector<std::string>>>& axes() const {
        return axes_;
    }

private:
    std::vector<std::pair<std::string, std::vector<std::string>>> axes_;
};

struct ExpandedExpr {
    std::map<std::string, std::string> assignment; // free axis -> label
    ExprPtr expr;                                  // index-free
};

/// Replace every SumReduce by an explicit Add over its axis labels and
/// substitute index variables into names ("x" with d=a -> "x.a"). Free index
/// variables must be axes; the expression is replicated once per label
/// combination of those axes, in axis declaration order.
std::vector<ExpandedExpr> expand(const ExprPtr& e, const IndexSpace& space);

/// Expansion that must yield exactly one instance (no free axes).
ExprPtr expand_single(const ExprPtr& e, const IndexSpace& space);

} // namespace expr
} // namespace dagfit
