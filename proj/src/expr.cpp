#include "dagfit/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace dagfit {
namespace expr {

// ---------------------------------------------------------------------------
// lexer
// ---------------------------------------------------------------------------

std::vector<Token> tokenize(const std::string& src) {
    std::vector<Token> tokens;
    int line = 1, col = 1;
    std::size_t i = 0;

    auto push = [&](TokenKind k, std::string text, double num = 0.0) {
        tokens.push_back(Token{k, std::move(text), num, line, col});
    };

    while (i < src.size()) {
        const char c = src[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++col;
            ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                    src[j] == '.'))
                ++j;
            push(TokenKind::Ident, src.substr(i, j - i));
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    j = k;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
                        ++j;
                }
            }
            const std::string text = src.substr(i, j - i);
            double value = 0.0;
            std::from_chars(text.data(), text.data() + text.size(), value);
            push(TokenKind::Number, text, value);
            col += static_cast<int>(j - i);
            i = j;
            continue;
        }
        TokenKind kind;
        switch (c) {
        case '(': kind = TokenKind::LParen; break;
        case ')': kind = TokenKind::RParen; break;
        case '[': kind = TokenKind::LBrack; break;
        case ']': kind = TokenKind::RBrack; break;
        case '|': kind = TokenKind::Pipe; break;
        case ',': kind = TokenKind::Comma; break;
        case '+': kind = TokenKind::Plus; break;
        case '*': kind = TokenKind::Star; break;
        default:
            throw LexError("unexpected character '" + std::string(1, c) + "' at " +
                           std::to_string(line) + ":" + std::to_string(col));
        }
        push(kind, std::string(1, c));
        ++col;
        ++i;
    }
    tokens.push_back(Token{TokenKind::End, "", 0.0, line, col});
    return tokens;
}

// ---------------------------------------------------------------------------
// AST constructors
// ---------------------------------------------------------------------------

ExprPtr Expr::make_name(std::string n, std::vector<std::string> idx) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Name;
    e->name = std::move(n);
    e->indices = std::move(idx);
    return e;
}

ExprPtr Expr::make_number(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Number;
    e->number = v;
    return e;
}

ExprPtr Expr::make_call(ExprPtr callee, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Call;
    e->callee = std::move(callee);
    e->operands = std::move(args);
    return e;
}

ExprPtr Expr::make_mul(std::vector<ExprPtr> ops) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Mul;
    e->operands = std::move(ops);
    return e;
}

ExprPtr Expr::make_add(std::vector<ExprPtr> ops) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Add;
    e->operands = std::move(ops);
    return e;
}

ExprPtr Expr::make_sum(std::string axis_var, ExprPtr body) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::SumReduce;
    e->name = std::move(axis_var);
    e->operands = {std::move(body)};
    return e;
}

bool equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case Expr::Kind::Name:
        return a.name == b.name && a.indices == b.indices;
    case Expr::Kind::Number:
        return a.number == b.number;
    case Expr::Kind::Call:
        if (!equal(a.callee, b.callee) || a.operands.size() != b.operands.size()) return false;
        break;
    case Expr::Kind::SumReduce:
        if (a.name != b.name) return false;
        break;
    default:
        if (a.operands.size() != b.operands.size()) return false;
        break;
    }
    if (a.operands.size() != b.operands.size()) return false;
    for (std::size_t i = 0; i < a.operands.size(); ++i)
        if (!equal(a.operands[i], b.operands[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

    ExprPtr run() {
        ExprPtr e = parse_expr();
        expect(TokenKind::End, "end of input");
        return e;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }

    const Token& advance() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const std::string& expected) const {
        const Token& t = peek();
        const std::string got = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        throw ParseError("expected " + expected + ", got " + got + " at " +
                         std::to_string(t.line) + ":" + std::to_string(t.col));
    }

    const Token& expect(TokenKind k, const std::string& what) {
        if (peek().kind != k) fail(what);
        return advance();
    }

    ExprPtr parse_expr() {
        std::vector<ExprPtr> terms{parse_term()};
        while (peek().kind == TokenKind::Plus) {
            advance();
            terms.push_back(parse_term());
        }
        return terms.size() == 1 ? terms[0] : Expr::make_add(std::move(terms));
    }

    ExprPtr parse_term() {
        std::vector<ExprPtr> factors{parse_factor()};
        while (peek().kind == TokenKind::Star) {
            advance();
            factors.push_back(parse_factor());
        }
        return factors.size() == 1 ? factors[0] : Expr::make_mul(std::move(factors));
    }

    ExprPtr parse_factor() {
        if (peek().kind == TokenKind::Ident && peek().text == "sum" &&
            peek(1).kind == TokenKind::LBrack) {
            advance(); // sum
            advance(); // [
            const Token& var = expect(TokenKind::Ident, "index variable");
            if (std::find(bound_.begin(), bound_.end(), var.text) != bound_.end())
                throw ParseError("index variable '" + var.text +
                                 "' shadows an enclosing sum at " + std::to_string(var.line) +
                                 ":" + std::to_string(var.col));
            expect(TokenKind::Pipe, "'|'");
            bound_.push_back(var.text);
            ExprPtr body = parse_expr();
            bound_.pop_back();
            expect(TokenKind::RBrack, "']'");
            return Expr::make_sum(var.text, std::move(body));
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        if (peek().kind == TokenKind::Number) {
            return Expr::make_number(advance().number);
        }
        if (peek().kind == TokenKind::LParen) {
            advance();
            ExprPtr e = parse_expr();
            expect(TokenKind::RParen, "')'");
            return e;
        }
        if (peek().kind != TokenKind::Ident) fail("term");
        const std::string name = advance().text;

        std::vector<std::string> indices;
        if (peek().kind == TokenKind::LBrack) {
            advance();
            indices.push_back(expect(TokenKind::Ident, "index variable").text);
            while (peek().kind == TokenKind::Comma) {
                advance();
                indices.push_back(expect(TokenKind::Ident, "index variable").text);
            }
            expect(TokenKind::RBrack, "']'");
        }
        ExprPtr e = Expr::make_name(name, std::move(indices));

        if (peek().kind == TokenKind::LParen) {
            advance();
            std::vector<ExprPtr> args;
            if (peek().kind != TokenKind::RParen) {
                args.push_back(parse_expr());
                while (peek().kind == TokenKind::Comma) {
                    advance();
                    args.push_back(parse_expr());
                }
            }
            expect(TokenKind::RParen, "')'");
            e = Expr::make_call(std::move(e), std::move(args));
        }
        return e;
    }

    const std::vector<Token>& tokens_;
    std::size_t pos_ = 0;
    std::vector<std::string> bound_;
};

} // namespace

ExprPtr parse(const std::vector<Token>& tokens) { return Parser(tokens).run(); }

ExprPtr parse(const std::string& src) { return parse(tokenize(src)); }

// ---------------------------------------------------------------------------
// printer
// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// precedence levels: Add=1, Mul=2, atoms=3
int level_of(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Add: return 1;
    case Expr::Kind::Mul: return 2;
    default: return 3;
    }
}

std::string render(const ExprPtr& e, int parent_level) {
    std::string out;
    switch (e->kind) {
    case Expr::Kind::Name:
        out = e->name;
        if (!e->indices.empty()) {
            out += '[';
            for (std::size_t i = 0; i < e->indices.size(); ++i) {
                if (i) out += ',';
                out += e->indices[i];
            }
            out += ']';
        }
        break;
    case Expr::Kind::Number:
        out = format_number(e->number);
        break;
    case Expr::Kind::Call: {
        out = render(e->callee, 3) + "(";
        for (std::size_t i = 0; i < e->operands.size(); ++i) {
            if (i) out += ", ";
            out += render(e->operands[i], 0);
        }
        out += ')';
        break;
    }
    case Expr::Kind::SumReduce:
        out = "sum[" + e->name + "| " + render(e->operands[0], 0) + "]";
        break;
    case Expr::Kind::Mul: {
        for (std::size_t i = 0; i < e->operands.size(); ++i) {
            if (i) out += " * ";
            out += render(e->operands[i], 2);
        }
        break;
    }
    case Expr::Kind::Add: {
        for (std::size_t i = 0; i < e->operands.size(); ++i) {
            if (i) out += " + ";
            out += render(e->operands[i], 1);
        }
        break;
    }
    }
    if (level_of(*e) <= parent_level && level_of(*e) < 3) out = "(" + out + ")";
    return out;
}

} // namespace

std::string pretty_print(const ExprPtr& e) { return render(e, 0); }

namespace {

void dump_rec(const ExprPtr& e, int depth, std::ostringstream& os) {
    const std::string pad(2 * depth, ' ');
    switch (e->kind) {
    case Expr::Kind::Name: {
        os << pad << "Name " << e->name;
        if (!e->indices.empty()) {
            os << " [";
            for (std::size_t i = 0; i < e->indices.size(); ++i)
                os << (i ? "," : "") << e->indices[i];
            os << "]";
        }
        os << '\n';
        break;
    }
    case Expr::Kind::Number:
        os << pad << "Number " << format_number(e->number) << '\n';
        break;
    case Expr::Kind::Call:
        os << pad << "Call\n";
        dump_rec(e->callee, depth + 1, os);
        for (const auto& a : e->operands) dump_rec(a, depth + 1, os);
        break;
    case Expr::Kind::SumReduce:
        os << pad << "SumReduce " << e->name << '\n';
        dump_rec(e->operands[0], depth + 1, os);
        break;
    case Expr::Kind::Mul:
        os << pad << "Mul\n";
        for (const auto& a : e->operands) dump_rec(a, depth + 1, os);
        break;
    case Expr::Kind::Add:
        os << pad << "Add\n";
        for (const auto& a : e->operands) dump_rec(a, depth + 1, os);
        break;
    }
}

} // namespace

std::string dump_ast(const ExprPtr& e) {
    std::ostringstream os;
    dump_rec(e, 0, os);
    return os.str();
}

// ---------------------------------------------------------------------------
// index space & expansion
// ---------------------------------------------------------------------------

void IndexSpace::add_axis(std::string name, std::vector<std::string> labels) {
    if (has(name)) throw ConfigError("duplicate axis '" + name + "'");
    std::set<std::string> seen;
    for (const auto& l : labels)
        if (!seen.insert(l).second)
            throw ConfigError("duplicate label '" + l + "' on axis '" + name + "'");
    if (labels.empty()) throw ConfigError("axis '" + name + "' has no labels");
    axes_.emplace_back(std::move(name), std::move(labels));
}

bool IndexSpace::has(const std::string& axis) const {
    for (const auto& [name, labels] : axes_)
        if (name == axis) return true;
    return false;
}

const std::vector<std::string>& IndexSpace::labels(const std::string& axis) const {
    for (const auto& [name, labels] : axes_)
        if (name == axis) return labels;
    throw UnknownAxis("unknown axis '" + axis + "'");
}

namespace {

using Env = std::map<std::string, std::string>;

void collect_free(const ExprPtr& e, std::vector<std::string>& bound,
                  std::vector<std::string>& free_vars) {
    switch (e->kind) {
    case Expr::Kind::Name:
        for (const auto& v : e->indices)
            if (std::find(bound.begin(), bound.end(), v) == bound.end() &&
                std::find(free_vars.begin(), free_vars.end(), v) == free_vars.end())
                free_vars.push_back(v);
        break;
    case Expr::Kind::SumReduce:
        bound.push_back(e->name);
        collect_free(e->operands[0], bound, free_vars);
        bound.pop_back();
        break;
    case Expr::Kind::Call:
        collect_free(e->callee, bound, free_vars);
        [[fallthrough]];
    case Expr::Kind::Mul:
    case Expr::Kind::Add:
        for (const auto& op : e->operands) collect_free(op, bound, free_vars);
        break;
    case Expr::Kind::Number:
        break;
    }
}

ExprPtr substitute(const ExprPtr& e, const IndexSpace& space, const Env& env) {
    switch (e->kind) {
    case Expr::Kind::Name: {
        if (e->indices.empty()) return e;
        std::string key = e->name;
        for (const auto& v : e->indices) {
            auto it = env.find(v);
            if (it == env.end())
                throw UnboundIndex("index variable '" + v + "' is not bound");
            key += "." + it->second;
        }
        return Expr::make_name(std::move(key));
    }
    case Expr::Kind::Number:
        return e;
    case Expr::Kind::Call: {
        std::vector<ExprPtr> args;
        args.reserve(e->operands.size());
        for (const auto& a : e->operands) args.push_back(substitute(a, space, env));
        return Expr::make_call(substitute(e->callee, space, env), std::move(args));
    }
    case Expr::Kind::Mul:
    case Expr::Kind::Add: {
        std::vector<ExprPtr> ops;
        ops.reserve(e->operands.size());
        for (const auto& a : e->operands) ops.push_back(substitute(a, space, env));
        return e->kind == Expr::Kind::Mul ? Expr::make_mul(std::move(ops))
                                          : Expr::make_add(std::move(ops));
    }
    case Expr::Kind::SumReduce: {
        const auto& labels = space.labels(e->name); // UnknownAxis
        std::vector<ExprPtr> terms;
        terms.reserve(labels.size());
        for (const auto& label : labels) {
            Env inner = env;
            inner[e->name] = label;
            terms.push_back(substitute(e->operands[0], space, inner));
        }
        return terms.size() == 1 ? terms[0] : Expr::make_add(std::move(terms));
    }
    }
    throw Error("unreachable expression kind");
}

} // namespace

std::vector<ExpandedExpr> expand(const ExprPtr& e, const IndexSpace& space) {
    std::vector<std::string> bound, free_vars;
    collect_free(e, bound, free_vars);
    for (const auto& v : free_vars)
        if (!space.has(v))
            throw UnboundIndex("index variable '" + v +
                               "' is neither bound by a sum nor an axis");

    // free axes in declaration order
    std::vector<std::string> free_axes;
    for (const auto& [axis, labels] : space.axes())
        if (std::find(free_vars.begin(), free_vars.end(), axis) != free_vars.end())
            free_axes.push_back(axis);

    std::vector<ExpandedExpr> out;
    std::vector<std::size_t> counter(free_axes.size(), 0);
    while (true) {
        Env env;
        for (std::size_t a = 0; a < free_axes.size(); ++a)
            env[free_axes[a]] = space.labels(free_axes[a])[counter[a]];
        out.push_back(ExpandedExpr{env, substitute(e, space, env)});

        // odometer over label combinations
        std::size_t a = free_axes.size();
        while (a > 0) {
            --a;
            if (++counter[a] < space.labels(free_axes[a]).size()) break;
            counter[a] = 0;
            if (a == 0) return out;
        }
        if (free_axes.empty()) return out;
    }
}

ExprPtr expand_single(const ExprPtr& e, const IndexSpace& space) {
    auto instances = expand(e, space);
    if (instances.size() != 1)
        throw UnboundIndex("expression has free axes (" + std::to_string(instances.size()) +
                           " instances); expected exactly one");
    return instances[0].expr;
}

} // namespace expr
} // namespace dagfit
