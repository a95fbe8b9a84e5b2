#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "svf/problem.hpp"

namespace svf {

ParseError::ParseError(Kind kind, const std::string& msg, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + msg),
      kind_(kind),
      line_(line),
      column_(column) {}

Box Box::uniform(std::size_t n, double lo, double hi) {
  return Box{std::vector<double>(n, lo), std::vector<double>(n, hi)};
}

namespace {

enum class Tok { number, ident, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::end;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        t.kind = Tok::number;
        t.text = lex_number();
        t.number = std::strtod(t.text.c_str(), nullptr);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::ident;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          t.text += advance();
      } else if (c == '<' || c == '>') {
        t.kind = Tok::punct;
        t.text += advance();
        if (pos_ < src_.size() && src_[pos_] == '=') t.text += advance();
        if (t.text.size() != 2)
          throw ParseError(ParseError::Kind::syntax, "expected '" + t.text + "='", t.line,
                           t.column);
      } else if (std::string_view("+-*/^()[]{};=,").find(c) != std::string_view::npos) {
        t.kind = Tok::punct;
        t.text += advance();
      } else {
        throw ParseError(ParseError::Kind::syntax, std::string("unexpected character '") + c + "'",
                         t.line, t.column);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string lex_number() {
    std::string s;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
        s += advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      s += advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      int save_col = col_;
      std::string exp;
      exp += src_[pos_++];
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) exp += src_[pos_++];
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        col_ += static_cast<int>(exp.size());
        s += exp;
        digits();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    return s;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  BilevelProblem problem() {
    BilevelProblem p;
    bool have_x = false, have_y = false, have_upper = false, have_lower = false;
    while (!at_end()) {
      const Token& t = peek();
      if (is_ident("var")) {
        next();
        const Token& name = expect_ident();
        if (name.text != "x" && name.text != "y")
          fail(name, "variables must be named x or y");
        expect("[");
        const Token& n = next();
        if (n.kind != Tok::number || n.number != std::floor(n.number) || n.number < 0)
          fail(n, "expected a nonnegative integer dimension");
        expect("]");
        expect(";");
        bool& have = name.text == "x" ? have_x : have_y;
        if (have) fail(name, "duplicate declaration of " + name.text);
        have = true;
        (name.text == "x" ? dim_x_ : dim_y_) = static_cast<int>(n.number);
      } else if (is_ident("upper") || is_ident("lower")) {
        bool upper = t.text == "upper";
        if (!have_x || !have_y) fail(t, "variables must be declared before sections");
        bool& have = upper ? have_upper : have_lower;
        if (have) fail(t, "duplicate " + t.text + " section");
        have = true;
        section(upper ? p.F : p.f, upper ? p.G : p.g);
      } else if (is_ident("meta")) {
        next();
        meta(p.meta);
      } else {
        fail(t, "expected 'var', 'upper', 'lower' or 'meta'");
      }
    }
    const Token& end = peek();
    if (!have_x) fail(end, "missing declaration 'var x[...]'");
    if (!have_y) fail(end, "missing declaration 'var y[...]'");
    if (!have_upper) fail(end, "missing upper section", ParseError::Kind::missing_objective);
    if (!have_lower) fail(end, "missing lower section", ParseError::Kind::missing_objective);
    p.d = dim_x_;
    p.l = dim_y_;
    validate_meta(p);
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }
  bool at_end() const { return peek().kind == Tok::end; }
  bool is_punct(std::string_view s) const { return peek().kind == Tok::punct && peek().text == s; }
  bool is_ident(std::string_view s) const { return peek().kind == Tok::ident && peek().text == s; }

  [[noreturn]] void fail(const Token& t, const std::string& msg,
                         ParseError::Kind kind = ParseError::Kind::syntax) const {
    throw ParseError(kind, msg, t.line, t.column);
  }

  void expect(std::string_view s) {
    if (!is_punct(s)) {
      const Token& t = peek();
      fail(t, "expected '" + std::string(s) + "' but found '" +
                  (t.kind == Tok::end ? std::string("end of input") : t.text) + "'");
    }
    next();
  }

  const Token& expect_ident() {
    if (peek().kind != Tok::ident) fail(peek(), "expected identifier");
    return next();
  }

  void section(Expr& objective, std::vector<Expr>& constraints) {
    const Token& head = next();
    expect("{");
    if (!is_ident("minimize"))
      fail(peek(), "section '" + head.text + "' must start with 'minimize'",
           ParseError::Kind::missing_objective);
    next();
    objective = fold(expr());
    expect(";");
    while (!is_punct("}")) {
      if (at_end()) fail(peek(), "unterminated section");
      Expr lhs = expr();
      const Token& rel = peek();
      if (!is_punct("<=") && !is_punct(">=")) fail(rel, "expected '<=' or '>='");
      next();
      Expr rhs = expr();
      expect(";");
      Expr e = rel.text == "<=" ? Expr::raw_binary(Op::sub, lhs, rhs)
                                : Expr::raw_binary(Op::sub, rhs, lhs);
      constraints.push_back(fold(e));
    }
    expect("}");
  }

  // expr := term { (+|-) term }
  Expr expr() {
    Expr e = term();
    while (is_punct("+") || is_punct("-")) {
      Op op = next().text == "+" ? Op::add : Op::sub;
      e = Expr::raw_binary(op, e, term());
    }
    return e;
  }

  // term := unary { (*|/) unary }
  Expr term() {
    Expr e = unary();
    while (is_punct("*") || is_punct("/")) {
      Op op = next().text == "*" ? Op::mul : Op::div;
      e = Expr::raw_binary(op, e, unary());
    }
    return e;
  }

  // unary := -unary | power
  Expr unary() {
    if (is_punct("-")) {
      next();
      return Expr::raw_unary(Op::neg, unary());
    }
    if (is_punct("+")) {
      next();
      return unary();
    }
    return power();
  }

  // power := primary [ ^ unary ]   (right associative, exponent must be an integer)
  Expr power() {
    Expr base = primary();
    if (!is_punct("^")) return base;
    const Token& caret = next();
    Expr ex = fold(unary());
    if (!ex.is_constant() || ex.value() != std::floor(ex.value()) || std::fabs(ex.value()) > 1e6)
      fail(caret, "exponent must be an integer constant");
    return Expr::raw_pow(base, static_cast<int>(ex.value()));
  }

  Expr primary() {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      next();
      return Expr::constant(t.number);
    }
    if (is_punct("(")) {
      next();
      Expr e = expr();
      expect(")");
      return e;
    }
    if (t.kind == Tok::ident) {
      static const std::pair<const char*, Op> kFunctions[] = {
          {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"log", Op::log},
          {"sqrt", Op::sqrt}};
      for (auto [name, op] : kFunctions) {
        if (t.text == name) {
          next();
          expect("(");
          Expr a = expr();
          expect(")");
          return Expr::raw_unary(op, a);
        }
      }
      if (t.text == "x" || t.text == "y") {
        next();
        if (!is_punct("["))
          fail(peek(), "expected '[' after variable " + t.text);
        next();
        const Token& idx = next();
        if (idx.kind != Tok::number || idx.number != std::floor(idx.number))
          fail(idx, "expected an integer index");
        expect("]");
        int dim = t.text == "x" ? dim_x_ : dim_y_;
        int i = static_cast<int>(idx.number);
        if (i < 1 || i > dim)
          fail(idx,
               "index " + std::to_string(i) + " out of range for " + t.text + "[" +
                   std::to_string(dim) + "]",
               ParseError::Kind::dimension_mismatch);
        return Expr::variable(t.text == "x" ? Block::x : Block::y, i - 1);
      }
      next();
      if (is_punct("["))
        fail(t, "undeclared variable '" + t.text + "'", ParseError::Kind::undeclared_variable);
      fail(t, "unknown identifier '" + t.text + "'");
    }
    fail(t, t.kind == Tok::end ? "unexpected end of input" : "unexpected '" + t.text + "'");
  }

  double signed_number() {
    bool neg = false;
    if (is_punct("-") || is_punct("+")) neg = next().text == "-";
    const Token& t = next();
    if (t.kind != Tok::number) fail(t, "expected a number");
    return neg ? -t.number : t.number;
  }

  std::vector<double> number_list() {
    std::vector<double> v;
    if (!is_punct("[")) {
      v.push_back(signed_number());
      return v;
    }
    next();
    if (!is_punct("]")) {
      v.push_back(signed_number());
      while (is_punct(",")) {
        next();
        v.push_back(signed_number());
      }
    }
    expect("]");
    return v;
  }

  void meta(ProblemMeta& m) {
    expect("{");
    std::vector<double> xlo, xhi, ylo, yhi;
    while (!is_punct("}")) {
      if (at_end()) fail(peek(), "unterminated meta block");
      const Token& key = expect_ident();
      expect("=");
      const std::string& k = key.text;
      if (k == "name") {
        const Token& v = next();
        if (v.kind != Tok::ident && v.kind != Tok::number) fail(v, "expected a name");
        m.name = v.text;
      } else if (k == "lower_convex") {
        const Token& v = expect_ident();
        if (v.text != "true" && v.text != "false") fail(v, "expected true or false");
        m.lower_convex = v.text == "true";
      } else if (k == "xref") {
        m.x_ref = number_list();
      } else if (k == "yref") {
        m.y_ref = number_list();
      } else if (k == "Fstar") {
        m.F_star = signed_number();
      } else if (k == "fstar") {
        m.f_star = signed_number();
      } else if (k == "x0") {
        m.x0 = number_list();
      } else if (k == "y0") {
        m.y0 = number_list();
      } else if (k == "xlo") {
        xlo = number_list();
      } else if (k == "xhi") {
        xhi = number_list();
      } else if (k == "ylo") {
        ylo = number_list();
      } else if (k == "yhi") {
        yhi = number_list();
      } else {
        fail(key, "unknown meta key '" + k + "'");
      }
      meta_pos_[k] = key;
      expect(";");
    }
    expect("}");
    auto make_box = [&](std::vector<double> lo, std::vector<double> hi, int dim,
                        const char* which) -> std::optional<Box> {
      if (lo.empty() && hi.empty()) return std::nullopt;
      if (lo.empty() || hi.empty())
        fail(peek(), std::string(which) + "lo and " + which + "hi must both be given");
      if (lo.size() == 1) lo.assign(dim, lo.front());
      if (hi.size() == 1) hi.assign(dim, hi.front());
      for (std::size_t i = 0; i < lo.size() && i < hi.size(); ++i)
        if (!(lo[i] < hi[i])) fail(peek(), std::string("empty box for ") + which);
      return Box{lo, hi};
    };
    m.x_box = make_box(xlo, xhi, dim_x_, "x");
    m.y_box = make_box(ylo, yhi, dim_y_, "y");
  }

  void validate_meta(BilevelProblem& p) {
    auto check = [&](const std::vector<double>& v, int dim, const char* key) {
      if (v.empty()) return;
      if (static_cast<int>(v.size()) != dim) {
        auto it = meta_pos_.find(key);
        const Token& t = it != meta_pos_.end() ? it->second : peek();
        fail(t,
             std::string(key) + " has " + std::to_string(v.size()) + " entries, expected " +
                 std::to_string(dim),
             ParseError::Kind::dimension_mismatch);
      }
    };
    auto& m = p.meta;
    check(m.x0, p.d, "x0");
    check(m.y0, p.l, "y0");
    if (m.x_ref) check(*m.x_ref, p.d, "xref");
    if (m.y_ref) check(*m.y_ref, p.l, "yref");
    if (m.x_box) check(m.x_box->lo, p.d, "xlo"), check(m.x_box->hi, p.d, "xhi");
    if (m.y_box) check(m.y_box->lo, p.l, "ylo"), check(m.y_box->hi, p.l, "yhi");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int dim_x_ = 0;
  int dim_y_ = 0;
  std::map<std::string, Token> meta_pos_;
};

}  // namespace

BilevelProblem parse_problem(std::string_view source) { return Parser(source).problem(); }

BilevelProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

namespace {

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += number(v[i]);
  }
  return s + "]";
}

}  // namespace

std::string to_source(const BilevelProblem& p) {
  std::ostringstream os;
  os << "var x[" << p.d << "];\nvar y[" << p.l << "];\n";
  auto section = [&](const char* name, const Expr& obj, const std::vector<Expr>& cons) {
    os << name << " {\n  minimize " << to_string(obj) << ";\n";
    for (const auto& c : cons) os << "  " << to_string(c) << " <= 0;\n";
    os << "}\n";
  };
  section("upper", p.F, p.G);
  section("lower", p.f, p.g);
  const auto& m = p.meta;
  os << "meta {\n";
  if (!m.name.empty()) os << "  name=" << m.name << ";\n";
  os << "  lower_convex=" << (m.lower_convex ? "true" : "false") << ";\n";
  if (!m.x0.empty()) os << "  x0=" << list(m.x0) << ";\n";
  if (!m.y0.empty()) os << "  y0=" << list(m.y0) << ";\n";
  if (m.x_ref) os << "  xref=" << list(*m.x_ref) << ";\n";
  if (m.y_ref) os << "  yref=" << list(*m.y_ref) << ";\n";
  if (m.F_star) os << "  Fstar=" << number(*m.F_star) << ";\n";
  if (m.f_star) os << "  fstar=" << number(*m.f_star) << ";\n";
  if (m.x_box) os << "  xlo=" << list(m.x_box->lo) << ";\n  xhi=" << list(m.x_box->hi) << ";\n";
  if (m.y_box) os << "  ylo=" << list(m.y_box->lo) << ";\n  yhi=" << list(m.y_box->hi) << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace svf
