// Recursive-descent parser for the .tm modeling language.
//
// Lexing happens up front; the parser then works on a token vector that is
// always terminated by an end token, so lookahead never runs off the end.
// The first syntax error aborts the parse. Name clashes and expression type
// errors are collected without aborting.

#include <algorithm>
#include <charconv>
#include <set>

#include "thimac/dsl.hpp"

namespace thimac {

namespace {

constexpr int kMaxDepth = 200;

enum class Tok {
  ident,
  string,
  integer,
  lbrace,
  rbrace,
  lparen,
  rparen,
  lbracket,
  rbracket,
  comma,
  dot,
  assign,
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  arrow,
  end,
};

std::string describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::string: return "string";
    case Tok::integer: return "integer";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbracket: return "'['";
    case Tok::rbracket: return "']'";
    case Tok::comma: return "','";
    case Tok::dot: return "'.'";
    case Tok::assign: return "'='";
    case Tok::eq: return "'=='";
    case Tok::ne: return "'!='";
    case Tok::lt: return "'<'";
    case Tok::le: return "'<='";
    case Tok::gt: return "'>'";
    case Tok::ge: return "'>='";
    case Tok::arrow: return "'->'";
    case Tok::end: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier name or decoded string
  std::int64_t number = 0;
  SourceSpan span;
};

struct Abort {};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  // Returns false (with `error` filled in) on the first bad character.
  bool run(std::vector<Token>& out, ParseDiagnostic& error) {
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back(Token{Tok::end, {}, 0, here(0)});
        return true;
      }
      Token t;
      if (!next(t, error)) return false;
      out.push_back(std::move(t));
    }
  }

 private:
  SourceSpan here(std::size_t len) const { return SourceSpan{line_, col_, len, pos_}; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  bool fail(ParseDiagnostic& error, SourceSpan span, std::string msg) {
    error = ParseDiagnostic{span, std::move(msg), {}};
    return false;
  }

  bool next(Token& t, ParseDiagnostic& error) {
    const char c = src_[pos_];
    const char n = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';
    auto punct = [&](Tok k, std::size_t len) {
      t = Token{k, {}, 0, here(len)};
      advance(len);
      return true;
    };
    if (ident_start(c)) {
      std::size_t end = pos_;
      while (end < src_.size() && (ident_start(src_[end]) || digit(src_[end]))) ++end;
      t = Token{Tok::ident, std::string(src_.substr(pos_, end - pos_)), 0, here(end - pos_)};
      advance(end - pos_);
      return true;
    }
    if (digit(c) || (c == '-' && digit(n))) {
      std::size_t end = pos_ + (c == '-' ? 1 : 0);
      while (end < src_.size() && digit(src_[end])) ++end;
      t = Token{Tok::integer, {}, 0, here(end - pos_)};
      auto [p, ec] = std::from_chars(src_.data() + pos_, src_.data() + end, t.number);
      if (ec != std::errc{} || p != src_.data() + end)
        return fail(error, t.span, "integer literal out of range");
      advance(end - pos_);
      return true;
    }
    if (c == '"') return string(t, error);
    switch (c) {
      case '{': return punct(Tok::lbrace, 1);
      case '}': return punct(Tok::rbrace, 1);
      case '(': return punct(Tok::lparen, 1);
      case ')': return punct(Tok::rparen, 1);
      case '[': return punct(Tok::lbracket, 1);
      case ']': return punct(Tok::rbracket, 1);
      case ',': return punct(Tok::comma, 1);
      case '.': return punct(Tok::dot, 1);
      case '=': return n == '=' ? punct(Tok::eq, 2) : punct(Tok::assign, 1);
      case '!':
        if (n == '=') return punct(Tok::ne, 2);
        break;
      case '<': return n == '=' ? punct(Tok::le, 2) : punct(Tok::lt, 1);
      case '>': return n == '=' ? punct(Tok::ge, 2) : punct(Tok::gt, 1);
      case '-':
        if (n == '>') return punct(Tok::arrow, 2);
        break;
      default: break;
    }
    std::string shown = (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f)
                            ? std::string(1, c)
                            : "byte 0x" + hex(static_cast<unsigned char>(c));
    return fail(error, here(1), "unexpected character '" + shown + "'");
  }

  static std::string hex(unsigned char b) {
    const char* digits = "0123456789abcdef";
    return {digits[b >> 4], digits[b & 0xf]};
  }

  bool string(Token& t, ParseDiagnostic& error) {
    const SourceSpan start = here(1);
    std::size_t i = pos_ + 1;
    std::string value;
    while (true) {
      if (i >= src_.size() || src_[i] == '\n') {
        SourceSpan s = start;
        s.length = i - pos_;
        return fail(error, s, "unterminated string literal");
      }
      char c = src_[i];
      if (c == '"') break;
      if (c == '\\') {
        char e = i + 1 < src_.size() ? src_[i + 1] : '\0';
        if (e != '"' && e != '\\') {
          SourceSpan s{line_, col_ + (i - pos_), i + 1 < src_.size() ? 2u : 1u, i};
          return fail(error, s, "unsupported escape sequence (only \\\" and \\\\ are allowed)");
        }
        value += e;
        i += 2;
        continue;
      }
      value += c;
      ++i;
    }
    t = Token{Tok::string, std::move(value), 0, start};
    t.span.length = i + 1 - pos_;
    advance(i + 1 - pos_);
    return true;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// Static types for the expression checker.
enum class Ty { any, boolean, integer, string, record };

std::string_view ty_name(Ty t) {
  switch (t) {
    case Ty::any: return "any";
    case Ty::boolean: return "boolean";
    case Ty::integer: return "integer";
    case Ty::string: return "string";
    case Ty::record: return "record";
  }
  return "?";
}

struct Typed {
  Expr expr;
  Ty ty = Ty::any;
  SourceSpan span;
};

const std::set<std::string, std::less<>>& reserved_words() {
  static const std::set<std::string, std::less<>> words = {"thing", "true", "false", "not",
                                                           "and",   "or",   "in",    "has"};
  return words;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<ParseDiagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  Model model() {
    Model m;
    expect_keyword("model");
    m.name = expect(Tok::string).text;
    expect(Tok::lbrace);
    std::set<std::string> names;
    while (!at(Tok::rbrace)) {
      const Token& kw = peek();
      if (is_kw("machine")) {
        Machine sub = machine();
        if (!names.insert(sub.name).second) duplicate(kw.span, "machine", sub.name);
        m.machines.push_back(std::move(sub));
      } else if (is_kw("flow")) {
        m.flows.push_back(flow());
      } else if (is_kw("trigger")) {
        m.triggers.push_back(trigger());
      } else {
        unexpected({"'machine'", "'flow'", "'trigger'", "'}'"});
      }
    }
    expect(Tok::rbrace);
    expect(Tok::end);
    return m;
  }

 private:
  // -- token helpers ------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool is_kw(std::string_view word, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::ident && peek(ahead).text == word;
  }
  const Token& take() {
    const Token& t = peek();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  [[noreturn]] void unexpected(std::vector<std::string> expected) {
    const Token& t = peek();
    std::string got = t.kind == Tok::ident    ? "'" + t.text + "'"
                      : t.kind == Tok::string ? "string"
                                              : describe(t.kind);
    std::string msg;
    if (t.kind == Tok::ident && expected.size() > 1 && expected[0].front() == '\'')
      msg = "unknown keyword " + got;
    else
      msg = "unexpected " + got;
    msg += "; expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    diags_.push_back(ParseDiagnostic{t.span, std::move(msg), std::move(expected)});
    throw Abort{};
  }

  const Token& expect(Tok k) {
    if (!at(k)) unexpected({describe(k)});
    return take();
  }

  void expect_keyword(std::string_view word) {
    if (!is_kw(word)) unexpected({"'" + std::string(word) + "'"});
    take();
  }

  std::string identifier(std::string_view what, bool allow_reserved = true) {
    if (!at(Tok::ident)) unexpected({std::string(what)});
    const Token& t = take();
    if (!allow_reserved && is_reserved_word(t.text))
      error(t.span, "'" + t.text + "' is a reserved word and cannot name a " + std::string(what));
    return t.text;
  }

  void error(SourceSpan span, std::string msg) { diags_.push_back(ParseDiagnostic{span, std::move(msg), {}}); }

  void duplicate(SourceSpan span, std::string_view what, const std::string& name) {
    error(span, "duplicate " + std::string(what) + " name '" + name + "'");
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth) {
        p.error(p.peek().span, "nesting too deep");
        throw Abort{};
      }
    }
    ~DepthGuard() { --p.depth_; }
  };

  // -- declarations ---------------------------------------------------------

  Path path() {
    Path p;
    p.segments.push_back(identifier("path"));
    while (at(Tok::dot)) {
      take();
      p.segments.push_back(identifier("identifier"));
    }
    return p;
  }

  Machine machine() {
    DepthGuard guard(*this);
    expect_keyword("machine");
    Machine m;
    m.name = identifier("machine", false);
    expect(Tok::lbrace);
    std::set<std::string> stage_names, machine_names, state_names;
    while (!at(Tok::rbrace)) {
      const SourceSpan span = peek().span;
      if (is_kw("state")) {
        StateDecl s = state();
        if (!state_names.insert(s.name).second) duplicate(span, "state", s.name);
        m.states.push_back(std::move(s));
      } else if (is_kw("stage")) {
        Stage s = stage();
        if (!stage_names.insert(s.name).second) duplicate(span, "stage", s.name);
        if (machine_names.count(s.name)) duplicate(span, "stage", s.name);
        m.stages.push_back(std::move(s));
      } else if (is_kw("machine")) {
        Machine sub = machine();
        if (!machine_names.insert(sub.name).second || stage_names.count(sub.name))
          duplicate(span, "machine", sub.name);
        m.machines.push_back(std::move(sub));
      } else if (is_kw("flow")) {
        m.flows.push_back(flow());
      } else {
        unexpected({"'state'", "'stage'", "'machine'", "'flow'", "'}'"});
      }
    }
    expect(Tok::rbrace);
    return m;
  }

  Value literal_value() {
    const Token& t = peek();
    if (t.kind == Tok::string) return take().text;
    if (t.kind == Tok::integer) return take().number;
    if (is_kw("true")) {
      take();
      return true;
    }
    if (is_kw("false")) {
      take();
      return false;
    }
    unexpected({"string", "integer", "'true'", "'false'"});
  }

  Record literal_record() {
    expect(Tok::lbrace);
    Record r;
    if (!at(Tok::rbrace)) {
      do {
        const SourceSpan span = peek().span;
        std::string key = identifier("field name");
        expect(Tok::assign);
        Value v = literal_value();
        if (!r.emplace(key, std::move(v)).second) duplicate(span, "field", key);
      } while (at(Tok::comma) && (take(), true));
    }
    expect(Tok::rbrace);
    return r;
  }

  std::vector<Record> record_list() {
    expect(Tok::lbracket);
    std::vector<Record> rows;
    while (!at(Tok::rbracket)) {
      rows.push_back(literal_record());
      if (!at(Tok::comma)) break;
      take();
    }
    expect(Tok::rbracket);
    return rows;
  }

  StateDecl state() {
    expect_keyword("state");
    StateDecl s;
    if (is_kw("counter")) {
      take();
      s.kind = StoreKind::counter;
      s.name = identifier("store", false);
      expect(Tok::assign);
      s.initial = expect(Tok::integer).number;
    } else if (is_kw("table")) {
      take();
      s.kind = StoreKind::table;
      s.name = identifier("store", false);
      if (at(Tok::assign)) {
        take();
        s.rows = record_list();
      }
    } else if (is_kw("rules")) {
      take();
      s.kind = StoreKind::rules;
      s.name = identifier("store", false);
      expect(Tok::assign);
      s.rows = record_list();
    } else {
      unexpected({"'counter'", "'table'", "'rules'"});
    }
    return s;
  }

  Stage stage() {
    expect_keyword("stage");
    Stage s;
    const Token& kind = peek();
    auto k = kind.kind == Tok::ident ? parse_stage_kind(kind.text) : std::nullopt;
    if (!k) {
      std::string what = kind.kind == Tok::ident ? "'" + kind.text + "'" : describe(kind.kind);
      diags_.push_back(ParseDiagnostic{
          kind.span, "unknown stage kind " + what + "; expected create, process, release, transfer or receive",
          {"'create'", "'process'", "'release'", "'transfer'", "'receive'"}});
      throw Abort{};
    }
    take();
    s.kind = *k;
    s.name = identifier("stage name");
    if (at(Tok::lbrace)) {
      take();
      while (!at(Tok::rbrace)) {
        if (is_kw("when"))
          s.branches.push_back(branch());
        else
          s.actions.push_back(action());
      }
      expect(Tok::rbrace);
    }
    return s;
  }

  Branch branch() {
    expect_keyword("when");
    Branch b;
    b.guard = guard();
    expect(Tok::arrow);
    b.target = path();
    if (is_kw("do")) {
      take();
      b.actions.push_back(action());
      while (at(Tok::comma)) {
        take();
        b.actions.push_back(action());
      }
    }
    return b;
  }

  Action action() {
    const Token& t = peek();
    if (is_kw("incr")) {
      take();
      expect(Tok::lparen);
      Path p = path();
      expect(Tok::rparen);
      return Action::incr(std::move(p));
    }
    if (is_kw("insert")) {
      take();
      expect(Tok::lparen);
      Path p = path();
      expect(Tok::comma);
      if (!at(Tok::lbrace)) unexpected({"record"});
      Typed rec = primary();
      expect(Tok::rparen);
      return Action::insert(std::move(p), std::move(rec.expr));
    }
    if (is_kw("set")) {
      take();
      expect_keyword("thing");
      expect(Tok::dot);
      std::string attr = identifier("attribute");
      expect(Tok::assign);
      Typed v = expr();
      scalar(v, "assigned value");
      return Action::set(std::move(attr), std::move(v.expr));
    }
    if (is_kw("drop")) {
      take();
      return Action::drop();
    }
    if (is_kw("noop")) {
      take();
      return Action::noop();
    }
    if (is_kw("log")) {
      take();
      expect(Tok::lparen);
      Typed v = expr();
      scalar(v, "log message");
      expect(Tok::rparen);
      return Action::log(std::move(v.expr));
    }
    (void)t;
    unexpected({"'incr'", "'insert'", "'set'", "'drop'", "'log'", "'noop'", "'when'", "'}'"});
  }

  FlowArc flow() {
    expect_keyword("flow");
    FlowArc f;
    f.src = path();
    expect(Tok::arrow);
    f.dst = path();
    return f;
  }

  TriggerArc trigger() {
    expect_keyword("trigger");
    TriggerArc t;
    t.src = path();
    expect(Tok::arrow);
    t.dst = path();
    if (is_kw("when")) {
      take();
      t.guard = guard();
    }
    if (is_kw("emit")) {
      take();
      ThingTemplate tpl;
      tpl.type = identifier("thing type");
      if (!at(Tok::lbrace)) unexpected({"'{'"});
      Typed rec = primary();
      for (std::size_t i = 0; i < rec.expr.fields.size(); ++i)
        tpl.attrs.emplace_back(rec.expr.fields[i], rec.expr.args[i]);
      t.emit = std::move(tpl);
    }
    return t;
  }

  // -- expressions ------------------------------------------------------------

  Expr guard() {
    Typed g = expr();
    require(g, Ty::boolean, "guard");
    return std::move(g.expr);
  }

  void require(const Typed& t, Ty want, std::string_view what) {
    if (t.ty != Ty::any && t.ty != want)
      error(t.span, "type error: " + std::string(what) + " must be " + std::string(ty_name(want)) +
                        ", found " + std::string(ty_name(t.ty)));
  }

  void scalar(const Typed& t, std::string_view what) {
    if (t.ty == Ty::record) error(t.span, "type error: " + std::string(what) + " cannot be a record");
  }

  static SourceSpan cover(const SourceSpan& a, const SourceSpan& b) {
    SourceSpan s = a;
    if (b.offset + b.length > a.offset) s.length = b.offset + b.length - a.offset;
    return s;
  }

  Typed expr() {
    DepthGuard guard(*this);
    Typed lhs = and_expr();
    while (is_kw("or")) {
      take();
      Typed rhs = and_expr();
      lhs = logical(ExprOp::or_, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Typed and_expr() {
    Typed lhs = not_expr();
    while (is_kw("and")) {
      take();
      Typed rhs = not_expr();
      lhs = logical(ExprOp::and_, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Typed logical(ExprOp op, Typed lhs, Typed rhs) {
    require(lhs, Ty::boolean, std::string("operand of '") + std::string(op_symbol(op)) + "'");
    require(rhs, Ty::boolean, std::string("operand of '") + std::string(op_symbol(op)) + "'");
    SourceSpan span = cover(lhs.span, rhs.span);
    return Typed{Expr::binary(op, std::move(lhs.expr), std::move(rhs.expr)), Ty::boolean, span};
  }

  Typed not_expr() {
    if (is_kw("not")) {
      DepthGuard guard(*this);
      SourceSpan start = take().span;
      Typed inner = not_expr();
      require(inner, Ty::boolean, "operand of 'not'");
      return Typed{Expr::negate(std::move(inner.expr)), Ty::boolean, cover(start, inner.span)};
    }
    return comparison();
  }

  Typed comparison() {
    Typed lhs = primary();
    static const std::pair<Tok, ExprOp> ops[] = {{Tok::eq, ExprOp::eq}, {Tok::ne, ExprOp::ne},
                                                 {Tok::lt, ExprOp::lt}, {Tok::le, ExprOp::le},
                                                 {Tok::gt, ExprOp::gt}, {Tok::ge, ExprOp::ge}};
    for (auto [tok, op] : ops) {
      if (!at(tok)) continue;
      take();
      Typed rhs = primary();
      SourceSpan span = cover(lhs.span, rhs.span);
      if (op == ExprOp::eq || op == ExprOp::ne) {
        if (lhs.ty == Ty::record || rhs.ty == Ty::record)
          error(span, "type error: records cannot be compared");
        else if (lhs.ty != Ty::any && rhs.ty != Ty::any && lhs.ty != rhs.ty)
          error(span, "type error: comparing " + std::string(ty_name(lhs.ty)) + " with " +
                          std::string(ty_name(rhs.ty)));
      } else {
        require(lhs, Ty::integer, "ordered comparison operand");
        require(rhs, Ty::integer, "ordered comparison operand");
      }
      return Typed{Expr::binary(op, std::move(lhs.expr), std::move(rhs.expr)), Ty::boolean, span};
    }
    if (is_kw("in")) {
      take();
      SourceSpan end = peek().span;
      Path store = path();
      if (lhs.ty != Ty::record) error(lhs.span, "type error: left side of 'in' must be a record");
      return Typed{Expr::member(std::move(lhs.expr), std::move(store)), Ty::boolean, cover(lhs.span, end)};
    }
    return lhs;
  }

  Typed primary() {
    DepthGuard guard(*this);
    const Token& t = peek();
    const SourceSpan span = t.span;
    switch (t.kind) {
      case Tok::string: return Typed{Expr::literal(take().text), Ty::string, span};
      case Tok::integer: return Typed{Expr::literal(take().number), Ty::integer, span};
      case Tok::lparen: {
        take();
        Typed inner = expr();
        const Token& close = expect(Tok::rparen);
        inner.span = cover(span, close.span);
        return inner;
      }
      case Tok::lbrace: {
        take();
        std::vector<std::pair<std::string, Expr>> fields;
        std::set<std::string> seen;
        if (!at(Tok::rbrace)) {
          do {
            const SourceSpan fspan = peek().span;
            std::string key = identifier("field name");
            expect(Tok::assign);
            Typed v = expr();
            scalar(v, "record field");
            if (!seen.insert(key).second) duplicate(fspan, "field", key);
            fields.emplace_back(std::move(key), std::move(v.expr));
          } while (at(Tok::comma) && (take(), true));
        }
        const Token& close = expect(Tok::rbrace);
        return Typed{Expr::make_record(std::move(fields)), Ty::record, cover(span, close.span)};
      }
      case Tok::ident: break;
      default:
        unexpected({"expression"});
    }
    if (is_kw("true") || is_kw("false")) {
      bool v = take().text == "true";
      return Typed{Expr::literal(v), Ty::boolean, span};
    }
    if (is_kw("thing")) {
      take();
      expect(Tok::dot);
      const Token& name = peek();
      std::string attr = identifier("attribute");
      return Typed{Expr::attr(std::move(attr)), Ty::any, cover(span, name.span)};
    }
    if (is_kw("has")) {
      take();
      expect_keyword("thing");
      expect(Tok::dot);
      const Token& name = peek();
      std::string attr = identifier("attribute");
      return Typed{Expr::has(std::move(attr)), Ty::boolean, cover(span, name.span)};
    }
    if (is_reserved_word(t.text)) unexpected({"expression"});
    Path p = path();
    return Typed{Expr::store_ref(std::move(p)), Ty::any, span};
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  std::vector<ParseDiagnostic>& diags_;
};

}  // namespace

bool is_reserved_word(std::string_view s) { return reserved_words().count(s) > 0; }

std::string ParseDiagnostic::format(std::string_view file) const {
  std::string out;
  if (!file.empty()) out += std::string(file) + ":";
  out += std::to_string(span.line) + ":" + std::to_string(span.column) + ": error: " + message;
  return out;
}

ParseResult parse(std::string_view text) {
  ParseResult result;
  std::vector<Token> toks;
  ParseDiagnostic lex_error;
  if (!Lexer(text).run(toks, lex_error)) {
    result.diagnostics.push_back(std::move(lex_error));
    return result;
  }
  Parser parser(std::move(toks), result.diagnostics);
  try {
    Model m = parser.model();
    if (result.diagnostics.empty()) result.model = std::move(m);
  } catch (const Abort&) {
  }
  return result;
}

}  // namespace thimac
