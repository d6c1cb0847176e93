#include "coopdelay/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <utility>

#include "coopdelay/errors.hpp"

namespace coopdelay {

namespace {

struct FunctionInfo {
  std::string_view name;
  Op op;
  int arity;
};

constexpr std::array<FunctionInfo, 9> kFunctions{{
    {"sqrt", Op::Sqrt, 1},
    {"exp", Op::Exp, 1},
    {"ln", Op::Ln, 1},
    {"tanh", Op::Tanh, 1},
    {"sin", Op::Sin, 1},
    {"cos", Op::Cos, 1},
    {"abs", Op::Abs, 1},
    {"min", Op::Min, 2},
    {"max", Op::Max, 2},
}};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view function_name(Op op) {
  for (const auto& f : kFunctions) {
    if (f.op == op) return f.name;
  }
  return {};
}

int arity(Op op) {
  switch (op) {
    case Op::Constant:
    case Op::Variable:
      return 0;
    case Op::Negate:
    case Op::Sqrt:
    case Op::Exp:
    case Op::Ln:
    case Op::Tanh:
    case Op::Sin:
    case Op::Cos:
    case Op::Abs:
      return 1;
    default:
      return 2;
  }
}

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::string_view text;
  double number = 0.0;
  std::size_t column = 0;  // 1-based
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End:
      return "end of input";
    case Tok::Number:
    case Tok::Ident:
      return "'" + std::string(t.text) + "'";
    default:
      return "'" + std::string(t.text) + "'";
  }
}

class Parser {
 public:
  Parser(std::string_view src, std::string_view variable) : src_(src), variable_(variable) { advance(); }

  std::vector<Instruction> run() {
    expr();
    if (tok_.kind != Tok::End) {
      fail("unexpected " + describe(tok_), {"operator", "end of input"});
    }
    return std::move(code_);
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) const {
    throw ParseError("parse error at column " + std::to_string(tok_.column) + ": " + what, tok_.column,
                     std::move(expected));
  }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    tok_ = Token{Tok::End, {}, 0.0, pos_ + 1};
    if (pos_ >= src_.size()) return;

    const char c = src_[pos_];
    const std::size_t start = pos_;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        ++pos_;
      }
      tok_ = Token{Tok::Ident, src_.substr(start, pos_ - start), 0.0, start + 1};
      return;
    }
    Tok kind;
    switch (c) {
      case '+': kind = Tok::Plus; break;
      case '-': kind = Tok::Minus; break;
      case '*': kind = Tok::Star; break;
      case '/': kind = Tok::Slash; break;
      case '^': kind = Tok::Caret; break;
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      case ',': kind = Tok::Comma; break;
      default:
        tok_ = Token{Tok::End, src_.substr(start, 1), 0.0, start + 1};
        fail("unexpected character '" + std::string(1, c) + "'", {});
    }
    ++pos_;
    tok_ = Token{kind, src_.substr(start, 1), 0.0, start + 1};
  }

  void lex_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      tok_ = Token{Tok::Number, src_.substr(start, pos_ - start), 0.0, start + 1};
      fail("malformed number", {"digit"});
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) {
        pos_ = save;  // "2e" is the number 2 followed by identifier e
      }
    }
    const std::string_view text = src_.substr(start, pos_ - start);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    tok_ = Token{Tok::Number, text, value, start + 1};
    if (ec == std::errc::result_out_of_range || !std::isfinite(value)) {
      fail("numeric literal out of range", {});
    }
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail("malformed number", {});
    }
  }

  void emit(Op op, double value = 0.0) { code_.push_back({op, value}); }

  void expect(Tok kind, std::string_view text) {
    if (tok_.kind != kind) {
      fail("expected '" + std::string(text) + "' but found " + describe(tok_), {std::string(text)});
    }
    advance();
  }

  void expr() {
    term();
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      const Op op = tok_.kind == Tok::Plus ? Op::Add : Op::Subtract;
      advance();
      term();
      emit(op);
    }
  }

  void term() {
    unary();
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
      const Op op = tok_.kind == Tok::Star ? Op::Multiply : Op::Divide;
      advance();
      unary();
      emit(op);
    }
  }

  void unary() {
    if (tok_.kind == Tok::Minus) {
      advance();
      unary();
      emit(Op::Negate);
      return;
    }
    power();
  }

  void power() {
    atom();
    if (tok_.kind == Tok::Caret) {
      advance();
      unary();
      emit(Op::Power);
    }
  }

  void atom() {
    switch (tok_.kind) {
      case Tok::Number:
        emit(Op::Constant, tok_.number);
        advance();
        return;
      case Tok::LParen:
        advance();
        expr();
        expect(Tok::RParen, ")");
        return;
      case Tok::Ident: {
        const Token name = tok_;
        if (name.text == variable_) {
          emit(Op::Variable);
          advance();
          return;
        }
        const FunctionInfo* fn = find_function(name.text);
        if (fn == nullptr) {
          std::vector<std::string> expected{std::string(variable_)};
          for (const auto& f : kFunctions) expected.emplace_back(f.name);
          fail("unknown identifier '" + std::string(name.text) + "'", std::move(expected));
        }
        advance();
        if (tok_.kind != Tok::LParen) {
          fail("expected '(' after '" + std::string(name.text) + "'", {"("});
        }
        advance();
        expr();
        if (fn->arity == 2) {
          expect(Tok::Comma, ",");
          expr();
        }
        expect(Tok::RParen, ")");
        emit(fn->op);
        return;
      }
      default:
        fail("expected a number, identifier or '(' but found " + describe(tok_),
             {"number", std::string(variable_), "function", "("});
    }
  }

  std::string_view src_;
  std::string_view variable_;
  std::size_t pos_ = 0;
  Token tok_{Tok::End, {}, 0.0, 1};
  std::vector<Instruction> code_;
};

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

[[noreturn]] void domain(DomainKind kind, const char* what) { throw DomainError(kind, what); }

}  // namespace

bool is_function_name(std::string_view name) { return find_function(name) != nullptr; }

Expression parse(std::string_view source, std::string_view variable) {
  if (source.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError("parse error at column 1: empty expression", 1, {"expression"});
  }
  Parser parser(source, variable);
  auto program = std::make_shared<Expression::Program>();
  program->source = std::string(source);
  program->variable = std::string(variable);
  program->code = parser.run();

  std::size_t depth = 0;
  bool uses_variable = false;
  for (const auto& ins : program->code) {
    const int n = arity(ins.op);
    depth = depth + 1 - static_cast<std::size_t>(n);
    program->max_depth = std::max(program->max_depth, depth);
    uses_variable = uses_variable || ins.op == Op::Variable;
  }
  Expression e(program);
  if (!uses_variable) {
    // Fold constants once; a constant with a domain error stays lazy so the
    // error surfaces at evaluation like any other.
    try {
      program->constant_value = e.run(0.0);
      program->constant = true;
    } catch (const DomainError&) {
    }
  }
  return e;
}

Expression Expression::constant(double value, std::string variable) {
  if (!std::isfinite(value)) domain(DomainKind::NonFinite, "non-finite constant");
  auto program = std::make_shared<Program>();
  program->source = format_number(value);
  program->variable = std::move(variable);
  program->code = {{Op::Constant, value}};
  program->max_depth = 1;
  program->constant = true;
  program->constant_value = value;
  return Expression(program);
}

double Expression::eval(double v) const {
  if (program_->constant) return program_->constant_value;
  return run(v);
}

double Expression::run(double v) const {
  std::array<double, 64> small{};
  std::vector<double> big;
  double* stack = small.data();
  if (program_->max_depth > small.size()) {
    big.resize(program_->max_depth);
    stack = big.data();
  }
  std::size_t sp = 0;
  for (const auto& ins : program_->code) {
    switch (ins.op) {
      case Op::Constant: stack[sp++] = ins.value; break;
      case Op::Variable: stack[sp++] = v; break;
      case Op::Negate: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::Subtract: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::Multiply: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::Divide:
        --sp;
        if (stack[sp] == 0.0) domain(DomainKind::DivisionByZero, "division by zero");
        stack[sp - 1] /= stack[sp];
        break;
      case Op::Power: {
        --sp;
        const double base = stack[sp - 1];
        const double expo = stack[sp];
        if (base == 0.0 && expo < 0.0) domain(DomainKind::DivisionByZero, "zero raised to a negative power");
        const double r = std::pow(base, expo);
        if (std::isnan(r)) domain(DomainKind::NonFinite, "negative base with non-integer exponent");
        stack[sp - 1] = r;
        break;
      }
      case Op::Sqrt:
        if (stack[sp - 1] < 0.0) domain(DomainKind::SqrtOfNegative, "sqrt of negative argument");
        stack[sp - 1] = std::sqrt(stack[sp - 1]);
        break;
      case Op::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::Ln:
        if (!(stack[sp - 1] > 0.0)) domain(DomainKind::LogOfNonPositive, "ln of non-positive argument");
        stack[sp - 1] = std::log(stack[sp - 1]);
        break;
      case Op::Tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
      case Op::Sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
      case Op::Cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
      case Op::Abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
      case Op::Min: --sp; stack[sp - 1] = std::min(stack[sp - 1], stack[sp]); break;
      case Op::Max: --sp; stack[sp - 1] = std::max(stack[sp - 1], stack[sp]); break;
    }
  }
  const double result = stack[0];
  if (!std::isfinite(result)) domain(DomainKind::NonFinite, "evaluation overflowed or is undefined");
  return result;
}

std::string Expression::to_string() const {
  std::vector<std::string> parts;
  for (const auto& ins : program_->code) {
    switch (ins.op) {
      case Op::Constant: parts.push_back(format_number(ins.value)); break;
      case Op::Variable: parts.push_back(program_->variable); break;
      case Op::Negate: parts.back() = "(-" + parts.back() + ")"; break;
      case Op::Add:
      case Op::Subtract:
      case Op::Multiply:
      case Op::Divide:
      case Op::Power: {
        const char sym = ins.op == Op::Add        ? '+'
                         : ins.op == Op::Subtract ? '-'
                         : ins.op == Op::Multiply ? '*'
                         : ins.op == Op::Divide   ? '/'
                                                  : '^';
        std::string rhs = std::move(parts.back());
        parts.pop_back();
        parts.back() = "(" + parts.back() + sym + rhs + ")";
        break;
      }
      case Op::Min:
      case Op::Max: {
        std::string rhs = std::move(parts.back());
        parts.pop_back();
        parts.back() = std::string(function_name(ins.op)) + "(" + parts.back() + "," + rhs + ")";
        break;
      }
      default:
        parts.back() = std::string(function_name(ins.op)) + "(" + parts.back() + ")";
        break;
    }
  }
  return parts.empty() ? std::string() : parts.back();
}

bool operator==(const Expression& a, const Expression& b) {
  return a.program_->variable == b.program_->variable && a.program_->code == b.program_->code;
}

}  // namespace coopdelay
