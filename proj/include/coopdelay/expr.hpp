#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coopdelay {

/// Operations of the expression language. Programs are stored in postfix
/// order, so an Expression is a flat, immutable instruction list.
enum class Op : std::uint8_t {
  Constant,
  Variable,
  Negate,
  Add,
  Subtract,
  Multiply,
  Divide,
  Power,
  Sqrt,
  Exp,
  Ln,
  Tanh,
  Sin,
  Cos,
  Abs,
  Min,
  Max,
};

struct Instruction {
  Op op;
  double value = 0.0;  // Constant only

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// A parsed scalar function of one named variable.
///
/// Expressions are immutable and cheap to copy (shared program). Evaluation
/// either returns a finite number or throws DomainError; it never hands back
/// an unsignaled inf/NaN.
class Expression {
 public:
  /// The constant function `value` in `variable`.
  static Expression constant(double value, std::string variable = "x");

  double operator()(double v) const { return eval(v); }
  double eval(double v) const;

  const std::string& variable() const noexcept { return program_->variable; }
  const std::string& source() const noexcept { return program_->source; }
  std::span<const Instruction> program() const noexcept { return program_->code; }

  /// True when the program does not reference the variable.
  bool is_constant() const noexcept { return program_->constant; }

  /// Canonical fully parenthesized text; parsing it yields an identical program.
  std::string to_string() const;

  /// Structural equality of the programs (the variable name included).
  friend bool operator==(const Expression& a, const Expression& b);

 private:
  struct Program {
    std::string source;
    std::string variable;
    std::vector<Instruction> code;
    std::size_t max_depth = 0;
    bool constant = false;
    double constant_value = 0.0;
  };

  explicit Expression(std::shared_ptr<const Program> p) : program_(std::move(p)) {}
  double run(double v) const;

  std::shared_ptr<const Program> program_;

  friend Expression parse(std::string_view source, std::string_view variable);
};

/// Parse `source` with `variable` as the only free identifier.
/// Throws ParseError with a 1-based column and the expected-token set.
Expression parse(std::string_view source, std::string_view variable = "x");

inline std::string serialize(const Expression& e) { return e.to_string(); }
inline double eval(const Expression& e, double v) { return e.eval(v); }

/// Names accepted as functions by the grammar.
bool is_function_name(std::string_view name);

}  // namespace coopdelay
