#pragma once

/// @file expr.hpp
/// @brief Tiny arithmetic-expression compiler for drift components given in
///        config files, e.g. "2*pi*sin(2*pi*x1)".  Variables x1..x4, constant
///        pi, functions sin cos tan exp log sqrt abs tanh bump.

#include <string>
#include <vector>

namespace ifhom {

/// A compiled expression; evaluation is allocation-free and reentrant.
class Expr {
 public:
  /// Compile `text` with variables x1..x{dim}; throws std::invalid_argument
  /// with a caret-position message on syntax errors.
  static Expr compile(const std::string& text, int dim);

  double eval(const double* x) const;
  const std::string& text() const { return text_; }
  int dim() const { return dim_; }

 private:
  // stack-machine ops
  enum class Op : int { push_const, push_var, add, sub, mul, div, pow, neg, call };
  struct Instr {
    Op op;
    int arg = 0;     // variable index or function id
    double value = 0;
  };
  std::string text_;
  int dim_ = 0;
  std::vector<Instr> code_;
  int max_stack_ = 0;

  friend class ExprParser;
};

}  // namespace ifhom
