#include "ifhom/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "ifhom/field.hpp"  // bump()

namespace ifhom {

namespace {

enum FuncId { f_sin, f_cos, f_tan, f_exp, f_log, f_sqrt, f_abs, f_tanh, f_bump };

const struct {
  const char* name;
  FuncId id;
} kFuncs[] = {{"sin", f_sin},   {"cos", f_cos}, {"tan", f_tan},
              {"exp", f_exp},   {"log", f_log}, {"sqrt", f_sqrt},
              {"abs", f_abs},   {"tanh", f_tanh}, {"bump", f_bump}};

double apply_func(int id, double v) {
  switch (id) {
    case f_sin: return std::sin(v);
    case f_cos: return std::cos(v);
    case f_tan: return std::tan(v);
    case f_exp: return std::exp(v);
    case f_log: return std::log(v);
    case f_sqrt: return std::sqrt(v);
    case f_abs: return std::abs(v);
    case f_tanh: return std::tanh(v);
    case f_bump: return bump(v);
  }
  return 0;
}

}  // namespace

/// Recursive-descent parser emitting stack-machine code.
class ExprParser {
 public:
  ExprParser(const std::string& text, int dim, Expr& out)
      : text_(text), dim_(dim), out_(out) {}

  void run() {
    parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    // compute the stack high-water mark for a sanity check
    int depth = 0, max_depth = 0;
    for (const auto& in : out_.code_) {
      switch (in.op) {
        case Expr::Op::push_const:
        case Expr::Op::push_var: ++depth; break;
        case Expr::Op::neg:
        case Expr::Op::call: break;
        default: --depth; break;
      }
      max_depth = std::max(max_depth, depth);
    }
    if (depth != 1) fail("internal: unbalanced expression");
    if (max_depth > 32) fail("expression too deeply nested");
    out_.max_stack_ = max_depth;
  }

 private:
  void emit(Expr::Op op, int arg = 0, double value = 0) {
    out_.code_.push_back({op, arg, value});
  }

  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("expression error at position " + std::to_string(pos_) + " in '" +
                                text_ + "': " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void parse_sum() {
    parse_term();
    for (;;) {
      if (accept('+')) {
        parse_term();
        emit(Expr::Op::add);
      } else if (accept('-')) {
        parse_term();
        emit(Expr::Op::sub);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Expr::Op::mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Expr::Op::div);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Expr::Op::neg);
      return;
    }
    (void)accept('+');
    parse_power();
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();  // right-associative, allows 2^-3
      emit(Expr::Op::pow);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = text_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(start, &end);
      if (end == start) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - start);
      emit(Expr::Op::push_const, 0, v);
      return;
    }
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string ident = text_.substr(start, pos_ - start);
      if (ident == "pi") {
        emit(Expr::Op::push_const, 0, std::numbers::pi);
        return;
      }
      if (ident.size() == 2 && ident[0] == 'x' && ident[1] >= '1' && ident[1] <= '9') {
        const int var = ident[1] - '1';
        if (var >= dim_) fail("variable " + ident + " out of range for dimension");
        emit(Expr::Op::push_var, var);
        return;
      }
      for (const auto& f : kFuncs) {
        if (ident == f.name) {
          if (!accept('(')) fail("expected '(' after function name");
          parse_sum();
          if (!accept(')')) fail("expected ')'");
          emit(Expr::Op::call, f.id);
          return;
        }
      }
      fail("unknown identifier '" + ident + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& text_;
  int dim_;
  Expr& out_;
  std::size_t pos_ = 0;
};

Expr Expr::compile(const std::string& text, int dim) {
  Expr e;
  e.text_ = text;
  e.dim_ = dim;
  ExprParser parser(text, dim, e);
  parser.run();
  return e;
}

double Expr::eval(const double* x) const {
  double stack[32];
  int top = -1;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::push_const: stack[++top] = in.value; break;
      case Op::push_var: stack[++top] = x[in.arg]; break;
      case Op::add: --top; stack[top] += stack[top + 1]; break;
      case Op::sub: --top; stack[top] -= stack[top + 1]; break;
      case Op::mul: --top; stack[top] *= stack[top + 1]; break;
      case Op::div: --top; stack[top] /= stack[top + 1]; break;
      case Op::pow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
      case Op::neg: stack[top] = -stack[top]; break;
      case Op::call: stack[top] = apply_func(in.arg, stack[top]); break;
    }
  }
  return stack[0];
}

}  // namespace ifhom
