#include <cctype>
#include <cstdlib>
#include <regex>

#include "dwellcert/lpv_model.hpp"

namespace dwellcert {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + what
                                  : what),
      line_(line),
      column_(column) {}

namespace {

bool is_variable_name(const std::string& s) {
  static const std::regex re("tau|rho[1-9][0-9]*|eta[1-9][0-9]*");
  return std::regex_match(s, re);
}

// Recursive descent over
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | power
//   power  := atom ('^' integer)?
//   atom   := number | identifier | '(' expr ')'
// Division is only by constants.
class Parser {
 public:
  Parser(std::string_view text, const Constants& constants, int line)
      : text_(text), constants_(constants), line_(line) {}

  Polynomial parse() {
    skip_space();
    if (pos_ == text_.size()) fail("empty expression");
    Polynomial p = expr();
    skip_space();
    if (pos_ != text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, line_, static_cast<int>(pos_) + 1);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (accept('+'))
        acc += term();
      else if (accept('-'))
        acc -= term();
      else
        return acc;
    }
  }

  Polynomial term() {
    Polynomial acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        const Polynomial d = unary();
        if (d.degree() > 0) {
          pos_ = at;
          fail("division by a non-constant expression");
        }
        const double v = d.coefficient(Monomial());
        if (v == 0.0) {
          pos_ = at;
          fail("division by zero");
        }
        acc *= 1.0 / v;
      } else {
        return acc;
      }
    }
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = atom();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a non-negative integer exponent");
    const int e = std::atoi(std::string(text_.substr(start, pos_ - start)).c_str());
    if (e > 64) fail("exponent too large");
    Polynomial out(1.0);
    for (int k = 0; k < e; ++k) out = out * base;
    return out;
  }

  Polynomial atom() {
    skip_space();
    if (pos_ == text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      if (auto it = constants_.find(name); it != constants_.end()) return Polynomial(it->second);
      if (is_variable_name(name)) return Polynomial::variable(VarId::named(name));
      pos_ = start;
      fail("unknown variable '" + name + "'");
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Polynomial number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return Polynomial(v);
  }

  std::string_view text_;
  const Constants& constants_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, const Constants& constants, int line) {
  return Parser(text, constants, line).parse();
}

}  // namespace dwellcert
