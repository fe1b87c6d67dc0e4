#ifndef DISPLACER_SEXPR_HPP
#define DISPLACER_SEXPR_HPP

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "displacer/error.hpp"

namespace displacer {

/// A node of the surface language: symbol, `?variable`, "string" or list.
/// Numbers are plain symbols and symbols are case-sensitive.
struct SExpr {
  enum class Kind { Symbol, Variable, Str, List };

  Kind kind = Kind::Symbol;
  std::string text;           // name for Symbol/Variable, contents for Str
  std::vector<SExpr> items;   // List only

  static SExpr symbol(std::string name) { return {Kind::Symbol, std::move(name), {}}; }
  static SExpr variable(std::string name) { return {Kind::Variable, std::move(name), {}}; }
  static SExpr str(std::string value) { return {Kind::Str, std::move(value), {}}; }
  static SExpr list(std::vector<SExpr> items) { return {Kind::List, {}, std::move(items)}; }

  bool is_symbol() const noexcept { return kind == Kind::Symbol; }
  bool is_variable() const noexcept { return kind == Kind::Variable; }
  bool is_str() const noexcept { return kind == Kind::Str; }
  bool is_list() const noexcept { return kind == Kind::List; }

  bool is_symbol(std::string_view name) const noexcept {
    return kind == Kind::Symbol && text == name;
  }

  /// True when no Variable occurs anywhere inside.
  bool is_ground() const {
    if (kind == Kind::Variable) return false;
    for (const auto& item : items)
      if (!item.is_ground()) return false;
    return true;
  }

  friend bool operator==(const SExpr& a, const SExpr& b) {
    return a.kind == b.kind && a.text == b.text && a.items == b.items;
  }

  friend std::strong_ordering operator<=>(const SExpr& a, const SExpr& b) {
    if (a.kind != b.kind) return a.kind <=> b.kind;
    if (auto c = a.text.compare(b.text); c != 0) return c <=> 0;
    const std::size_t n = std::min(a.items.size(), b.items.size());
    for (std::size_t i = 0; i < n; ++i)
      if (auto c = a.items[i] <=> b.items[i]; c != 0) return c;
    return a.items.size() <=> b.items.size();
  }
};

namespace sexpr_detail {

inline bool is_delimiter(char c) {
  return c == '(' || c == ')' || c == '"' || c == ';' || c == ' ' || c == '\t' ||
         c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Recursive-descent reader over a byte buffer. Tracks line numbers so
/// file loaders can report where a form started.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  void skip_blank() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (is_space(c)) {
        if (c == '\n') ++line_;
        ++pos_;
      } else {
        break;
      }
    }
  }

  bool at_end() const noexcept { return pos_ >= text_.size(); }
  std::size_t offset() const noexcept { return pos_; }
  std::size_t line() const noexcept { return line_; }

  SExpr read() {
    skip_blank();
    if (at_end()) throw Error::at_offset(ErrorCode::EmptyInput, pos_, "no expression");
    const char c = text_[pos_];
    if (c == '(') return read_list();
    if (c == ')')
      throw Error::at_offset(ErrorCode::UnbalancedParens, pos_, "unexpected ')'");
    if (c == '"') return read_string();
    return read_atom();
  }

 private:
  SExpr read_list() {
    const std::size_t open = pos_;
    ++pos_;
    std::vector<SExpr> items;
    for (;;) {
      skip_blank();
      if (at_end())
        throw Error::at_offset(ErrorCode::UnbalancedParens, open, "unclosed '('");
      if (text_[pos_] == ')') {
        ++pos_;
        return SExpr::list(std::move(items));
      }
      items.push_back(read());
    }
  }

  SExpr read_string() {
    const std::size_t open = pos_;
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (c == '"') return SExpr::str(std::move(out));
      if (c == '\n') ++line_;
      if (c == '\\' && pos_ < text_.size()) c = text_[pos_++];
      out.push_back(c);
    }
    throw Error::at_offset(ErrorCode::UnbalancedParens, open, "unterminated string");
  }

  SExpr read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_delimiter(text_[pos_])) ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    if (token.size() > 1 && token.front() == '?') return SExpr::variable(token.substr(1));
    return SExpr::symbol(std::move(token));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

inline void print_to(const SExpr& e, std::string& out) {
  switch (e.kind) {
    case SExpr::Kind::Symbol:
      out += e.text;
      break;
    case SExpr::Kind::Variable:
      out += '?';
      out += e.text;
      break;
    case SExpr::Kind::Str:
      out += '"';
      for (char c : e.text) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
      break;
    case SExpr::Kind::List:
      out += '(';
      for (std::size_t i = 0; i < e.items.size(); ++i) {
        if (i) out += ' ';
        print_to(e.items[i], out);
      }
      out += ')';
      break;
  }
}

}  // namespace sexpr_detail

/// Parses exactly one expression; surrounding whitespace and `;` comments
/// are allowed, anything else after the expression is TrailingGarbage.
inline SExpr parse(std::string_view text) {
  sexpr_detail::Reader reader(text);
  SExpr e = reader.read();
  reader.skip_blank();
  if (!reader.at_end()) {
    if (text[reader.offset()] == ')')
      throw Error::at_offset(ErrorCode::UnbalancedParens, reader.offset(), "unexpected ')'");
    throw Error::at_offset(ErrorCode::TrailingGarbage, reader.offset(),
                           "text after complete expression");
  }
  return e;
}

/// A form read from a multi-expression document, tagged with the line it starts on.
struct LocatedExpr {
  SExpr expr;
  std::size_t line = 0;
};

/// Reads every top-level expression in a document. Errors carry the line
/// of the offending form.
inline std::vector<LocatedExpr> parse_all(std::string_view text) {
  sexpr_detail::Reader reader(text);
  std::vector<LocatedExpr> out;
  for (;;) {
    reader.skip_blank();
    if (reader.at_end()) break;
    const std::size_t line = reader.line();
    try {
      out.push_back({reader.read(), line});
    } catch (const Error& e) {
      throw Error::at_line(e.code(), line, e.what());
    }
  }
  return out;
}

inline std::string print(const SExpr& e) {
  std::string out;
  sexpr_detail::print_to(e, out);
  return out;
}

/// Structural validity: names nonempty and free of delimiters, symbols not
/// spelled like variables. parse(print(e)) == e holds for every valid e.
inline bool is_valid(const SExpr& e) {
  switch (e.kind) {
    case SExpr::Kind::Symbol:
      if (e.text.empty() || (e.text.size() > 1 && e.text.front() == '?')) return false;
      [[fallthrough]];
    case SExpr::Kind::Variable:
      if (e.text.empty()) return false;
      for (char c : e.text)
        if (sexpr_detail::is_delimiter(c)) return false;
      return true;
    case SExpr::Kind::Str:
      return true;
    case SExpr::Kind::List:
      for (const auto& item : e.items)
        if (!is_valid(item)) return false;
      return true;
  }
  return false;
}

}  // namespace displacer

#endif  // DISPLACER_SEXPR_HPP
