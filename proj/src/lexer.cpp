#include "lexer.hpp"

#include <cctype>

#include "realc/ast.hpp"

namespace realc::detail {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto at = [&](std::size_t k) { return i + k < src.size() ? src[i + k] : '\0'; };

  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && at(1) == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '/' && at(1) == '*') {
      int l = line, cl = col;
      advance(2);
      while (i < src.size() && !(src[i] == '*' && at(1) == '/')) advance(1);
      if (i >= src.size()) throw SyntaxError("unterminated comment", l, cl);
      advance(2);
      continue;
    }
    Token t{Tok::end, "", line, col};
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.kind = Tok::ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (digit(c)) {
      std::size_t j = i;
      while (j < src.size() && digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.' && j + 1 < src.size() && digit(src[j + 1])) {
        ++j;
        while (j < src.size() && digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && digit(src[k])) {
          while (k < src.size() && digit(src[k])) ++k;
          j = k;
        }
      }
      t.kind = Tok::number;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    auto two = [&](char a, char b) { return c == a && at(1) == b; };
    std::size_t len = 1;
    if (c == '+' && at(1) == '/' && at(2) == '-') {
      t.kind = Tok::plusminus;
      len = 3;
    } else if (two('=', '>')) {
      t.kind = Tok::arrow;
      len = 2;
    } else if (two('=', '=')) {
      t.kind = Tok::eq;
      len = 2;
    } else if (two('!', '=')) {
      t.kind = Tok::ne;
      len = 2;
    } else if (two('<', '=')) {
      t.kind = Tok::le;
      len = 2;
    } else if (two('>', '=')) {
      t.kind = Tok::ge;
      len = 2;
    } else if (two('&', '&')) {
      t.kind = Tok::and_;
      len = 2;
    } else if (two('|', '|')) {
      t.kind = Tok::or_;
      len = 2;
    } else {
      switch (c) {
        case '(': t.kind = Tok::lparen; break;
        case ')': t.kind = Tok::rparen; break;
        case '{': t.kind = Tok::lbrace; break;
        case '}': t.kind = Tok::rbrace; break;
        case ',': t.kind = Tok::comma; break;
        case ';': t.kind = Tok::semi; break;
        case ':': t.kind = Tok::colon; break;
        case '.': t.kind = Tok::dot; break;
        case '=': t.kind = Tok::assign; break;
        case '+': t.kind = Tok::plus; break;
        case '-': t.kind = Tok::minus; break;
        case '*': t.kind = Tok::star; break;
        case '/': t.kind = Tok::slash; break;
        case '<': t.kind = Tok::lt; break;
        case '>': t.kind = Tok::gt; break;
        case '!': t.kind = Tok::bang; break;
        case '~': t.kind = Tok::tilde; break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
      }
    }
    t.text = std::string(src.substr(i, len));
    advance(len);
    out.push_back(std::move(t));
  }
  out.push_back({Tok::end, "", line, col});
  return out;
}

std::string describe(const Token& t) {
  if (t.kind == Tok::end) return "end of input";
  return "'" + t.text + "'";
}

}  // namespace realc::detail
