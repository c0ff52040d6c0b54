#pragma once

// Tokens of the .real source language. Internal to the frontend.

#include <string>
#include <string_view>
#include <vector>

namespace realc::detail {

enum class Tok {
  ident,
  number,
  lparen,
  rparen,
  lbrace,
  rbrace,
  comma,
  semi,
  colon,
  dot,
  assign,  // =
  arrow,   // =>
  plus,
  minus,
  star,
  slash,
  plusminus,  // +/-
  lt,
  le,
  gt,
  ge,
  eq,   // ==
  ne,   // !=
  and_,
  or_,
  bang,
  tilde,
  end,
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

std::vector<Token> lex(std::string_view src);
std::string describe(const Token& t);

}  // namespace realc::detail
