#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refvos/common.hpp"

namespace refvos {

/// The closed referring mini-language:
///
///   expr := ["the"] <color> <shape> "that" <motion> ["then" <motion>]
///
/// where <motion> is one of the verb phrases below. The grammar is closed and
/// enumerable so predicate ground truth stays computable without any language
/// model.
namespace lang {

const std::vector<std::string>& colors();
const std::vector<std::string>& shapes();
/// Canonical motion kind names: move-left, move-right, move-up, move-down,
/// stop, bounce, circle.
const std::vector<std::string>& motion_kinds();

/// Verb phrase for a motion kind ("move-left" -> "moves left").
std::string motion_phrase(const std::string& kind);
/// Every word that can appear in an expression or selector prompt.
std::vector<std::string> all_words();

struct ParsedExpression {
  std::string color;
  std::string shape;
  std::string motion;                  // canonical kind
  std::optional<std::string> motion2;  // canonical kind, "then" qualifier
};

ParsedExpression parse_expression(const std::string& text);

std::string render_expression(const ParsedExpression& e, bool definite_article);

}  // namespace lang
}  // namespace refvos
