#include "refvos/expression.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace refvos::lang {

const std::vector<std::string>& colors() {
  static const std::vector<std::string> v = {"red", "green", "blue", "yellow", "magenta", "cyan"};
  return v;
}

const std::vector<std::string>& shapes() {
  static const std::vector<std::string> v = {"circle", "square", "triangle"};
  return v;
}

const std::vector<std::string>& motion_kinds() {
  static const std::vector<std::string> v = {"move-left", "move-right", "move-up",
                                             "move-down", "stop",       "bounce",
                                             "circle"};
  return v;
}

namespace {
const std::map<std::string, std::string>& phrase_table() {
  static const std::map<std::string, std::string> t = {
      {"move-left", "moves left"}, {"move-right", "moves right"}, {"move-up", "moves up"},
      {"move-down", "moves down"}, {"stop", "stops"},             {"bounce", "bounces"},
      {"circle", "circles"}};
  return t;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::stringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Consume a motion phrase starting at `i`; returns the canonical kind.
std::string parse_motion(const std::vector<std::string>& words, size_t& i) {
  if (i >= words.size()) throw DataError("expression ends where a motion phrase was expected");
  const std::string& head = words[i];
  if (head == "moves") {
    if (i + 1 >= words.size()) throw DataError("'moves' needs a direction");
    const std::string& dir = words[i + 1];
    i += 2;
    if (dir == "left") return "move-left";
    if (dir == "right") return "move-right";
    if (dir == "up") return "move-up";
    if (dir == "down") return "move-down";
    throw DataError("unknown direction '" + dir + "'");
  }
  ++i;
  if (head == "stops") return "stop";
  if (head == "bounces") return "bounce";
  if (head == "circles") return "circle";
  throw DataError("unknown motion word '" + head + "'");
}
}  // namespace

std::string motion_phrase(const std::string& kind) {
  auto it = phrase_table().find(kind);
  if (it == phrase_table().end()) throw DataError("unknown motion kind '" + kind + "'");
  return it->second;
}

std::vector<std::string> all_words() {
  std::vector<std::string> words;
  for (const auto& c : colors()) words.push_back(c);
  for (const auto& s : shapes()) words.push_back(s);
  words.insert(words.end(), {"the", "that", "then", "moves", "left", "right", "up", "down",
                             "stops", "bounces", "circles"});
  // Selector prompt words.
  words.insert(words.end(), {"when", "does", "best", "match", "a", "visible", "object", "?"});
  return words;
}

ParsedExpression parse_expression(const std::string& text) {
  auto words = tokenize(text);
  size_t i = 0;
  if (i < words.size() && words[i] == "the") ++i;
  if (i >= words.size() || !contains(colors(), words[i]))
    throw DataError("expression '" + text + "': expected a color");
  ParsedExpression e;
  e.color = words[i++];
  if (i >= words.size() || !contains(shapes(), words[i]))
    throw DataError("expression '" + text + "': expected a shape");
  e.shape = words[i++];
  if (i >= words.size() || words[i] != "that")
    throw DataError("expression '" + text + "': expected 'that'");
  ++i;
  e.motion = parse_motion(words, i);
  if (i < words.size()) {
    if (words[i] != "then")
      throw DataError("expression '" + text + "': expected 'then' or end");
    ++i;
    e.motion2 = parse_motion(words, i);
  }
  if (i != words.size())
    throw DataError("expression '" + text + "': trailing words");
  return e;
}

std::string render_expression(const ParsedExpression& e, bool definite_article) {
  std::string out;
  if (definite_article) out += "the ";
  out += e.color + " " + e.shape + " that " + motion_phrase(e.motion);
  if (e.motion2) out += " then " + motion_phrase(*e.motion2);
  return out;
}

}  // namespace refvos::lang
