#include "egdiff/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace egdiff {

const std::string& TomlValue::as_string() const {
  if (type != Type::kString) throw TomlError("value is not a string");
  return str;
}

long long TomlValue::as_int() const {
  if (type != Type::kInt) throw TomlError("value is not an integer");
  return integer;
}

double TomlValue::as_float() const {
  if (type == Type::kFloat) return real;
  if (type == Type::kInt) return static_cast<double>(integer);
  throw TomlError("value is not a number");
}

bool TomlValue::as_bool() const {
  if (type != Type::kBool) throw TomlError("value is not a boolean");
  return boolean;
}

const std::vector<TomlValue>& TomlValue::as_array() const {
  if (type != Type::kArray) throw TomlError("value is not an array");
  return array;
}

std::vector<double> TomlValue::as_float_array() const {
  std::vector<double> out;
  for (const TomlValue& v : as_array()) out.push_back(v.as_float());
  return out;
}

std::vector<std::string> TomlValue::as_string_array() const {
  std::vector<std::string> out;
  for (const TomlValue& v : as_array()) out.push_back(v.as_string());
  return out;
}

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  int line;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  void skip_ws() {
    while (!done() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw TomlError("line " + std::to_string(line) + ": " + msg);
  }
};

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

TomlValue parse_value(Cursor& cur);

TomlValue parse_scalar(Cursor& cur) {
  TomlValue v;
  if (cur.done()) cur.fail("expected a value");
  const char c = cur.peek();
  if (c == '"') {
    ++cur.pos;
    std::string out;
    while (!cur.done() && cur.peek() != '"') {
      if (cur.peek() == '\\') {
        ++cur.pos;
        if (cur.done()) cur.fail("dangling escape");
        switch (cur.peek()) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: cur.fail("unsupported escape");
        }
        ++cur.pos;
      } else {
        out += cur.s[cur.pos++];
      }
    }
    if (cur.done()) cur.fail("unterminated string");
    ++cur.pos;
    v.type = TomlValue::Type::kString;
    v.str = std::move(out);
    return v;
  }
  if (std::isalpha(static_cast<unsigned char>(c))) {
    std::string word;
    while (!cur.done() && std::isalpha(static_cast<unsigned char>(cur.peek()))) {
      word += cur.s[cur.pos++];
    }
    if (word == "true" || word == "false") {
      v.type = TomlValue::Type::kBool;
      v.boolean = word == "true";
      return v;
    }
    cur.fail("bare word '" + word + "' is not a value");
  }
  // number
  std::string num;
  bool is_float = false;
  while (!cur.done()) {
    const char d = cur.peek();
    if (std::isdigit(static_cast<unsigned char>(d)) || d == '+' || d == '-') {
      num += d;
    } else if (d == '.' || d == 'e' || d == 'E') {
      num += d;
      is_float = true;
    } else if (d == '_') {
      // TOML digit separator
    } else {
      break;
    }
    ++cur.pos;
  }
  if (num.empty()) cur.fail("expected a value");
  try {
    std::size_t used = 0;
    if (is_float) {
      v.type = TomlValue::Type::kFloat;
      v.real = std::stod(num, &used);
    } else {
      v.type = TomlValue::Type::kInt;
      v.integer = std::stoll(num, &used);
    }
    if (used != num.size()) cur.fail("malformed number '" + num + "'");
  } catch (const std::exception&) {
    cur.fail("malformed number '" + num + "'");
  }
  return v;
}

TomlValue parse_value(Cursor& cur) {
  cur.skip_ws();
  if (!cur.done() && cur.peek() == '[') {
    ++cur.pos;
    TomlValue v;
    v.type = TomlValue::Type::kArray;
    cur.skip_ws();
    if (!cur.done() && cur.peek() == ']') {
      ++cur.pos;
      return v;
    }
    while (true) {
      v.array.push_back(parse_value(cur));
      cur.skip_ws();
      if (cur.done()) cur.fail("unterminated array");
      if (cur.peek() == ',') {
        ++cur.pos;
        cur.skip_ws();
        continue;
      }
      if (cur.peek() == ']') {
        ++cur.pos;
        return v;
      }
      cur.fail("expected ',' or ']' in array");
    }
  }
  return parse_scalar(cur);
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Cursor cur{line, 0, line_no};
    cur.skip_ws();
    if (cur.done() || cur.peek() == '#') continue;
    if (cur.peek() == '[') {
      ++cur.pos;
      std::string name;
      while (!cur.done() && (is_bare_key_char(cur.peek()) || cur.peek() == '.')) {
        name += cur.s[cur.pos++];
      }
      if (cur.done() || cur.peek() != ']') cur.fail("malformed table header");
      ++cur.pos;
      cur.skip_ws();
      if (!cur.done() && cur.peek() != '#') cur.fail("trailing text after table header");
      if (name.empty()) cur.fail("empty table name");
      prefix = name + ".";
      continue;
    }
    std::string key;
    while (!cur.done() && is_bare_key_char(cur.peek())) key += cur.s[cur.pos++];
    if (key.empty()) cur.fail("expected a key");
    cur.skip_ws();
    if (cur.done() || cur.peek() != '=') cur.fail("expected '=' after key");
    ++cur.pos;
    TomlValue value = parse_value(cur);
    cur.skip_ws();
    if (!cur.done() && cur.peek() != '#') cur.fail("trailing text after value");
    const std::string full = prefix + key;
    if (table.count(full)) cur.fail("duplicate key '" + full + "'");
    table.emplace(full, std::move(value));
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TomlError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

}  // namespace egdiff
