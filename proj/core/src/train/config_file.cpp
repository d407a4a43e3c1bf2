#include "picknet/train/config_file.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "picknet/error.hpp"

namespace picknet::train {

namespace {

using Scalar = std::variant<bool, std::int64_t, double, std::string>;

[[noreturn]] void bad(int line, const std::string& what) {
  fail(ErrorCode::kInvalidConfig, "config line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= k.size(); ++i) {
    if (i == k.size() || k[i] == '.') {
      if (i == start) return false;
      start = i + 1;
    } else if (!bare_key_char(k[i])) {
      return false;
    }
  }
  return true;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  ConfigValue parse_whole() {
    ConfigValue v;
    v.line = line_;
    skip_ws();
    if (peek() == '[') {
      ++pos_;
      ConfigValue::Array arr;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
      } else {
        while (true) {
          arr.push_back(scalar());
          skip_ws();
          if (peek() == ',') {
            ++pos_;
            skip_ws();
            if (peek() == ']') {
              ++pos_;
              break;
            }
            continue;
          }
          if (peek() == ']') {
            ++pos_;
            break;
          }
          bad(line_, "expected ',' or ']' in array");
        }
      }
      v.value = std::move(arr);
    } else {
      std::visit([&](auto&& x) { v.value = x; }, scalar());
    }
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') bad(line_, "unexpected text after value");
    return v;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Scalar scalar() {
    const char c = peek();
    if (c == '"') return quoted();
    if (c == '\'') return literal();
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != '#' && s_[end] != ' ' &&
           s_[end] != '\t')
      ++end;
    std::string tok(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok)
      if (ch != '_') digits += ch;
    if (digits.empty()) bad(line_, "missing value");
    const bool floaty = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                        digits == "+inf" || digits == "-inf" || digits == "nan";
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (!floaty) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(first, last, i);
      if (ec == std::errc() && p == last) return i;
    } else {
      double d = 0.0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec == std::errc() && p == last) return d;
    }
    bad(line_, "cannot parse value '" + tok + "'");
  }

  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          default: bad(line_, std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (peek() != '"') bad(line_, "unterminated string");
    ++pos_;
    return out;
  }

  std::string literal() {
    ++pos_;
    const std::size_t end = s_.find('\'', pos_);
    if (end == std::string_view::npos) bad(line_, "unterminated string");
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

std::string type_error(std::string_view key, const char* want) {
  return "key '" + std::string(key) + "' must be " + want;
}

}  // namespace

std::string ConfigValue::as_string(std::string_view key) const {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  bad(line, type_error(key, "a string"));
}

double ConfigValue::as_double(std::string_view key) const {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  bad(line, type_error(key, "a number"));
}

std::int64_t ConfigValue::as_int(std::string_view key) const {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
  bad(line, type_error(key, "an integer"));
}

std::uint64_t ConfigValue::as_uint(std::string_view key) const {
  const std::int64_t i = as_int(key);
  if (i < 0) bad(line, type_error(key, "a non-negative integer"));
  return static_cast<std::uint64_t>(i);
}

bool ConfigValue::as_bool(std::string_view key) const {
  if (const auto* b = std::get_if<bool>(&value)) return *b;
  bad(line, type_error(key, "true or false"));
}

std::vector<double> ConfigValue::as_double_list(std::string_view key) const {
  const auto* arr = std::get_if<Array>(&value);
  if (!arr) bad(line, type_error(key, "an array of numbers"));
  std::vector<double> out;
  for (const auto& e : *arr) {
    if (const auto* d = std::get_if<double>(&e)) out.push_back(*d);
    else if (const auto* i = std::get_if<std::int64_t>(&e)) out.push_back(static_cast<double>(*i));
    else bad(line, type_error(key, "an array of numbers"));
  }
  return out;
}

ConfigTable parse_config(std::string_view text) {
  ConfigTable out;
  std::string section;
  int line_no = 0;
  std::size_t at = 0;
  while (at <= text.size()) {
    const std::size_t nl = text.find('\n', at);
    const std::string_view raw = text.substr(at, nl == std::string_view::npos ? std::string_view::npos : nl - at);
    at = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const std::size_t close = line.find(']');
      if (close == std::string_view::npos) bad(line_no, "unterminated section header");
      const std::string_view rest = trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') bad(line_no, "unexpected text after section header");
      const std::string_view name = trim(line.substr(1, close - 1));
      if (!valid_key(name)) bad(line_no, "invalid section name");
      section = std::string(name);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) bad(line_no, "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!valid_key(key)) bad(line_no, "invalid key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.count(full)) bad(line_no, "duplicate key '" + full + "'");
    out[full] = ValueParser(line.substr(eq + 1), line_no).parse_whole();
  }
  return out;
}

ConfigTable load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kInvalidConfig, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ConfigTable parse_overrides(const std::vector<std::string>& items) {
  ConfigTable out;
  for (const auto& item : items) {
    const std::size_t eq = item.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidConfig, "override '" + item + "' is not key=value");
    const std::string key(trim(std::string_view(item).substr(0, eq)));
    require(valid_key(key), ErrorCode::kInvalidConfig, "invalid override key '" + key + "'");
    const std::string_view val = trim(std::string_view(item).substr(eq + 1));
    try {
      out[key] = ValueParser(val, 0).parse_whole();
    } catch (const Error&) {
      ConfigValue v;
      v.value = std::string(val);
      out[key] = v;
    }
  }
  return out;
}

void merge_config(ConfigTable& into, const ConfigTable& from) {
  for (const auto& [k, v] : from) into[k] = v;
}

}  // namespace picknet::train
