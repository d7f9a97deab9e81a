#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nonlocal_spectra/error.hpp"
#include "nonlocal_spectra/io.hpp"

namespace nls {

/// Position of a token in the config text (1-based). Line 0 marks an override.
struct SourceLocation {
  int line = 0;
  int column = 0;

  std::string str() const {
    if (line == 0) return "command-line override";
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
  }
};

struct ConfigValue {
  enum class Kind { Number, Bool, String, Array };
  Kind kind = Kind::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;
  SourceLocation loc;

  std::string kind_name() const {
    switch (kind) {
      case Kind::Number: return "number";
      case Kind::Bool: return "boolean";
      case Kind::String: return "string";
      case Kind::Array: return "array";
    }
    return "?";
  }

  /// TOML rendering; numbers use 17 significant digits so they round-trip.
  std::string render() const {
    switch (kind) {
      case Kind::Number: return io::format_double(number);
      case Kind::Bool: return boolean ? "true" : "false";
      case Kind::String: {
        std::string out = "\"";
        for (char c : text) {
          if (c == '"' || c == '\\') out += '\\';
          if (c == '\n') {
            out += "\\n";
            continue;
          }
          out += c;
        }
        return out + "\"";
      }
      case Kind::Array: {
        std::string out = "[";
        for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i].render();
        return out + "]";
      }
    }
    return "";
  }
};

/// Sectioned key-value configuration in a subset of TOML.
///
/// Supported: `[section]` headers (one level), `key = value` with numbers,
/// booleans, double-quoted strings and (nested) arrays, and `#` comments.
/// Keys are addressed as "section.key"; keys before the first header have no prefix.
class Config {
 public:
  static Config parse(const std::string& text) {
    Config cfg;
    Reader r{text};
    std::string section;
    while (!r.done()) {
      r.skip_blank();
      if (r.done()) break;
      const SourceLocation at = r.loc();
      if (r.peek() == '\n') {
        r.next();
        continue;
      }
      if (r.peek() == '#') {
        r.skip_line();
        continue;
      }
      if (r.peek() == '[') {
        r.next();
        r.skip_blank();
        section = r.bare_key();
        if (section.empty()) r.error("expected a section name");
        r.skip_blank();
        if (r.peek() != ']') r.error("expected ']' after section name");
        r.next();
        if (cfg.sections_.count(section)) fail(ErrorCode::ConfigParse, at.str() + ": section [" + section + "] defined twice");
        cfg.sections_[section] = at;
        r.end_of_line();
        continue;
      }
      std::string key = r.bare_key();
      if (key.empty()) r.error("expected a key");
      r.skip_blank();
      if (r.peek() != '=') r.error("expected '=' after key '" + key + "'");
      r.next();
      r.skip_blank();
      ConfigValue v = r.value();
      r.end_of_line();
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) fail(ErrorCode::ConfigParse, at.str() + ": key '" + full + "' defined twice");
      v.loc = at;
      cfg.values_[full] = std::move(v);
      cfg.key_locs_[full] = at;
    }
    return cfg;
  }

  /// Applies "section.key=value". A value that is not valid TOML is taken as a bare string.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorCode::ConfigParse, "override '" + assignment + "' is not of the form key=value");
    std::string key = trim(assignment.substr(0, eq));
    const std::string raw = trim(assignment.substr(eq + 1));
    ConfigValue v;
    try {
      Reader r{raw};
      v = r.value();
      r.skip_blank();
      if (!r.done()) throw Error(ErrorCode::ConfigParse, "trailing text");
    } catch (const Error&) {
      v = ConfigValue{};
      v.kind = ConfigValue::Kind::String;
      v.text = raw;
    }
    v.loc = SourceLocation{};
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      const std::string sec = key.substr(0, dot);
      if (!sections_.count(sec)) sections_[sec] = SourceLocation{};
    }
    values_[key] = std::move(v);
    key_locs_[key] = SourceLocation{};
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  const ConfigValue& at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::ConfigParse, missing_location(key) + ": missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  double number(const std::string& key) const { return expect(at(key), key, ConfigValue::Kind::Number).number; }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long integer(const std::string& key) const {
    const ConfigValue& v = expect(at(key), key, ConfigValue::Kind::Number);
    if (v.number != static_cast<double>(static_cast<long>(v.number)))
      fail(ErrorCode::ConfigParse, v.loc.str() + ": '" + key + "' must be an integer");
    return static_cast<long>(v.number);
  }
  long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) const {
    return has(key) ? expect(at(key), key, ConfigValue::Kind::Bool).boolean : fallback;
  }

  std::string string(const std::string& key) const { return expect(at(key), key, ConfigValue::Kind::String).text; }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  /// A number or a string; numbers are rendered back to text (used for expressions).
  std::string expression_text(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind == ConfigValue::Kind::Number) return io::format_double(v.number);
    return expect(v, key, ConfigValue::Kind::String).text;
  }
  std::string expression_text(const std::string& key, const std::string& fallback) const {
    return has(key) ? expression_text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.kind == ConfigValue::Kind::Number) return {v.number};
    expect(v, key, ConfigValue::Kind::Array);
    std::vector<double> out;
    for (const ConfigValue& item : v.items) out.push_back(expect(item, key, ConfigValue::Kind::Number).number);
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? numbers(key) : fallback;
  }

  SourceLocation location(const std::string& key) const {
    auto it = key_locs_.find(key);
    return it == key_locs_.end() ? SourceLocation{} : it->second;
  }

  /// Fails on the first key that no accessor has read (typically a typo).
  void reject_unused() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) fail(ErrorCode::ConfigParse, v.loc.str() + ": unknown key '" + k + "'");
  }

  /// Sorted TOML text; parsing it gives back the same values.
  std::string canonical() const {
    std::string out;
    std::map<std::string, std::vector<std::pair<std::string, const ConfigValue*>>> by_section;
    for (const auto& [k, v] : values_) {
      const auto dot = k.find('.');
      if (dot == std::string::npos) by_section[""].emplace_back(k, &v);
      else by_section[k.substr(0, dot)].emplace_back(k.substr(dot + 1), &v);
    }
    for (const auto& [sec, entries] : by_section) {
      if (!sec.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      for (const auto& [k, v] : entries) out += k + " = " + v->render() + "\n";
    }
    return out;
  }

 private:
  std::map<std::string, ConfigValue> values_;
  std::map<std::string, SourceLocation> key_locs_;
  std::map<std::string, SourceLocation> sections_;
  mutable std::set<std::string> used_;

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::string missing_location(const std::string& key) const {
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      auto it = sections_.find(key.substr(0, dot));
      if (it != sections_.end()) return it->second.str() + " (section [" + it->first + "])";
      return "section [" + key.substr(0, dot) + "] not found";
    }
    return "top level";
  }

  static const ConfigValue& expect(const ConfigValue& v, const std::string& key, ConfigValue::Kind kind) {
    if (v.kind != kind) {
      ConfigValue want;
      want.kind = kind;
      fail(ErrorCode::ConfigParse,
           v.loc.str() + ": '" + key + "' must be a " + want.kind_name() + ", got a " + v.kind_name());
    }
    return v;
  }

  struct Reader {
    const std::string& s;
    std::size_t pos = 0;
    int line = 1;
    std::size_t line_start = 0;

    bool done() const { return pos >= s.size(); }
    char peek() const { return done() ? '\0' : s[pos]; }
    void next() {
      if (peek() == '\n') {
        ++line;
        line_start = pos + 1;
      }
      ++pos;
    }
    SourceLocation loc() const { return {line, static_cast<int>(pos - line_start) + 1}; }
    [[noreturn]] void error(const std::string& msg) const { fail(ErrorCode::ConfigParse, loc().str() + ": " + msg); }

    void skip_blank() {
      while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) next();
    }
    void skip_line() {
      while (!done() && peek() != '\n') next();
    }
    // Whitespace, comments and newlines inside arrays.
    void skip_space_and_comments() {
      for (;;) {
        while (!done() && std::isspace(static_cast<unsigned char>(peek()))) next();
        if (peek() == '#') skip_line();
        else return;
      }
    }
    void end_of_line() {
      skip_blank();
      if (peek() == '#') skip_line();
      if (done()) return;
      if (peek() != '\n') error(std::string("unexpected '") + peek() + "'");
      next();
    }

    std::string bare_key() {
      const std::size_t start = pos;
      while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) next();
      return s.substr(start, pos - start);
    }

    ConfigValue value() {
      ConfigValue v;
      v.loc = loc();
      const char c = peek();
      if (c == '"') {
        next();
        v.kind = ConfigValue::Kind::String;
        while (!done() && peek() != '"') {
          if (peek() == '\n') error("unterminated string");
          if (peek() == '\\') {
            next();
            const char e = peek();
            if (e == 'n') v.text += '\n';
            else if (e == '"' || e == '\\') v.text += e;
            else error(std::string("unsupported escape '\\") + e + "'");
            next();
            continue;
          }
          v.text += peek();
          next();
        }
        if (done()) error("unterminated string");
        next();
        return v;
      }
      if (c == '[') {
        next();
        v.kind = ConfigValue::Kind::Array;
        skip_space_and_comments();
        while (peek() != ']') {
          if (done()) error("unterminated array");
          v.items.push_back(value());
          skip_space_and_comments();
          if (peek() == ',') {
            next();
            skip_space_and_comments();
          } else if (peek() != ']') {
            error("expected ',' or ']' in array");
          }
        }
        next();
        return v;
      }
      const std::size_t start = pos;
      while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                         peek() == '-' || peek() == '_'))
        next();
      std::string word = s.substr(start, pos - start);
      if (word == "true" || word == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.boolean = word == "true";
        return v;
      }
      if (word == "inf" || word == "+inf" || word == "-inf" || word == "nan")
        error("non-finite numbers are not accepted");
      word.erase(std::remove(word.begin(), word.end(), '_'), word.end());
      const char* first = word.data();
      const char* last = word.data() + word.size();
      if (first != last && *first == '+') ++first;
      double d = 0.0;
      const auto res = std::from_chars(first, last, d);
      if (word.empty() || res.ec != std::errc() || res.ptr != last) {
        pos = start;
        error(word.empty() ? "expected a value" : "malformed value '" + word + "'");
      }
      v.kind = ConfigValue::Kind::Number;
      v.number = d;
      return v;
    }
  };
};

}  // namespace nls
