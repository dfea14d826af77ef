#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "trajdebug/core/result.hpp"

namespace trajdbg {

// Text with {placeholder} slots. {{ and }} are literal-brace escapes; any
// other brace use is rejected at parse time so drift between template files
// and call sites fails loudly.
class PromptTemplate {
 public:
  static Result<PromptTemplate> parse(std::string id, std::string body) {
    PromptTemplate t;
    t.id_ = std::move(id);
    t.body_ = std::move(body);
    const std::string& s = t.body_;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '{') {
        if (i + 1 < s.size() && s[i + 1] == '{') {
          ++i;
          continue;
        }
        size_t close = i + 1;
        while (close < s.size() && is_name_char(s[close])) ++close;
        if (close == i + 1 || close >= s.size() || s[close] != '}')
          return err(Errc::template_syntax,
                     t.id_ + ": stray '{' at offset " + std::to_string(i));
        t.placeholders_.insert(s.substr(i + 1, close - i - 1));
        i = close;
      } else if (s[i] == '}') {
        if (i + 1 < s.size() && s[i + 1] == '}') {
          ++i;
          continue;
        }
        return err(Errc::template_syntax,
                   t.id_ + ": stray '}' at offset " + std::to_string(i));
      }
    }
    return t;
  }

  const std::string& id() const { return id_; }
  const std::string& body() const { return body_; }
  const std::set<std::string>& required_placeholders() const { return placeholders_; }

  // Strict both ways: every slot must be bound and every binding must be a slot.
  Result<std::string> render(const std::map<std::string, std::string>& bindings) const {
    for (const auto& [name, _] : bindings)
      if (!placeholders_.count(name))
        return err(Errc::unknown_placeholder, id_ + ": no such placeholder {" + name + "}");
    std::string out;
    out.reserve(body_.size());
    const std::string& s = body_;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '{') {
        if (s[i + 1] == '{') {  // parse() guarantees i+1 exists
          out.push_back('{');
          ++i;
          continue;
        }
        size_t close = s.find('}', i);
        std::string name = s.substr(i + 1, close - i - 1);
        auto it = bindings.find(name);
        if (it == bindings.end())
          return err(Errc::missing_placeholder, id_ + ": unbound placeholder {" + name + "}");
        out += it->second;
        i = close;
      } else if (s[i] == '}') {
        out.push_back('}');
        ++i;  // skip the escape twin
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }

 private:
  static bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_';
  }

  std::string id_;
  std::string body_;
  std::set<std::string> placeholders_;
};

inline Result<std::string> read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return err(Errc::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads and caches *.txt template files from a directory tree. Ids use
// forward slashes relative to the root, without the extension
// ("alfworld/head_his", "detector").
class PromptStore {
 public:
  explicit PromptStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  Result<PromptTemplate> get(const std::string& id) const {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    auto text = read_text_file(root_ / (id + ".txt"));
    if (!text.ok()) return text.error();
    auto tmpl = PromptTemplate::parse(id, text.take());
    if (!tmpl.ok()) return tmpl.error();
    cache_.emplace(id, tmpl.value());
    return tmpl;
  }

  Result<std::string> render(const std::string& id,
                             const std::map<std::string, std::string>& bindings) const {
    auto tmpl = get(id);
    if (!tmpl.ok()) return tmpl.error();
    return tmpl.value().render(bindings);
  }

 private:
  std::filesystem::path root_;
  mutable std::map<std::string, PromptTemplate> cache_;
};

}  // namespace trajdbg
