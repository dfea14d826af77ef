#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "trajdebug/core/result.hpp"

namespace trajdbg {

namespace detail {

// Drop markdown code fences (``` or ```json) wherever they appear.
inline std::string strip_code_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 3, "```") == 0) {
      i += 3;
      while (i < text.size() && text[i] != '\n' && text[i] != '`') ++i;  // language tag
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

inline std::string repair_json(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    // smart quotes (U+2018..U+201D) -> ASCII, outside of nothing: JSON never
    // legally contains them, so a blanket replacement is safe.
    if (c == 0xe2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
      unsigned char third = static_cast<unsigned char>(text[i + 2]);
      if (third == 0x98 || third == 0x99) {
        out.push_back('\'');
        i += 2;
        continue;
      }
      if (third == 0x9c || third == 0x9d) {
        out.push_back('"');
        in_string = !in_string;
        i += 2;
        continue;
      }
    }
    if (c == '"' && (i == 0 || text[i - 1] != '\\')) in_string = !in_string;
    if (!in_string && c == ',') {
      // trailing comma: skip if the next non-space char closes a container
      size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

}  // namespace detail

// Pulls the first balanced top-level {...} block out of free-form model
// output (braces inside string literals don't count), then parses it with a
// bounded repair pass. Never throws.
inline Result<nlohmann::json> extract_json(std::string_view raw) {
  const std::string text = detail::strip_code_fences(raw);
  size_t start = text.find('{');
  if (start == std::string::npos) return err(Errc::no_json_found, "no '{' in model output");

  size_t end = std::string::npos;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}') {
      --depth;
      if (depth == 0) {
        end = i;
        break;
      }
    }
  }
  if (end == std::string::npos)
    return err(Errc::unbalanced_braces, "opened '{' never closed");

  const std::string block = text.substr(start, end - start + 1);
  nlohmann::json parsed = nlohmann::json::parse(block, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded()) return parsed;
  parsed = nlohmann::json::parse(detail::repair_json(block), nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return err(Errc::parse_failure, "block is not valid JSON after repair");
}

// Same scan for a top-level [...] array (tree-search score lists).
inline Result<nlohmann::json> extract_json_array(std::string_view raw) {
  const std::string text = detail::strip_code_fences(raw);
  size_t start = text.find('[');
  if (start == std::string::npos) return err(Errc::no_json_found, "no '[' in model output");
  size_t end = std::string::npos;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '[')
      ++depth;
    else if (c == ']') {
      --depth;
      if (depth == 0) {
        end = i;
        break;
      }
    }
  }
  if (end == std::string::npos) return err(Errc::unbalanced_braces, "opened '[' never closed");
  const std::string block = text.substr(start, end - start + 1);
  nlohmann::json parsed = nlohmann::json::parse(block, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  parsed = nlohmann::json::parse(detail::repair_json(block), nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return err(Errc::parse_failure, "block is not valid JSON after repair");
}

}  // namespace trajdbg
