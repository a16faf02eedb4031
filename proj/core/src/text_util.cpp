#include "text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace tomsim::text {

namespace {
bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char lower(char c) noexcept {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}
}  // namespace

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

bool is_blank(std::string_view s) noexcept { return trim(s).empty(); }

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

bool icontains(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == s.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    auto start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string_view strip_bullet(std::string_view line) noexcept {
  line = trim(line);
  for (;;) {
    auto before = line.size();
    while (!line.empty() && (line.front() == '*' || line.front() == '_' || line.front() == '#'))
      line.remove_prefix(1);
    line = trim(line);
    if (!line.empty() && (line.front() == '-' || line.front() == '+' || line.front() == '\xE2')) {
      // "-", "+" or a UTF-8 bullet/dash (E2 80 A2, E2 80 93, E2 80 94)
      if (line.front() == '\xE2' && line.size() >= 3) line.remove_prefix(3);
      else if (line.front() != '\xE2') line.remove_prefix(1);
      line = trim(line);
    }
    std::size_t digits = 0;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')') &&
        (digits + 1 == line.size() || is_space(line[digits + 1]))) {
      line.remove_prefix(digits + 1);
      line = trim(line);
    }
    if (line.size() == before) break;
  }
  return line;
}

std::string strip_emphasis(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*' || (s[i] == '_' && i + 1 < s.size() && s[i + 1] == '_')) {
      if (s[i] == '_') ++i;
      continue;
    }
    out.push_back(s[i]);
  }
  return std::string(trim(out));
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf);
  if (out == "-0.00" || out == "-0") out.erase(0, 1);
  return out;
}

}  // namespace tomsim::text
