#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tomsim::text {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
bool is_blank(std::string_view s) noexcept;
bool iequals(std::string_view a, std::string_view b) noexcept;
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
// Removes list bullets and numbering ("- ", "* ", "1.", "2)") and markdown
// emphasis markers from the start and end of a line.
std::string_view strip_bullet(std::string_view line) noexcept;
std::string strip_emphasis(std::string_view s);
std::string format_fixed(double value, int decimals);

}  // namespace tomsim::text
