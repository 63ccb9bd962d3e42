#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cutstudio::text {

/// Lowercases ASCII letters, drops ASCII punctuation, splits on whitespace.
/// Non-ASCII bytes pass through untouched so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view s);

std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace cutstudio::text
