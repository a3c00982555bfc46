#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace relcap::data {

// Lowercases ASCII letters and splits on anything that is not a letter or
// digit. Punctuation is dropped.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& tokens);

}  // namespace relcap::data
