#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "prism/types.hpp"

namespace prism {

// JSON Lines, one object per problem: {"id": ..., "statement": ...,
// "gold_answer"?: ..., "domain_tag"?: ...}. Duplicate ids or empty
// statements are rejected.
std::vector<Problem> load_dataset(const std::filesystem::path& path);

std::vector<Problem> parse_dataset(const std::string& jsonl, const std::string& origin);

void write_dataset(const std::filesystem::path& path, const std::vector<Problem>& problems);

}  // namespace prism
