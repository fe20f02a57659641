#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace orion {

// ---------------------------------------------------------------- text

/// ASCII lowercase.
std::string fold(std::string_view s);

/// Case-folded alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view s);
std::set<std::string> token_set(std::string_view s);

/// |a ∩ b| / |a ∪ b|, 0 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

bool shares_token(const std::set<std::string>& a, const std::set<std::string>& b);

/// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);

// ---------------------------------------------------------------- digests

std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view data);
bool constant_time_equal(std::string_view a, std::string_view b);

std::string base64_decode(std::string_view in);
std::string base64_encode(std::string_view in);

// ---------------------------------------------------------------- misc

std::string random_hex(std::mt19937_64& rng, std::size_t digits);

std::string read_file(const std::filesystem::path& p);

/// Writes via a temporary sibling and rename so readers never see partial content.
void write_file_atomic(const std::filesystem::path& p, std::string_view data);

std::int64_t unix_now_seconds();

}  // namespace orion
