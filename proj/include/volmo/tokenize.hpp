#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace volmo::text {

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string policy_id;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Registered policies:
///   "default"    NFC, lowercase, split on whitespace, punctuation as single tokens
///   "whitespace" NFC, split on whitespace only
/// Throws Error(UnknownPolicy) for anything else.
TokenSequence tokenize(std::string_view text, std::string_view policy = "default");

std::vector<std::string> registered_policies();

/// Joins tokens with the policy's joiner (a single space for every built-in policy).
std::string join(const TokenSequence& seq);

}  // namespace volmo::text
