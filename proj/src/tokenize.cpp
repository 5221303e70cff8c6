#include "volmo/tokenize.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "volmo/error.hpp"

namespace volmo::text {

namespace {

icu::UnicodeString nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::Io, "ICU NFC normalizer unavailable");
  icu::UnicodeString out = n->normalize(s, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::BadInput, "text cannot be normalized");
  return out;
}

void flush(std::string& current, std::vector<std::string>& out) {
  if (!current.empty()) out.push_back(std::move(current));
  current.clear();
}

std::vector<std::string> split(const icu::UnicodeString& s, bool detach_punct) {
  std::vector<std::string> out;
  std::string current;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush(current, out);
      continue;
    }
    std::string utf8;
    icu::UnicodeString(c).toUTF8String(utf8);
    if (detach_punct && u_ispunct(c)) {
      flush(current, out);
      out.push_back(std::move(utf8));
      continue;
    }
    current += utf8;
  }
  flush(current, out);
  return out;
}

}  // namespace

std::vector<std::string> registered_policies() { return {"default", "whitespace"}; }

TokenSequence tokenize(std::string_view text, std::string_view policy) {
  const bool is_default = policy == "default";
  if (!is_default && policy != "whitespace") throw Error(ErrorCode::UnknownPolicy, "unknown tokenization policy: " + std::string(policy));

  icu::UnicodeString s = nfc(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));
  if (is_default) s = nfc(s.toLower(icu::Locale::getRoot()));
  return TokenSequence{split(s, is_default), std::string(policy)};
}

std::string join(const TokenSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += seq.tokens[i];
  }
  return out;
}

}  // namespace volmo::text
