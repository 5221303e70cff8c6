#include <doctest.h>

#include <set>

#include "volmo/digest.hpp"
#include "volmo/error.hpp"
#include "volmo/philox.hpp"
#include "volmo/templates.hpp"
#include "volmo/text_util.hpp"

using namespace volmo;

TEST_CASE("whitespace helpers") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::normalize_whitespace(" a \t\n b  c ") == "a b c");
  CHECK(text::normalize_whitespace("") == "");
  CHECK(text::iequals("AbC", "aBc"));
  CHECK(text::istarts_with("Answer: x", "answer:"));
  CHECK(text::icontains("Case Presentation", "case presentation"));
}

TEST_CASE("split_lines drops carriage returns") {
  const auto lines = text::split_lines("a\r\nb\nc");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "a");
  CHECK(lines[2] == "c");
}

TEST_CASE("substitute_once never rescans the value") {
  CHECK(text::substitute_once("x {p} y {p}", "{p}", "{p}{p}") == "x {p}{p} y {p}");
  CHECK(text::substitute_once("none", "{p}", "v") == "none");
}

TEST_CASE("code-point offsets") {
  const std::string s = "a\xC3\xA9\xE2\x80\x93z";  // a é – z
  CHECK(text::codepoint_count(s) == 4);
  CHECK(text::byte_to_codepoint(s, 3) == 2);
  CHECK(text::codepoint_to_byte(s, 3) == 6);
  CHECK(text::codepoint_slice(s, 1, 3) == "\xC3\xA9\xE2\x80\x93");
}

TEST_CASE("sha256 and fnv1a known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("philox4x32-10 known-answer vectors") {
  const auto zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(ones == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("philox index stays in range and covers it") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t d = 0; d < 2000; ++d) {
    const auto i = Philox4x32::index(7, 3, d, 10);
    REQUIRE(i < 10);
    seen.insert(i);
  }
  CHECK(seen.size() == 10);
  for (std::uint64_t d = 0; d < 1000; ++d) {
    const double u = Philox4x32::uniform(1, 2, d);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK(Philox4x32::bits(1, 2, 3) == Philox4x32::bits(1, 2, 3));
  CHECK(Philox4x32::bits(1, 2, 3) != Philox4x32::bits(1, 3, 2));
}

TEST_CASE("error codes round-trip through names and map to exit classes") {
  for (int i = 0; i <= static_cast<int>(ErrorCode::BadInput); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    REQUIRE(error_code_from_string(to_string(code)) == code);
  }
  CHECK_FALSE(error_code_from_string("NoSuchCode").has_value());
  CHECK(exit_class(ErrorCode::ProviderUnreachable) == ExitClass::ExternalService);
  CHECK(exit_class(ErrorCode::EmbeddingUnavailable) == ExitClass::ExternalService);
  CHECK(exit_class(ErrorCode::MalformedXml) == ExitClass::Input);
}

TEST_CASE("every template is embedded and unknown names fail") {
  CHECK(templates::embedded_files().size() == 11);
  CHECK(templates::get("screening.txt").find("{condition}") != std::string_view::npos);
  try {
    (void)templates::get("missing.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}
