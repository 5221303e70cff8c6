#include <doctest.h>

#include <atomic>
#include <deque>
#include <mutex>

#include "test_support.hpp"
#include "volmo/caption_revision.hpp"
#include "volmo/error.hpp"

using namespace volmo;
using namespace volmo::revision;
using volmo::testing::read_data;

namespace {

/// Replays scripted replies; an empty optional stands for a transport failure.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::deque<std::optional<std::string>> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    ++calls;
    last_key = request.idempotency_key;
    if (replies_.empty()) throw Error(ErrorCode::ProviderUnreachable, "script exhausted");
    auto r = replies_.front();
    replies_.pop_front();
    if (!r) throw Error(ErrorCode::ProviderUnreachable, "connection refused");
    return *r;
  }
  int calls = 0;
  std::string last_key;

 private:
  std::mutex mu_;
  std::deque<std::optional<std::string>> replies_;
};

jats::FigurePair sample_figure() {
  jats::FigurePair f;
  f.article = "PMC1";
  f.figure_id = "F1";
  f.graphic_uri = "g1.jpg";
  f.raw_caption = "Fig. 1 Soft drusen in the macula [4].";
  f.issues = jats::scan_caption_issues(f.raw_caption);
  return f;
}

ReviseOptions no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
  ReviseOptions o;
  o.sleep = [delays](std::chrono::milliseconds d) {
    if (delays) delays->push_back(d);
  };
  return o;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::BadInput;
}

}  // namespace

TEST_CASE("revision prompt matches the golden listing") {
  const std::string caption = "Fundus photograph of the left eye.";
  const auto golden = read_data("golden/caption_listing.txt");
  CHECK(build_revision_prompt(caption) == text::substitute_once(golden, "{caption}", caption));
  CHECK(code_of([] { (void)build_revision_prompt("  \n"); }) == ErrorCode::EmptyCaption);
}

TEST_CASE("caption containing the placeholder is inserted verbatim") {
  const auto prompt = build_revision_prompt("literal {caption} text");
  CHECK(prompt.find("literal {caption} text") != std::string::npos);
}

TEST_CASE("parse_revision_response") {
  CHECK(parse_revision_response("Answer:\nSoft drusen are visible.\n") == "Soft drusen are visible.");
  CHECK(parse_revision_response("Sure.\nanswer: Soft drusen.") == "Soft drusen.");
  CHECK(parse_revision_response("  A plain paragraph. ") == "A plain paragraph.");
  CHECK(code_of([] { (void)parse_revision_response("Answer:\n   "); }) == ErrorCode::EmptyResponse);
}

TEST_CASE("validate_revision") {
  CHECK(validate_revision("Soft drusen cluster in the macula.").accepted);
  const auto opener = validate_revision("This image depicts drusen.");
  CHECK_FALSE(opener.accepted);
  CHECK(opener.violations == std::vector<Violation>{Violation::ForbiddenOpener});
  CHECK(validate_revision("").violations == std::vector<Violation>{Violation::Empty});
  CHECK(validate_revision("Drusen.\nAnswer: more").violations == std::vector<Violation>{Violation::ContainsAnswerHeader});
  CHECK(validate_revision("Drusen.\nDescription:\nmore").violations ==
        std::vector<Violation>{Violation::MultilineHeaderLeak});
}

TEST_CASE("offline_clean removes references and citations only") {
  const auto f = sample_figure();
  CHECK(offline_clean(f.raw_caption, f.issues) == "Soft drusen in the macula .");
  const std::string untouched = "Drusen (T2WI) see Table 2";
  CHECK(offline_clean(untouched, jats::scan_caption_issues(untouched)) == untouched);
}

TEST_CASE("idempotency key is stable per figure") {
  auto a = sample_figure();
  auto b = sample_figure();
  b.raw_caption = "different";
  CHECK(idempotency_key(a) == idempotency_key(b));
  b.figure_id = "F2";
  CHECK(idempotency_key(a) != idempotency_key(b));
  CHECK(idempotency_key(a).size() == 32);
}

TEST_CASE("backoff doubles from one second and caps at thirty") {
  CHECK(backoff_delay(1).count() == 1000);
  CHECK(backoff_delay(2).count() == 2000);
  CHECK(backoff_delay(5).count() == 16000);
  CHECK(backoff_delay(6).count() == 30000);
  CHECK(backoff_delay(50).count() == 30000);
}

TEST_CASE("first acceptable reply wins") {
  const auto f = sample_figure();
  ScriptedClient client({std::string("Answer:\nThe image shows drusen."), std::nullopt,
                         std::string("Answer:\nSoft drusen cluster in the macula.")});
  std::vector<std::chrono::milliseconds> delays;
  const auto out = revise_caption(RevisionRequest::for_figure(f, {}), &client, no_sleep(&delays));
  CHECK(client.calls == 3);
  CHECK(out.revised_caption == "Soft drusen cluster in the macula.");
  CHECK(out.revision_provenance == "llm");
  CHECK(client.last_key == idempotency_key(f));
  CHECK(delays == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000)});
}

TEST_CASE("exhausted attempts fall back to offline cleaning") {
  const auto f = sample_figure();
  ScriptedClient client({std::string("This image depicts x"), std::string("This image depicts y"),
                         std::string("This image depicts z")});
  const auto out = revise_caption(RevisionRequest::for_figure(f, {}), &client, no_sleep());
  CHECK(out.revision_provenance == "offline_cleaned");
  CHECK(out.revised_caption == "Soft drusen in the macula .");
}

TEST_CASE("without fallback, failures carry distinct codes") {
  const auto f = sample_figure();
  auto opts = no_sleep();
  opts.offline_fallback = false;
  ScriptedClient rejecting({std::string("This image depicts"), std::string("This image depicts"),
                            std::string("This image depicts")});
  CHECK(code_of([&] { revise_caption(RevisionRequest::for_figure(f, {}), &rejecting, opts); }) ==
        ErrorCode::AllAttemptsRejected);
  ScriptedClient down({std::nullopt, std::nullopt, std::nullopt});
  CHECK(code_of([&] { revise_caption(RevisionRequest::for_figure(f, {}), &down, opts); }) ==
        ErrorCode::ProviderUnreachable);
  CHECK(code_of([&] { revise_caption(RevisionRequest::for_figure(f, {}), nullptr, opts); }) ==
        ErrorCode::ProviderUnreachable);
}

TEST_CASE("provider config validation") {
  ProviderConfig c;
  c.max_attempts = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c = {};
  c.max_in_flight = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("revise_all keeps input order and isolates failures") {
  std::vector<jats::FigurePair> figures;
  for (int i = 0; i < 12; ++i) {
    auto f = sample_figure();
    f.figure_id = "F" + std::to_string(i);
    figures.push_back(f);
  }
  figures[5].raw_caption = "   ";
  ProviderConfig provider;
  provider.max_in_flight = 4;
  const auto result = revise_all(figures, provider, nullptr, no_sleep());
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].index == 5);
  CHECK(result.failures[0].code == "EmptyCaption");
  REQUIRE(result.figures.size() == 11);
  CHECK(result.figures[5].figure_id == "F6");
}

TEST_CASE("http chat client speaks the chat-completions protocol") {
  volmo::testing::LocalServer server;
  std::atomic<int> hits{0};
  std::string seen_auth, seen_key, seen_body;
  std::mutex mu;
  server->Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      seen_auth = req.get_header_value("Authorization");
      seen_key = req.get_header_value("Idempotency-Key");
      seen_body = req.body;
    }
    ++hits;
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Answer:\nSoft drusen."}}]})",
                    "application/json");
  });
  server.start();

  ProviderConfig config;
  config.endpoint_url = server.url("/v1/chat/completions");
  config.api_key = "secret";
  config.model_name = "m1";
  HttpChatClient client(config);
  CHECK(client.complete({"hello", "key-1"}) == "Answer:\nSoft drusen.");
  CHECK(hits == 1);
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_key == "key-1");
  const auto body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "m1");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "hello");
}

TEST_CASE("http chat client error mapping") {
  volmo::testing::LocalServer server;
  server->Post("/empty", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  server->Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  server.start();

  ProviderConfig config;
  config.endpoint_url = server.url("/empty");
  CHECK(code_of([&] { HttpChatClient(config).complete({"x", "k"}); }) == ErrorCode::EmptyResponse);
  config.endpoint_url = server.url("/fail");
  CHECK(code_of([&] { HttpChatClient(config).complete({"x", "k"}); }) == ErrorCode::ProviderUnreachable);
  config.endpoint_url = "http://127.0.0.1:" + std::to_string(volmo::testing::closed_port()) + "/v1/chat/completions";
  config.timeout_seconds = 2;
  CHECK(code_of([&] { HttpChatClient(config).complete({"x", "k"}); }) == ErrorCode::ProviderUnreachable);
}
