#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "chunkcheck/llm.hpp"

using namespace chunkcheck;

namespace {

struct EnvGuard {
  EnvGuard() { setenv("LLM_API_KEY", "test-secret-token", 1); }
} env_guard;

std::string completion_body(const std::string& content) {
  nlohmann::json j = {
      {"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return j.dump();
}

// In-process OpenAI-shaped endpoint with a scriptable handler.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&,
                                     std::size_t call_index)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handler_(req, res, calls_.fetch_add(1));
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  ClientConfig config() const {
    ClientConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_);
    cfg.backoff_base_seconds = 0.01;
    cfg.timeout_seconds = 5.0;
    return cfg;
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  httplib::Server server_;
  Handler handler_;
  std::atomic<std::size_t> calls_{0};
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("chat returns the first choice's content") {
  MockServer server([](const httplib::Request& req, httplib::Response& res,
                       std::size_t) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "hello");
    res.set_content(completion_body("world"), "application/json");
  });
  CHECK(chat(server.config(), "sys", "hello") == "world");
  CHECK(server.calls() == 1);
}

TEST_CASE("credential travels in the header, never the body") {
  MockServer server([](const httplib::Request& req, httplib::Response& res,
                       std::size_t) {
    CHECK(req.get_header_value("Authorization") == "Bearer test-secret-token");
    CHECK(req.body.find("test-secret-token") == std::string::npos);
    res.set_content(completion_body("ok"), "application/json");
  });
  CHECK(chat(server.config(), "s", "u") == "ok");
}

TEST_CASE("missing credential env var fails before any request") {
  ClientConfig cfg;
  cfg.api_key_env = "NO_SUCH_ENV_VAR_SET";
  CHECK_THROWS_AS(chat(cfg, "s", "u"), std::invalid_argument);
}

TEST_CASE("429 twice then 200 succeeds after retries") {
  MockServer server([](const httplib::Request&, httplib::Response& res,
                       std::size_t call) {
    if (call < 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
    } else {
      res.set_content(completion_body("recovered"), "application/json");
    }
  });
  CHECK(chat(server.config(), "s", "u") == "recovered");
  CHECK(server.calls() == 3);
}

TEST_CASE("retries exhausted on persistent 500") {
  MockServer server([](const httplib::Request&, httplib::Response& res,
                       std::size_t) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  ClientConfig cfg = server.config();
  cfg.max_retries = 2;
  CHECK_THROWS_WITH_AS(chat(cfg, "s", "u"),
                       doctest::Contains("retries exhausted"), TransportError);
  CHECK(server.calls() == 3);
}

TEST_CASE("non-retryable 4xx fails immediately with a body excerpt") {
  MockServer server([](const httplib::Request&, httplib::Response& res,
                       std::size_t) {
    res.status = 400;
    res.set_content("bad request details", "text/plain");
  });
  CHECK_THROWS_WITH_AS(chat(server.config(), "s", "u"),
                       doctest::Contains("bad request details"),
                       TransportError);
  CHECK(server.calls() == 1);
}

TEST_CASE("malformed JSON is a protocol error without retry") {
  MockServer server([](const httplib::Request&, httplib::Response& res,
                       std::size_t) {
    res.set_content("not json at all {", "application/json");
  });
  CHECK_THROWS_AS(chat(server.config(), "s", "u"), ProtocolError);
  CHECK(server.calls() == 1);
}

TEST_CASE("empty reply content is a protocol error") {
  MockServer server([](const httplib::Request&, httplib::Response& res,
                       std::size_t) {
    res.set_content(completion_body(""), "application/json");
  });
  CHECK_THROWS_AS(chat(server.config(), "s", "u"), ProtocolError);
}

TEST_CASE("judge verdict parsing") {
  std::string reply;
  MockServer server([&reply](const httplib::Request& req, httplib::Response& res,
                             std::size_t) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body["messages"][0]["content"] == judge_prompt());
    res.set_content(completion_body(reply), "application/json");
  });
  ClientConfig cfg = server.config();

  reply = "Unfaithful.";
  CHECK(judge(cfg, "doc", "sum").label == Label::kHallucinated);

  reply = "faithful";
  CHECK(judge(cfg, "doc", "sum").label == Label::kFaithful);

  reply = "The summary is UNFAITHFUL to the document, not faithful.";
  CHECK(judge(cfg, "doc", "sum").label == Label::kHallucinated);

  reply = "I cannot determine";
  try {
    judge(cfg, "doc", "sum");
    FAIL("expected UnparseableVerdict");
  } catch (const UnparseableVerdict& e) {
    CHECK(e.raw_reply == "I cannot determine");
  }
}

TEST_CASE("judge truncates the document tail to the token budget") {
  std::string seen_user;
  MockServer server([&seen_user](const httplib::Request& req,
                                 httplib::Response& res, std::size_t) {
    seen_user = nlohmann::json::parse(req.body)["messages"][1]["content"];
    res.set_content(completion_body("faithful"), "application/json");
  });
  ClientConfig cfg = server.config();
  cfg.judge_doc_token_budget = 3;

  JudgeResult r = judge(cfg, "one two three four five", "short summary");
  CHECK(r.truncated);
  CHECK(seen_user.find("one two three") != std::string::npos);
  CHECK(seen_user.find("four") == std::string::npos);
  CHECK(seen_user.find("short summary") != std::string::npos);

  JudgeResult r2 = judge(cfg, "one two", "short summary");
  CHECK_FALSE(r2.truncated);
}

TEST_CASE("judge_batch preserves input order under concurrency") {
  MockServer server([](const httplib::Request& req, httplib::Response& res,
                       std::size_t) {
    const std::string user =
        nlohmann::json::parse(req.body)["messages"][1]["content"];
    const bool bad = user.find("marker") != std::string::npos;
    res.set_content(completion_body(bad ? "unfaithful" : "faithful"),
                    "application/json");
  });
  ClientConfig cfg = server.config();
  cfg.max_in_flight = 3;

  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 9; ++i)
    pairs.emplace_back("document " + std::to_string(i),
                       i % 3 == 0 ? "has marker" : "clean");
  auto results = judge_batch(cfg, pairs);
  REQUIRE(results.size() == 9);
  for (int i = 0; i < 9; ++i)
    CHECK(results[i].label ==
          (i % 3 == 0 ? Label::kHallucinated : Label::kFaithful));
}

TEST_CASE("config validation") {
  ClientConfig cfg;
  cfg.timeout_seconds = 0;
  CHECK_THROWS(cfg.validate());
  cfg = ClientConfig{};
  cfg.max_in_flight = 0;
  CHECK_THROWS(cfg.validate());
}
