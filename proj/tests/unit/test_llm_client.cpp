#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "deld/error.hpp"
#include "deld/llm_client.hpp"
#include "httplib.h"

using namespace deld;

namespace {

const char* kGoldenSystem =
    "Act as a disinformation detector. Given the following news piece, which category does this "
    "news belong to? Return \"1\" if you think the news piece is disinformation; otherwise, return "
    "\"0\". Note that there is no need for an explanation.";

std::string completion(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

// Chat endpoint on an ephemeral local port. `reply` maps the user message of
// each request to the assistant content.
class MockServer {
 public:
  explicit MockServer(std::function<std::string(const std::string&)> reply, int status = 200)
      : reply_(std::move(reply)), status_(status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const auto body = nlohmann::json::parse(req.body);
      {
        std::lock_guard lock(mu_);
        last_request_ = body;
        last_auth_ = req.get_header_value("Authorization");
      }
      if (status_ != 200) {
        res.status = status_;
        res.set_content("upstream overloaded, retry later", "text/plain");
        return;
      }
      const std::string user = body["messages"][1]["content"];
      res.set_content(completion(reply_(user)), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int requests() const { return requests_; }
  nlohmann::json last_request() {
    std::lock_guard lock(mu_);
    return last_request_;
  }
  std::string last_auth() {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  std::function<std::string(const std::string&)> reply_;
  int status_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
  std::mutex mu_;
  nlohmann::json last_request_;
  std::string last_auth_;
};

ZeroShotConfig config_for(const MockServer& server) {
  ZeroShotConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "mock-model";
  cfg.api_key_env = "DELD_TEST_API_KEY";
  cfg.timeout_seconds = 5.0;
  cfg.max_retries = 2;
  cfg.backoff_seconds = 0.01;
  return cfg;
}

std::vector<GeneratorDataset> labeled(std::size_t n) {
  GeneratorDataset a{"alpha", {}}, b{"beta", {}};
  for (std::size_t i = 0; i < n; ++i) {
    a.examples.push_back({"a" + std::to_string(i), static_cast<int>(i % 2), "alpha"});
    b.examples.push_back({"b" + std::to_string(i), static_cast<int>((i / 2) % 2), "beta"});
  }
  return {a, b};
}

}  // namespace

TEST(BuildPrompt, GoldenStrings) {
  const ChatPrompt p = build_prompt("abc");
  EXPECT_EQ(p.system, kGoldenSystem);
  EXPECT_EQ(p.user, "news: abc");
  EXPECT_EQ(build_prompt("x").system, build_prompt("y").system);
}

TEST(BuildPrompt, NewlinesPassThrough) {
  EXPECT_EQ(build_prompt("line one\nline two\r\n").user, "news: line one\nline two\r\n");
}

TEST(BuildPrompt, EmptyArticleRejected) {
  EXPECT_THROW(build_prompt(""), ContractError);
}

TEST(BuildRequest, WireFormat) {
  ZeroShotConfig cfg;
  cfg.model = "gpt-x";
  const auto j = build_request(cfg, build_prompt("hello"));
  EXPECT_EQ(j.dump(),
            std::string("{\"model\":\"gpt-x\",\"messages\":[{\"role\":\"system\",\"content\":") +
                nlohmann::json(kGoldenSystem).dump() +
                "},{\"role\":\"user\",\"content\":\"news: hello\"}],\"temperature\":0}");
}

TEST(ParseVerdict, StrictFirstCharacter) {
  EXPECT_EQ(parse_verdict("1"), 1);
  EXPECT_EQ(parse_verdict("0"), 0);
  EXPECT_EQ(parse_verdict("  \n1."), 1);
  EXPECT_EQ(parse_verdict("0 - true news"), 0);
  EXPECT_FALSE(parse_verdict("I think 1").has_value());
  EXPECT_FALSE(parse_verdict("").has_value());
  EXPECT_FALSE(parse_verdict("   ").has_value());
  EXPECT_FALSE(parse_verdict("yes").has_value());
}

TEST(ExtractContent, MalformedBodies) {
  EXPECT_EQ(extract_content(completion("1")), "1");
  EXPECT_THROW(extract_content("not json"), ParseError);
  EXPECT_THROW(extract_content("{\"choices\":[]}"), ParseError);
}

TEST(ZeroShotConfig, Validation) {
  ZeroShotConfig cfg;
  cfg.timeout_seconds = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ZeroShotConfig{};
  cfg.parallelism = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ZeroShotConfig{};
  cfg.endpoint = "ftp://example";
  EXPECT_THROW(classify_remote(cfg, "x"), ConfigError);
}

TEST(ClassifyRemote, ParsesResponseAndSendsRequest) {
  MockServer server([](const std::string&) { return "1"; });
  ::setenv("DELD_TEST_API_KEY", "sk-test", 1);
  const ZeroShotVerdict v = classify_remote(config_for(server), "some article", 7);
  ::unsetenv("DELD_TEST_API_KEY");
  EXPECT_EQ(v.example_id, 7u);
  EXPECT_EQ(v.raw, "1");
  EXPECT_EQ(v.parsed, 1);
  const auto req = server.last_request();
  EXPECT_EQ(req["model"], "mock-model");
  EXPECT_EQ(req["temperature"], 0);
  EXPECT_EQ(req["messages"][0]["role"], "system");
  EXPECT_EQ(req["messages"][0]["content"], kGoldenSystem);
  EXPECT_EQ(req["messages"][1]["content"], "news: some article");
  EXPECT_EQ(server.last_auth(), "Bearer sk-test");
}

TEST(ClassifyRemote, UnparsableResponse) {
  MockServer server([](const std::string&) { return "I think 1"; });
  const ZeroShotVerdict v = classify_remote(config_for(server), "x");
  EXPECT_FALSE(v.parsed.has_value());
  EXPECT_EQ(v.raw, "I think 1");
}

TEST(ClassifyRemote, NonSuccessStatusCarriesBodyExcerpt) {
  MockServer server([](const std::string&) { return "1"; }, 503);
  try {
    classify_remote(config_for(server), "x");
    FAIL() << "expected StatusError";
  } catch (const StatusError& e) {
    EXPECT_EQ(e.status(), 503);
    EXPECT_NE(std::string(e.what()).find("upstream overloaded"), std::string::npos);
  }
  EXPECT_EQ(server.requests(), 1);
}

TEST(ClassifyRemote, TransportErrorAfterRetries) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ZeroShotConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.timeout_seconds = 1.0;
  cfg.max_retries = 2;
  cfg.backoff_seconds = 0.01;
  try {
    classify_remote(cfg, "x");
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos) << e.what();
  }
}

TEST(EvaluateZeroShot, MockOracleAccuracy) {
  // Alternating verdicts keyed on the article's trailing index.
  MockServer server([](const std::string& user) {
    const int idx = std::stoi(user.substr(user.find_first_of("0123456789")));
    return std::string(idx % 2 == 0 ? "0" : "1");
  });
  const auto data = labeled(12);
  ZeroShotConfig cfg = config_for(server);
  cfg.parallelism = 3;
  const ExperimentReport r = evaluate_zero_shot(cfg, data);
  // Ground truth: alpha labels are i % 2 (all match); beta labels are (i / 2) % 2.
  std::size_t beta_hits = 0;
  for (std::size_t i = 0; i < 12; ++i) beta_hits += (i % 2) == ((i / 2) % 2);
  ASSERT_EQ(r.accuracies.size(), 2u);
  EXPECT_EQ(r.accuracies[0], 100.0);
  EXPECT_EQ(r.accuracies[1], 100.0 * static_cast<double>(beta_hits) / 12.0);
  EXPECT_EQ(r.model_name, "mock-model");
  EXPECT_EQ(r.regime, "zero-shot");
  EXPECT_EQ(r.label(), "mock-model");
  EXPECT_EQ(server.requests(), 24);
}

TEST(EvaluateZeroShot, AllUnparsableIsZero) {
  MockServer server([](const std::string&) { return "maybe"; });
  const ExperimentReport r = evaluate_zero_shot(config_for(server), labeled(4));
  EXPECT_EQ(r.accuracies, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(r.logs[0]["unparsable"], 4);
}

TEST(EvaluateZeroShot, PerfectOracle) {
  const auto data = labeled(6);
  std::map<std::string, int> truth;
  for (const auto& d : data) {
    for (const auto& e : d.examples) truth["news: " + e.text] = e.label;
  }
  MockServer server([&](const std::string& user) { return std::to_string(truth.at(user)); });
  ZeroShotConfig cfg = config_for(server);
  cfg.parallelism = 4;
  const ExperimentReport r = evaluate_zero_shot(cfg, data);
  EXPECT_EQ(r.accuracies, (std::vector<double>{100.0, 100.0}));
  EXPECT_EQ(r.average(), 100.0);
}
