#include "deld/llm_client.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <thread>

#include "deld/error.hpp"
#include "httplib.h"

namespace deld {

void ZeroShotConfig::validate() const {
  std::vector<std::string> problems;
  if (endpoint.empty()) problems.push_back("endpoint is empty");
  if (model.empty()) problems.push_back("model is empty");
  if (!(timeout_seconds > 0.0)) problems.push_back("timeout must be positive");
  if (backoff_seconds < 0.0) problems.push_back("backoff must be non-negative");
  if (parallelism == 0) problems.push_back("parallelism must be >= 1");
  if (problems.empty()) return;
  std::string msg = "invalid zero-shot config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ConfigError(msg);
}

ChatPrompt build_prompt(std::string_view article) {
  if (article.empty()) throw ContractError("build_prompt: empty article");
  return ChatPrompt{std::string(kZeroShotSystemPrompt),
                    std::string(kZeroShotUserPrefix) + std::string(article)};
}

nlohmann::ordered_json build_request(const ZeroShotConfig& cfg, const ChatPrompt& prompt) {
  nlohmann::ordered_json req;
  req["model"] = cfg.model;
  req["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"}, {"content", prompt.system}}, {{"role", "user"}, {"content", prompt.user}}});
  req["temperature"] = 0;
  return req;
}

std::string extract_content(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("chat completion response is not JSON: ") + e.what());
  }
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("chat completion response lacks choices[0].message.content");
  }
}

std::optional<int> parse_verdict(std::string_view response) {
  const auto first = response.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return std::nullopt;
  if (response[first] == '0') return 0;
  if (response[first] == '1') return 1;
  return std::nullopt;
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("endpoint is not an http(s) URL: " + url);
  return Endpoint{m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

ZeroShotVerdict classify_remote(const ZeroShotConfig& cfg, std::string_view article,
                                std::size_t example_id) {
  cfg.validate();
  const Endpoint ep = split_endpoint(cfg.endpoint);
  const std::string body = build_request(cfg, build_prompt(article)).dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(ep.origin);
  const auto timeout = std::chrono::duration<double>(cfg.timeout_seconds);
  const auto secs = static_cast<time_t>(cfg.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  (void)timeout;

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = cfg.backoff_seconds * static_cast<double>(1ull << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw StatusError(res->status, "chat endpoint returned HTTP " + std::to_string(res->status) +
                                         ": " + res->body.substr(0, 200));
    }
    ZeroShotVerdict v;
    v.example_id = example_id;
    v.raw = extract_content(res->body);
    v.parsed = parse_verdict(v.raw);
    return v;
  }
  throw TransportError("chat endpoint unreachable after " + std::to_string(cfg.max_retries + 1) +
                       " attempts: " + last_error);
}

ExperimentReport evaluate_zero_shot(const ZeroShotConfig& cfg,
                                    const std::vector<GeneratorDataset>& datasets) {
  cfg.validate();
  ExperimentReport report;
  report.regime = "zero-shot";
  report.model_name = cfg.model;
  report.config = {{"endpoint", cfg.endpoint},       {"model", cfg.model},
                   {"api_key_env", cfg.api_key_env}, {"timeout_seconds", cfg.timeout_seconds},
                   {"max_retries", cfg.max_retries}, {"parallelism", cfg.parallelism},
                   {"temperature", 0}};
  for (const GeneratorDataset& ds : datasets) {
    const std::size_t n = ds.size();
    if (n == 0) throw ContractError("evaluate_zero_shot: dataset '" + ds.generator + "' is empty");
    std::vector<ZeroShotVerdict> verdicts(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          verdicts[i] = classify_remote(cfg, ds.examples[i].text, i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    };
    const std::size_t workers = std::min(cfg.parallelism, n);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<int> predictions, labels;
    std::size_t unparsable = 0;
    for (std::size_t i = 0; i < n; ++i) {
      predictions.push_back(verdicts[i].parsed.value_or(-1));
      labels.push_back(ds.examples[i].label);
      if (!verdicts[i].parsed) ++unparsable;
    }
    report.datasets.push_back(ds.generator);
    report.accuracies.push_back(accuracy(predictions, labels));
    report.logs.push_back({{"dataset", ds.generator}, {"examples", n}, {"unparsable", unparsable}});
  }
  return report;
}

}  // namespace deld
