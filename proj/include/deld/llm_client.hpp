#pragma once

// Zero-shot baseline: asks a chat-completion endpoint to label each article
// with the fixed detector instruction and scores the strict first-character
// verdicts.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deld/corpus.hpp"
#include "deld/metrics.hpp"
#include "json.hpp"

namespace deld {

inline constexpr std::string_view kZeroShotSystemPrompt =
    "Act as a disinformation detector. Given the following news piece, which category does "
    "this news belong to? Return \"1\" if you think the news piece is disinformation; "
    "otherwise, return \"0\". Note that there is no need for an explanation.";

inline constexpr std::string_view kZeroShotUserPrefix = "news: ";

struct ZeroShotConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4-turbo";
  std::string api_key_env = "OPENAI_API_KEY";  // name of the variable, never the key
  double timeout_seconds = 30.0;
  std::size_t max_retries = 3;
  double backoff_seconds = 0.5;  // first retry delay, doubled per attempt
  std::size_t parallelism = 1;

  void validate() const;
};

struct ChatPrompt {
  std::string system;
  std::string user;
};

// Throws ContractError for an empty article.
ChatPrompt build_prompt(std::string_view article);

// {model, messages: [system, user], temperature: 0}
nlohmann::ordered_json build_request(const ZeroShotConfig& cfg, const ChatPrompt& prompt);

// Content of choices[0].message.content; ParseError when absent.
std::string extract_content(std::string_view response_body);

// "0" -> 0, "1" -> 1 judged on the first character after trimming
// whitespace; anything else is unparsable.
std::optional<int> parse_verdict(std::string_view response);

struct ZeroShotVerdict {
  std::size_t example_id = 0;
  std::string raw;
  std::optional<int> parsed;
};

// One request with retries on transport failures (exponential backoff).
// Throws TransportError when retries run out and StatusError on a non-2xx
// reply.
ZeroShotVerdict classify_remote(const ZeroShotConfig& cfg, std::string_view article,
                                std::size_t example_id = 0);

// Classifies every example; unparsable verdicts count as wrong.
ExperimentReport evaluate_zero_shot(const ZeroShotConfig& cfg,
                                    const std::vector<GeneratorDataset>& datasets);

}  // namespace deld
