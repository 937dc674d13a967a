#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunkcheck/aggregator.hpp"

namespace chunkcheck {

struct ClientConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  std::size_t max_retries = 3;
  std::size_t max_in_flight = 4;
  std::string api_key_env = "LLM_API_KEY";
  double backoff_base_seconds = 1.0;  // lowered in tests
  std::size_t judge_doc_token_budget = 6000;

  void validate() const;
};

// Request could not complete: connection/timeout after retries, or an HTTP
// error status.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The endpoint answered but not in the expected shape.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnparseableVerdict : public std::runtime_error {
 public:
  UnparseableVerdict(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_reply(std::move(raw)) {}
  std::string raw_reply;
};

// POST {base}/v1/chat/completions; returns the first choice's message
// content. Retries 429/5xx/timeouts with exponential backoff and jitter.
std::string chat(const ClientConfig& cfg, const std::string& system_prompt,
                 const std::string& user_content);

const std::string& judge_prompt();

struct JudgeResult {
  Label label = Label::kFaithful;
  bool truncated = false;  // document tail cut to fit the token budget
  std::string raw_reply;
};

JudgeResult judge(const ClientConfig& cfg, const std::string& document,
                  const std::string& summary);

// Bounded-concurrency batch judging (max_in_flight workers); results in
// input order. Unparseable or failed examples rethrow from the caller thread.
std::vector<JudgeResult> judge_batch(
    const ClientConfig& cfg,
    const std::vector<std::pair<std::string, std::string>>& doc_summary_pairs);

}  // namespace chunkcheck
