#include "chunkcheck/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace chunkcheck {

void ClientConfig::validate() const {
  if (timeout_seconds <= 0)
    throw std::invalid_argument("ClientConfig: timeout must be > 0");
  if (max_in_flight < 1)
    throw std::invalid_argument("ClientConfig: max_in_flight must be >= 1");
  if (base_url.empty())
    throw std::invalid_argument("ClientConfig: base_url required");
}

namespace {

std::string bearer_token(const ClientConfig& cfg) {
  const char* v = std::getenv(cfg.api_key_env.c_str());
  if (!v || !*v)
    throw std::invalid_argument("credential env var " + cfg.api_key_env +
                                " is not set");
  return v;
}

std::string body_excerpt(const std::string& body) {
  return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

void backoff_sleep(const ClientConfig& cfg, std::size_t attempt,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  const double secs = cfg.backoff_base_seconds *
                      std::pow(2.0, static_cast<double>(attempt)) *
                      jitter(rng);
  std::this_thread::sleep_for(std::chrono::duration<double>(secs));
}

}  // namespace

std::string chat(const ClientConfig& cfg, const std::string& system_prompt,
                 const std::string& user_content) {
  cfg.validate();
  const std::string token = bearer_token(cfg);

  nlohmann::json body = {
      {"model", cfg.model},
      {"temperature", cfg.temperature},
      {"messages",
       {{{"role", "system"}, {"content", system_prompt}},
        {{"role", "user"}, {"content", user_content}}}}};
  const std::string payload = body.dump();

  httplib::Client client(cfg.base_url);
  const auto timeout = std::chrono::duration<double>(cfg.timeout_seconds);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(
      std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  httplib::Headers headers = {{"Authorization", "Bearer " + token}};

  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) backoff_sleep(cfg, attempt - 1, jitter_rng);

    auto res = client.Post("/v1/chat/completions", headers, payload,
                           "application/json");
    if (!res) {
      last_error = "connection failure: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable_status(res->status)) {
      last_error = "status " + std::to_string(res->status) + ": " +
                   body_excerpt(res->body);
      continue;
    }
    if (res->status >= 400)
      throw TransportError("request rejected with status " +
                           std::to_string(res->status) + ": " +
                           body_excerpt(res->body));

    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") ||
        reply["choices"].empty() ||
        !reply["choices"][0].contains("message"))
      throw ProtocolError("malformed completion response: " +
                          body_excerpt(res->body));
    const std::string content =
        reply["choices"][0]["message"].value("content", std::string());
    if (content.empty()) throw ProtocolError("empty completion reply");
    return content;
  }
  throw TransportError("retries exhausted after " +
                       std::to_string(cfg.max_retries + 1) +
                       " attempts; last error: " + last_error);
}

const std::string& judge_prompt() {
  static const std::string kPrompt =
      "You will be given a document and a summary. Your task is to determine "
      "whether the summary is faithful or unfaithful to the information "
      "provided in the document. If the summary contains any statements that "
      "contradict the information given in the document, or if it includes "
      "information not present or implied by the document, reply "
      "'unfaithful'. Otherwise, reply 'faithful'.";
  return kPrompt;
}

JudgeResult judge(const ClientConfig& cfg, const std::string& document,
                  const std::string& summary) {
  // whitespace-word budget on the document tail; summaries are never cut
  std::string doc = document;
  bool truncated = false;
  {
    std::istringstream ss(document);
    std::vector<std::string> words;
    std::string w;
    while (ss >> w) words.push_back(w);
    if (words.size() > cfg.judge_doc_token_budget) {
      truncated = true;
      doc.clear();
      for (std::size_t i = 0; i < cfg.judge_doc_token_budget; ++i) {
        if (i) doc += ' ';
        doc += words[i];
      }
    }
  }

  const std::string user = "Document:\n" + doc + "\n\nSummary:\n" + summary;
  JudgeResult result;
  result.truncated = truncated;
  result.raw_reply = chat(cfg, judge_prompt(), user);

  std::string low = result.raw_reply;
  for (auto& c : low) c = std::tolower(static_cast<unsigned char>(c));
  // "unfaithful" first: it contains "faithful" as a substring
  if (low.find("unfaithful") != std::string::npos)
    result.label = Label::kHallucinated;
  else if (low.find("faithful") != std::string::npos)
    result.label = Label::kFaithful;
  else
    throw UnparseableVerdict("judge reply contains neither verdict token",
                             result.raw_reply);
  return result;
}

std::vector<JudgeResult> judge_batch(
    const ClientConfig& cfg,
    const std::vector<std::pair<std::string, std::string>>& doc_summary_pairs) {
  cfg.validate();
  const std::size_t n = doc_summary_pairs.size();
  std::vector<JudgeResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = judge(cfg, doc_summary_pairs[i].first,
                           doc_summary_pairs[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::vector<std::thread> threads;
  const std::size_t workers = std::min(cfg.max_in_flight, std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace chunkcheck
