#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "trajdebug/core/result.hpp"
#include "trajdebug/core/text.hpp"
#include "trajdebug/core/trajectory.hpp"

namespace trajdbg {

enum class Role { system, user, assistant };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<int> max_output_tokens;

  static ChatRequest user_prompt(std::string model_id, std::string prompt,
                                 double temperature = 0.0) {
    return ChatRequest{std::move(model_id), {{Role::user, std::move(prompt)}}, temperature, {}};
  }

  std::string concatenated_content() const {
    std::string out;
    for (const auto& m : messages) {
      if (!out.empty()) out += "\n";
      out += m.content;
    }
    return out;
  }
};

enum class Backend { live, scripted };

struct Completion {
  std::string text;
  TokenUsage usage;
  Backend backend = Backend::scripted;
};

// Uniform chat-completion surface. Usage accounting and the optional token
// budget live here so every backend enforces them identically. An armed
// budget can be overshot by at most one in-flight call; backends that know
// a call's usage up front reject the overrun before it happens.
class ChatClient {
 public:
  virtual ~ChatClient() = default;

  Result<Completion> complete(const ChatRequest& request) {
    if (request.messages.empty())
      return err(Errc::precondition, "chat request needs at least one message");
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (budget_ && cumulative_.total() >= *budget_) {
        budget_hit_ = true;
        return err(Errc::budget_exceeded,
                   "token budget " + std::to_string(*budget_) + " exhausted");
      }
    }
    auto completion = do_complete(request);
    if (!completion.ok()) {
      if (completion.error().code == Errc::budget_exceeded) {
        std::lock_guard<std::mutex> lock(mutex_);
        budget_hit_ = true;
      }
      return completion;
    }
    std::lock_guard<std::mutex> lock(mutex_);
    cumulative_ += completion.value().usage;
    ++calls_;
    return completion;
  }

  // True once any call has been refused because of the armed budget.
  bool budget_exhausted() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return budget_hit_;
  }

  TokenUsage usage_report() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cumulative_;
  }
  int64_t call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
  }
  void reset_usage() {
    std::lock_guard<std::mutex> lock(mutex_);
    cumulative_ = {};
    calls_ = 0;
    budget_hit_ = false;
  }

  void arm_budget(int64_t total_tokens) {
    std::lock_guard<std::mutex> lock(mutex_);
    budget_ = total_tokens;
  }
  void disarm_budget() {
    std::lock_guard<std::mutex> lock(mutex_);
    budget_.reset();
  }
  std::optional<int64_t> armed_budget() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return budget_;
  }

 protected:
  virtual Result<Completion> do_complete(const ChatRequest& request) = 0;

  bool would_exceed_budget(const TokenUsage& usage) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return budget_ && cumulative_.total() + usage.total() > *budget_;
  }

 private:
  mutable std::mutex mutex_;
  TokenUsage cumulative_;
  int64_t calls_ = 0;
  std::optional<int64_t> budget_;
  bool budget_hit_ = false;
};

// One playback rule: optional required substrings, a response, and how many
// times it may fire (nullopt = unlimited).
struct ScriptEntry {
  std::vector<std::string> match;
  std::string response;
  std::optional<int> max_uses = 1;

  static ScriptEntry once(std::string response) { return {{}, std::move(response), 1}; }
  static ScriptEntry keyed(std::string substring, std::string response,
                           std::optional<int> uses = std::nullopt) {
    return {{std::move(substring)}, std::move(response), uses};
  }
  static ScriptEntry keyed_all(std::vector<std::string> substrings, std::string response,
                               std::optional<int> uses = std::nullopt) {
    return {std::move(substrings), std::move(response), uses};
  }
};

// Deterministic playback backend. Entries are scanned top-down; the first
// non-exhausted entry whose substrings all appear in the prompt fires.
// Synthetic usage = whitespace token counts, so identical call sequences
// yield identical completions and usage totals.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::vector<std::string> ordered_responses,
                          bool repeat_last_when_exhausted = false)
      : repeat_last_(repeat_last_when_exhausted) {
    for (auto& r : ordered_responses) entries_.push_back(ScriptEntry::once(std::move(r)));
  }
  explicit ScriptedClient(std::vector<ScriptEntry> entries,
                          bool repeat_last_when_exhausted = false)
      : entries_(std::move(entries)), repeat_last_(repeat_last_when_exhausted) {}

 protected:
  Result<Completion> do_complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(script_mutex_);
    const std::string prompt = request.concatenated_content();
    const TokenUsage prompt_only{approx_token_count(prompt), 0};
    for (auto& entry : entries_) {
      if (entry.max_uses && *entry.max_uses <= 0) continue;
      bool matches = true;
      for (const auto& needle : entry.match)
        if (!contains(prompt, needle)) {
          matches = false;
          break;
        }
      if (!matches) continue;
      TokenUsage usage{prompt_only.prompt_tokens, approx_token_count(entry.response)};
      if (would_exceed_budget(usage))
        return err(Errc::budget_exceeded, "scripted reply would overrun the armed budget");
      if (entry.max_uses) --*entry.max_uses;
      return Completion{entry.response, usage, Backend::scripted};
    }
    if (repeat_last_ && !entries_.empty()) {
      TokenUsage usage{prompt_only.prompt_tokens, approx_token_count(entries_.back().response)};
      if (would_exceed_budget(usage))
        return err(Errc::budget_exceeded, "scripted reply would overrun the armed budget");
      return Completion{entries_.back().response, usage, Backend::scripted};
    }
    return err(Errc::script_exhausted, "no scripted response left for this prompt");
  }

 private:
  std::mutex script_mutex_;  // playback order must stay serial
  std::vector<ScriptEntry> entries_;
  bool repeat_last_ = false;
};

}  // namespace trajdbg
