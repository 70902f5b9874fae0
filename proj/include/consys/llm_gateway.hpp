#ifndef CONSYS_LLM_GATEWAY_HPP
#define CONSYS_LLM_GATEWAY_HPP

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace consys {

using json = nlohmann::json;

enum class ChatRole { system, user, assistant };

std::string to_string(ChatRole r);

struct ChatMessage {
  ChatRole role;
  std::string content;
};

/// Closed declarative schema for structured replies: objects (fixed keys, no
/// extras), arrays, strings, booleans, integers, numbers, string enums.
class OutputSchema {
public:
  static OutputSchema object(std::vector<std::pair<std::string, OutputSchema>> fields,
                             std::vector<std::string> optional_fields = {});
  static OutputSchema array(OutputSchema items, size_t min_items = 0);
  static OutputSchema string(bool allow_empty = true);
  static OutputSchema boolean();
  static OutputSchema integer();
  static OutputSchema number();
  static OutputSchema string_enum(std::vector<std::string> allowed);

  /// Empty list iff `value` conforms. Messages carry a path to the violation.
  std::vector<std::string> validate(const json& value) const;

  /// Human/LLM-readable description, embedded into prompts.
  json describe() const;

private:
  enum class Kind { object, array, string, boolean, integer, number, string_enum };
  Kind kind_ = Kind::string;
  bool allow_empty_string_ = true;
  size_t min_items_ = 0;
  std::vector<std::pair<std::string, OutputSchema>> fields_;
  std::vector<std::string> optional_fields_;
  std::shared_ptr<OutputSchema> items_;
  std::vector<std::string> enum_values_;

  void validate_into(const json& value, const std::string& path,
                     std::vector<std::string>& out) const;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  std::optional<OutputSchema> output_schema;
  double temperature = 0.2;
  int max_output_tokens = 4096;
};

struct TranscriptRecord {
  ChatRequest request;
  std::string response_text;
  std::optional<json> parsed;
  long latency_ms = 0;
  int attempt_count = 1;
  std::string timestamp;
};

enum class GatewayErrorKind { transport, refusal, truncation, schema, script_exhausted };

class GatewayError : public std::runtime_error {
public:
  GatewayError(GatewayErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

private:
  GatewayErrorKind kind_;
};

/// One chat-completion backend. Throwing GatewayError(transport) triggers the
/// gateway's retry policy; other kinds propagate immediately.
class Provider {
public:
  virtual ~Provider() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Replays canned replies in order and records every request it sees.
/// Single-threaded only: scripted order is the contract.
class MockProvider : public Provider {
public:
  explicit MockProvider(std::vector<std::string> script)
      : script_(std::move(script)) {}
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "mock"; }
  const std::vector<ChatRequest>& requests() const { return requests_; }
  size_t replies_consumed() const { return next_; }

private:
  std::vector<std::string> script_;
  std::vector<ChatRequest> requests_;
  size_t next_ = 0;
};

/// OpenAI-style chat-completions endpoint; URL and key from the environment
/// (CONSYS_PROVIDER_URL, CONSYS_API_KEY).
class HttpProvider : public Provider {
public:
  HttpProvider(std::string base_url, std::string api_key,
               std::string path = "/v1/chat/completions");
  std::string complete(const ChatRequest& request) override;
  std::string name() const override { return "http"; }

private:
  std::string base_url_;
  std::string api_key_;
  std::string path_;
};

struct RetryPolicy {
  int max_transport_retries = 3;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
};

class Gateway {
public:
  explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry = {});

  /// Transcript sink: one call per attempt, atomic per record.
  void set_transcript_sink(std::function<void(const json&)> sink);

  TranscriptRecord complete(const ChatRequest& request);

  /// Validates the reply against request.output_schema; on failure, one
  /// repair round-trip (re-prompt with the validation errors) before failing.
  TranscriptRecord complete_structured(const ChatRequest& request);

  Provider& provider() { return *provider_; }

private:
  std::string attempt_once(const ChatRequest& request, int attempt,
                           const std::string& phase);
  std::shared_ptr<Provider> provider_;
  RetryPolicy retry_;
  std::function<void(const json&)> sink_;
  std::mutex sink_mutex_;
};

/// Extracts the first JSON value from a model reply, tolerating code fences
/// and surrounding prose.
json extract_json_reply(const std::string& text);

/// Builds a provider from the environment: CONSYS_MOCK_SCRIPT=<file> selects
/// a MockProvider scripted from a JSON array of reply strings; otherwise
/// CONSYS_PROVIDER_URL/CONSYS_API_KEY select the HTTP provider.
std::shared_ptr<Provider> provider_from_env();

}  // namespace consys

#endif
