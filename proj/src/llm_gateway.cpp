#include "consys/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace consys {

std::string to_string(ChatRole r) {
  switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

// ---------------------------------------------------------------- OutputSchema

OutputSchema OutputSchema::object(
    std::vector<std::pair<std::string, OutputSchema>> fields,
    std::vector<std::string> optional_fields) {
  OutputSchema s;
  s.kind_ = Kind::object;
  s.fields_ = std::move(fields);
  s.optional_fields_ = std::move(optional_fields);
  return s;
}

OutputSchema OutputSchema::array(OutputSchema items, size_t min_items) {
  OutputSchema s;
  s.kind_ = Kind::array;
  s.items_ = std::make_shared<OutputSchema>(std::move(items));
  s.min_items_ = min_items;
  return s;
}

OutputSchema OutputSchema::string(bool allow_empty) {
  OutputSchema s;
  s.kind_ = Kind::string;
  s.allow_empty_string_ = allow_empty;
  return s;
}

OutputSchema OutputSchema::boolean() {
  OutputSchema s;
  s.kind_ = Kind::boolean;
  return s;
}

OutputSchema OutputSchema::integer() {
  OutputSchema s;
  s.kind_ = Kind::integer;
  return s;
}

OutputSchema OutputSchema::number() {
  OutputSchema s;
  s.kind_ = Kind::number;
  return s;
}

OutputSchema OutputSchema::string_enum(std::vector<std::string> allowed) {
  OutputSchema s;
  s.kind_ = Kind::string_enum;
  s.enum_values_ = std::move(allowed);
  return s;
}

void OutputSchema::validate_into(const json& value, const std::string& path,
                                 std::vector<std::string>& out) const {
  const std::string where = path.empty() ? "$" : path;
  switch (kind_) {
    case Kind::object: {
      if (!value.is_object()) {
        out.push_back(where + ": expected object");
        return;
      }
      for (const auto& [key, sub] : fields_) {
        if (!value.contains(key)) {
          bool optional = false;
          for (const std::string& o : optional_fields_)
            if (o == key) { optional = true; break; }
          if (!optional)
            out.push_back(where + ": missing required field \"" + key + "\"");
          continue;
        }
        sub.validate_into(value.at(key), where + "." + key, out);
      }
      for (const auto& [key, _] : value.items()) {
        bool known = false;
        for (const auto& [fkey, _sub] : fields_)
          if (fkey == key) { known = true; break; }
        if (!known) out.push_back(where + ": unexpected field \"" + key + "\"");
      }
      break;
    }
    case Kind::array: {
      if (!value.is_array()) {
        out.push_back(where + ": expected array");
        return;
      }
      if (value.size() < min_items_)
        out.push_back(where + ": expected at least " +
                      std::to_string(min_items_) + " items");
      for (size_t i = 0; i < value.size(); ++i)
        items_->validate_into(value[i], where + "[" + std::to_string(i) + "]", out);
      break;
    }
    case Kind::string:
      if (!value.is_string())
        out.push_back(where + ": expected string");
      else if (!allow_empty_string_ && value.get<std::string>().empty())
        out.push_back(where + ": string must be non-empty");
      break;
    case Kind::boolean:
      if (!value.is_boolean()) out.push_back(where + ": expected boolean");
      break;
    case Kind::integer:
      if (!value.is_number_integer()) out.push_back(where + ": expected integer");
      break;
    case Kind::number:
      if (!value.is_number()) out.push_back(where + ": expected number");
      break;
    case Kind::string_enum: {
      if (!value.is_string()) {
        out.push_back(where + ": expected string enum");
        return;
      }
      const std::string v = value.get<std::string>();
      for (const std::string& a : enum_values_)
        if (a == v) return;
      out.push_back(where + ": value \"" + v + "\" not in enum");
      break;
    }
  }
}

std::vector<std::string> OutputSchema::validate(const json& value) const {
  std::vector<std::string> out;
  validate_into(value, "", out);
  return out;
}

json OutputSchema::describe() const {
  switch (kind_) {
    case Kind::object: {
      json props = json::object();
      json required = json::array();
      for (const auto& [key, sub] : fields_) {
        props[key] = sub.describe();
        bool optional = false;
        for (const std::string& o : optional_fields_)
          if (o == key) { optional = true; break; }
        if (!optional) required.push_back(key);
      }
      return {{"type", "object"},
              {"properties", props},
              {"required", required},
              {"additionalProperties", false}};
    }
    case Kind::array: {
      json j{{"type", "array"}, {"items", items_->describe()}};
      if (min_items_ > 0) j["minItems"] = min_items_;
      return j;
    }
    case Kind::string: {
      json j{{"type", "string"}};
      if (!allow_empty_string_) j["minLength"] = 1;
      return j;
    }
    case Kind::boolean: return {{"type", "boolean"}};
    case Kind::integer: return {{"type", "integer"}};
    case Kind::number: return {{"type", "number"}};
    case Kind::string_enum: return {{"type", "string"}, {"enum", enum_values_}};
  }
  return {};
}

// ------------------------------------------------------------------ providers

std::string MockProvider::complete(const ChatRequest& request) {
  requests_.push_back(request);
  if (next_ >= script_.size())
    throw GatewayError(GatewayErrorKind::script_exhausted,
                       "mock provider script exhausted after " +
                           std::to_string(script_.size()) + " replies");
  return script_[next_++];
}

HttpProvider::HttpProvider(std::string base_url, std::string api_key,
                           std::string path)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      path_(std::move(path)) {}

std::string HttpProvider::complete(const ChatRequest& request) {
  json body;
  body["model"] = request.model_id;
  json messages = json::array();
  for (const ChatMessage& m : request.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;

  httplib::Client client(base_url_);
  client.set_read_timeout(300, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res)
    throw GatewayError(GatewayErrorKind::transport,
                       "transport failure talking to " + base_url_);
  if (res->status != 200)
    throw GatewayError(res->status >= 500 ? GatewayErrorKind::transport
                                          : GatewayErrorKind::refusal,
                       "provider returned HTTP " + std::to_string(res->status) +
                           ": " + res->body);
  json reply = json::parse(res->body);
  const json& choice = reply.at("choices").at(0);
  if (choice.value("finish_reason", "") == "length")
    throw GatewayError(GatewayErrorKind::truncation,
                       "reply truncated at token limit");
  return choice.at("message").at("content").get<std::string>();
}

// -------------------------------------------------------------------- gateway

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json request_to_json(const ChatRequest& r) {
  json messages = json::array();
  for (const ChatMessage& m : r.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model_id", r.model_id},
          {"messages", messages},
          {"temperature", r.temperature},
          {"max_output_tokens", r.max_output_tokens}};
}

}  // namespace

Gateway::Gateway(std::shared_ptr<Provider> provider, RetryPolicy retry)
    : provider_(std::move(provider)), retry_(retry) {}

void Gateway::set_transcript_sink(std::function<void(const json&)> sink) {
  sink_ = std::move(sink);
}

std::string Gateway::attempt_once(const ChatRequest& request, int attempt,
                                  const std::string& phase) {
  const auto start = std::chrono::steady_clock::now();
  std::string response;
  std::string error;
  GatewayErrorKind error_kind = GatewayErrorKind::transport;
  try {
    response = provider_->complete(request);
  } catch (const GatewayError& e) {
    error = e.what();
    error_kind = e.kind();
  } catch (const std::exception& e) {
    error = e.what();
  }
  const long ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  if (sink_) {
    json record{{"timestamp", iso_timestamp()},
                {"attempt", attempt},
                {"phase", phase},
                {"provider", provider_->name()},
                {"request", request_to_json(request)},
                {"latency_ms", ms}};
    if (error.empty())
      record["response_text"] = response;
    else
      record["error"] = error;
    std::lock_guard<std::mutex> lock(sink_mutex_);
    sink_(record);
  }
  if (!error.empty()) throw GatewayError(error_kind, error);
  return response;
}

TranscriptRecord Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty())
    throw std::invalid_argument("chat request has no messages");
  if (request.messages.front().role == ChatRole::assistant)
    throw std::invalid_argument("first message must be system or user");

  TranscriptRecord record;
  record.request = request;
  record.timestamp = iso_timestamp();
  const auto start = std::chrono::steady_clock::now();
  int attempt = 0;
  double delay = retry_.backoff_base_seconds;
  for (;;) {
    ++attempt;
    try {
      record.response_text = attempt_once(request, attempt, "complete");
      break;
    } catch (const GatewayError& e) {
      if (e.kind() != GatewayErrorKind::transport ||
          attempt > retry_.max_transport_retries)
        throw;
      if (delay > 0)
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      delay *= retry_.backoff_factor;
    }
  }
  record.attempt_count = attempt;
  record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  return record;
}

TranscriptRecord Gateway::complete_structured(const ChatRequest& request) {
  if (!request.output_schema)
    throw std::invalid_argument("complete_structured requires an output_schema");

  TranscriptRecord record = complete(request);
  std::vector<std::string> errors;
  try {
    json parsed = extract_json_reply(record.response_text);
    errors = request.output_schema->validate(parsed);
    if (errors.empty()) {
      record.parsed = std::move(parsed);
      return record;
    }
  } catch (const std::exception& e) {
    errors = {std::string("reply is not valid JSON: ") + e.what()};
  }

  // One repair round-trip: re-prompt with the validation errors attached.
  ChatRequest repair = request;
  repair.messages.push_back({ChatRole::assistant, record.response_text});
  std::ostringstream os;
  os << "Your reply did not validate against the required schema:\n";
  for (const std::string& e : errors) os << "- " << e << "\n";
  os << "Reply again with a single JSON value that conforms exactly.";
  repair.messages.push_back({ChatRole::user, os.str()});

  TranscriptRecord second = complete(repair);
  record.attempt_count += second.attempt_count;
  record.latency_ms += second.latency_ms;
  record.response_text = second.response_text;
  try {
    json parsed = extract_json_reply(second.response_text);
    errors = request.output_schema->validate(parsed);
    if (errors.empty()) {
      record.parsed = std::move(parsed);
      return record;
    }
  } catch (const std::exception& e) {
    errors = {std::string("reply is not valid JSON: ") + e.what()};
  }
  std::ostringstream err;
  err << "structured reply failed schema validation after repair:";
  for (const std::string& e : errors) err << " " << e << ";";
  throw GatewayError(GatewayErrorKind::schema, err.str());
}

json extract_json_reply(const std::string& text) {
  // Strip a ```...``` fence if present, then parse from the first '{' or '['.
  std::string body = text;
  size_t fence = body.find("```");
  if (fence != std::string::npos) {
    size_t start = body.find('\n', fence);
    size_t end = body.find("```", fence + 3);
    if (start != std::string::npos && end != std::string::npos && end > start)
      body = body.substr(start + 1, end - start - 1);
  }
  size_t first = body.find_first_of("{[");
  if (first == std::string::npos)
    throw std::invalid_argument("no JSON value found in reply");
  return json::parse(body.substr(first));
}

std::shared_ptr<Provider> provider_from_env() {
  if (const char* script_path = std::getenv("CONSYS_MOCK_SCRIPT")) {
    std::ifstream in(script_path);
    if (!in)
      throw std::runtime_error(std::string("cannot open mock script: ") +
                               script_path);
    json script = json::parse(in);
    std::vector<std::string> replies;
    for (const auto& r : script) {
      if (r.is_string())
        replies.push_back(r.get<std::string>());
      else
        replies.push_back(r.dump());
    }
    return std::make_shared<MockProvider>(std::move(replies));
  }
  const char* url = std::getenv("CONSYS_PROVIDER_URL");
  const char* key = std::getenv("CONSYS_API_KEY");
  if (!url)
    throw std::runtime_error(
        "no provider configured: set CONSYS_PROVIDER_URL (+CONSYS_API_KEY) or "
        "CONSYS_MOCK_SCRIPT");
  return std::make_shared<HttpProvider>(url, key ? key : "");
}

}  // namespace consys
