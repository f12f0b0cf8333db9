#pragma once
// Target-model interaction: question decomposition and per-hop fallback
// answering, over pluggable chat transports (HTTP, deterministic mock KB,
// record/replay cassettes).

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memqa/core.hpp"

namespace memqa {

// Transport failed after exhausting retries, or the backend is unusable.
struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The model's decomposition output did not follow the line protocol; the
// raw output is preserved for tracing.
struct DecompositionParseError : std::runtime_error {
  DecompositionParseError(const std::string& reason, std::string raw)
      : std::runtime_error(reason), raw_output(std::move(raw)) {}
  std::string raw_output;
};

// Replay-mode request with no recorded response; prevents silent live calls.
struct CassetteMissError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sentinel the gateway returns when the model cannot name an entity.
inline constexpr std::string_view kModelUnknown = "[unknown]";
bool is_model_unknown(std::string_view answer);

enum class GatewayBackend { http_chat, mock_kb, replay };

struct TargetModelConfig {
  GatewayBackend backend = GatewayBackend::mock_kb;
  std::string endpoint_url;  // OpenAI-compatible chat completions endpoint
  std::string model_name = "gpt-3.5-turbo-instruct";
  int timeout_ms = 30000;
  int max_retries = 2;
  std::string auth_token_env = "MEMQA_API_TOKEN";
  std::string relation_template_path;  // empty -> built-in template
  std::string query_template_path;
  double temperature = 0.0;
  int max_in_flight = 4;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

// Stable serialization used for cassette keys.
std::string canonical_request(const ChatRequest& request);

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// Deterministic stand-in for the target model: fact lookups keyed by
// (subject, relation) and scripted decompositions per question. It answers
// the same prompt protocol as a live model, so the gateway's parsing path
// is exercised end to end.
class MockKnowledgeBase {
 public:
  struct DecompositionFixture {
    std::string start_entity;
    // (relation, subject pattern); subject is "?" except possibly hop 1
    std::vector<std::pair<std::string, std::string>> hops;
  };

  void add_fact(std::string_view subject, std::string_view relation,
                std::string_view object);
  void add_decomposition(std::string_view question,
                         DecompositionFixture fixture);

  // Object for (subject, relation), or the unknown sentinel on a miss.
  std::string lookup(std::string_view subject,
                     std::string_view relation) const;
  const DecompositionFixture* decomposition(std::string_view question) const;

  static MockKnowledgeBase from_json_file(const std::filesystem::path& path);

 private:
  std::map<std::pair<std::string, std::string>, std::string> facts_;
  std::map<std::string, DecompositionFixture> decompositions_;
};

std::unique_ptr<ChatTransport> make_http_transport(TargetModelConfig config);
std::unique_ptr<ChatTransport> make_mock_transport(
    std::shared_ptr<const MockKnowledgeBase> kb);

// Record mode wraps an inner transport and persists (request hash ->
// response). Replay mode serves only from the cassette and raises
// CassetteMissError on unknown requests.
std::unique_ptr<ChatTransport> make_recording_transport(
    std::unique_ptr<ChatTransport> inner,
    const std::filesystem::path& cassette_path);
std::unique_ptr<ChatTransport> make_replay_transport(
    const std::filesystem::path& cassette_path);

struct DecompositionResult {
  std::string start_entity;
  ReasoningPath path;
  std::string raw_model_output;
};

// Renders prompts, invokes the transport and parses the line protocol:
//   Entity: <start entity>
//   Hop 1: <subject or ?>; <relation>; ?
class TargetGateway {
 public:
  TargetGateway(TargetModelConfig config,
                std::unique_ptr<ChatTransport> transport);

  DecompositionResult decompose(const std::string& question) const;
  // Answer string normalized via normalize_entity; empty completions map
  // to the unknown sentinel.
  std::string answer_subproblem(const SubProblem& p) const;

  const std::string& relation_template() const { return relation_template_; }
  const std::string& query_template() const { return query_template_; }

 private:
  std::string render_relation_prompt(const std::string& question) const;
  std::string render_query_prompt(const SubProblem& p) const;
  std::string invoke(const std::string& prompt) const;

  TargetModelConfig config_;
  std::unique_ptr<ChatTransport> transport_;
  std::string relation_template_;
  std::string query_template_;
};

// Parses the decomposition line protocol; throws DecompositionParseError.
DecompositionResult parse_decomposition(const std::string& raw);

}  // namespace memqa
