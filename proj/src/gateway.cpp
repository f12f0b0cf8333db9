#include "memqa/gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <sstream>

#include "memqa/digest.hpp"

namespace memqa {

using nlohmann::json;

namespace {

constexpr std::string_view kRelationTemplate =
    "Decompose the question into an ordered chain of fact queries.\n"
    "Reply in exactly this format, one hop per line, using ? for unknown "
    "slots:\n"
    "Entity: <start entity>\n"
    "Hop 1: <start entity>; <relation>; ?\n"
    "Hop 2: ?; <relation>; ?\n"
    "\n"
    "Question: {question}\n";

constexpr std::string_view kQueryTemplate =
    "Complete the fact query. Reply with the entity name only.\n"
    "\n"
    "Query: {fact}\n"
    "Answer:\n";

std::string strip(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Pure text substitution; same inputs yield identical bytes.
std::string render_template(std::string text, std::string_view placeholder,
                            const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

std::string load_template(const std::string& path,
                          std::string_view fallback) {
  if (path.empty()) return std::string(fallback);
  std::ifstream in(path);
  if (!in) {
    throw GatewayError("prompt template not found: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Last line with the given prefix, stripped; used by the mock backend to
// recover the payload from a rendered prompt.
std::optional<std::string> payload_after(const std::string& prompt,
                                         std::string_view prefix) {
  std::optional<std::string> found;
  for (const auto& line : split_lines(prompt)) {
    const std::string stripped = strip(line);
    if (stripped.rfind(prefix, 0) == 0) {
      found = strip(stripped.substr(prefix.size()));
    }
  }
  return found;
}

}  // namespace

bool is_model_unknown(std::string_view answer) {
  return answer == kModelUnknown;
}

std::string canonical_request(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return json{{"model", request.model},
              {"messages", messages},
              {"temperature", request.temperature}}
      .dump();
}

// --- mock knowledge base ----------------------------------------------------

void MockKnowledgeBase::add_fact(std::string_view subject,
                                 std::string_view relation,
                                 std::string_view object) {
  facts_[{fold_key(subject), normalize_relation(relation)}] =
      normalize_entity(object);
}

void MockKnowledgeBase::add_decomposition(std::string_view question,
                                          DecompositionFixture fixture) {
  decompositions_[strip(question)] = std::move(fixture);
}

std::string MockKnowledgeBase::lookup(std::string_view subject,
                                      std::string_view relation) const {
  auto it = facts_.find({fold_key(subject), normalize_relation(relation)});
  if (it == facts_.end()) return std::string(kModelUnknown);
  return it->second;
}

const MockKnowledgeBase::DecompositionFixture* MockKnowledgeBase::decomposition(
    std::string_view question) const {
  auto it = decompositions_.find(strip(question));
  if (it == decompositions_.end()) return nullptr;
  return &it->second;
}

MockKnowledgeBase MockKnowledgeBase::from_json_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("mock KB file not found: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed mock KB file " + path.string() + ": " +
                     e.what());
  }
  MockKnowledgeBase kb;
  for (const auto& fact : doc.value("facts", json::array())) {
    kb.add_fact(fact.at("subject").get<std::string>(),
                fact.at("relation").get<std::string>(),
                fact.at("object").get<std::string>());
  }
  for (const auto& d : doc.value("decompositions", json::array())) {
    DecompositionFixture fixture;
    fixture.start_entity = d.at("entity").get<std::string>();
    for (const auto& hop : d.at("hops")) {
      fixture.hops.emplace_back(hop.at("relation").get<std::string>(),
                                hop.value("subject", "?"));
    }
    kb.add_decomposition(d.at("question").get<std::string>(),
                         std::move(fixture));
  }
  return kb;
}

// --- transports -------------------------------------------------------------

namespace {

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(TargetModelConfig config)
      : config_(std::move(config)),
        limiter_(std::max(config_.max_in_flight, 1)) {
    if (config_.endpoint_url.empty()) {
      throw GatewayError("http_chat backend requires an endpoint URL");
    }
  }

  std::string complete(const ChatRequest& request) override {
    limiter_.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{limiter_};

    const auto scheme_end = config_.endpoint_url.find("://");
    const std::size_t host_start =
        scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = config_.endpoint_url.find('/', host_start);
    const std::string base = path_start == std::string::npos
                                 ? config_.endpoint_url
                                 : config_.endpoint_url.substr(0, path_start);
    const std::string path = path_start == std::string::npos
                                 ? "/v1/chat/completions"
                                 : config_.endpoint_url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000,
                            (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!config_.auth_token_env.empty()) {
      if (const char* token = std::getenv(config_.auth_token_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }

    json messages = json::array();
    for (const auto& m : request.messages) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    const std::string body = json{{"model", request.model},
                                  {"messages", messages},
                                  {"temperature", request.temperature}}
                                 .dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      try {
        auto parsed = json::parse(res->body);
        return parsed.at("choices").at(0).at("message").at("content")
            .get<std::string>();
      } catch (const json::exception& e) {
        throw GatewayError(std::string("malformed chat response: ") +
                           e.what());
      }
    }
    throw GatewayError("chat request failed after " +
                       std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
  }

 private:
  TargetModelConfig config_;
  std::counting_semaphore<> limiter_;
};

class MockTransport final : public ChatTransport {
 public:
  explicit MockTransport(std::shared_ptr<const MockKnowledgeBase> kb)
      : kb_(std::move(kb)) {}

  std::string complete(const ChatRequest& request) override {
    if (request.messages.empty()) {
      throw GatewayError("mock backend got an empty request");
    }
    const std::string& prompt = request.messages.back().content;

    if (auto question = payload_after(prompt, "Question:")) {
      const auto* fixture = kb_->decomposition(*question);
      if (fixture == nullptr) {
        // No scripted decomposition: behave like a confused model.
        return "I cannot decompose that question.";
      }
      std::string out = "Entity: " + fixture->start_entity + "\n";
      int hop = 0;
      for (const auto& [relation, subject] : fixture->hops) {
        ++hop;
        out += "Hop " + std::to_string(hop) + ": " + subject + "; " +
               relation + "; ?\n";
      }
      return out;
    }

    if (auto fact = payload_after(prompt, "Query:")) {
      // "subject; relation; ?" -- split at the last two separators so
      // subjects containing "; " still parse.
      std::string text = *fact;
      if (text.size() >= 3 && text.compare(text.size() - 3, 3, "; ?") == 0) {
        text.resize(text.size() - 3);
      }
      const auto sep = text.rfind("; ");
      if (sep == std::string::npos) {
        return std::string(kModelUnknown);
      }
      return kb_->lookup(text.substr(0, sep), text.substr(sep + 2));
    }

    throw GatewayError("mock backend cannot interpret the prompt");
  }

 private:
  std::shared_ptr<const MockKnowledgeBase> kb_;
};

json load_cassette_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw GatewayError("cassette not found: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed cassette " + path.string() + ": " + e.what());
  }
  return doc;
}

class RecordingTransport final : public ChatTransport {
 public:
  RecordingTransport(std::unique_ptr<ChatTransport> inner,
                     std::filesystem::path cassette_path)
      : inner_(std::move(inner)), path_(std::move(cassette_path)) {
    if (std::filesystem::exists(path_)) {
      entries_ = load_cassette_file(path_).value("entries", json::object());
    } else {
      entries_ = json::object();
    }
  }

  std::string complete(const ChatRequest& request) override {
    const std::string key = sha256_hex(canonical_request(request));
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it != entries_.end()) return it->get<std::string>();
    }
    const std::string response = inner_->complete(request);
    std::lock_guard lock(mutex_);
    entries_[key] = response;
    flush();
    return response;
  }

 private:
  void flush() const {
    std::ofstream out(path_);
    if (!out) {
      throw GatewayError("cannot write cassette: " + path_.string());
    }
    out << json{{"version", 1}, {"entries", entries_}}.dump(2) << "\n";
  }

  std::unique_ptr<ChatTransport> inner_;
  std::filesystem::path path_;
  json entries_;
  std::mutex mutex_;
};

class ReplayTransport final : public ChatTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& cassette_path)
      : entries_(load_cassette_file(cassette_path)
                     .value("entries", json::object())) {}

  std::string complete(const ChatRequest& request) override {
    const std::string key = sha256_hex(canonical_request(request));
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw CassetteMissError("no recorded response for request " + key);
    }
    return it->get<std::string>();
  }

 private:
  json entries_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(TargetModelConfig config) {
  return std::make_unique<HttpChatTransport>(std::move(config));
}

std::unique_ptr<ChatTransport> make_mock_transport(
    std::shared_ptr<const MockKnowledgeBase> kb) {
  return std::make_unique<MockTransport>(std::move(kb));
}

std::unique_ptr<ChatTransport> make_recording_transport(
    std::unique_ptr<ChatTransport> inner,
    const std::filesystem::path& cassette_path) {
  return std::make_unique<RecordingTransport>(std::move(inner), cassette_path);
}

std::unique_ptr<ChatTransport> make_replay_transport(
    const std::filesystem::path& cassette_path) {
  return std::make_unique<ReplayTransport>(cassette_path);
}

// --- gateway ----------------------------------------------------------------

TargetGateway::TargetGateway(TargetModelConfig config,
                             std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  relation_template_ =
      load_template(config_.relation_template_path, kRelationTemplate);
  query_template_ = load_template(config_.query_template_path, kQueryTemplate);
}

std::string TargetGateway::render_relation_prompt(
    const std::string& question) const {
  return render_template(relation_template_, "{question}", question);
}

std::string TargetGateway::render_query_prompt(const SubProblem& p) const {
  return render_template(query_template_, "{fact}", subproblem_to_text(p));
}

std::string TargetGateway::invoke(const std::string& prompt) const {
  ChatRequest request{config_.model_name,
                      {ChatMessage{"user", prompt}},
                      config_.temperature};
  return transport_->complete(request);
}

DecompositionResult TargetGateway::decompose(const std::string& question) const {
  return parse_decomposition(invoke(render_relation_prompt(question)));
}

std::string TargetGateway::answer_subproblem(const SubProblem& p) const {
  if (!p.subject.has_value()) {
    throw ValidationError("fallback query requires a bound subject");
  }
  const std::string completion = invoke(render_query_prompt(p));
  for (const auto& line : split_lines(completion)) {
    const std::string answer = strip(line);
    if (!answer.empty()) {
      return normalize_entity(answer);
    }
  }
  return std::string(kModelUnknown);
}

DecompositionResult parse_decomposition(const std::string& raw) {
  std::optional<std::string> entity;
  std::vector<SubProblem> steps;

  for (const auto& raw_line : split_lines(raw)) {
    const std::string line = strip(raw_line);
    if (line.rfind("Entity:", 0) == 0) {
      const std::string value = strip(line.substr(7));
      if (value.empty()) {
        throw DecompositionParseError("empty start entity", raw);
      }
      entity = value;
      continue;
    }
    if (line.rfind("Hop ", 0) == 0) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) {
        throw DecompositionParseError("hop line has no colon", raw);
      }
      int hop_index = 0;
      try {
        hop_index = std::stoi(line.substr(4, colon - 4));
      } catch (const std::exception&) {
        throw DecompositionParseError("hop line has no index", raw);
      }
      const std::string body = strip(line.substr(colon + 1));
      // subject; relation; object with "?" for unbound
      const auto first = body.find("; ");
      const auto second =
          first == std::string::npos ? first : body.find("; ", first + 2);
      if (first == std::string::npos || second == std::string::npos) {
        throw DecompositionParseError("hop line is not a triplet: " + line,
                                      raw);
      }
      const std::string subject = strip(body.substr(0, first));
      const std::string relation =
          strip(body.substr(first + 2, second - first - 2));
      const std::string object = strip(body.substr(second + 2));
      if (relation.empty() || object != "?") {
        throw DecompositionParseError("hop line must leave the object slot "
                                      "unbound: " +
                                          line,
                                      raw);
      }
      if (hop_index != static_cast<int>(steps.size()) + 1) {
        throw DecompositionParseError("hop indices must be contiguous", raw);
      }
      SubProblem p;
      p.hop_index = hop_index;
      p.relation = normalize_relation(relation);
      if (subject != "?") {
        if (hop_index != 1) {
          throw DecompositionParseError(
              "only hop 1 may have a bound subject", raw);
        }
        p.subject = normalize_entity(subject);
      }
      steps.push_back(std::move(p));
    }
  }

  if (!entity.has_value()) {
    throw DecompositionParseError("no Entity line in decomposition", raw);
  }
  if (steps.empty()) {
    throw DecompositionParseError("no Hop lines in decomposition", raw);
  }

  DecompositionResult result;
  try {
    result.start_entity = normalize_entity(*entity);
  } catch (const ValidationError&) {
    throw DecompositionParseError("start entity fails normalization", raw);
  }
  result.path.start_entity = result.start_entity;
  result.path.steps = std::move(steps);
  result.raw_model_output = raw;
  result.path.validate();
  return result;
}

}  // namespace memqa
