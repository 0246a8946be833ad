#include "vqaflow/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "vqaflow/errors.hpp"
#include "vqaflow/grading.hpp"
#include "vqaflow/imaging.hpp"
#include "vqaflow/protocol.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {
namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string first_line(const std::string& s) {
  const auto pos = s.find('\n');
  return pos == std::string::npos ? s : s.substr(0, pos);
}

/// Value of the first line starting with `prefix`, or "".
std::string line_value(const std::vector<std::string>& lines, const std::string& prefix) {
  for (const std::string& line : lines)
    if (text::starts_with(line, prefix)) return text::trim(line.substr(prefix.size()));
  return "";
}

/// Lines strictly between the first line equal to `begin` and the last line
/// equal to `end`, joined with newlines. Empty when the markers are absent
/// or out of order.
std::string span_between(const std::vector<std::string>& lines, const std::string& begin,
                         const std::string& end) {
  std::size_t first = lines.size(), last = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (first == lines.size() && lines[i] == begin) first = i;
    if (lines[i] == end) last = i;
  }
  if (first == lines.size() || last == lines.size() || last <= first + 1) return "";
  std::string joined;
  for (std::size_t i = first + 1; i < last; ++i) {
    if (!joined.empty()) joined += '\n';
    joined += lines[i];
  }
  return joined;
}

std::vector<std::string> alpha_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

std::string last_word(const std::string& s) {
  const auto tokens = alpha_tokens(s);
  return tokens.empty() ? "unknown" : tokens.back();
}

bool is_stop_word(const std::string& token) {
  return token == "and" || token == "or" || token == "the" || token == "a" || token == "an" ||
         token == "is" || token == "are";
}

/// Up to two content words following "obscured" in the question.
std::vector<std::string> words_after_obscured(const std::string& question) {
  const auto tokens = alpha_tokens(question);
  std::vector<std::string> names;
  bool seen = false;
  for (const std::string& token : tokens) {
    if (!seen) {
      seen = token == "obscured";
      continue;
    }
    if (is_stop_word(token)) continue;
    names.push_back(token);
    if (names.size() == 2) break;
  }
  if (names.empty()) names.push_back("object");
  return names;
}

std::string counting_target(const std::string& question) {
  const auto tokens = alpha_tokens(question);
  for (std::size_t i = 0; i + 2 < tokens.size(); ++i)
    if (tokens[i] == "how" && tokens[i + 1] == "many") return tokens[i + 2];
  return "items";
}

std::optional<long long> last_integer(const std::string& s) {
  std::optional<long long> found;
  long long value = 0;
  bool in_digits = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      value = in_digits ? value * 10 + (c - '0') : (c - '0');
      in_digits = true;
    } else if (in_digits) {
      found = value;
      in_digits = false;
    }
  }
  if (in_digits) found = value;
  return found;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : s) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string answer_plain(const std::string& question) { return "It is " + last_word(question) + "."; }

std::string answer_initial(const std::string& question) {
  const std::string lowered = text::to_lower(question);
  if (lowered.find("obscured") != std::string::npos) {
    std::string missing;
    for (const std::string& name : words_after_obscured(question)) {
      if (!missing.empty()) missing += ", ";
      missing += name;
    }
    return "The area looks blurry and I cannot resolve the key items.\n" +
           std::string(kFailureToken) + "\n" + std::string(kMissingPrefix) + " " + missing;
  }
  if (text::starts_with(lowered, "how many")) {
    if (lowered.find("unsure") != std::string::npos)
      return "I am not sure of the exact quantity here.";
    const auto n = last_integer(question);
    return "I count " + std::to_string(n.value_or(2)) + " " + counting_target(question) +
           " in the image.";
  }
  return answer_plain(question);
}

std::string answer_reattempt(const std::string& prompt, const std::vector<std::string>& lines) {
  const std::string question = line_value(lines, "Question: ");
  if (text::to_lower(question).find("doublefail") != std::string::npos)
    return "Even with the extra detail I cannot resolve it.\n" + std::string(kFailureToken) +
           "\n" + std::string(kMissingPrefix) + " detail";
  // Descriptions arrive as "- <label>: <text>" lines.
  std::vector<std::string> labels;
  for (const std::string& line : lines) {
    if (!text::starts_with(line, "- ")) continue;
    const auto colon = line.find(": ", 2);
    if (colon == std::string::npos) continue;
    labels.push_back(line.substr(2, colon - 2));
  }
  (void)prompt;
  if (labels.empty()) return answer_plain(question);
  std::sort(labels.begin(), labels.end());
  return "It is beside the " + labels.front() + ".";
}

}  // namespace

AgentResponse default_mock_lvlm(const AgentRequest& request) {
  const std::vector<std::string> lines = split_lines(request.prompt);
  const std::string header = first_line(request.prompt);
  if (header == "TASK: ANSWER VISUAL QUESTION")
    return AgentResponse::text(answer_initial(line_value(lines, "Question: ")));
  if (header == "TASK: DESCRIBE OBJECT") {
    const std::string marker = "shows one object: ";
    const auto pos = request.prompt.find(marker);
    std::string label = "object";
    if (pos != std::string::npos) {
      const auto stop = request.prompt.find_first_of(".\n", pos + marker.size());
      label = request.prompt.substr(pos + marker.size(),
                                    (stop == std::string::npos ? request.prompt.size() : stop) -
                                        pos - marker.size());
    }
    return AgentResponse::text("A " + label +
                               " with plain markings, resting near the center of the crop.");
  }
  if (header == "TASK: REATTEMPT VISUAL QUESTION")
    return AgentResponse::text(answer_reattempt(request.prompt, lines));
  return AgentResponse::text("mock answer");
}

AgentResponse default_mock_llm(const AgentRequest& request) {
  const std::vector<std::string> lines = split_lines(request.prompt);
  const std::string header = first_line(request.prompt);
  if (header == "TASK: ANALYZE RESPONSE") {
    const std::string question = line_value(lines, "Question: ");
    const std::string span = span_between(lines, "RESPONSE_BEGIN", "RESPONSE_END");
    const bool failed = span.find(kFailureToken) != std::string::npos;
    std::string missing = "none";
    if (failed) {
      for (const std::string& line : split_lines(span)) {
        if (text::starts_with(line, kMissingPrefix)) {
          missing = text::trim(line.substr(std::string(kMissingPrefix).size()));
          break;
        }
      }
      if (missing.empty()) missing = "none";
    }
    const bool counting = text::to_lower(question).find("how many") != std::string::npos;
    const std::string target = counting ? counting_target(question) : "none";
    return AgentResponse::text("FAILED=" + std::string(failed ? "yes" : "no") + "\nMISSING=" +
                               missing + "\nCOUNTING=" + std::string(counting ? "yes" : "no") +
                               "\nTARGET=" + target);
  }
  if (header == "TASK: GRADE ANSWER") {
    const std::string candidate =
        normalize_answer(span_between(lines, "CANDIDATE_BEGIN", "CANDIDATE_END"));
    bool correct = false;
    for (const std::string& gold : split_lines(span_between(lines, "GOLD_BEGIN", "GOLD_END")))
      correct = correct || normalize_answer(gold) == candidate;
    return AgentResponse::text(std::string("Compared against the references.\n") +
                               (correct ? "CORRECT" : "INCORRECT"));
  }
  return AgentResponse::text("OK");
}

Detection mock_detection_for(const std::string& name, int image_width, int image_height) {
  const std::uint64_t hash = fnv1a64(name);
  const int x0 = static_cast<int>(hash % static_cast<std::uint64_t>(std::max(1, image_width / 2)));
  const int y0 =
      static_cast<int>((hash >> 16) % static_cast<std::uint64_t>(std::max(1, image_height / 2)));
  const int x1 = std::min(image_width, x0 + std::max(1, image_width / 3));
  const int y1 = std::min(image_height, y0 + std::max(1, image_height / 3));
  Detection detection;
  detection.label = name;
  detection.box = BoundingBox{x0, y0, x1, y1};
  detection.confidence = 0.50 + static_cast<double>((hash >> 32) % 50) / 100.0;
  return detection;
}

AgentResponse default_mock_detector(const AgentRequest& request) {
  const Image image = decode_image(request.image);
  std::vector<Detection> detections;
  for (const std::string& name : request.object_names) {
    if (name == "void") continue;  // scripted "nothing found" label
    detections.push_back(mock_detection_for(name, image.width, image.height));
  }
  return AgentResponse::detections(std::move(detections));
}

AgentResponse default_mock_counter(const AgentRequest& request) {
  return AgentResponse::count(static_cast<double>(request.target_object.size()) + 0.7);
}

ScriptedMockBackend::ScriptedMockBackend(AgentKind kind) : kind_(kind) {
  switch (kind) {
    case AgentKind::Lvlm:
      handler_ = default_mock_lvlm;
      break;
    case AgentKind::Llm:
      handler_ = default_mock_llm;
      break;
    case AgentKind::Detector:
      handler_ = default_mock_detector;
      break;
    case AgentKind::Counter:
      handler_ = default_mock_counter;
      break;
  }
}

ScriptedMockBackend::ScriptedMockBackend(AgentKind kind, Handler handler)
    : kind_(kind), handler_(std::move(handler)) {}

void ScriptedMockBackend::set_handler(Handler handler) {
  std::lock_guard<std::mutex> lock(mutex_);
  handler_ = std::move(handler);
}

void ScriptedMockBackend::fail_next(int count) { fail_budget_.store(count); }

void ScriptedMockBackend::set_latency_ms(std::int64_t value) {
  std::lock_guard<std::mutex> lock(mutex_);
  latency_ms_ = value;
}

AgentCallResult ScriptedMockBackend::call(const AgentRequest& request) {
  calls_.fetch_add(1);
  int budget = fail_budget_.load();
  while (budget > 0) {
    if (fail_budget_.compare_exchange_weak(budget, budget - 1))
      throw Error(ErrorKind::AgentUnavailable, "injected transport failure");
  }
  Handler handler;
  std::int64_t latency;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    handler = handler_;
    latency = latency_ms_;
  }
  if (!handler) throw Error(ErrorKind::Config, "scripted backend has no handler");
  return AgentCallResult{handler(request), latency};
}

AgentBackends make_mock_backends() {
  return AgentBackends{std::make_shared<ScriptedMockBackend>(AgentKind::Lvlm),
                       std::make_shared<ScriptedMockBackend>(AgentKind::Llm),
                       std::make_shared<ScriptedMockBackend>(AgentKind::Detector),
                       std::make_shared<ScriptedMockBackend>(AgentKind::Counter)};
}

}  // namespace vqaflow
