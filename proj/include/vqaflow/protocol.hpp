#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqaflow/types.hpp"

namespace vqaflow {

/// The exact token the LVLM is instructed to emit when it misses key
/// objects. Matching is case-sensitive and exact everywhere.
inline constexpr const char* kFailureToken = "[Answer Failed]";
inline constexpr const char* kMissingPrefix = "MISSING:";

enum class PromptStage { Initial, Parse, Describe, Reattempt, Grade };

const char* to_string(PromptStage s);

struct PromptTemplate {
  PromptStage stage = PromptStage::Initial;
  bool detailed_cot = false;  // meaningful for Initial only
  std::string template_text;
};

/// Versioned prompt text assets loaded from a directory. Render methods are
/// pure: same inputs produce byte-identical prompts, which is what keeps
/// cassette fingerprints stable.
class PromptLibrary {
 public:
  /// Loads and validates the template set (placeholders per stage present,
  /// initial templates carry the failure-token instruction).
  static PromptLibrary load(const std::string& dir);

  /// Template directory resolution: $VQAFLOW_TEMPLATES, else the compiled-in
  /// default, else "templates".
  static std::string default_dir();

  std::string render_initial(const std::string& question, bool detailed_cot) const;
  std::string render_parse(const std::string& question, const std::string& response) const;
  std::string render_description(const std::string& question, const std::string& label) const;
  std::string render_reattempt(const std::string& question, const std::string& failed_attempt,
                               const std::vector<ObjectDescription>& descriptions) const;
  std::string render_grading(const std::string& question,
                             const std::vector<std::string>& gold_answers,
                             const std::string& candidate) const;

  const PromptTemplate& get(PromptStage stage, bool detailed_cot = false) const;

 private:
  // key: (stage, detailed_cot)
  std::map<std::pair<int, bool>, PromptTemplate> templates_;
};

/// True iff the exact case-sensitive failure token occurs in the response.
bool detect_failure_token(const std::string& response);

/// First non-negative integer in the text under a left-to-right scan; digit
/// runs and the English words zero..twenty both count. Digit runs saturate
/// at 10^12 - 1.
std::optional<long long> extract_numeric_answer(const std::string& text);

/// Split a comma-separated name list; names are trimmed, lowercased and
/// de-duplicated preserving first occurrence. "none" or empty -> {}.
std::vector<std::string> parse_missing_list(const std::string& csv);

/// Split the LVLM's raw first response into the InitialAttempt outcome:
/// failed iff the failure token is present, missing objects taken from the
/// response's MISSING: line.
InitialAttempt parse_initial_attempt(const std::string& raw_response);

/// Remove the failure token and MISSING: lines, leaving the best-effort
/// answer text.
std::string strip_failure_markup(const std::string& response);

using LlmHandle = std::function<std::string(const std::string& prompt)>;

/// Ask the LLM parsing agent to classify the initial response. One retry
/// with a format reminder; a second unparseable reply raises
/// ProtocolViolation carrying the raw reply.
ParseDirective parse_directive(const std::string& question, const std::string& initial_response,
                               const LlmHandle& llm, const PromptLibrary& prompts);

}  // namespace vqaflow
