#pragma once

#include <array>
#include <string>
#include <vector>

#include "vqaflow/agents.hpp"
#include "vqaflow/protocol.hpp"
#include "vqaflow/types.hpp"

namespace vqaflow {

/// Canonical answer form used wherever answers are compared: lowercased,
/// trimmed, internal whitespace collapsed, trailing sentence punctuation
/// dropped, and standalone number words up to twenty rewritten as digits
/// ("Two." -> "2").
std::string normalize_answer(const std::string& answer);

/// Vote on the last non-empty line of a grader reply, case-insensitively;
/// INCORRECT is checked before CORRECT so one cannot shadow the other.
/// Replies that name no verdict count as Abstain.
GradeVote parse_vote(const std::string& reply);

/// Two or more Correct votes carry; abstentions count against.
Majority majority(const std::array<GradeVote, 3>& votes);
Majority majority(const std::vector<GradeVote>& votes);

/// Grade a candidate answer with three independent judge calls (salts 0, 1
/// and 2 over an identical prompt) and combine them by majority. The calls
/// land in the session's trace as grading-stage events.
GradeVerdict grade_answer(const VisualQuestion& question, const std::string& candidate,
                          const PromptLibrary& prompts, AgentSession& session);

}  // namespace vqaflow
