#include "vqaflow/grading.hpp"

#include <cctype>
#include <sstream>

#include "vqaflow/errors.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {

std::string normalize_answer(const std::string& answer) {
  std::string s = text::collapse_whitespace(text::to_lower(answer));
  while (!s.empty() && std::string(".!?,;:").find(s.back()) != std::string::npos) s.pop_back();
  s = text::trim(s);
  // Rewrite standalone number words so "two" and "2" compare equal.
  std::istringstream in(s);
  std::string token, out;
  while (in >> token) {
    if (const auto value = text::number_word_value(token)) token = std::to_string(*value);
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

GradeVote parse_vote(const std::string& reply) {
  // Find the last non-empty line.
  std::string line;
  std::size_t end = reply.size();
  while (end > 0) {
    std::size_t begin = reply.rfind('\n', end - 1);
    begin = begin == std::string::npos ? 0 : begin + 1;
    line = text::trim(reply.substr(begin, end - begin));
    if (!line.empty()) break;
    end = begin == 0 ? 0 : begin - 1;
  }
  const std::string upper = [&] {
    std::string u = line;
    for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return u;
  }();
  if (upper.find("INCORRECT") != std::string::npos) return GradeVote::Incorrect;
  if (upper.find("CORRECT") != std::string::npos) return GradeVote::Correct;
  if (upper.find("ABSTAIN") != std::string::npos) return GradeVote::Abstain;
  return GradeVote::Abstain;
}

Majority majority(const std::array<GradeVote, 3>& votes) {
  int correct = 0;
  for (GradeVote vote : votes)
    if (vote == GradeVote::Correct) ++correct;
  return correct >= 2 ? Majority::Correct : Majority::Incorrect;
}

Majority majority(const std::vector<GradeVote>& votes) {
  if (votes.size() != 3)
    throw Error(ErrorKind::InvalidInput,
                "majority expects exactly 3 votes, got " + std::to_string(votes.size()));
  return majority(std::array<GradeVote, 3>{votes[0], votes[1], votes[2]});
}

GradeVerdict grade_answer(const VisualQuestion& question, const std::string& candidate,
                          const PromptLibrary& prompts, AgentSession& session) {
  if (question.gold_answers.empty())
    throw Error(ErrorKind::InvalidInput,
                "cannot grade question " + question.id + ": no reference answers");
  const std::string prompt =
      prompts.render_grading(question.question, question.gold_answers, candidate);
  GradeVerdict verdict;
  for (int i = 0; i < 3; ++i) {
    // Same prompt, distinct salt: three separately fingerprinted judge calls.
    const std::string reply = session.llm_query(TraceStage::Grade, prompt, i);
    verdict.votes[static_cast<std::size_t>(i)] = parse_vote(reply);
  }
  verdict.majority = majority(verdict.votes);
  return verdict;
}

}  // namespace vqaflow
