#include "vqaflow/protocol.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vqaflow/errors.hpp"
#include "vqaflow/textutil.hpp"

#ifndef VQAFLOW_DEFAULT_TEMPLATE_DIR
#define VQAFLOW_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace vqaflow {

namespace {

struct TemplateSpec {
  PromptStage stage;
  bool detailed_cot;
  const char* filename;
  std::vector<std::string> required_placeholders;
};

const std::vector<TemplateSpec>& template_specs() {
  static const std::vector<TemplateSpec> specs = {
      {PromptStage::Initial, true, "initial_cot.txt", {"{question}"}},
      {PromptStage::Initial, false, "initial_basic.txt", {"{question}"}},
      {PromptStage::Parse, false, "parse.txt", {"{question}", "{response}"}},
      {PromptStage::Describe, false, "describe.txt", {"{question}", "{label}"}},
      {PromptStage::Reattempt, false, "reattempt.txt",
       {"{question}", "{failed_attempt}", "{descriptions}"}},
      {PromptStage::Grade, false, "grade.txt",
       {"{question}", "{gold_answers}", "{candidate}"}},
  };
  return specs;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot read template file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Single pass over the template; placeholder values are never re-scanned.
std::string substitute(const std::string& tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool matched = false;
    if (tmpl[i] == '{') {
      for (const auto& [token, value] : values) {
        if (tmpl.compare(i, token.size(), token) == 0) {
          out += value;
          i += token.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out.push_back(tmpl[i++]);
  }
  return out;
}

std::optional<ParseDirective> try_parse_reply(const std::string& reply,
                                              std::string* missing_csv) {
  std::optional<bool> failed;
  std::optional<bool> counting;
  std::string missing;
  std::string target;
  std::istringstream lines(reply);
  std::string line;
  while (std::getline(lines, line)) {
    std::string t = text::trim(line);
    auto value_of = [&](const char* key) -> std::optional<std::string> {
      if (!text::starts_with(t, key)) return std::nullopt;
      return text::trim(t.substr(std::string(key).size()));
    };
    if (auto v = value_of("FAILED=")) {
      if (!failed) {
        std::string lv = text::to_lower(*v);
        if (lv == "yes" || lv == "no") failed = (lv == "yes");
      }
    } else if (auto v = value_of("MISSING=")) {
      if (missing.empty()) missing = *v;
    } else if (auto v = value_of("COUNTING=")) {
      if (!counting) {
        std::string lv = text::to_lower(*v);
        if (lv == "yes" || lv == "no") counting = (lv == "yes");
      }
    } else if (auto v = value_of("TARGET=")) {
      if (target.empty()) target = *v;
    }
  }
  if (!failed || !counting) return std::nullopt;
  ParseDirective d;
  d.failure_detected = *failed;
  *missing_csv = missing;
  if (*counting) {
    std::string lt = text::to_lower(target);
    if (lt.empty() || lt == "none") return std::nullopt;  // counting needs a target
    d.counting = CountingDirective{target, std::nullopt};
  }
  return d;
}

}  // namespace

const char* to_string(PromptStage s) {
  switch (s) {
    case PromptStage::Initial: return "initial";
    case PromptStage::Parse: return "parse";
    case PromptStage::Describe: return "describe";
    case PromptStage::Reattempt: return "reattempt";
    case PromptStage::Grade: return "grade";
  }
  return "initial";
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
  PromptLibrary lib;
  for (const auto& spec : template_specs()) {
    std::string path = (std::filesystem::path(dir) / spec.filename).string();
    PromptTemplate t;
    t.stage = spec.stage;
    t.detailed_cot = spec.detailed_cot;
    t.template_text = read_text_file(path);
    for (const auto& placeholder : spec.required_placeholders) {
      if (!text::contains(t.template_text, placeholder)) {
        throw Error(ErrorKind::Config,
                    path + " is missing required placeholder " + placeholder);
      }
    }
    if (spec.stage == PromptStage::Initial || spec.stage == PromptStage::Reattempt) {
      if (!text::contains(t.template_text, kFailureToken) ||
          !text::contains(t.template_text, kMissingPrefix)) {
        throw Error(ErrorKind::Config, path + " must instruct the failure-token escape");
      }
    }
    lib.templates_[{static_cast<int>(spec.stage), spec.detailed_cot}] = std::move(t);
  }
  return lib;
}

std::string PromptLibrary::default_dir() {
  if (const char* env = std::getenv("VQAFLOW_TEMPLATES"); env && *env) return env;
  return VQAFLOW_DEFAULT_TEMPLATE_DIR;
}

const PromptTemplate& PromptLibrary::get(PromptStage stage, bool detailed_cot) const {
  auto it = templates_.find({static_cast<int>(stage), detailed_cot});
  if (it == templates_.end()) {
    throw Error(ErrorKind::Config, std::string("no template loaded for stage ") + to_string(stage));
  }
  return it->second;
}

std::string PromptLibrary::render_initial(const std::string& question, bool detailed_cot) const {
  if (text::trim(question).empty()) {
    throw Error(ErrorKind::InvalidInput, "question must be non-empty");
  }
  return substitute(get(PromptStage::Initial, detailed_cot).template_text,
                    {{"{question}", question}});
}

std::string PromptLibrary::render_parse(const std::string& question,
                                        const std::string& response) const {
  return substitute(get(PromptStage::Parse).template_text,
                    {{"{question}", question}, {"{response}", response}});
}

std::string PromptLibrary::render_description(const std::string& question,
                                              const std::string& label) const {
  if (text::trim(label).empty()) {
    throw Error(ErrorKind::InvalidInput, "object label must be non-empty");
  }
  return substitute(get(PromptStage::Describe).template_text,
                    {{"{question}", question}, {"{label}", label}});
}

std::string PromptLibrary::render_reattempt(
    const std::string& question, const std::string& failed_attempt,
    const std::vector<ObjectDescription>& descriptions) const {
  std::string rendered;
  if (descriptions.empty()) {
    rendered = "(no additional objects were found)";
  } else {
    for (std::size_t i = 0; i < descriptions.size(); ++i) {
      if (i) rendered += "\n";
      rendered += "- " + descriptions[i].label + ": " + descriptions[i].description;
    }
  }
  return substitute(get(PromptStage::Reattempt).template_text,
                    {{"{question}", question},
                     {"{failed_attempt}", failed_attempt},
                     {"{descriptions}", rendered}});
}

std::string PromptLibrary::render_grading(const std::string& question,
                                          const std::vector<std::string>& gold_answers,
                                          const std::string& candidate) const {
  if (gold_answers.empty()) {
    throw Error(ErrorKind::InvalidInput, "grading requires at least one gold answer");
  }
  std::string gold;
  for (std::size_t i = 0; i < gold_answers.size(); ++i) {
    if (i) gold += "\n";
    gold += gold_answers[i];
  }
  return substitute(get(PromptStage::Grade).template_text,
                    {{"{question}", question},
                     {"{gold_answers}", gold},
                     {"{candidate}", candidate}});
}

bool detect_failure_token(const std::string& response) {
  return response.find(kFailureToken) != std::string::npos;
}

std::optional<long long> extract_numeric_answer(const std::string& s) {
  constexpr long long kCap = 999'999'999'999LL;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isdigit(c)) {
      long long value = 0;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        if (value <= kCap) value = value * 10 + (s[i] - '0');
        if (value > kCap) value = kCap;
        ++i;
      }
      return value;
    }
    if (std::isalpha(c)) {
      std::size_t j = i;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      if (auto w = text::number_word_value(std::string_view(s).substr(i, j - i))) return *w;
      i = j;
      continue;
    }
    ++i;
  }
  return std::nullopt;
}

std::vector<std::string> parse_missing_list(const std::string& csv) {
  std::string trimmed = text::trim(csv);
  if (trimmed.empty() || text::to_lower(trimmed) == "none") return {};
  std::vector<std::string> out;
  for (const auto& piece : text::split_trimmed(trimmed, ',')) {
    std::string name = text::to_lower(piece);
    bool seen = false;
    for (const auto& existing : out) {
      if (existing == name) {
        seen = true;
        break;
      }
    }
    if (!seen) out.push_back(std::move(name));
  }
  return out;
}

InitialAttempt parse_initial_attempt(const std::string& raw_response) {
  InitialAttempt attempt;
  attempt.raw_response = raw_response;
  attempt.failed = detect_failure_token(raw_response);
  if (attempt.failed) {
    std::istringstream lines(raw_response);
    std::string line;
    while (std::getline(lines, line)) {
      std::string t = text::trim(line);
      if (text::starts_with(t, kMissingPrefix)) {
        attempt.missing_objects = parse_missing_list(t.substr(std::string(kMissingPrefix).size()));
        break;
      }
    }
  } else {
    attempt.answer = text::trim(raw_response);
  }
  return attempt;
}

std::string strip_failure_markup(const std::string& response) {
  std::istringstream lines(response);
  std::string line;
  std::string out;
  while (std::getline(lines, line)) {
    std::string t = text::trim(line);
    if (text::starts_with(t, kMissingPrefix)) continue;
    // erase every token occurrence within the line
    std::size_t pos;
    while ((pos = line.find(kFailureToken)) != std::string::npos) {
      line.erase(pos, std::string(kFailureToken).size());
    }
    if (text::trim(line).empty()) continue;
    if (!out.empty()) out += "\n";
    out += line;
  }
  return text::trim(out);
}

ParseDirective parse_directive(const std::string& question, const std::string& initial_response,
                               const LlmHandle& llm, const PromptLibrary& prompts) {
  std::string prompt = prompts.render_parse(question, initial_response);
  std::string missing_csv;
  std::string reply = llm(prompt);
  auto parsed = try_parse_reply(reply, &missing_csv);
  if (!parsed) {
    reply = llm(prompt + "\nReply only in the specified KEY=VALUE format.");
    parsed = try_parse_reply(reply, &missing_csv);
  }
  if (!parsed) {
    throw Error(ErrorKind::ProtocolViolation,
                "parsing agent reply not in KEY=VALUE format: " + text::summarize(reply));
  }
  ParseDirective directive = *parsed;
  if (directive.failure_detected) {
    directive.missing_objects = parse_missing_list(missing_csv);
  } else {
    directive.missing_objects.clear();
  }
  if (directive.counting) {
    directive.counting->initial_count = extract_numeric_answer(initial_response);
  }
  return directive;
}

}  // namespace vqaflow
