#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqaflow/bench.hpp"
#include "vqaflow/imaging.hpp"
#include "vqaflow/protocol.hpp"

namespace testsupport {

/// Unique scratch directory, removed (recursively) on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  /// path()/name as a string, for APIs that take plain paths.
  std::string file(const std::string& name) const;

 private:
  std::filesystem::path path_;
};

/// Deterministic RGB gradient-ish pattern; same (w, h, seed) -> same pixels.
vqaflow::Image pattern_image(int width, int height, std::uint32_t seed);

/// Encode with OpenCV so the bytes on disk do not come from the canonical
/// encoder the tests exercise.
void write_png(const std::string& path, const vqaflow::Image& image);
void write_jpeg(const std::string& path, const vqaflow::Image& image);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// The checked-in prompt templates, loaded once.
const vqaflow::PromptLibrary& test_prompts();

/// Run the CLI binary as a subprocess. `args` is appended verbatim to the
/// binary path; stdout/stderr are captured when the pointers are non-null.
/// Returns the process exit code (-1 if it did not exit normally).
int run_cli(const std::string& args, std::string* out = nullptr, std::string* err = nullptr);

// ---------------------------------------------------------------------------
// Synthetic benchmark corpus
// ---------------------------------------------------------------------------

/// A generated dataset whose gold answers are built to match (or, for the
/// deliberately wrong items, to miss) what the scripted mock agents answer,
/// so the expected verdict of every question is known up front.
struct Corpus {
  vqaflow::DatasetManifest manifest;
  std::vector<std::string> ids;  // dataset order
  std::map<std::string, bool> expected_correct;
  std::map<std::string, std::string> expected_provenance;  // id -> provenance label
  /// id -> collapsed stage sequence of a graded benchmark record.
  std::map<std::string, std::vector<std::string>> expected_stages;
  long long total = 0;
  long long correct = 0;
  /// type label ("yes/no", "number", "other", "unknown") -> (correct, total)
  std::map<std::string, std::pair<long long, long long>> per_type;
};

/// Write images plus a JSONL dataset under `dir` and return the manifest
/// and the by-construction expectations. 61 questions covering direct
/// answers, failure/reattempt, zero-detection reattempts, best-effort
/// double failures, and every counter-trigger shape.
Corpus make_corpus(const std::filesystem::path& dir);

}  // namespace testsupport
