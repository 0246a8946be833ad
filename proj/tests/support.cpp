#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace testsupport {

using vqaflow::Image;

// ---------------------------------------------------------------------------
// Scratch directories and files
// ---------------------------------------------------------------------------

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("vqaflow-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const { return (path_ / name).string(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write test file: " + path);
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

Image pattern_image(int width, int height, std::uint32_t seed) {
  Image image = Image::blank(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint32_t ux = static_cast<std::uint32_t>(x);
      const std::uint32_t uy = static_cast<std::uint32_t>(y);
      std::uint8_t* p = image.pixel(x, y);
      p[0] = static_cast<std::uint8_t>((ux * 7 + uy * 3 + seed * 13) & 0xFF);
      p[1] = static_cast<std::uint8_t>((ux * 5 + uy * 11 + seed * 29) & 0xFF);
      p[2] = static_cast<std::uint8_t>((ux * 13 + uy * 7 + seed * 53) & 0xFF);
    }
  }
  return image;
}

namespace {

cv::Mat to_bgr_mat(const Image& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t* p = image.pixel(x, y);
      bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  return bgr;
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
  if (!cv::imwrite(path, to_bgr_mat(image)))
    throw std::runtime_error("cannot write test png: " + path);
}

void write_jpeg(const std::string& path, const Image& image) {
  if (!cv::imwrite(path, to_bgr_mat(image)))
    throw std::runtime_error("cannot write test jpeg: " + path);
}

// ---------------------------------------------------------------------------
// Prompts and the CLI binary
// ---------------------------------------------------------------------------

const vqaflow::PromptLibrary& test_prompts() {
  static vqaflow::PromptLibrary library =
      vqaflow::PromptLibrary::load(vqaflow::PromptLibrary::default_dir());
  return library;
}

int run_cli(const std::string& args, std::string* out, std::string* err) {
  static std::atomic<int> counter{0};
  const std::string stem =
      (std::filesystem::temp_directory_path() /
       ("vqaflow-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++)))
          .string();
  const std::string out_path = stem + ".out";
  const std::string err_path = stem + ".err";
  const std::string command = std::string("\"") + VQAFLOW_CLI_BINARY + "\" " + args + " >" +
                              out_path + " 2>" + err_path;
  const int status = std::system(command.c_str());
  if (out) *out = read_file(out_path);
  if (err) *err = read_file(err_path);
  std::filesystem::remove(out_path);
  std::filesystem::remove(err_path);
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace {

/// Stage sequences a graded benchmark record shows for each scripted path.
const std::vector<std::string> kStagesDirect = {"initial", "parse", "grade"};
const std::vector<std::string> kStagesCounter = {"initial", "parse", "count", "grade"};
const std::vector<std::string> kStagesReattempt = {"initial", "parse", "detect",
                                                   "describe", "reattempt", "grade"};
const std::vector<std::string> kStagesZeroDetection = {"initial", "parse", "detect", "reattempt",
                                                       "grade"};
const std::vector<std::string> kStagesCombo = {"initial", "parse",     "detect", "describe",
                                               "reattempt", "count", "grade"};

}  // namespace

Corpus make_corpus(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // A few image files of varied sizes; two go through the JPEG decoder.
  struct Spec {
    const char* name;
    int width;
    int height;
    bool jpeg;
  };
  const Spec specs[] = {
      {"img0.png", 64, 48, false},  {"img1.png", 80, 60, false}, {"img2.png", 32, 24, false},
      {"img3.png", 100, 40, false}, {"img4.png", 48, 48, false}, {"img5.png", 33, 57, false},
      {"img6.jpg", 64, 64, true},   {"img7.jpg", 96, 32, true},
  };
  std::vector<std::string> image_names;
  std::uint32_t seed = 1;
  for (const Spec& spec : specs) {
    const Image image = pattern_image(spec.width, spec.height, seed++);
    const std::string path = (dir / spec.name).string();
    if (spec.jpeg)
      write_jpeg(path, image);
    else
      write_png(path, image);
    image_names.push_back(spec.name);
  }

  Corpus corpus;
  std::ostringstream jsonl;
  std::size_t index = 0;

  // type: "" means the dataset line carries a null type field.
  const auto add = [&](const std::string& id, const std::string& question, const std::string& type,
                       const std::vector<std::string>& answers, bool correct,
                       const std::string& provenance, const std::vector<std::string>& stages) {
    nlohmann::json line;
    line["id"] = id;
    line["image"] = image_names[index++ % image_names.size()];
    line["question"] = question;
    if (type.empty())
      line["type"] = nullptr;
    else
      line["type"] = type;
    line["answers"] = answers;
    jsonl << line.dump() << "\n";

    corpus.ids.push_back(id);
    corpus.expected_correct[id] = correct;
    corpus.expected_provenance[id] = provenance;
    corpus.expected_stages[id] = stages;
    corpus.total += 1;
    const std::string bucket = type.empty() ? "unknown" : type;
    corpus.per_type[bucket].second += 1;
    if (correct) {
      corpus.correct += 1;
      corpus.per_type[bucket].first += 1;
    }
  };

  // Plain questions the mock answers directly: "It is <last word>."
  const char* plain_ok[] = {"plate", "cup", "lamp", "chair", "bottle", "bird", "table", "box"};
  for (const char* noun : plain_ok)
    add(std::string("plain-") + noun, std::string("What color is the ") + noun + "?", "other",
        {std::string("It is ") + noun + "."}, true, "direct", kStagesDirect);
  const char* plain_wrong[] = {"door", "window", "couch", "stove"};
  for (const char* noun : plain_wrong)
    add(std::string("plainwrong-") + noun, std::string("What color is the ") + noun + "?", "other",
        {"blue"}, false, "direct", kStagesDirect);

  const char* yes_ok[] = {"lamp", "plate", "cup", "chair", "bird", "bottle"};
  for (const char* noun : yes_ok)
    add(std::string("yes-") + noun, std::string("Is this a ") + noun + "?", "yes/no",
        {std::string("It is ") + noun + "."}, true, "direct", kStagesDirect);
  const char* yes_wrong[] = {"fence", "gate", "tower", "bridge"};
  for (const char* noun : yes_wrong)
    add(std::string("yeswrong-") + noun, std::string("Is this a ") + noun + "?", "yes/no", {"no"},
        false, "direct", kStagesDirect);

  // Counting with a small stated count: the counter must stay out.
  const std::pair<const char*, int> small_counts[] = {{"plates", 0},  {"birds", 1}, {"cups", 2},
                                                      {"bottles", 3}, {"chairs", 3}, {"lamps", 2}};
  for (const auto& [plural, k] : small_counts)
    add(std::string("countsmall-") + plural + "-" + std::to_string(k),
        std::string("How many ") + plural + " can you spot, roughly " + std::to_string(k) + "?",
        "number",
        {std::string("I count ") + std::to_string(k) + " " + plural + " in the image."}, true,
        "direct", kStagesDirect);

  // Large stated counts trigger the counter; its value is len(target) + 1.
  const std::pair<const char*, int> large_counts[] = {{"plates", 4},  {"birds", 5}, {"cups", 7},
                                                      {"bottles", 12}, {"chairs", 100},
                                                      {"lamps", 9}};
  for (const auto& [plural, k] : large_counts)
    add(std::string("countlarge-") + plural + "-" + std::to_string(k),
        std::string("How many ") + plural + " can you spot, roughly " + std::to_string(k) + "?",
        "number", {std::to_string(std::string(plural).size() + 1)}, true, "counter",
        kStagesCounter);

  // No numeric answer at all: the counter must run.
  const std::pair<const char*, const char*> absent_counts[] = {
      {"plates", "7"}, {"birds", "6"}, {"cups", "5"}};
  for (const auto& [plural, gold] : absent_counts)
    add(std::string("countabsent-") + plural,
        std::string("How many ") + plural + " are visible, I am unsure about it?", "number",
        {gold}, true, "counter", kStagesCounter);

  // Gold answers written as number words; grading normalization maps them.
  add("countword-bottles", "How many bottles can you spot, roughly 50?", "number", {"eight"}, true,
      "counter", kStagesCounter);
  add("countword-chairs", "How many chairs can you spot, roughly 50?", "number", {"seven"}, true,
      "counter", kStagesCounter);

  // Failure -> detect -> describe -> reattempt. The mock reattempt picks the
  // alphabetically first described label.
  const std::pair<const char*, const char*> pairs_ok[] = {
      {"plate", "cup"}, {"lamp", "chair"}, {"bottle", "bird"},
      {"table", "box"}, {"mug", "pan"},    {"sofa", "desk"}};
  for (const auto& [a, b] : pairs_ok) {
    const std::string first = std::min(std::string(a), std::string(b));
    add(std::string("pair-") + a + "-" + b,
        std::string("Something is behind the obscured ") + a + " and " + b + " here, right?",
        "other", {std::string("It is beside the ") + first + "."}, true, "reattempt",
        kStagesReattempt);
  }
  const std::pair<const char*, const char*> pairs_wrong[] = {
      {"vase", "fork"}, {"knife", "bowl"}, {"clock", "rug"}};
  for (const auto& [a, b] : pairs_wrong)
    add(std::string("pairwrong-") + a + "-" + b,
        std::string("Something is behind the obscured ") + a + " and " + b + " here, right?",
        "other", {"It is beside the spoon."}, false, "reattempt", kStagesReattempt);

  // The detector never finds the label "void": zero detections, reattempt
  // without any describe calls, plain reattempt answer.
  add("void-1", "What hides behind the obscured void?", "other", {"It is void."}, true,
      "reattempt", kStagesZeroDetection);
  add("void-2", "Guess what lives inside the obscured void?", "other", {"It is void."}, true,
      "reattempt", kStagesZeroDetection);
  add("void-3", "Who stands near the obscured void?", "other", {"It is void."}, true, "reattempt",
      kStagesZeroDetection);

  // The reattempt fails too ("doublefail"): best-effort stripped answer.
  add("double-1", "Can you name the obscured gadget doublefail case?", "other",
      {"Even with the extra detail I cannot resolve it."}, true, "best_effort", kStagesReattempt);
  add("double-2", "Point at the obscured gizmo doublefail thing?", "other", {"nope"}, false,
      "best_effort", kStagesReattempt);
  add("double-3", "Find the obscured widget doublefail here?", "other", {"missing"}, false,
      "best_effort", kStagesReattempt);

  // Counting question whose initial attempt fails: full repair chain runs,
  // then the counter has the last word. The parsing agent's target is the
  // word right after "how many" ("obscured", 8 letters -> count 9).
  add("combo-widgets", "How many obscured widgets are stacked in the corner?", "number", {"9"},
      true, "counter", kStagesCombo);
  add("combo-crates", "How many obscured crates are stacked in the corner?", "number", {"9"},
      true, "counter", kStagesCombo);
  add("combo-panels", "How many obscured panels are stacked in the corner?", "number", {"9"},
      true, "counter", kStagesCombo);

  // Untyped records (null type) still run and grade; they only join the
  // overall tally plus the unknown bucket.
  add("untyped-token", "What shape is the token?", "", {"It is token."}, true, "direct",
      kStagesDirect);
  add("untyped-marble", "What shade is the marble?", "", {"It is marble."}, true, "direct",
      kStagesDirect);
  add("untyped-pebble", "What size is the pebble?", "", {"red"}, false, "direct", kStagesDirect);
  add("untyped-kettle", "What brand is the kettle?", "", {"nike"}, false, "direct", kStagesDirect);

  const std::string dataset_path = (dir / "dataset.jsonl").string();
  write_file(dataset_path, jsonl.str());

  corpus.manifest.name = "synthetic-61";
  corpus.manifest.path = dataset_path;
  corpus.manifest.image_root = dir.string();
  corpus.manifest.declared_size = corpus.ids.size();
  return corpus;
}

}  // namespace testsupport
