#pragma once

// Shared fixtures for the test binaries.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "conndiff/generator.hpp"
#include "conndiff/prompt.hpp"
#include "conndiff/props.hpp"
#include "conndiff/trace.hpp"

namespace conndiff::testing {

inline std::string data_path(const std::string& rel) { return std::string(CONNDIFF_DATA_DIR) + "/" + rel; }

inline Trace load_trace(const std::string& rel) { return parse_trace(read_file(data_path(rel))); }

inline PromptSet shipped_prompts() { return parse_prompt_set(read_file(data_path("prompts.cdp"))); }
inline PropertySchema shipped_schema() { return parse_schema(read_file(data_path("schema.cdp"))); }

/// `count` stub traces cycling through all focus groups, seeds 0..count-1,
/// assignments drawn from the flattened shipped catalog.
inline std::vector<Trace> stub_corpus(std::size_t count) {
  const auto set = shipped_prompts();
  const auto schema = shipped_schema();
  const auto assignments =
      curate_subsets(schema, 8, SubsetStrategy::PairwiseInteractions, 7).flattened();
  StubGenerator gen(set.grammar);
  std::vector<Trace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    GeneratorRequest req;
    req.prompt_text = "p";
    req.focus_group = kAllFocusGroups[i % kAllFocusGroups.size()];
    req.property_assignment = assignments[i % assignments.size()];
    req.seed = i;
    out.push_back(gen.build(req));
  }
  return out;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("conndiff-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace conndiff::testing
