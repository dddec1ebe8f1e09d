#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inferem/corpus.hpp"

namespace inferem {

/// Encoded splits with the vocabulary, emotion classes and knowledge they use.
struct Workspace {
  KnowledgeBase kb;
  Vocabulary vocab;
  std::vector<std::string> emotions;
  std::vector<Dialogue> train, valid, test;
  std::size_t dropped = 0;
};

/// Vocabulary and emotion classes are derived from the training split.
Workspace make_workspace(const Dataset& data, KnowledgeBase kb);
/// Uses a fixed vocabulary and emotion list (e.g. those of a trained run).
Workspace make_workspace(const Dataset& data, KnowledgeBase kb, Vocabulary vocab,
                         std::vector<std::string> emotions);

/// Throws CorpusError when `dir` is missing or lacks the three splits.
Workspace load_workspace(const std::filesystem::path& dir, std::size_t k_max);
Workspace load_workspace(const std::filesystem::path& dir, std::size_t k_max, Vocabulary vocab,
                         std::vector<std::string> emotions);

/// One emotion name per line, in class-id order.
void save_emotions(const std::filesystem::path& path, const std::vector<std::string>& emotions);
std::vector<std::string> load_emotions(const std::filesystem::path& path);

}  // namespace inferem
