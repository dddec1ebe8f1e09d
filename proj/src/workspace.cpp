#include "inferem/workspace.hpp"

#include <fstream>

namespace inferem {

Workspace make_workspace(const Dataset& data, KnowledgeBase kb, Vocabulary vocab,
                         std::vector<std::string> emotions) {
  Workspace w;
  w.kb = std::move(kb);
  w.vocab = std::move(vocab);
  w.emotions = std::move(emotions);
  w.train = encode_dialogues(data.train, w.vocab, w.emotions);
  w.valid = encode_dialogues(data.valid, w.vocab, w.emotions);
  w.test = encode_dialogues(data.test, w.vocab, w.emotions);
  w.dropped = data.dropped;
  return w;
}

Workspace make_workspace(const Dataset& data, KnowledgeBase kb) {
  if (data.train.empty()) throw CorpusError("training split is empty");
  Vocabulary vocab = build_vocabulary(data.train, kb);
  auto emotions = emotion_labels(data.train);
  return make_workspace(data, std::move(kb), std::move(vocab), std::move(emotions));
}

namespace {

Dataset read_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw CorpusError("data directory not found: " + dir.string());
  return load_empathetic_dialogues(dir);
}

}  // namespace

Workspace load_workspace(const std::filesystem::path& dir, std::size_t k_max) {
  return make_workspace(read_dir(dir), load_knowledge(dir, k_max));
}

Workspace load_workspace(const std::filesystem::path& dir, std::size_t k_max, Vocabulary vocab,
                         std::vector<std::string> emotions) {
  return make_workspace(read_dir(dir), load_knowledge(dir, k_max), std::move(vocab), std::move(emotions));
}

void save_emotions(const std::filesystem::path& path, const std::vector<std::string>& emotions) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& e : emotions) out << e << '\n';
}

std::vector<std::string> load_emotions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  if (out.size() < 2) throw CorpusError(path.string() + " lists fewer than 2 emotions");
  return out;
}

}  // namespace inferem
