#include "tpt/vocab.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "tpt/errors.hpp"

namespace tpt {

namespace {
const char* kPadToken = "<pad>";
const char* kUnkToken = "<unk>";
}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      out.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  v.tokens_ = {kPadToken, kUnkToken};
  v.index_ = {{kPadToken, kPadId}, {kUnkToken, kUnkId}};
  for (const std::string& t : tokens) {
    require(!t.empty(), ErrorKind::Data, "vocabulary token must not be empty");
    if (v.index_.count(t) == 0) {
      v.index_.emplace(t, static_cast<int>(v.tokens_.size()));
      v.tokens_.push_back(t);
    }
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Data, "cannot open vocabulary file '", path, "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  require(lines.size() >= 2, ErrorKind::Data, path, ": vocabulary needs at least the two reserved rows");
  require(lines[0] == kPadToken && lines[1] == kUnkToken, ErrorKind::Data, path,
          ": lines 0/1 must be the reserved '", kPadToken, "'/'", kUnkToken, "' markers");
  Vocab v;
  v.tokens_ = lines;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    require(!lines[i].empty(), ErrorKind::Data, path, ": empty token at line ", i);
    const bool inserted = v.index_.emplace(lines[i], static_cast<int>(i)).second;
    require(inserted, ErrorKind::Data, path, ": duplicate token '", lines[i], "' at line ", i);
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  for (const std::string& t : tokens_) out << t << "\n";
  require(out.good(), ErrorKind::Data, "write failure on '", path, "'");
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  require(id >= 0 && id < size(), ErrorKind::Data, "token id ", id,
          " out of range for vocabulary of ", size());
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

int load_embedding_vectors(const std::string& path, const Vocab& vocab, Mat<float>& table) {
  require(table.rows() == vocab.size(), ErrorKind::Data, "embedding table has ", table.rows(),
          " rows but the vocabulary has ", vocab.size(), " tokens");
  std::ifstream in(path);
  require(in.good(), ErrorKind::Data, "cannot open embedding vector file '", path, "'");
  int replaced = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<float> values;
    double v;
    while (ls >> v) values.push_back(static_cast<float>(v));
    require(static_cast<Eigen::Index>(values.size()) == table.cols(), ErrorKind::Data, path, ":",
            lineno, ": token '", token, "' has ", values.size(), " values, expected ",
            table.cols());
    const int id = vocab.id(token);
    if (id == Vocab::kUnkId && token != vocab.token(Vocab::kUnkId)) continue;  // not in vocab
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      table(id, j) = values[static_cast<std::size_t>(j)];
    }
    ++replaced;
  }
  return replaced;
}

}  // namespace tpt
