#include "dirmc/io.hpp"

#include <fstream>
#include <sstream>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {

template <class T>
T field(const Json& j, const char* name) {
  if (!j.contains(name)) throw ValidationError(std::string("missing field \"") + name + "\"");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field \"") + name + "\" has the wrong type: " + e.what());
  }
}

}  // namespace

Json topicMatrixToJson(const TopicMatrix& phi) {
  Json j;
  j["K"] = phi.numTopics();
  j["V"] = phi.vocabSize();
  Json rows = Json::array();
  for (std::size_t k = 0; k < phi.numTopics(); ++k) {
    Json row = Json::array();
    for (std::size_t v = 0; v < phi.vocabSize(); ++v) row.push_back(phi(k, v));
    rows.push_back(std::move(row));
  }
  j["phi"] = std::move(rows);
  return j;
}

TopicMatrix topicMatrixFromJson(const Json& j) {
  const auto k = field<std::size_t>(j, "K");
  const auto v = field<std::size_t>(j, "V");
  const auto rows = field<std::vector<std::vector<double>>>(j, "phi");
  if (rows.size() != k) {
    std::ostringstream os;
    os << "topic matrix declares K=" << k << " but has " << rows.size() << " rows";
    throw ValidationError(os.str());
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != v) {
      std::ostringstream os;
      os << "topic row " << r << " has length " << rows[r].size() << ", expected V=" << v;
      throw ValidationError(os.str());
    }
  }
  return TopicMatrix::fromRows(rows);
}

CorpusDocument corpusDocumentFromJson(const Json& j) {
  if (!j.contains("counts") || !j.at("counts").is_object()) throw ValidationError("document needs a \"counts\" object");
  CorpusDocument doc;
  for (const auto& [key, value] : j.at("counts").items()) {
    std::size_t idx = 0;
    try {
      std::size_t pos = 0;
      idx = std::stoul(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError("word index \"" + key + "\" is not a non-negative integer");
    }
    if (!value.is_number()) throw ValidationError("count for word " + key + " is not a number");
    const double c = value.get<double>();
    if (c < 0.0) throw ValidationError("negative count for word " + key);
    doc.counts[idx] += c;
    doc.n += c;
  }
  doc.validate();
  return doc;
}

Json corpusDocumentToJson(const CorpusDocument& doc) {
  Json counts = Json::object();
  for (const auto& [word, count] : doc.counts) counts[std::to_string(word)] = count;
  Json j;
  j["counts"] = std::move(counts);
  return j;
}

Json instanceToJson(const LdaInstance& inst) {
  Json j = topicMatrixToJson(inst.phi());
  j["n"] = inst.n();
  j["p"] = inst.p().vec();
  if (inst.known()) {
    j["theta_star"] = inst.known()->thetaStar.vec();
    j["active_set"] = inst.known()->activeSet;
    j["lambda"] = inst.known()->lambda;
  }
  return j;
}

LdaInstance instanceFromJson(const Json& j) {
  TopicMatrix phi = topicMatrixFromJson(j);
  SimplexPoint p(field<std::vector<double>>(j, "p"));
  const double n = field<double>(j, "n");
  std::optional<KnownMaximizer> known;
  if (j.contains("theta_star")) {
    KnownMaximizer km;
    km.thetaStar = SimplexPoint(field<std::vector<double>>(j, "theta_star"));
    if (j.contains("active_set")) km.activeSet = field<std::vector<std::size_t>>(j, "active_set");
    if (j.contains("lambda")) km.lambda = field<std::vector<double>>(j, "lambda");
    known = std::move(km);
  }
  return LdaInstance(std::move(phi), std::move(p), n, std::move(known));
}

Json readJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void writeTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::string dumpJson(const Json& j) { return j.dump(2) + "\n"; }

TopicMatrix loadTopicMatrix(const std::filesystem::path& path) { return topicMatrixFromJson(readJsonFile(path)); }

std::vector<CorpusDocument> loadCorpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<CorpusDocument> docs;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(corpusDocumentFromJson(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return docs;
}

LdaInstance loadInstance(const std::filesystem::path& path) { return instanceFromJson(readJsonFile(path)); }

void saveInstance(const std::filesystem::path& path, const LdaInstance& inst) {
  writeTextFile(path, dumpJson(instanceToJson(inst)));
}

}  // namespace dirmc
