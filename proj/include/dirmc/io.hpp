#pragma once

// JSON formats: topic matrices {"K","V","phi"}, corpora as JSON lines
// {"counts":{"idx":count}}, and instance bundles carrying the topic matrix, p,
// n and, for planted instances, theta_star / active_set / lambda.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dirmc/instances.hpp"
#include "dirmc/objectives.hpp"

namespace dirmc {

using Json = nlohmann::ordered_json;

Json topicMatrixToJson(const TopicMatrix& phi);
TopicMatrix topicMatrixFromJson(const Json& j);

CorpusDocument corpusDocumentFromJson(const Json& j);
Json corpusDocumentToJson(const CorpusDocument& doc);

Json instanceToJson(const LdaInstance& inst);
LdaInstance instanceFromJson(const Json& j);

Json readJsonFile(const std::filesystem::path& path);
void writeTextFile(const std::filesystem::path& path, const std::string& text);
// Pretty-printed JSON with a trailing newline.
std::string dumpJson(const Json& j);

TopicMatrix loadTopicMatrix(const std::filesystem::path& path);
std::vector<CorpusDocument> loadCorpus(const std::filesystem::path& path);
LdaInstance loadInstance(const std::filesystem::path& path);
void saveInstance(const std::filesystem::path& path, const LdaInstance& inst);

}  // namespace dirmc
