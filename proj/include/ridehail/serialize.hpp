#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ridehail/cart.hpp"
#include "ridehail/ensemble.hpp"
#include "ridehail/gbdt.hpp"
#include "ridehail/mlp.hpp"

namespace ridehail {

using Json = nlohmann::json;

Json schema_to_json(const Schema& schema);
Schema schema_from_json(const Json& j);

Json tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const Json& j);

Json mlp_to_json(const MLP& model);
MLP mlp_from_json(const Json& j);

enum class ModelKind { DT, BDT, RF, GBDT, ANN };
std::string to_string(ModelKind k);
/// Accepts dt, bdt, rf, gbdt, ann.
ModelKind parse_model_kind(const std::string& s);

/// A fitted model of any kind together with the schema it was trained on
/// and the resolved hyperparameters that produced it.
struct StoredModel {
  ModelKind kind = ModelKind::DT;
  Schema schema;
  Json config = Json::object();
  std::variant<RegressionTree, TreeEnsemble, GBDTModel, MLP> model;

  std::vector<double> predict_all(const Dataset& data) const;
};

/// Directory layout: manifest.json plus trees/tree-NNNN.json (dt, bdt, rf),
/// stages/stage-NNNNN.json (gbdt) or network.json (ann).
void save_model(const std::filesystem::path& dir, const StoredModel& model);
StoredModel load_model(const std::filesystem::path& dir);

/// Writes pretty JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace ridehail
