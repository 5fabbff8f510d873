#include "ridehail/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"

namespace ridehail {

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCategory::Parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("bad field '") + key + "': " + e.what());
  }
}

std::string numbered(const char* stem, std::size_t i, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%0*zu.json", stem, digits, i);
  return buf;
}

}  // namespace

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = csv::open_for_write(path);
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCategory::Io, "failed writing " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Schema

Json schema_to_json(const Schema& schema) {
  auto column = [](const Column& c) {
    Json j{{"name", c.name}, {"kind", c.is_categorical() ? "categorical" : "continuous"}, {"unit", c.unit}};
    if (c.is_categorical()) {
      j["min_level"] = c.min_level;
      j["max_level"] = c.max_level;
    } else {
      if (std::isfinite(c.lower)) j["lower"] = c.lower;
      if (std::isfinite(c.upper)) j["upper"] = c.upper;
      j["integer_valued"] = c.integer_valued;
    }
    return j;
  };
  Json preds = Json::array();
  for (const auto& c : schema.predictors()) preds.push_back(column(c));
  return Json{{"predictors", preds}, {"target", column(schema.target())}};
}

Schema schema_from_json(const Json& j) {
  auto column = [](const Json& c) {
    const auto kind = field<std::string>(c, "kind");
    if (kind == "categorical") {
      return Column::categorical(field<std::string>(c, "name"), field<std::string>(c, "unit"),
                                 field<int>(c, "min_level"), field<int>(c, "max_level"));
    }
    if (kind != "continuous") throw Error(ErrorCategory::Parse, "unknown column kind '" + kind + "'");
    const double inf = std::numeric_limits<double>::infinity();
    return Column::continuous(field<std::string>(c, "name"), field<std::string>(c, "unit"),
                              c.contains("lower") ? field<double>(c, "lower") : -inf,
                              c.contains("upper") ? field<double>(c, "upper") : inf,
                              field<bool>(c, "integer_valued"));
  };
  std::vector<Column> preds;
  for (const auto& c : field<Json>(j, "predictors")) preds.push_back(column(c));
  return Schema(std::move(preds), column(field<Json>(j, "target")));
}

// ---------------------------------------------------------------------------
// Trees

Json tree_to_json(const RegressionTree& tree) {
  Json nodes = Json::array();
  for (const auto& n : tree.nodes()) {
    Json j{{"value", n.value}, {"n", n.n_samples}, {"depth", n.depth}};
    if (n.is_leaf()) {
      j["type"] = "leaf";
    } else {
      j["type"] = "split";
      j["left"] = n.left;
      j["right"] = n.right;
      j["gain"] = n.sse_reduction;
      j["attribute"] = n.rule.attribute;
      j["missing_left"] = n.rule.missing_left;
      if (n.rule.categorical) {
        j["rule"] = "levels";
        j["left_levels"] = n.rule.left_levels;
        j["right_levels"] = n.rule.right_levels;
        j["unseen_left"] = n.rule.unseen_left;
      } else {
        j["rule"] = "threshold";
        j["threshold"] = n.rule.threshold;
      }
    }
    nodes.push_back(std::move(j));
  }
  return Json{{"format", "ridehail-tree"}, {"version", kFormatVersion}, {"nodes", nodes}};
}

RegressionTree tree_from_json(const Json& j) {
  if (field<std::string>(j, "format") != "ridehail-tree") throw Error(ErrorCategory::Parse, "not a tree document");
  std::vector<TreeNode> nodes;
  for (const auto& jn : field<Json>(j, "nodes")) {
    TreeNode n;
    n.value = field<double>(jn, "value");
    n.n_samples = field<std::size_t>(jn, "n");
    n.depth = field<std::size_t>(jn, "depth");
    const auto type = field<std::string>(jn, "type");
    if (type == "split") {
      n.left = field<std::int32_t>(jn, "left");
      n.right = field<std::int32_t>(jn, "right");
      n.sse_reduction = field<double>(jn, "gain");
      n.rule.attribute = field<std::size_t>(jn, "attribute");
      n.rule.missing_left = field<bool>(jn, "missing_left");
      const auto rule = field<std::string>(jn, "rule");
      if (rule == "levels") {
        n.rule.categorical = true;
        n.rule.left_levels = field<std::vector<int>>(jn, "left_levels");
        n.rule.right_levels = field<std::vector<int>>(jn, "right_levels");
        n.rule.unseen_left = field<bool>(jn, "unseen_left");
      } else if (rule == "threshold") {
        n.rule.threshold = field<double>(jn, "threshold");
      } else {
        throw Error(ErrorCategory::Parse, "unknown split rule '" + rule + "'");
      }
    } else if (type != "leaf") {
      throw Error(ErrorCategory::Parse, "unknown node type '" + type + "'");
    }
    nodes.push_back(std::move(n));
  }
  return RegressionTree(std::move(nodes));
}

// ---------------------------------------------------------------------------
// Network

Json mlp_to_json(const MLP& m) {
  Json fields = Json::array();
  for (const auto& f : m.encoder.fields()) {
    Json jf{{"encoding", f.kind == InputEncoder::Kind::Bits ? "bits" : "scaled"}, {"width", f.width}};
    if (f.kind == InputEncoder::Kind::Scaled) {
      jf["lo"] = f.lo;
      jf["hi"] = f.hi;
    }
    fields.push_back(std::move(jf));
  }
  return Json{{"format", "ridehail-mlp"},
              {"version", kFormatVersion},
              {"encoder", fields},
              {"sizes", m.sizes},
              {"hidden_activation", "sigmoid"},
              {"output_activation", "clip_at_zero"},
              {"target_scale", m.target_scale},
              {"best_epoch", m.best_epoch},
              {"params", m.params},
              {"history", {{"train_rmse", m.history.train_rmse}, {"valid_rmse", m.history.valid_rmse}}}};
}

MLP mlp_from_json(const Json& j) {
  if (field<std::string>(j, "format") != "ridehail-mlp") throw Error(ErrorCategory::Parse, "not a network document");
  std::vector<InputEncoder::Field> fields;
  for (const auto& jf : field<Json>(j, "encoder")) {
    InputEncoder::Field f;
    f.kind = field<std::string>(jf, "encoding") == "bits" ? InputEncoder::Kind::Bits : InputEncoder::Kind::Scaled;
    f.width = field<std::size_t>(jf, "width");
    if (f.kind == InputEncoder::Kind::Scaled) {
      f.lo = field<double>(jf, "lo");
      f.hi = field<double>(jf, "hi");
    }
    fields.push_back(f);
  }
  MLP m;
  m.encoder = InputEncoder::from_fields(std::move(fields));
  m.sizes = field<std::vector<std::size_t>>(j, "sizes");
  m.target_scale = field<double>(j, "target_scale");
  m.best_epoch = field<std::size_t>(j, "best_epoch");
  m.params = field<std::vector<double>>(j, "params");
  const auto h = field<Json>(j, "history");
  m.history.train_rmse = field<std::vector<double>>(h, "train_rmse");
  m.history.valid_rmse = field<std::vector<double>>(h, "valid_rmse");
  if (m.sizes.size() < 2 || m.sizes.front() != m.encoder.width() || m.sizes.back() != 1 ||
      m.params.size() != MLP::parameter_count(m.sizes)) {
    throw Error(ErrorCategory::Parse, "network shape does not match its parameters");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Stored models

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::DT: return "dt";
    case ModelKind::BDT: return "bdt";
    case ModelKind::RF: return "rf";
    case ModelKind::GBDT: return "gbdt";
    case ModelKind::ANN: return "ann";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::DT, ModelKind::BDT, ModelKind::RF, ModelKind::GBDT, ModelKind::ANN}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCategory::Usage, "unknown model '" + s + "' (expected dt, bdt, rf, gbdt or ann)");
}

std::vector<double> StoredModel::predict_all(const Dataset& data) const {
  if (!(data.schema() == schema)) {
    throw Error(ErrorCategory::Schema, "dataset schema differs from the schema the model was trained on");
  }
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GBDTModel>) {
          return m.predict_all(data, std::nullopt);
        } else {
          return m.predict_all(data);
        }
      },
      model);
}

void save_model(const std::filesystem::path& dir, const StoredModel& sm) {
  std::filesystem::create_directories(dir);
  Json manifest{{"format", "ridehail-model"},
                {"version", kFormatVersion},
                {"kind", to_string(sm.kind)},
                {"config", sm.config},
                {"schema", schema_to_json(sm.schema)}};
  if (const auto* t = std::get_if<RegressionTree>(&sm.model)) {
    manifest["trees"] = Json::array({"trees/" + numbered("tree", 0, 4)});
    write_json(dir / "trees" / numbered("tree", 0, 4), tree_to_json(*t));
  } else if (const auto* e = std::get_if<TreeEnsemble>(&sm.model)) {
    Json files = Json::array();
    for (std::size_t k = 0; k < e->trees.size(); ++k) {
      const auto name = numbered("tree", k, 4);
      files.push_back("trees/" + name);
      write_json(dir / "trees" / name, tree_to_json(e->trees[k]));
    }
    manifest["trees"] = files;
    manifest["bootstrap_seeds"] = e->bootstrap_seeds;
    manifest["subspace_size"] = e->subspace_size;
    manifest["identity_bootstrap"] = e->identity_bootstrap;
  } else if (const auto* g = std::get_if<GBDTModel>(&sm.model)) {
    Json stages = Json::array();
    for (std::size_t m = 0; m < g->stages.size(); ++m) {
      const auto name = numbered("stage", m + 1, 5);
      stages.push_back(Json{{"file", "stages/" + name}, {"step", g->stages[m].step}});
      write_json(dir / "stages" / name, tree_to_json(g->stages[m].tree));
    }
    const auto& c = g->config;
    manifest["f0"] = g->f0;
    manifest["gbdt"] = Json{{"iterations", c.iterations},
                            {"beta", c.beta},
                            {"bag_fraction", c.bag_fraction},
                            {"interaction_depth", c.interaction_depth ? Json(*c.interaction_depth) : Json(nullptr)},
                            {"effective_depth", c.depth_for(sm.schema.n_predictors())},
                            {"min_leaf_terminal", c.min_leaf_terminal},
                            {"seed", c.seed}};
    manifest["stages"] = stages;
    manifest["history"] = Json{{"train_mse", g->history.train_mse}, {"valid_mse", g->history.valid_mse}};
  } else {
    manifest["network"] = "network.json";
    write_json(dir / "network.json", mlp_to_json(std::get<MLP>(sm.model)));
  }
  write_json(dir / "manifest.json", manifest);
}

StoredModel load_model(const std::filesystem::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  if (field<std::string>(manifest, "format") != "ridehail-model") {
    throw Error(ErrorCategory::Parse, (dir / "manifest.json").string() + " is not a model manifest");
  }
  StoredModel sm;
  sm.kind = parse_model_kind(field<std::string>(manifest, "kind"));
  sm.config = manifest.value("config", Json::object());
  sm.schema = schema_from_json(field<Json>(manifest, "schema"));
  switch (sm.kind) {
    case ModelKind::DT:
      sm.model = tree_from_json(read_json(dir / field<std::vector<std::string>>(manifest, "trees").at(0)));
      break;
    case ModelKind::BDT:
    case ModelKind::RF: {
      TreeEnsemble e;
      for (const auto& f : field<std::vector<std::string>>(manifest, "trees")) {
        e.trees.push_back(tree_from_json(read_json(dir / f)));
      }
      e.bootstrap_seeds = field<std::vector<std::uint64_t>>(manifest, "bootstrap_seeds");
      e.subspace_size = field<std::size_t>(manifest, "subspace_size");
      e.identity_bootstrap = field<bool>(manifest, "identity_bootstrap");
      sm.model = std::move(e);
      break;
    }
    case ModelKind::GBDT: {
      GBDTModel g;
      g.schema = sm.schema;
      g.f0 = field<double>(manifest, "f0");
      const Json c = field<Json>(manifest, "gbdt");
      g.config.iterations = field<std::size_t>(c, "iterations");
      g.config.beta = field<double>(c, "beta");
      g.config.bag_fraction = field<double>(c, "bag_fraction");
      if (!field<Json>(c, "interaction_depth").is_null()) {
        g.config.interaction_depth = field<std::size_t>(c, "interaction_depth");
      }
      g.config.min_leaf_terminal = field<std::size_t>(c, "min_leaf_terminal");
      g.config.seed = field<std::uint64_t>(c, "seed");
      for (const auto& s : field<Json>(manifest, "stages")) {
        g.stages.push_back(GBDTStage{tree_from_json(read_json(dir / field<std::string>(s, "file"))),
                                     field<double>(s, "step")});
      }
      const Json h = field<Json>(manifest, "history");
      g.history.train_mse = field<std::vector<double>>(h, "train_mse");
      g.history.valid_mse = field<std::vector<double>>(h, "valid_mse");
      sm.model = std::move(g);
      break;
    }
    case ModelKind::ANN:
      sm.model = mlp_from_json(read_json(dir / field<std::string>(manifest, "network")));
      break;
  }
  return sm;
}

}  // namespace ridehail
