#include <random>

#include "doctest.h"
#include "ridehail/error.hpp"
#include "ridehail/serialize.hpp"
#include "support.hpp"

using namespace ridehail;

namespace {

StoredModel fitted(ModelKind kind, const Dataset& d) {
  StoredModel sm;
  sm.kind = kind;
  sm.schema = d.schema();
  sm.config = Json{{"seed", 7}};
  EnsembleConfig ec;
  ec.n_trees = 5;
  ec.seed = 7;
  switch (kind) {
    case ModelKind::DT: sm.model = fit_tree(d, d.target(), TreeConfig{}); break;
    case ModelKind::BDT: sm.model = fit_bagged(d, d.target(), ec); break;
    case ModelKind::RF: sm.model = fit_random_forest(d, d.target(), ec); break;
    case ModelKind::GBDT: {
      GBDTConfig gc;
      gc.iterations = 12;
      gc.seed = 7;
      sm.model = fit_gbdt(d, d.target(), gc, &d);
      break;
    }
    case ModelKind::ANN: {
      MLPConfig mc;
      mc.hidden = {5, 3};
      mc.epochs = 4;
      mc.seed = 7;
      sm.model = fit_mlp(d, d.target(), mc, &d);
      break;
    }
  }
  return sm;
}

}  // namespace

TEST_CASE("every model kind survives a save and load") {
  std::mt19937_64 rng(1);
  const auto d = test::random_table(rng, {.rows = 120, .categorical = 2, .continuous = 3, .missing_rate = 0.05});
  for (auto kind : {ModelKind::DT, ModelKind::BDT, ModelKind::RF, ModelKind::GBDT, ModelKind::ANN}) {
    INFO(to_string(kind));
    test::TempDir dir("serialize");
    const auto sm = fitted(kind, d);
    save_model(dir.path(), sm);
    const auto back = load_model(dir.path());
    CHECK(back.kind == kind);
    CHECK(back.schema == sm.schema);
    CHECK(back.model == sm.model);
    CHECK(back.predict_all(d) == sm.predict_all(d));
    CHECK(parse_model_kind(to_string(kind)) == kind);
  }
}

TEST_CASE("predicting on a different schema is rejected") {
  std::mt19937_64 rng(2);
  const auto d = test::random_table(rng, {.rows = 40});
  const auto sm = fitted(ModelKind::DT, d);
  const auto other = test::random_table(rng, {.rows = 40, .categorical = 0, .continuous = 3});
  try {
    sm.predict_all(other);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Schema);
  }
}

TEST_CASE("malformed documents are reported as parse errors") {
  CHECK_THROWS_AS(parse_model_kind("svm"), Error);
  CHECK_THROWS_AS(tree_from_json(Json{{"format", "other"}}), Error);
  CHECK_THROWS_AS(mlp_from_json(Json::object()), Error);
  test::TempDir dir("serialize-bad");
  write_json(dir / "manifest.json", Json{{"format", "nope"}});
  try {
    load_model(dir.path());
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Parse);
  }
  CHECK_THROWS_AS(load_model(dir / "missing"), Error);
}

TEST_CASE("schema json round trip") {
  const Schema s({Column::categorical("d", "id", 1, 66), Column::continuous("t", "C", -10, 40, true)},
                 Column::continuous("y", "count", 0, 1e9, true));
  CHECK(schema_from_json(schema_to_json(s)) == s);
}
