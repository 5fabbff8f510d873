#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "ridehail/csv.hpp"
#include "ridehail/error.hpp"
#include "ridehail/eval.hpp"
#include "ridehail/relieff.hpp"
#include "ridehail/rng.hpp"
#include "ridehail/slots.hpp"
#include "ridehail/synthgen.hpp"

namespace ridehail::cli {

namespace fs = std::filesystem;

namespace {

// Manifests never record thread counts or timestamps so artifacts stay
// byte-identical across runs and thread settings.
Json manifest(const char* command, const GlobalOptions& g, const Json& resolved) {
  return Json{{"command", command}, {"seed", g.seed}, {"options", resolved}};
}

fs::path sidecar(const fs::path& file) { return fs::path(file.string() + ".run.json"); }

int table_districts(const fs::path& table, std::optional<int> flag) {
  if (flag) return *flag;
  const auto side = sidecar(table);
  if (fs::exists(side)) {
    const Json j = read_json(side);
    if (j.contains("districts")) return j.at("districts").get<int>();
  }
  return kDefaultDistricts;
}

Dataset load_table(const fs::path& path, std::optional<int> districts) {
  return load_slot_table(path, Schema::slot_table(table_districts(path, districts)));
}

struct RankingEntry {
  std::string attribute;
  double weight;
};

std::vector<RankingEntry> read_ranking(const fs::path& path) {
  csv::Reader reader(path);
  std::string line;
  if (!reader.next(line) || line != "attribute,weight") {
    throw Error(ErrorCategory::Schema, path.string() + ": expected header 'attribute,weight'");
  }
  std::vector<RankingEntry> out;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    const auto w = cells.size() == 2 ? csv::parse_double(cells[1]) : std::nullopt;
    if (!w) {
      throw Error(ErrorCategory::Parse, path.string() + ":" + std::to_string(reader.line_number()) +
                                            ": expected 'attribute,weight'");
    }
    out.push_back({std::string(cells[0]), *w});
  }
  return out;
}

/// Predictor indices kept by a ranking file (weight > threshold), in schema order.
std::vector<std::size_t> ranked_predictors(const Schema& schema, const fs::path& ranking, double threshold) {
  std::vector<double> weights(schema.n_predictors(), -std::numeric_limits<double>::infinity());
  for (const auto& e : read_ranking(ranking)) weights[schema.predictor_index(e.attribute)] = e.weight;
  std::vector<RankedFeature> ranked;
  for (std::size_t a = 0; a < weights.size(); ++a) ranked.push_back({a, weights[a]});
  auto keep = select_features(ranked, threshold);
  std::sort(keep.begin(), keep.end());
  return keep;
}

struct PreparedData {
  Dataset full;  // all predictors
  Dataset model_view;
  std::vector<SlotKey> keys;
  SplitIndices split;
};

PreparedData prepare(const GlobalOptions& g, const DataOptions& o) {
  PreparedData p;
  p.full = load_table(o.data, o.districts);
  p.keys = slot_keys(p.full);
  if (!o.ranking.empty()) {
    const auto keep = ranked_predictors(p.full.schema(), o.ranking, o.threshold);
    p.model_view = p.full.select_predictors(keep);
  } else {
    p.model_view = p.full;
  }
  p.split = split_indices(p.full.rows(), o.split, derive_seed(g.seed, "split"));
  return p;
}

Json model_config(ModelKind kind, const ModelOptions& o, std::size_t n_predictors) {
  Json tree{{"min_leaf", o.min_leaf},
            {"min_branch", o.min_branch},
            {"max_depth", o.max_depth ? Json(*o.max_depth) : Json("unlimited")}};
  switch (kind) {
    case ModelKind::DT:
      return tree;
    case ModelKind::BDT:
      tree["trees"] = o.trees;
      tree["subspace_size"] = n_predictors;
      return tree;
    case ModelKind::RF:
      tree["trees"] = o.trees;
      tree["delta"] = o.delta ? Json(*o.delta) : Json("n_p/3");
      tree["subspace_size"] = o.delta ? subspace_size_for_percent(*o.delta, n_predictors)
                                      : default_forest_subspace(n_predictors);
      return tree;
    case ModelKind::GBDT:
      return Json{{"iterations", o.iterations},
                  {"beta", o.beta},
                  {"bag_fraction", o.bag_fraction},
                  {"interaction_depth", o.depth.value_or(n_predictors)},
                  {"min_leaf_terminal", o.min_terminal}};
    case ModelKind::ANN:
      return Json{{"hidden", o.hidden},       {"dropout", o.dropout}, {"learning_rate", o.learning_rate},
                  {"decay", o.decay},         {"momentum", o.momentum}, {"batch_size", o.batch},
                  {"epochs", o.epochs}};
  }
  return {};
}

StoredModel fit_model(ModelKind kind, const Dataset& train, const Dataset* validation, const ModelOptions& o,
                      std::uint64_t master_seed) {
  const std::uint64_t seed = derive_seed(master_seed, "model-" + to_string(kind));
  StoredModel sm;
  sm.kind = kind;
  sm.schema = train.schema();
  sm.config = model_config(kind, o, train.n_predictors());
  sm.config["seed"] = seed;
  TreeConfig tc;
  tc.min_leaf = o.min_leaf;
  tc.min_branch = o.min_branch;
  tc.max_depth = o.max_depth;
  tc.seed = seed;
  switch (kind) {
    case ModelKind::DT:
      sm.model = fit_tree(train, train.target(), tc);
      break;
    case ModelKind::BDT:
    case ModelKind::RF: {
      EnsembleConfig ec;
      ec.n_trees = o.trees;
      ec.tree = tc;
      ec.subspace_percent = o.delta;
      ec.seed = seed;
      sm.model = kind == ModelKind::BDT ? fit_bagged(train, train.target(), ec)
                                        : fit_random_forest(train, train.target(), ec);
      break;
    }
    case ModelKind::GBDT: {
      GBDTConfig gc;
      gc.iterations = o.iterations;
      gc.beta = o.beta;
      gc.bag_fraction = o.bag_fraction;
      gc.interaction_depth = o.depth;
      gc.min_leaf_terminal = o.min_terminal;
      gc.seed = seed;
      auto model = fit_gbdt(train, train.target(), gc, validation);
      if (!model.history.valid_mse.empty()) {
        sm.config["best_iteration"] = early_stop_select(model.history.valid_mse);
      }
      sm.model = std::move(model);
      break;
    }
    case ModelKind::ANN: {
      MLPConfig mc;
      mc.hidden = o.hidden;
      mc.dropout = o.dropout;
      mc.learning_rate = o.learning_rate;
      mc.decay = o.decay;
      mc.momentum = o.momentum;
      mc.batch_size = o.batch;
      mc.epochs = o.epochs;
      mc.seed = seed;
      auto model = fit_mlp(train, train.target(), mc, validation);
      sm.config["best_epoch"] = model.best_epoch;
      sm.config["input_width"] = model.encoder.width();
      sm.model = std::move(model);
      break;
    }
  }
  return sm;
}

std::string na_or(const std::vector<double>& v, std::size_t i) {
  return i < v.size() ? csv::format_double(v[i]) : "NA";
}

void write_history(const fs::path& path, const StoredModel& sm) {
  if (const auto* g = std::get_if<GBDTModel>(&sm.model)) {
    auto out = csv::open_for_write(path);
    out << "iteration,train_rmse,valid_rmse\n";
    for (std::size_t i = 0; i < g->history.train_mse.size(); ++i) {
      std::vector<double> v;
      if (i < g->history.valid_mse.size()) v.push_back(std::sqrt(g->history.valid_mse[i]));
      out << (i + 1) << ',' << csv::format_double(std::sqrt(g->history.train_mse[i])) << ',' << na_or(v, 0)
          << '\n';
    }
  } else if (const auto* m = std::get_if<MLP>(&sm.model)) {
    auto out = csv::open_for_write(path);
    out << "epoch,train_rmse,valid_rmse\n";
    for (std::size_t i = 0; i < m->history.train_rmse.size(); ++i) {
      out << (i + 1) << ',' << csv::format_double(m->history.train_rmse[i]) << ','
          << na_or(m->history.valid_rmse, i) << '\n';
    }
  }
}

Json stats_json(const SummaryStats& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

void write_groups(const fs::path& path, GroupBy by, const std::vector<GroupError>& groups) {
  auto out = csv::open_for_write(path);
  out << to_string(by) << ",count,rmse,cumulative_rmse\n";
  for (const auto& g : groups) {
    out << g.key << ',' << g.count << ',' << csv::format_double(g.rmse) << ',' << csv::format_double(g.cumulative)
        << '\n';
  }
}

Json report_json(const EvalReport& r, const std::string& on) {
  return Json{{"model", r.model},
              {"evaluated_on", on},
              {"n", r.n},
              {"rmse", r.rmse},
              {"r_square_pearson", r.scatter.r_square},
              {"r_square_1_minus_sse_over_sst", r.scatter.determination},
              {"slope", r.scatter.slope},
              {"intercept", r.scatter.intercept},
              {"predicted", stats_json(r.predicted)},
              {"observed", stats_json(r.observed)},
              {"pooling_residual",
               {{"district", pooling_residual(r.by_district, r.n, r.rmse)},
                {"slot_of_day", pooling_residual(r.by_slot_of_day, r.n, r.rmse)},
                {"dow", pooling_residual(r.by_dow, r.n, r.rmse)}}},
              {"grouped", {"by_district.csv", "by_slot_of_day.csv", "by_dow.csv"}}};
}

void write_report(const fs::path& dir, const EvalReport& r, const std::string& on) {
  write_json(dir / "report.json", report_json(r, on));
  write_groups(dir / "by_district.csv", GroupBy::District, r.by_district);
  write_groups(dir / "by_slot_of_day.csv", GroupBy::SlotOfDay, r.by_slot_of_day);
  write_groups(dir / "by_dow.csv", GroupBy::Dow, r.by_dow);
}

template <typename T>
std::vector<T> pick(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

/// Predictor indices of `table` that carry the model's predictor names.
std::vector<std::size_t> model_columns(const Schema& model_schema, const Schema& table) {
  std::vector<std::size_t> idx;
  for (const auto& c : model_schema.predictors()) idx.push_back(table.predictor_index(c.name));
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------

void run_synth(const GlobalOptions& g, const SynthOptions& o, const Json& resolved) {
  CityProfile profile;
  if (!o.profile.empty()) {
    auto cfg = KeyValueConfig::load(o.profile);
    if (!cfg.contains("districts")) cfg.set("districts", std::to_string(o.districts));
    profile = CityProfile::from_config(cfg);
  } else {
    profile = CityProfile::make_default(o.districts);
  }
  if (o.days < 1) throw Error(ErrorCategory::Usage, "--days must be >= 1");
  const auto city = generate_requests(profile, o.days, derive_seed(g.seed, "synth"));
  fs::create_directories(o.out);
  save_raw_requests(o.out / "requests.csv", city.requests);
  city.conditions.save(o.out);
  {
    KeyValueConfig meta;
    meta.set("districts", std::to_string(city.params.n_districts));
    meta.set("days", std::to_string(city.params.n_days));
    meta.set("start_dow", std::to_string(city.params.start_dow));
    auto out = csv::open_for_write(o.out / "meta.cfg");
    out << meta.to_text();
  }
  {
    auto out = csv::open_for_write(o.out / "profile.cfg");
    out << profile.to_config().to_text();
  }
  Json m = manifest("synth", g, resolved);
  m["requests"] = city.requests.size();
  m["districts"] = city.params.n_districts;
  m["days"] = city.params.n_days;
  write_json(o.out / "run.json", m);
  std::cout << "wrote " << city.requests.size() << " requests to " << (o.out / "requests.csv").string() << '\n';
}

void run_aggregate(const GlobalOptions& g, const AggregateOptions& o, const Json& resolved) {
  AggregationParams params;
  fs::path requests = o.requests;
  SlotConditions conditions;
  bool have_conditions = false;
  if (!o.in.empty()) {
    const auto meta = KeyValueConfig::load(o.in / "meta.cfg");
    params.n_districts = static_cast<int>(meta.get_int("districts").value_or(kDefaultDistricts));
    params.n_days = static_cast<int>(meta.get_int("days").value_or(21));
    params.start_dow = static_cast<int>(meta.get_int("start_dow").value_or(5));
    meta.require_all_consumed();
    if (requests.empty()) requests = o.in / "requests.csv";
  }
  if (requests.empty()) throw Error(ErrorCategory::Usage, "give --in DIR or --requests FILE");
  if (o.districts) params.n_districts = *o.districts;
  if (o.days) params.n_days = *o.days;
  if (o.start_dow) params.start_dow = *o.start_dow;
  if (!o.in.empty()) {
    conditions = SlotConditions::load(o.in, params.n_districts, params.n_days);
    have_conditions = true;
  }

  SlotAggregator agg(params);
  for_each_raw_request(requests, [&](const RawRequest& r) { agg.add(r); });
  const Dataset data = agg.finish(have_conditions ? &conditions : nullptr);
  save_slot_table(o.out, data);

  double total = 0;
  for (double v : data.target()) total += v;
  Json m = manifest("aggregate", g, resolved);
  m["districts"] = params.n_districts;
  m["days"] = params.n_days;
  m["start_dow"] = params.start_dow;
  m["rows"] = data.rows();
  m["requests"] = agg.requests_seen();
  m["total_demand"] = total;
  write_json(sidecar(o.out), m);
  if (static_cast<std::size_t>(total) != agg.requests_seen()) {
    throw Error(ErrorCategory::State, "aggregated demand does not equal the number of requests");
  }
  std::cout << "wrote " << data.rows() << " slots (" << agg.requests_seen() << " requests) to " << o.out.string()
            << '\n';
}

void run_select(const GlobalOptions& g, const SelectOptions& o, const Json& resolved) {
  const Dataset data = load_table(o.data, o.districts);
  RReliefFConfig cfg;
  cfg.k = o.k;
  cfg.sigma = o.sigma;
  cfg.m = o.m;
  cfg.seed = derive_seed(g.seed, "relieff");
  const auto w = rrelieff_weights(data, cfg);
  if (w.warning) std::cerr << "warning: " << *w.warning << '\n';
  const auto ranking = rank_features(w.weights);
  {
    auto out = csv::open_for_write(o.out);
    out << "attribute,weight\n";
    for (const auto& f : ranking) {
      out << data.schema().predictor(f.attribute).name << ',' << csv::format_double(f.weight) << '\n';
    }
  }
  const auto kept = select_features(ranking, o.threshold);
  Json names = Json::array();
  for (auto a : kept) names.push_back(data.schema().predictor(a).name);
  Json m = manifest("select", g, resolved);
  m["m"] = w.m;
  m["selected"] = names;
  if (w.warning) m["warning"] = *w.warning;
  write_json(sidecar(o.out), m);
  std::printf("%-24s %s\n", "attribute", "weight");
  for (const auto& f : ranking) {
    std::printf("%-24s %.6f\n", data.schema().predictor(f.attribute).name.c_str(), f.weight);
  }
}

void run_train(const GlobalOptions& g, const TrainOptions& o, const Json& resolved) {
  const ModelKind kind = parse_model_kind(o.model);
  const auto p = prepare(g, o.data);
  const Dataset train = p.model_view.subset(p.split.train);
  const Dataset valid = p.model_view.subset(p.split.validation);
  const StoredModel sm = fit_model(kind, train, valid.empty() ? nullptr : &valid, o.params, g.seed);
  save_model(o.out, sm);
  write_history(o.out / "history.csv", sm);

  Json m = manifest("train", g, resolved);
  m["model"] = to_string(kind);
  m["resolved"] = sm.config;
  m["split"] = o.data.split;
  m["train_rows"] = train.rows();
  m["validation_rows"] = valid.rows();
  m["predictors"] = sm.schema.predictor_names();
  const auto pred_train = sm.predict_all(train);
  m["train_rmse"] = rmse(pred_train, train.target());
  if (!valid.empty()) m["validation_rmse"] = rmse(sm.predict_all(valid), valid.target());
  write_json(o.out / "run.json", m);
  std::cout << to_string(kind) << ": train RMSE " << m["train_rmse"].get<double>();
  if (m.contains("validation_rmse")) std::cout << ", validation RMSE " << m["validation_rmse"].get<double>();
  std::cout << '\n';
}

void run_evaluate(const GlobalOptions& g, const EvaluateOptions& o, const Json& resolved) {
  const StoredModel sm = load_model(o.model);
  double split = 0.7;
  std::uint64_t seed = g.seed;
  if (fs::exists(o.model / "run.json")) {
    const Json run = read_json(o.model / "run.json");
    split = run.value("split", split);
    seed = run.value("seed", seed);
  }
  const Dataset full = load_table(o.data, o.districts);
  const auto keys = slot_keys(full);
  const Dataset view = full.select_predictors(model_columns(sm.schema, full.schema()));
  std::vector<std::size_t> rows;
  const auto s = split_indices(full.rows(), split, derive_seed(seed, "split"));
  if (o.on == "validation") {
    rows = s.validation;
  } else if (o.on == "train") {
    rows = s.train;
  } else if (o.on == "all") {
    rows.resize(full.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    throw Error(ErrorCategory::Usage, "--on must be validation, train or all");
  }
  const Dataset part = view.subset(rows);
  const auto pred = sm.predict_all(part);
  const auto report = evaluate(to_string(sm.kind), pred, part.target(), pick<SlotKey>(keys, rows));
  fs::create_directories(o.out);
  write_report(o.out, report, o.on);
  Json m = manifest("evaluate", g, resolved);
  m["model_seed"] = seed;
  m["split"] = split;
  write_json(o.out / "run.json", m);
  std::cout << report.model << " on " << o.on << ": RMSE " << report.rmse << ", R-square "
            << report.scatter.r_square << ", slope " << report.scatter.slope << '\n';
}

void run_compare(const GlobalOptions& g, const CompareOptions& o, const Json& resolved) {
  const auto p = prepare(g, o.data);
  const Dataset train = p.model_view.subset(p.split.train);
  const Dataset valid = p.model_view.subset(p.split.validation);
  if (valid.rows() < 2) throw Error(ErrorCategory::Usage, "compare needs a validation set of at least 2 rows");
  const auto keys = pick<SlotKey>(p.keys, p.split.validation);
  fs::create_directories(o.out);

  auto out = csv::open_for_write(o.out / "compare.csv");
  out << "model,r_square,slope,rmse,mean,sd,median,min,max\n";
  const auto observed = summary_stats(valid.target());
  // fit holds R-square, slope and RMSE; the observed row has none.
  auto row = [&](const std::string& name, std::optional<std::array<double, 3>> fit, const SummaryStats& s) {
    std::string cells[3];
    char shown[3][16] = {"", "", ""};
    if (fit) {
      for (int k = 0; k < 3; ++k) {
        cells[k] = csv::format_double((*fit)[k]);
        std::snprintf(shown[k], sizeof shown[k], k == 2 ? "%.2f" : "%.4f", (*fit)[k]);
      }
    }
    out << name << ',' << cells[0] << ',' << cells[1] << ',' << cells[2] << ',' << csv::format_double(s.mean) << ','
        << csv::format_double(s.sd) << ',' << csv::format_double(s.median) << ',' << csv::format_double(s.min)
        << ',' << csv::format_double(s.max) << '\n';
    std::printf("%-9s %8s %8s %9s %9.2f %9.2f %8.2f %8.2f %9.2f\n", name.c_str(), shown[0], shown[1], shown[2],
                s.mean, s.sd, s.median, s.min, s.max);
  };
  std::printf("%-9s %8s %8s %9s %9s %9s %8s %8s %9s\n", "model", "R-square", "slope", "RMSE", "mean", "sd",
              "median", "min", "max");
  row("observed", std::nullopt, observed);

  Json summary = Json::array();
  for (const auto& name : o.models) {
    const ModelKind kind = parse_model_kind(name);
    const StoredModel sm = fit_model(kind, train, &valid, o.params, g.seed);
    const auto pred = sm.predict_all(valid);
    const auto report = evaluate(to_string(kind), pred, valid.target(), keys);
    const fs::path dir = o.out / to_string(kind);
    write_report(dir, report, "validation");
    write_history(dir / "history.csv", sm);
    write_json(dir / "config.json", sm.config);
    row(to_string(kind), std::array{report.scatter.r_square, report.scatter.slope, report.rmse}, report.predicted);
    summary.push_back(Json{{"model", to_string(kind)},
                           {"rmse", report.rmse},
                           {"train_rmse", rmse(sm.predict_all(train), train.target())},
                           {"config", sm.config}});
  }
  Json m = manifest("compare", g, resolved);
  m["split"] = o.data.split;
  m["train_rows"] = train.rows();
  m["validation_rows"] = valid.rows();
  m["models"] = summary;
  write_json(o.out / "run.json", m);
}

}  // namespace ridehail::cli
