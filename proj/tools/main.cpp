// ridehail: synth -> aggregate -> select -> train -> evaluate / compare.

#include <omp.h>

#include <CLI11.hpp>
#include <iostream>
#include <set>

#include "commands.hpp"
#include "ridehail/error.hpp"
#include "ridehail/kv_config.hpp"

using namespace ridehail;
using namespace ridehail::cli;

namespace {

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--min-leaf", m.min_leaf, "tree: minimum observations per leaf");
  app->add_option("--min-branch", m.min_branch, "tree: minimum observations to split a node");
  app->add_option("--max-depth", m.max_depth, "tree: maximum depth (default unlimited)");
  app->add_option("--trees", m.trees, "bdt/rf: number of trees");
  app->add_option("--delta", m.delta, "rf: percent of predictors tried per split (default n_p/3)");
  app->add_option("--iterations", m.iterations, "gbdt: boosting iterations M");
  app->add_option("--beta", m.beta, "gbdt: shrinkage");
  app->add_option("--bag-fraction", m.bag_fraction, "gbdt: rows subsampled per iteration");
  app->add_option("--depth", m.depth, "gbdt: interaction depth (default number of predictors)");
  app->add_option("--min-terminal", m.min_terminal, "gbdt: minimum observations per terminal node");
  app->add_option("--hidden", m.hidden, "ann: hidden layer sizes")->delimiter(',');
  app->add_option("--dropout", m.dropout, "ann: dropout on each hidden layer's input")->delimiter(',');
  app->add_option("--learning-rate", m.learning_rate, "ann: SGD learning rate");
  app->add_option("--decay", m.decay, "ann: learning-rate decay per epoch");
  app->add_option("--momentum", m.momentum, "ann: SGD momentum");
  app->add_option("--batch", m.batch, "ann: mini-batch size");
  app->add_option("--epochs", m.epochs, "ann: training epochs");
}

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.data, "slot table CSV")->required();
  app->add_option("--districts", d.districts, "district levels in the schema (default from the table manifest)");
  app->add_option("--split", d.split, "training fraction")->check(CLI::Range(0.0, 1.0));
  app->add_option("--ranking", d.ranking, "RReliefF ranking CSV restricting the predictors");
  app->add_option("--threshold", d.threshold, "keep ranked predictors with weight above this");
}

std::string option_key(const CLI::Option* opt) {
  auto names = opt->get_lnames();
  return names.empty() ? opt->get_name() : names.front();
}

/// Resolved option values of a subcommand, defaults included.
Json resolved_options(const CLI::App* app) {
  Json j = Json::object();
  for (const auto* opt : app->get_options()) {
    const std::string key = option_key(opt);
    if (key.empty() || key == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[key] = r.size() == 1 ? Json(r.front()) : Json(r);
    } else {
      const auto def = opt->get_default_str();
      j[key] = def.empty() ? Json(nullptr) : Json(def);
    }
  }
  return j;
}

/// Finds the subcommand token: the first argument that is not a global
/// option or its value.
int subcommand_position(int argc, char** argv) {
  static const std::set<std::string> with_value = {"--seed", "--threads", "--config"};
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (with_value.count(a)) {
      ++i;
      continue;
    }
    if (a.rfind("--", 0) == 0 || a == "-h") continue;
    return i;
  }
  return -1;
}

std::string config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

/// Expands `key = value` lines of --config into subcommand flags. Flags
/// given on the command line win; keys the subcommand does not know are
/// rejected.
std::vector<std::string> with_config(int argc, char** argv, CLI::App& app) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto path = config_path(argc, argv);
  if (path.empty()) return args;
  const int pos = subcommand_position(argc, argv);
  if (pos < 0) throw Error(ErrorCategory::Usage, "--config needs a subcommand");
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(argv[pos]);
  } catch (const CLI::OptionNotFound&) {
    throw Error(ErrorCategory::Usage, std::string("unknown subcommand '") + argv[pos] + "'");
  }
  std::set<std::string> known;
  for (const auto* opt : sub->get_options()) known.insert(option_key(opt));
  const auto cfg = KeyValueConfig::load(path);
  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.entries()) {
    if (!known.count(key) || key == "help") {
      throw Error(ErrorCategory::Config, "unknown key '" + key + "' for '" + sub->get_name() + "' in " + path);
    }
    bool given = false;
    for (int i = pos + 1; i < argc; ++i) {
      const std::string a = argv[i];
      given = given || a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
    }
    if (!given) injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + pos, injected.begin(), injected.end());
  return args;
}

int fail(ErrorCategory category, const std::string& message) {
  std::cerr << "error:" << to_string(category) << ":" << message << '\n';
  return category == ErrorCategory::Usage ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ride-hailing demand forecasting: synthetic data, RReliefF, trees, boosting, networks"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "key = value file with subcommand options");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic city's raw requests and conditions");
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--days", synth.days, "days to simulate");
  c_synth->add_option("--districts", synth.districts, "number of districts");
  c_synth->add_option("--profile", synth.profile, "key = value city profile");

  AggregateOptions agg;
  auto* c_agg = app.add_subcommand("aggregate", "aggregate raw requests into 10-minute slots");
  c_agg->add_option("--in", agg.in, "synth output directory");
  c_agg->add_option("--requests", agg.requests, "raw request CSV (instead of --in)");
  c_agg->add_option("--out", agg.out, "slot table CSV")->required();
  c_agg->add_option("--districts", agg.districts, "number of districts");
  c_agg->add_option("--days", agg.days, "number of days");
  c_agg->add_option("--start-dow", agg.start_dow, "weekday of day 0 (1 = Monday)");

  SelectOptions sel;
  auto* c_sel = app.add_subcommand("select", "rank predictors with RReliefF");
  c_sel->add_option("--data", sel.data, "slot table CSV")->required();
  c_sel->add_option("--out", sel.out, "ranking CSV")->required();
  c_sel->add_option("--districts", sel.districts, "district levels in the schema");
  c_sel->add_option("--k", sel.k, "nearest neighbours");
  c_sel->add_option("--sigma", sel.sigma, "rank-weight scale");
  c_sel->add_option("--m", sel.m, "sampled instances (default min(n, 1000))");
  c_sel->add_option("--threshold", sel.threshold, "selection threshold");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "fit one model on the training split");
  add_data_options(c_train, train.data);
  c_train->add_option("--model", train.model, "dt, bdt, rf, gbdt or ann")->required();
  c_train->add_option("--out", train.out, "model directory")->required();
  add_model_options(c_train, train.params);

  EvaluateOptions ev;
  auto* c_eval = app.add_subcommand("evaluate", "score a saved model");
  c_eval->add_option("--data", ev.data, "slot table CSV")->required();
  c_eval->add_option("--districts", ev.districts, "district levels in the schema");
  c_eval->add_option("--model", ev.model, "model directory")->required();
  c_eval->add_option("--out", ev.out, "report directory")->required();
  c_eval->add_option("--on", ev.on, "validation, train or all");

  CompareOptions cmp;
  auto* c_cmp = app.add_subcommand("compare", "fit and score several models on one split");
  add_data_options(c_cmp, cmp.data);
  c_cmp->add_option("--models", cmp.models, "models to compare")->delimiter(',');
  c_cmp->add_option("--out", cmp.out, "output directory")->required();
  add_model_options(c_cmp, cmp.params);

  app.option_defaults()->always_capture_default();
  for (auto* sub : app.get_subcommands({})) {
    for (auto* opt : sub->get_options()) opt->always_capture_default();
  }

  try {
    auto args = with_config(argc, argv, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCategory::Usage, e.what());
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  }

  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (*c_synth) run_synth(g, synth, resolved_options(c_synth));
    if (*c_agg) run_aggregate(g, agg, resolved_options(c_agg));
    if (*c_sel) run_select(g, sel, resolved_options(c_sel));
    if (*c_train) run_train(g, train, resolved_options(c_train));
    if (*c_eval) run_evaluate(g, ev, resolved_options(c_eval));
    if (*c_cmp) run_compare(g, cmp, resolved_options(c_cmp));
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ErrorCategory::Io, e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCategory::State, e.what());
  }
  return 0;
}
