#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ridehail/serialize.hpp"

namespace ridehail::cli {

struct GlobalOptions {
  std::uint64_t seed = 2016;
  int threads = 0;  // 0 = OpenMP default
  std::string config;
};

struct SynthOptions {
  std::filesystem::path out;
  int days = 21;
  int districts = 66;
  std::string profile;  // key = value file for the city profile
};

struct AggregateOptions {
  std::filesystem::path in;        // synth output directory
  std::filesystem::path requests;  // or a bare request file plus the parameters below
  std::filesystem::path out;
  std::optional<int> districts;
  std::optional<int> days;
  std::optional<int> start_dow;
};

struct SelectOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<int> districts;
  std::size_t k = 10;
  double sigma = 20.0;
  std::optional<std::size_t> m;
  double threshold = 0.0;
};

struct ModelOptions {
  std::size_t min_leaf = 1;
  std::size_t min_branch = 10;
  std::optional<std::size_t> max_depth;
  std::size_t trees = 100;
  std::optional<double> delta;
  std::size_t iterations = 300;
  double beta = 0.1;
  double bag_fraction = 0.7;
  std::optional<std::size_t> depth;
  std::size_t min_terminal = 10;
  std::vector<std::size_t> hidden = {64, 32};
  std::vector<double> dropout = {0.6, 0.05};
  double learning_rate = 1e-4;
  double decay = 0.01;
  double momentum = 0.9;
  std::size_t batch = 150;
  std::size_t epochs = 200;
};

struct DataOptions {
  std::filesystem::path data;
  std::optional<int> districts;
  double split = 0.7;
  std::filesystem::path ranking;  // optional RReliefF ranking to restrict predictors
  double threshold = 0.0;
};

struct TrainOptions {
  DataOptions data;
  std::string model;
  std::filesystem::path out;
  ModelOptions params;
};

struct EvaluateOptions {
  std::filesystem::path data;
  std::optional<int> districts;
  std::filesystem::path model;
  std::filesystem::path out;
  std::string on = "validation";
};

struct CompareOptions {
  DataOptions data;
  std::vector<std::string> models = {"dt", "bdt", "rf", "gbdt", "ann"};
  std::filesystem::path out;
  ModelOptions params;
};

/// Each command throws ridehail::Error on failure.
void run_synth(const GlobalOptions& g, const SynthOptions& o, const Json& resolved);
void run_aggregate(const GlobalOptions& g, const AggregateOptions& o, const Json& resolved);
void run_select(const GlobalOptions& g, const SelectOptions& o, const Json& resolved);
void run_train(const GlobalOptions& g, const TrainOptions& o, const Json& resolved);
void run_evaluate(const GlobalOptions& g, const EvaluateOptions& o, const Json& resolved);
void run_compare(const GlobalOptions& g, const CompareOptions& o, const Json& resolved);

}  // namespace ridehail::cli
