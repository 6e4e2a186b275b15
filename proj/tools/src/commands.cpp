#include "otm_cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "otm/error.hpp"
#include "otm/metrics.hpp"
#include "otm/synth_data.hpp"
#include "otm/toy_oracle.hpp"
#include "otm/trainer.hpp"
#include "otm_cli/config.hpp"

namespace otm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

Tree load_tree(const fs::path& path) {
  try {
    return Tree::from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  try {
    return checkpoint_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <class Parse>
auto parse_name(const std::string& key, const std::string& value, Parse parse) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
}

}  // namespace

json synth_gen(const json& config, const fs::path& out) {
  ConfigReader r(config, "synth-gen config");
  SyntheticSpec spec;
  spec.num_targets = r.count("num_targets", spec.num_targets);
  spec.feature_dim = r.count("feature_dim", spec.feature_dim);
  spec.bias = r.real("bias", spec.bias);
  spec.n_train = r.count("n_train", spec.n_train);
  spec.n_test = r.count("n_test", spec.n_test);
  spec.seed = r.seed("seed", spec.seed);
  r.finish();
  spec.validate();

  const json effective{{"num_targets", spec.num_targets}, {"feature_dim", spec.feature_dim},
                       {"bias", spec.bias},           {"n_train", spec.n_train},
                       {"n_test", spec.n_test},       {"seed", spec.seed}};
  prepare_out(out);
  const SyntheticData data = gen_synthetic(spec);
  save_dataset((out / "train.jsonl").string(), data.train);
  if (spec.n_test > 0) save_dataset((out / "test.jsonl").string(), data.test);
  write_json(out / "manifest.json", effective);
  return effective;
}

json train(const json& config, const fs::path& out) {
  ConfigReader r(config, "train config");
  const std::string train_path = r.string("train_data");
  const std::optional<std::string> tree_path =
      r.has("tree") ? std::optional(r.string("tree")) : std::nullopt;
  const bool explicit_arity = r.has("arity");
  const std::size_t arity = r.count("arity", 2);

  TrainConfig tc;
  tc.method = parse_name("method", r.string("method", std::string(to_string(tc.method))),
                         parse_train_method);
  const ProbabilityModel model =
      r.has("model") ? parse_name("model", r.string("model"), parse_probability_model)
                     : required_model(tc.method);
  tc.beam_size = r.count("beam_size", tc.beam_size);
  tc.negatives_per_level = r.count("negatives_per_level", tc.negatives_per_level);
  tc.epochs = r.count("epochs", tc.epochs);
  tc.batch_size = r.count("batch_size", tc.batch_size);
  tc.learning_rate = r.real("learning_rate", tc.learning_rate);
  tc.adam_beta1 = r.real("adam_beta1", tc.adam_beta1);
  tc.adam_beta2 = r.real("adam_beta2", tc.adam_beta2);
  tc.adam_epsilon = r.real("adam_epsilon", tc.adam_epsilon);
  tc.init_stddev = r.real("init_stddev", tc.init_stddev);
  tc.seed = r.seed("seed", tc.seed);
  r.finish();
  tc.validate();
  if (model != required_model(tc.method)) {
    throw ConfigError(std::string(to_string(tc.method)) + " requires the " +
                      std::string(to_string(required_model(tc.method))) + " model");
  }
  if (arity < 2) throw ConfigError("'arity' must be at least 2");

  const Dataset data = load_dataset(train_path);
  if (data.empty()) throw DataError("training set " + train_path + " is empty");
  Tree tree = tree_path ? load_tree(*tree_path)
                        : Tree::build_random(data.header.num_targets, arity, tc.seed);
  if (tree_path && explicit_arity && tree.arity() != arity) {
    throw ConfigError("'arity' disagrees with the arity of " + *tree_path);
  }
  if (tree.num_targets() != data.header.num_targets) {
    throw DataError("tree and training set disagree on the number of targets");
  }

  json effective{{"train_data", train_path},
                 {"method", to_string(tc.method)},
                 {"model", to_string(model)},
                 {"beam_size", tc.beam_size},
                 {"negatives_per_level", tc.negatives_per_level},
                 {"epochs", tc.epochs},
                 {"batch_size", tc.batch_size},
                 {"learning_rate", tc.learning_rate},
                 {"adam_beta1", tc.adam_beta1},
                 {"adam_beta2", tc.adam_beta2},
                 {"adam_epsilon", tc.adam_epsilon},
                 {"init_stddev", tc.init_stddev},
                 {"seed", tc.seed}};
  if (tree_path) effective["tree"] = *tree_path;
  if (explicit_arity || !tree_path) effective["arity"] = arity;

  prepare_out(out);
  const TrainResult result = otm::train(data, tree, model, tc);
  write_json(out / "checkpoint.json", checkpoint_to_json(result.params, model));
  write_json(out / "tree.json", tree.to_json());
  write_text(out / "train_log.csv", training_log_csv(result.log));
  write_json(out / "train_config.json", effective);
  return effective;
}

json evaluate(const json& config, const fs::path& out) {
  ConfigReader r(config, "evaluate config");
  const std::string checkpoint_path = r.string("checkpoint");
  const std::string tree_path = r.string("tree");
  const std::string test_path = r.string("test_data");
  const std::size_t k = r.count("beam_size", 50);
  const std::vector<std::size_t> ms = r.counts("m_values", std::vector<std::size_t>{1, 10, 20, 50});
  const std::string regret = r.string("regret", "auto");
  r.finish();
  if (regret != "auto" && regret != "required" && regret != "off") {
    throw ConfigError("'regret' must be \"auto\", \"required\" or \"off\"");
  }
  if (k < 1) throw ConfigError("'beam_size' must be at least 1");
  if (ms.empty()) throw ConfigError("'m_values' must not be empty");
  for (const std::size_t m : ms) {
    if (m < 1 || m > k) throw ConfigError("every m must lie in [1, beam_size]");
  }

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Tree tree = load_tree(tree_path);
  const Dataset test = load_dataset(test_path);
  if (ckpt.params.num_nodes() != tree.num_nodes()) {
    throw DataError("checkpoint and tree disagree on the number of nodes");
  }
  if (test.header.num_targets != tree.num_targets()) {
    throw DataError("test set and tree disagree on the number of targets");
  }
  if (test.header.feature_dim != ckpt.params.feature_dim()) {
    throw DataError("test set and checkpoint disagree on the feature dimension");
  }
  if (test.empty()) throw DataError("test set " + test_path + " is empty");
  for (const std::size_t m : ms) {
    if (m > tree.num_targets()) throw ConfigError("m exceeds the number of targets");
  }
  const bool all_eta = std::all_of(test.instances.begin(), test.instances.end(),
                                   [](const Instance& i) { return i.has_eta(); });
  if (regret == "required" && !all_eta) {
    throw DataError("regret requested but the test set lacks eta");
  }

  const NodeScorer scorer(tree, ckpt.params, ckpt.model);
  std::vector<EvaluationRow> rows = otm::evaluate(scorer, test, k, ms);
  if (regret == "off") {
    for (auto& row : rows) row.regret.reset();
  }

  const json effective{{"checkpoint", checkpoint_path}, {"tree", tree_path},
                       {"test_data", test_path},        {"beam_size", k},
                       {"m_values", ms},                {"regret", regret}};
  json summary{{"config", effective}, {"model", to_string(ckpt.model)}, {"rows", json::array()}};
  for (const auto& row : rows) {
    summary["rows"].push_back({{"k", row.k},
                               {"m", row.m},
                               {"instances", row.instances},
                               {"regret", row.regret ? json(*row.regret) : json(nullptr)},
                               {"precision", row.precision},
                               {"recall", row.recall},
                               {"f_measure", row.f_measure},
                               {"recall_skipped", row.recall_skipped}});
  }
  prepare_out(out);
  write_text(out / "metrics.csv", evaluation_csv(rows));
  write_json(out / "summary.json", summary);
  return effective;
}

json toy(const json& config, const fs::path& out) {
  ConfigReader r(config, "toy config");
  ToyGrid grid;
  grid.num_targets = r.count("num_targets", grid.num_targets);
  grid.arity = r.count("arity", grid.arity);
  const auto estimator_names = r.strings("estimators", std::vector<std::string>{"DirEst"});
  grid.estimators.clear();
  for (const auto& name : estimator_names) {
    grid.estimators.push_back(parse_name("estimators", name, parse_estimator));
  }

  json sizes_echo = json::array();
  grid.sample_sizes.clear();
  if (r.has("sample_sizes")) {
    const json& sizes = r.raw("sample_sizes");
    if (!sizes.is_array()) throw ConfigError("'sample_sizes' must be an array");
    for (const json& s : sizes) {
      if (s.is_string() && s.get<std::string>() == "inf") {
        grid.sample_sizes.push_back(SampleSize::infinite());
      } else if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
        grid.sample_sizes.push_back(SampleSize::finite(s.get<std::size_t>()));
      } else {
        throw ConfigError("'sample_sizes' entries must be positive integers or \"inf\"");
      }
      sizes_echo.push_back(s);
    }
  } else {
    grid.sample_sizes.push_back(SampleSize::infinite());
    sizes_echo.push_back("inf");
  }

  const auto ks = r.counts("beam_sizes", std::vector<std::size_t>{1});
  json m_echo = "diagonal";
  if (r.has("m") && r.raw("m").is_array()) {
    const auto ms = r.counts("m");
    grid.cells = triangle_cells(ks, ms);
    m_echo = ms;
  } else {
    const std::string layout = r.string("m", "diagonal");
    if (layout == "diagonal") {
      grid.cells = diagonal_cells(ks);
    } else if (layout == "triangle") {
      grid.cells = triangle_cells(ks, ks);
    } else {
      throw ConfigError("'m' must be \"diagonal\", \"triangle\" or an array of integers");
    }
    m_echo = layout;
  }
  grid.runs = r.count("runs", grid.runs);
  grid.seed = r.seed("seed", grid.seed);
  grid.limit_precision = parse_name(
      "limit_precision", r.string("limit_precision", std::string(to_string(grid.limit_precision))),
      parse_limit_precision);
  r.finish();
  grid.validate();

  json effective{{"num_targets", grid.num_targets},
                 {"arity", grid.arity},
                 {"estimators", estimator_names},
                 {"sample_sizes", sizes_echo},
                 {"beam_sizes", ks},
                 {"m", m_echo},
                 {"runs", grid.runs},
                 {"seed", grid.seed},
                 {"limit_precision", to_string(grid.limit_precision)}};
  prepare_out(out);
  const auto cells = run_toy_grid(grid);
  write_text(out / "toy.csv", toy_csv(cells));
  write_json(out / "toy_config.json", effective);
  return effective;
}

json stats(const json& config, const fs::path& out) {
  ConfigReader r(config, "stats config");
  const std::string data_path = r.string("train_data");
  const std::string tree_path = r.string("tree");
  const std::size_t level = r.count("level");
  r.finish();

  const Tree tree = load_tree(tree_path);
  if (level < 1 || level > tree.height()) {
    throw ConfigError("'level' must lie in [1, " + std::to_string(tree.height()) + "]");
  }
  const Dataset data = load_dataset(data_path);
  if (data.header.num_targets != tree.num_targets()) {
    throw DataError("dataset and tree disagree on the number of targets");
  }
  const auto dist = level_distribution(data, tree, level);

  std::ostringstream csv;
  csv.precision(17);
  csv << "rank,mass\n";
  for (std::size_t i = 0; i < dist.size(); ++i) csv << i + 1 << ',' << dist[i] << '\n';

  const json effective{{"train_data", data_path}, {"tree", tree_path}, {"level", level}};
  prepare_out(out);
  write_text(out / "level_distribution.csv", csv.str());
  write_json(out / "stats_config.json", effective);
  return effective;
}

int main(int argc, char** argv) {
  CLI::App app{"Tree models for top-k retrieval: data generation, training and evaluation"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  struct Entry {
    const char* name;
    const char* help;
    json (*run)(const json&, const fs::path&);
    bool seeded;
  };
  const Entry entries[] = {
      {"synth-gen", "Generate a synthetic train/test pair", &synth_gen, true},
      {"train", "Train a tree model", &train, true},
      {"evaluate", "Beam search a test set and report metrics", &evaluate, false},
      {"toy", "Run the feature-free estimator experiments", &toy, true},
      {"stats", "Level-wise relevance distribution of a dataset", &stats, false},
  };
  for (const Entry& e : entries) app.add_subcommand(e.name, e.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const Entry& e : entries) {
      if (!app.got_subcommand(e.name)) continue;
      json config = load_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
      if (!config.is_object()) throw ConfigError("config must be a JSON object");
      if (seed) {
        if (!e.seeded) throw ConfigError(std::string(e.name) + " does not take a seed");
        config["seed"] = *seed;
      }
      e.run(config, out_dir);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace otm::cli
