#include "bichunter/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bichunter/checkpoint.hpp"
#include "bichunter/config.hpp"
#include "bichunter/dataset.hpp"
#include "bichunter/denoise.hpp"
#include "bichunter/embedding.hpp"
#include "bichunter/error.hpp"
#include "bichunter/metrics.hpp"
#include "bichunter/trainer.hpp"

namespace bichunter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string subcommand;
  std::string nodes;
  std::string edges;
  std::string embeddings;
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::string k_list = "1,2,3";
  int jobs = 1;
  std::optional<std::string> denoise;
  std::optional<std::string> denoise_scope;
  std::optional<std::string> classifier;
  std::optional<std::string> threshold_mode;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::string test_projects;
  std::vector<std::string> settings;  // --set key=value
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  for (const std::string& item : split_list(text)) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("invalid --k entry '" + item + "'");
    }
  }
  if (ks.empty()) throw ConfigError("--k needs at least one cutoff");
  return ks;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(flag) + " file '" + path + "' does not exist");
}

TrainConfig resolve_config(const Options& o) {
  TrainConfig config;
  std::set<std::string> file_keys;
  if (!o.config.empty()) config = load_config(o.config, &file_keys);
  if (!file_keys.contains("seed")) {
    if (const char* env = std::getenv("BICHUNTER_SEED"); env && *env) config.set("seed", env);
  }
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    config.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) config.seed = *o.seed;
  if (o.denoise) config.set("denoise", *o.denoise);
  if (o.denoise_scope) config.set("denoise_scope", *o.denoise_scope);
  if (o.classifier) config.set("classifier", *o.classifier);
  if (o.threshold_mode) config.set("threshold_mode", *o.threshold_mode);
  if (o.epochs) config.epochs = *o.epochs;
  if (o.learning_rate) config.learning_rate = *o.learning_rate;
  if (o.subcommand == "denoise" && o.folds) config.cl_folds = *o.folds;
  config.validate();
  return config;
}

EmbeddingMatrix resolve_embeddings(const Options& o, const DatasetIndex& index, const TrainConfig& config) {
  if (!o.embeddings.empty()) return load_precomputed(o.embeddings, index);
  return embed_dataset(index, config.embedding_dim, kHashEmbeddingSeed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

std::string loss_csv(const std::vector<double>& trace) {
  std::ostringstream os;
  os << "epoch,mean_pair_loss\n";
  os << std::setprecision(17);
  for (std::size_t e = 0; e < trace.size(); ++e) os << (e + 1) << ',' << trace[e] << '\n';
  return os.str();
}

fs::path require_out_dir(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

// Run metadata lives beside the reports so the reports stay byte-reproducible.
void write_sidecar(const fs::path& dir, const Options& o, const TrainConfig& config) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream stamp;
  stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  const json meta = {{"subcommand", o.subcommand}, {"finished_at", stamp.str()}, {"nodes", o.nodes},
                     {"edges", o.edges},           {"embeddings", o.embeddings}, {"config", config.canonical()}};
  write_text(dir / "run_meta.json", meta.dump(2) + "\n");
}

json validation_summary(const DatasetIndex& index) {
  json projects = json::object();
  for (const auto& [project, commits] : index.projects()) projects[project] = commits.size();
  std::size_t deleted = 0;
  std::size_t roots = 0;
  for (const LineNode& n : index.nodes()) {
    deleted += n.role == Role::deleted;
    roots += n.root_cause;
  }
  return {{"nodes", index.node_count()},
          {"edges", index.edge_count()},
          {"commits", index.all_commits().size()},
          {"usable_commits", index.commits().size()},
          {"excluded_commits", index.excluded_commits()},
          {"deleted_nodes", deleted},
          {"root_cause_nodes", roots},
          {"projects", projects},
          {"warnings", index.warnings()}};
}

json experiment_json(const ExperimentResult& result) {
  json folds = json::array();
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    json fold = to_json(result.folds[f].report);
    fold["fold"] = f;
    fold["train_commits"] = result.folds[f].split.train.size();
    fold["test_commits"] = result.folds[f].split.test.size();
    fold["removed_nodes"] = result.folds[f].training.removed_nodes.size();
    folds.push_back(std::move(fold));
  }
  return {{"mean", to_json(result.mean)}, {"folds", std::move(folds)}};
}

int dispatch(const Options& o, std::ostream& out) {
  require_file(o.nodes, "--nodes");
  require_file(o.edges, "--edges");
  if (!o.config.empty()) require_file(o.config, "--config");
  if (!o.embeddings.empty()) require_file(o.embeddings, "--embeddings");
  if (o.subcommand == "rank" || o.subcommand == "eval") require_file(o.checkpoint, "--checkpoint");

  const TrainConfig config = resolve_config(o);
  const std::vector<int> ks = parse_ks(o.k_list);
  const DatasetIndex index = load_dataset(o.nodes, o.edges);

  if (o.subcommand == "validate") {
    const std::string text = validation_summary(index).dump(2) + "\n";
    out << text;
    if (!o.out.empty()) write_text(o.out, text);
    return 0;
  }

  const EmbeddingMatrix embeddings = resolve_embeddings(o, index, config);
  const CheckpointMeta meta{config.seed, config.hash()};

  if (o.subcommand == "denoise") {
    if (o.out.empty()) throw ConfigError("--out is required");
    const DatasetNoise noise = denoise_commits(index, index.commits(), config, embeddings);
    std::ofstream file(o.out, std::ios::binary);
    if (!file) throw DataError("cannot write '" + o.out + "'");
    write_noise_report(file, noise.node_ids, noise.result.report);
    out << "removed " << noise.result.report.removed_samples().size() << " of " << noise.node_ids.size()
        << " deleted lines\n";
    return 0;
  }
  if (o.subcommand == "train") {
    const fs::path dir = require_out_dir(o);
    const TrainResult result = train(index, index.commits(), config, embeddings);
    save_checkpoint(dir / "model.ckpt", result.model, meta);
    write_text(dir / "loss.csv", loss_csv(result.loss_trace));
    write_sidecar(dir, o, config);
    out << "trained on " << index.commits().size() << " commits; final loss " << result.loss_trace.back() << "\n";
    return 0;
  }
  if (o.subcommand == "rank" || o.subcommand == "eval") {
    const RankModel model = load_checkpoint(o.checkpoint);
    if (model.input_dim() != embeddings.dim()) {
      throw ShapeError("checkpoint expects " + std::to_string(model.input_dim()) + "-d embeddings, dataset has " +
                       std::to_string(embeddings.dim()));
    }
    const auto rankings = rank_commits(model, index, index.commits(), embeddings, config.edge_weight);
    const std::string text = o.subcommand == "rank" ? to_json(rankings).dump(2) + "\n"
                                                    : to_json(evaluate(rankings, root_causes(index), ks)).dump(2) + "\n";
    if (o.out.empty()) {
      out << text;
    } else {
      write_text(o.out, text);
    }
    return 0;
  }
  if (o.subcommand == "xval") {
    const fs::path dir = require_out_dir(o);
    const ExperimentResult result = run_kfold(index, config, embeddings, o.folds.value_or(10), ks, o.jobs);
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
      std::ostringstream name;
      name << "fold_" << std::setw(2) << std::setfill('0') << f;
      save_checkpoint(dir / (name.str() + ".ckpt"), result.folds[f].training.model, meta);
      write_text(dir / (name.str() + ".loss.csv"), loss_csv(result.folds[f].training.loss_trace));
      write_text(dir / (name.str() + ".rankings.json"), to_json(result.folds[f].rankings).dump(2) + "\n");
    }
    write_text(dir / "report.json", experiment_json(result).dump(2) + "\n");
    write_text(dir / "first_ranks.csv", first_ranks_csv(result.mean));
    write_sidecar(dir, o, config);
    out << to_json(result.mean).dump(2) << "\n";
    return 0;
  }
  if (o.subcommand == "xproject") {
    const fs::path dir = require_out_dir(o);
    const auto list = split_list(o.test_projects);
    const ExperimentResult result =
        run_cross_project(index, config, embeddings, std::set<std::string>(list.begin(), list.end()), ks);
    save_checkpoint(dir / "model.ckpt", result.folds.front().training.model, meta);
    write_text(dir / "loss.csv", loss_csv(result.folds.front().training.loss_trace));
    write_text(dir / "rankings.json", to_json(result.folds.front().rankings).dump(2) + "\n");
    write_text(dir / "report.json", experiment_json(result).dump(2) + "\n");
    write_sidecar(dir, o, config);
    out << to_json(result.mean).dump(2) << "\n";
    return 0;
  }
  throw ConfigError("unknown subcommand '" + o.subcommand + "'");
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank the deleted lines of bug-fixing commits by root-cause likelihood", "bichunter"};
  app.require_subcommand(1, 1);
  Options o;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "Load and check a dataset, print node/edge totals"},
      {"denoise", "Run confident learning over deleted lines, write a noise report"},
      {"train", "Train a ranking model on every commit"},
      {"rank", "Rank the deleted lines of every commit with a checkpoint"},
      {"eval", "Evaluate a checkpoint (Recall@N, MFR)"},
      {"xval", "k-fold cross-validation"},
      {"xproject", "Cross-project train/test run"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--nodes", o.nodes, "Nodes JSONL file")->required();
    sub->add_option("--edges", o.edges, "Edges JSONL file")->required();
    sub->add_option("--out", o.out, "Output file or directory");
    if (name == "validate") continue;
    sub->add_option("--embeddings", o.embeddings, "Precomputed embeddings (JSONL or BICEMB01 binary)");
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--seed", o.seed, "Run seed (fallback: BICHUNTER_SEED)");
    sub->add_option("--k", o.k_list, "Recall cutoffs, comma separated")->capture_default_str();
    sub->add_option("--denoise", o.denoise, "on|off")->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--denoise-scope", o.denoise_scope, "fold|global")->check(CLI::IsMember({"fold", "global"}));
    sub->add_option("--classifier", o.classifier, "lr|knn")->check(CLI::IsMember({"lr", "knn"}));
    sub->add_option("--threshold-mode", o.threshold_mode, "class_conditional|global")
        ->check(CLI::IsMember({"class_conditional", "global"}));
    sub->add_option("--epochs", o.epochs, "Training epochs");
    sub->add_option("--learning-rate", o.learning_rate, "Adam learning rate");
    sub->add_option("--set", o.settings, "Extra config setting key=value (repeatable)");
    if (name == "rank" || name == "eval") sub->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
    if (name == "xval" || name == "denoise") {
      sub->add_option("--folds", o.folds, name == "xval" ? "Evaluation folds (default 10)" : "Confident-learning folds");
    }
    if (name == "xval") sub->add_option("--jobs", o.jobs, "Folds trained in parallel")->capture_default_str();
    if (name == "xproject") sub->add_option("--test-projects", o.test_projects, "Comma-separated project ids")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }
  for (CLI::App* sub : app.get_subcommands()) o.subcommand = sub->get_name();

  try {
    return dispatch(o, out);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << one_line(e.what()) << "\n";
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
  }
  return 1;
}

}  // namespace bichunter
