#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "deepck/classifier.hpp"
#include "deepck/core_types.hpp"
#include "deepck/corpus.hpp"
#include "deepck/depth_metrics.hpp"
#include "deepck/lm/bigram.hpp"
#include "deepck/stopwords.hpp"

namespace deepck::cli {

namespace fs = std::filesystem;

/// Options every command shares, plus the run directory and the files written so far.
class Run {
 public:
  Run(CLI::App& app, std::string command) : app_(app), command_(std::move(command)) {
    app_.set_config("--config", "", "File of \"key = value\" lines; flags given on the command line win");
    app_.allow_config_extras(CLI::config_extras_mode::error);
    app_.add_option("--out-dir", out_dir_, "Run directory (default: $DEEPCK_RUN_DIR/<command>, or runs/<command>)");
    app_.add_option("--seed", seed_, "Random seed")->capture_default_str();
  }

  const std::string& command() const { return command_; }
  std::uint64_t seed() const { return seed_; }

  /// Resolves and creates the run directory; call after parsing.
  void start() {
    if (out_dir_.empty()) {
      const char* root = std::getenv("DEEPCK_RUN_DIR");
      out_dir_ = (fs::path(root && *root ? root : "runs") / command_).string();
    }
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) throw Error("cannot create run directory '" + out_dir_ + "': " + ec.message());
  }

  fs::path path(const std::string& name) const { return fs::path(out_dir_) / name; }

  std::ofstream create(const std::string& name, bool binary = false) {
    const auto p = path(name);
    std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    outputs_.push_back(name);
    return out;
  }

  void note_output(const std::string& name) { outputs_.push_back(name); }

  void set_summary(const std::string& key, nlohmann::json value) { summary_[key] = std::move(value); }

  /// manifest.json: command, every option's effective value, seed and outputs. No clock
  /// or host data, so identical configs give identical manifests.
  void finish() {
    nlohmann::json options = nlohmann::json::object();
    for (const auto* opt : app_.get_options()) {
      const auto name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config" || name == "out-dir") continue;
      const auto& res = opt->results();
      if (!res.empty())
        options[name] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
      else
        options[name] = opt->get_default_str();
    }
    nlohmann::json m{{"format", "deepck-run-1"}, {"command", command_}, {"seed", seed_},
                     {"options", options},     {"outputs", outputs_}};
    if (!summary_.empty()) m["summary"] = summary_;
    std::ofstream out(path("manifest.json"));
    out << m.dump(2) << '\n';
    if (!out) throw Error("cannot write run manifest");
  }

 private:
  CLI::App& app_;
  std::string command_;
  std::string out_dir_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> outputs_;
  nlohmann::json summary_ = nlohmann::json::object();
};

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ParseError(0, "cannot read '" + path + "'");
  return in;
}

/// Re-throws parse errors with the file name attached.
template <class F>
auto with_file(const std::string& path, F&& f) {
  auto in = open_input(path);
  try {
    return f(in);
  } catch (const ParseError& e) {
    throw ParseError(0, path + (e.line() ? ":" + std::to_string(e.line()) : std::string()) + ": " + e.message());
  }
}

inline std::vector<LabeledTriple> read_triples(const std::string& path) {
  return with_file(path, [](std::istream& in) { return parse_triple_file(in); });
}

inline std::vector<LabeledTriple> read_labeled_triples(const std::string& path) {
  auto triples = read_triples(path);
  for (std::size_t i = 0; i < triples.size(); ++i)
    if (!triples[i].label) throw ParseError(0, path + ": record " + std::to_string(i + 1) + " has no label");
  return triples;
}

inline Corpus read_corpus(const std::string& path, bool line_mode) {
  return with_file(path, [&](std::istream& in) { return Corpus::ingest(in, line_mode); });
}

inline StopWords read_stopword_file(const std::string& path) {
  if (path.empty()) return default_stopwords();
  return with_file(path, [](std::istream& in) { return read_stopwords(in); });
}

inline std::vector<DepthScore> read_scores(const std::string& path) {
  return with_file(path, [](std::istream& in) { return read_scores_csv(in); });
}

inline std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : text::split(s, ',')) {
    const auto t = std::string(text::trim(f));
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + t + "' is not a number");
    }
  }
  return out;
}

inline std::vector<double> parse_edges(const std::string& s, const std::string& what) {
  auto e = parse_number_list(s, what);
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i] > e[i - 1])) throw ConfigError(what + " must be strictly increasing");
  return e;
}

/// Scoring backend selection shared by score-depth and propagate.
struct BackendOptions {
  std::string kind = "toy-uniform";
  std::string table;
  std::size_t vocab_size = 50000;
  std::string external_cmd;
  std::size_t context_window = 1024;

  void add(CLI::App& app, const std::string& default_kind = "toy-uniform") {
    kind = default_kind;
    app.add_option("--backend", kind, "Scoring backend")
        ->check(CLI::IsMember({"toy-uniform", "toy-table", "external"}))
        ->capture_default_str();
    app.add_option("--table", table, "Bigram table file for --backend toy-table");
    app.add_option("--vocab-size", vocab_size, "Vocabulary size for --backend toy-uniform")
        ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}))
        ->capture_default_str();
    app.add_option("--external-cmd", external_cmd, "Shell command serving the JSON-lines scoring protocol");
    app.add_option("--context-window", context_window, "Context window of toy backends")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  std::unique_ptr<lm::Backend> make() const;
};

inline std::string fmt(double v) { return format_number(v); }

/// Registers the classifier hyperparameters as options bound to `c`.
inline void add_classifier_options(CLI::App& app, ClassifierConfig& c) {
  app.add_option("--layers", c.encoder_layers, "Encoder layers")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--heads", c.encoder_heads, "Encoder attention heads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--hidden-dim", c.hidden_dim, "Hidden size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--ffn-dim", c.ffn_dim, "Feed-forward size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--pool-heads", c.pool_heads, "Pooling-head attention heads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--k", c.k, "Evidence pairs per triple")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--lr", c.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--steps", c.train_steps, "Training steps")->capture_default_str();
  app.add_option("--batch-size", c.batch_size, "Examples per step")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--max-positions", c.max_positions, "Encoder context window")
      ->check(CLI::Range(std::size_t{8}, std::size_t{1} << 20))
      ->capture_default_str();
  app.add_option("--grad-clip", c.max_grad_norm, "Global gradient-norm clip (0 = off)")->capture_default_str();
}

inline void check_classifier_config(const ClassifierConfig& c) {
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

/// One entry per subcommand.
struct Command {
  std::string name;
  std::string help;
  std::function<void(CLI::App&, std::function<void()>&)> setup;
};

/// Command whose state type T registers its options in its constructor and runs via operator().
template <class T>
Command make_command(std::string name, std::string help) {
  return {std::move(name), std::move(help), [](CLI::App& app, std::function<void()>& run) {
            auto s = std::make_shared<T>(app);
            run = [s] { (*s)(); };
          }};
}

std::vector<Command> depth_commands();
std::vector<Command> corpus_commands();
std::vector<Command> model_commands();
std::vector<Command> kb_commands();

}  // namespace deepck::cli
