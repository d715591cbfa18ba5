#include <algorithm>
#include <unordered_map>

#include "common.hpp"
#include "deepck/checkpoint.hpp"
#include "deepck/eval.hpp"
#include "deepck/experiments.hpp"
#include "deepck/plot.hpp"

namespace deepck::cli {

namespace {

constexpr const char* kEvalHeader = "precision,recall,f1,accuracy,tp,fp,tn,fn,precision_undefined,recall_undefined,f1_undefined";

std::string eval_fields(const EvalReport& r) {
  return fmt(r.precision) + ',' + fmt(r.recall) + ',' + fmt(r.f1) + ',' + fmt(r.accuracy) + ',' + std::to_string(r.tp) +
         ',' + std::to_string(r.fp) + ',' + std::to_string(r.tn) + ',' + std::to_string(r.fn) + ',' +
         std::to_string(int(r.precision_undefined)) + ',' + std::to_string(int(r.recall_undefined)) + ',' +
         std::to_string(int(r.f1_undefined));
}

/// Training and test material: either generated (--synthetic) or read from triple files
/// and a corpus. Evidence is retrieved once with the largest K needed.
struct Dataset {
  Corpus corpus;
  lm::Vocabulary vocab;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> test;
  bool synthetic = false;

  static std::vector<LabeledTriple> triples_of(const std::vector<TrainingExample>& ex) {
    std::vector<LabeledTriple> out;
    for (const auto& e : ex) {
      auto t = e.evidence.triple;
      t.label = e.label;
      out.push_back(std::move(t));
    }
    return out;
  }
};

struct DataOptions {
  std::size_t synthetic = 0;
  std::size_t train_count = 0;
  double noise = 0.05;
  std::string train_triples, test_triples, corpus, stopwords;
  bool line_mode = false;
  std::size_t sentence_cap = kDefaultSentenceCap;

  void add(CLI::App& app) {
    app.add_option("--synthetic", synthetic, "Generate this many synthetic triples instead of reading files")
        ->capture_default_str();
    app.add_option("--train-count", train_count, "Synthetic triples used for training (default: 80%)")
        ->capture_default_str();
    app.add_option("--noise", noise, "Synthetic per-sentence cue flip rate")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--train-triples", train_triples, "Labeled training triples");
    app.add_option("--test-triples", test_triples, "Labeled test triples");
    app.add_option("--corpus", corpus, "Evidence corpus");
    app.add_flag("--line-mode", line_mode, "Corpus has one sentence per line");
    app.add_option("--stopwords", stopwords, "Stop-word file (default: built-in list)");
    app.add_option("--sentence-cap", sentence_cap, "Most recent sentences kept per term (0 = all)")
        ->capture_default_str();
  }

  Dataset load(std::size_t k, std::uint64_t seed, bool need_corpus, bool need_test) const {
    const auto sw = read_stopword_file(stopwords);
    Dataset d;
    if (synthetic > 0) {
      SyntheticConfig cfg;
      cfg.num_triples = synthetic;
      cfg.noise = noise;
      cfg.seed = seed;
      const auto n_train = train_count > 0 ? train_count : synthetic * 4 / 5;
      if (n_train == 0 || n_train >= synthetic) throw ConfigError("--train-count must leave both splits non-empty");
      try {
        auto s = prepare_synthetic(cfg, n_train, k, sw);
        d.corpus = std::move(s.corpus);
        d.vocab = std::move(s.vocab);
        d.train = std::move(s.train);
        d.test = std::move(s.heldout);
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
      d.synthetic = true;
      return d;
    }
    if (train_triples.empty()) throw ConfigError("need --synthetic N or --train-triples");
    if (need_corpus && corpus.empty()) throw ConfigError("context models need --corpus");
    if (need_test && test_triples.empty()) throw ConfigError("need --test-triples");
    const auto train = read_labeled_triples(train_triples);
    const auto test = test_triples.empty() ? std::vector<LabeledTriple>{} : read_labeled_triples(test_triples);
    if (train.empty()) throw ParseError(0, train_triples + ": no triples");
    if (!corpus.empty()) d.corpus = read_corpus(corpus, line_mode);
    std::vector<std::string> texts;
    for (const auto& s : d.corpus.sentences()) texts.push_back(s.text);
    for (const auto& t : train) texts.push_back(render_template(t).text);
    d.vocab = nn::build_vocabulary(texts);
    for (const auto& t : train) d.train.push_back({select_evidence(t, d.corpus, k, sw, sentence_cap), *t.label});
    for (const auto& t : test) d.test.push_back({select_evidence(t, d.corpus, k, sw, sentence_cap), *t.label});
    return d;
  }
};

ClassifierConfig cli_default_config() { return small_classifier_config(); }

void write_loss(Run& run, const TrainReport& rep, const std::string& stem = "loss") {
  {
    auto out = run.create(stem + "_curve.csv");
    out << "step,loss\n";
    for (const auto& p : rep.loss_curve) out << p.step << ',' << fmt(p.loss) << '\n';
  }
  plot::Series s{"training loss", {}, {}};
  for (const auto& p : rep.loss_curve) {
    s.x.push_back(static_cast<double>(p.step));
    s.y.push_back(p.loss);
  }
  auto out = run.create(stem + ".svg");
  plot::write_line_plot(out, "Training loss", "step", "loss", {s});
}

std::vector<int> baseline_labels(const BaselineClassifier& m, const std::vector<TrainingExample>& ex) {
  std::vector<int> out;
  for (const auto& e : ex) {
    const auto p = m.classify(e.evidence.triple);
    out.push_back(argmax2(p[0], p[1]));
  }
  return out;
}

struct Train {
  explicit Train(CLI::App& app) : run(app, "train"), config(cli_default_config()) {
    app.add_option("--mode", mode, "Model type")->check(CLI::IsMember({"context", "baseline"}))->capture_default_str();
    data.add(app);
    add_classifier_options(app, config);
    app.add_option("--strategy", strategy, "Inference strategy for the held-out report")
        ->check(CLI::IsMember({"avg", "max", "vote"}))
        ->capture_default_str();
  }

  void operator()() {
    config.seed = run.seed();
    check_classifier_config(config);
    run.start();
    const bool context = mode == "context";
    auto d = data.load(config.k, run.seed(), context, false);
    if (d.synthetic) {
      std::filesystem::create_directories(run.path("data"));
      {
        auto out = run.create("data/train.tsv");
        write_triple_file(out, Dataset::triples_of(d.train));
      }
      {
        auto out = run.create("data/heldout.tsv");
        write_triple_file(out, Dataset::triples_of(d.test));
      }
      auto out = run.create("data/corpus.txt");
      d.corpus.write_lines(out);
    }
    std::optional<EvalReport> heldout;
    if (context) {
      auto model = ContextClassifier::create(d.vocab, config);
      write_loss(run, train(model, d.train, d.corpus));
      save_model(run.path("model"), model);
      if (!d.test.empty())
        heldout = evaluate(predict_labels(model, d.test, d.corpus, parse_strategy(strategy), config.k), gold_labels(d.test));
    } else {
      auto model = BaselineClassifier::create(d.vocab, config);
      write_loss(run, train_baseline(model, Dataset::triples_of(d.train)));
      save_model(run.path("model"), model);
      if (!d.test.empty()) heldout = evaluate(baseline_labels(model, d.test), gold_labels(d.test));
    }
    run.note_output("model");
    if (heldout) {
      auto out = run.create("heldout_eval.csv");
      out << kEvalHeader << '\n' << eval_fields(*heldout) << '\n';
      run.set_summary("heldout_accuracy", heldout->accuracy);
    }
    run.set_summary("train_examples", d.train.size());
    run.finish();
  }

  Run run;
  std::string mode = "context";
  DataOptions data;
  ClassifierConfig config;
  std::string strategy = "avg";
};

struct Predict {
  explicit Predict(CLI::App& app) : run(app, "predict") {
    app.add_option("--model", model_dir, "Model directory written by train")->required();
    app.add_option("--triples", triples, "Triples to classify")->required();
    app.add_option("--corpus", corpus, "Evidence corpus (context models)");
    app.add_flag("--line-mode", line_mode, "Corpus has one sentence per line");
    app.add_option("--strategy", strategy, "avg, max or vote")
        ->check(CLI::IsMember({"avg", "max", "vote"}))
        ->capture_default_str();
    app.add_option("--k", k, "Evidence pairs per triple (0 = the model's K)")->capture_default_str();
    app.add_option("--stopwords", stopwords, "Stop-word file (default: built-in list)");
    app.add_option("--sentence-cap", cap, "Most recent sentences kept per term (0 = all)")->capture_default_str();
  }

  void operator()() {
    run.start();
    const auto m = load_model(model_dir);
    const auto input = read_triples(triples);
    auto out = run.create("predictions.csv");
    out << "head,relation,tail,p0,p1,label,strategy\n";
    auto row = [&](const LabeledTriple& t, const ProbPair& p, int label, const std::string& s) {
      out << text::csv_field(t.head) << ',' << text::csv_field(t.relation) << ',' << text::csv_field(t.tail) << ','
          << fmt(p[0]) << ',' << fmt(p[1]) << ',' << label << ',' << s << '\n';
    };
    if (m.context) {
      if (corpus.empty()) throw ConfigError("context models need --corpus");
      const auto c = read_corpus(corpus, line_mode);
      const auto sw = read_stopword_file(stopwords);
      const auto kk = k > 0 ? k : m.context->config().k;
      const auto strat = parse_strategy(strategy);
      for (const auto& t : input) {
        const auto b = m.context->predict(select_evidence(t, c, kk, sw, cap), c, strat, kk);
        row(t, b.score, b.label, strategy);
      }
    } else {
      for (const auto& t : input) {
        const auto p = m.baseline->classify(t);
        row(t, p, argmax2(p[0], p[1]), "single");
      }
    }
    run.set_summary("mode", m.mode);
    run.finish();
  }

  Run run;
  std::string model_dir, triples, corpus, stopwords;
  bool line_mode = false;
  std::string strategy = "avg";
  std::size_t k = 0;
  std::size_t cap = kDefaultSentenceCap;
};

struct PredictionRow {
  LabeledTriple triple;
  int label = 0;
};

std::vector<PredictionRow> read_predictions(const std::string& path) {
  return with_file(path, [&](std::istream& in) {
    std::vector<PredictionRow> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      text::strip_cr(line);
      if (lineno == 1) {
        if (line != "head,relation,tail,p0,p1,label,strategy") throw ParseError(1, "unexpected predictions header");
        continue;
      }
      if (line.empty()) continue;
      const auto f = text::parse_csv_line(line);
      if (f.size() != 7) throw ParseError(lineno, "expected 7 CSV fields");
      if (f[5] != "0" && f[5] != "1") throw ParseError(lineno, "label must be 0 or 1");
      try {
        out.push_back({LabeledTriple::make(f[0], f[1], f[2]), f[5] == "1" ? 1 : 0});
      } catch (const InvalidArgument& e) {
        throw ParseError(lineno, e.what());
      }
    }
    return out;
  });
}

/// Gold labels aligned to the prediction order by triple identity.
std::vector<int> align_gold(const std::vector<PredictionRow>& preds, const std::string& gold_path) {
  std::unordered_map<std::string, int> gold;
  for (const auto& t : read_labeled_triples(gold_path)) gold[t.key()] = *t.label;
  std::vector<int> out;
  for (const auto& p : preds) {
    auto it = gold.find(p.triple.key());
    if (it == gold.end())
      throw ParseError(0, gold_path + ": no gold label for (" + p.triple.head + ", " + p.triple.relation + ", " +
                              p.triple.tail + ")");
    out.push_back(it->second);
  }
  return out;
}

std::vector<int> labels_of(const std::vector<PredictionRow>& preds) {
  std::vector<int> out;
  for (const auto& p : preds) out.push_back(p.label);
  return out;
}

struct Evaluate {
  explicit Evaluate(CLI::App& app) : run(app, "evaluate") {
    app.add_option("--predictions", predictions, "predictions.csv from predict")->required();
    app.add_option("--gold", gold, "Labeled triple file")->required();
  }

  void operator()() {
    run.start();
    const auto preds = read_predictions(predictions);
    if (preds.empty()) throw ParseError(0, predictions + ": no predictions");
    const auto r = evaluate(labels_of(preds), align_gold(preds, gold));
    auto out = run.create("eval.csv");
    out << kEvalHeader << '\n' << eval_fields(r) << '\n';
    run.set_summary("f1", r.f1);
    run.finish();
  }

  Run run;
  std::string predictions, gold;
};

struct PerfByDepth {
  explicit PerfByDepth(CLI::App& app) : run(app, "perf-by-depth") {
    app.add_option("--predictions", predictions, "predictions.csv from predict")->required();
    app.add_option("--gold", gold, "Labeled triple file")->required();
    app.add_option("--scores", scores, "scores.csv from score-depth")->required();
    app.add_option("--edges", edges, "Depth-rank range edges")->capture_default_str();
  }

  void operator()() {
    const auto e = parse_edges(edges, "--edges");
    run.start();
    const auto preds = read_predictions(predictions);
    if (preds.empty()) throw ParseError(0, predictions + ": no predictions");
    const auto g = align_gold(preds, gold);
    std::unordered_map<std::string, double> rank;
    for (const auto& s : read_scores(scores)) rank[s.triple.key()] = s.depth_rank;
    std::vector<double> ranks;
    for (const auto& p : preds) {
      auto it = rank.find(p.triple.key());
      if (it == rank.end())
        throw ParseError(0, scores + ": no depth score for (" + p.triple.head + ", " + p.triple.relation + ", " +
                                p.triple.tail + ")");
      ranks.push_back(it->second);
    }
    const auto reports = performance_by_depth(labels_of(preds), g, ranks, e);
    {
      auto out = run.create("perf_by_depth.csv");
      out << "range_low,range_high,count,empty," << kEvalHeader << '\n';
      for (const auto& r : reports)
        out << fmt(r.low) << ',' << fmt(r.high) << ',' << r.report.total() << ',' << int(r.report.empty) << ','
            << eval_fields(r.report) << '\n';
    }
    plot::Series f1{"F1", {}, {}}, acc{"accuracy", {}, {}};
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (reports[i].report.empty) continue;
      f1.x.push_back(static_cast<double>(i));
      f1.y.push_back(reports[i].report.f1);
      acc.x.push_back(static_cast<double>(i));
      acc.y.push_back(reports[i].report.accuracy);
    }
    auto out = run.create("perf_by_depth.svg");
    plot::write_line_plot(out, "Performance by depth range", "range index (ascending depth rank)", "score", {f1, acc});
    run.finish();
  }

  Run run;
  std::string predictions, gold, scores;
  std::string edges = "2000";
};

struct SweepK {
  explicit SweepK(CLI::App& app) : run(app, "sweep-k"), config(cli_default_config()) {
    data.add(app);
    add_classifier_options(app, config);
    app.add_option("--k-values", k_values, "Comma-separated K values")->capture_default_str();
    app.add_option("--mode", mode, "reinfer: one model, top-K re-selected per K; retrain: one model per K")
        ->check(CLI::IsMember({"reinfer", "retrain"}))
        ->capture_default_str();
  }

  void operator()() {
    config.seed = run.seed();
    check_classifier_config(config);
    std::vector<std::size_t> ks;
    for (double v : parse_number_list(k_values, "--k-values")) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) throw ConfigError("--k-values must be positive integers");
      ks.push_back(static_cast<std::size_t>(v));
    }
    if (ks.empty()) throw ConfigError("--k-values is empty");
    run.start();
    const auto kmax = std::max(*std::max_element(ks.begin(), ks.end()), config.k);
    const auto d = data.load(kmax, run.seed(), true, true);
    if (d.test.empty()) throw ConfigError("sweep needs test examples");
    const auto gold = gold_labels(d.test);

    std::map<std::pair<std::size_t, Strategy>, EvalReport> grid;
    std::optional<ContextClassifier> shared;
    if (mode == "reinfer") {
      shared.emplace(ContextClassifier::create(d.vocab, config));
      write_loss(run, train(*shared, d.train, d.corpus));
    }
    for (auto k : ks) {
      std::optional<ContextClassifier> own;
      if (mode == "retrain") {
        auto c = config;
        c.k = k;
        own.emplace(ContextClassifier::create(d.vocab, c));
        write_loss(run, train(*own, d.train, d.corpus), "loss_k" + std::to_string(k));
      }
      const auto& model = shared ? *shared : *own;
      for (auto s : kAllStrategies) grid[{k, s}] = evaluate(predict_labels(model, d.test, d.corpus, s, k), gold);
    }
    {
      auto out = run.create("sweep_k.csv");
      out << "k,strategy," << kEvalHeader << '\n';
      for (auto k : ks)
        for (auto s : kAllStrategies) out << k << ',' << to_string(s) << ',' << eval_fields(grid[{k, s}]) << '\n';
    }
    std::vector<plot::Series> series;
    for (auto s : kAllStrategies) {
      plot::Series ser{to_string(s), {}, {}};
      for (auto k : ks) {
        ser.x.push_back(static_cast<double>(k));
        ser.y.push_back(grid[{k, s}].f1);
      }
      series.push_back(std::move(ser));
    }
    auto out = run.create("sweep_k.svg");
    plot::write_line_plot(out, "F1 by number of evidence pairs", "K", "F1", series);
    run.finish();
  }

  Run run;
  DataOptions data;
  ClassifierConfig config;
  std::string k_values = "1,3,5";
  std::string mode = "reinfer";
};

struct SweepStrategy {
  explicit SweepStrategy(CLI::App& app) : run(app, "sweep-strategy"), config(cli_default_config()) {
    data.add(app);
    add_classifier_options(app, config);
    app.add_option("--model", model_dir, "Evaluate this trained context model instead of training one");
  }

  void operator()() {
    config.seed = run.seed();
    check_classifier_config(config);
    run.start();
    std::optional<ContextClassifier> model;
    if (!model_dir.empty()) {
      auto m = load_model(model_dir);
      if (!m.context) throw ConfigError("--model must be a context model");
      model.emplace(std::move(*m.context));
    }
    const auto k = model ? std::max(config.k, model->config().k) : config.k;
    const auto d = data.load(k, run.seed(), true, true);
    if (d.test.empty()) throw ConfigError("sweep needs test examples");
    if (!model) {
      model.emplace(ContextClassifier::create(d.vocab, config));
      write_loss(run, train(*model, d.train, d.corpus));
    }
    const auto gold = gold_labels(d.test);
    auto out = run.create("sweep_strategy.csv");
    out << "strategy,k," << kEvalHeader << '\n';
    for (auto s : kAllStrategies)
      out << to_string(s) << ',' << config.k << ','
          << eval_fields(evaluate(predict_labels(*model, d.test, d.corpus, s, config.k), gold)) << '\n';
    run.finish();
  }

  Run run;
  DataOptions data;
  ClassifierConfig config;
  std::string model_dir;
};

}  // namespace

std::vector<Command> model_commands() {
  return {make_command<Train>("train", "Train the evidence-context classifier or the triple baseline"),
          make_command<Predict>("predict", "Classify triples with a trained model"),
          make_command<Evaluate>("evaluate", "Precision, recall, F1 and accuracy against gold labels"),
          make_command<PerfByDepth>("perf-by-depth", "Evaluation split by depth-rank range"),
          make_command<SweepK>("sweep-k", "F1 per evidence count K for each inference strategy"),
          make_command<SweepStrategy>("sweep-strategy", "Compare avg, max and vote on one model")};
}

}  // namespace deepck::cli
