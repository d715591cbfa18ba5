#include <set>

#include "common.hpp"
#include "deepck/plot.hpp"
#include "deepck/propagation.hpp"

namespace deepck::cli {

namespace {

/// Bigram generator over the words of the knowledge base and the taxonomy, starting uniform.
lm::BigramBackend fresh_generator(const std::vector<LabeledTriple>& kb, const TaxonomyTree& tree) {
  std::set<std::string> words;
  auto add = [&](const std::string& s) {
    for (const auto& w : text::split_words(s)) words.insert(text::to_lower(w.text));
  };
  for (const auto& t : kb) {
    add(t.head);
    add(rephrase_relation(t.relation).phrase);
    add(t.tail);
  }
  for (const auto& k : tree.keys()) add(tree.name(k));
  words.erase(std::string(lm::kUnkToken));
  words.erase(std::string(lm::kEndOfTermToken));
  return lm::BigramBackend(lm::Vocabulary({words.begin(), words.end()}), "generator");
}

struct Propagate {
  explicit Propagate(CLI::App& app) : run(app, "propagate") {
    app.add_option("--train-triples", kb_path, "Known (positive) triples; also the generator's training data")->required();
    app.add_option("--taxonomy", taxonomy, "child<TAB>parent lines")->required();
    app.add_option("--generator-table", generator_table, "Start the generator from this bigram table");
    app.add_option("--gen-steps", gen_steps, "Generator training steps")->capture_default_str();
    app.add_option("--gen-lr", gen_lr, "Generator learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--beam-width", width, "Beam width")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--max-len", max_len, "Longest generated tail in tokens")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--h-distance", h_distance, "Horizontal propagation distance")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--v-distance", v_distance, "Vertical propagation distance")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--threshold", threshold, "Depth-rank boundary for keeping a candidate")->capture_default_str();
    app.add_flag("--score-with-generator,!--score-with-backend", score_with_generator,
                 "Score candidates with the trained generator (default) or with --backend");
    scorer.add(app);
  }

  void operator()() {
    run.start();
    auto kb = read_triples(kb_path);
    std::erase_if(kb, [](const LabeledTriple& t) { return t.label && *t.label == 0; });
    if (kb.empty()) throw ParseError(0, kb_path + ": no positive triples");
    const auto tree = with_file(taxonomy, [](std::istream& in) { return TaxonomyTree::read(in); });

    auto generator = generator_table.empty()
                         ? fresh_generator(kb, tree)
                         : with_file(generator_table, [](std::istream& in) { return lm::BigramBackend::load_table(in, "generator"); });
    const auto rep = train_generator(kb, generator, gen_steps, run.seed(), gen_lr);
    {
      auto out = run.create("generator_loss.csv");
      out << "step,loss\n";
      for (std::size_t i = 0; i < rep.loss_curve.size(); ++i) out << i + 1 << ',' << fmt(rep.loss_curve[i]) << '\n';
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::string> seen;
    for (const auto& t : kb)
      if (seen.insert(text::to_lower(text::normalize_ws(t.head)) + '\t' + t.relation).second) pairs.emplace_back(t.head, t.relation);
    auto s1 = generate_candidates(pairs, generator, width, max_len);
    std::erase_if(s1, [](const CandidateTriple& c) { return c.triple.tail.find(lm::kUnkToken) != std::string::npos; });
    {
      auto out = run.create("s1.tsv");
      write_candidates_tsv(out, s1);
    }
    const auto s2 = propagate(tree, s1, h_distance, v_distance);
    {
      auto out = run.create("s2.tsv");
      write_candidates_tsv(out, s2);
    }

    std::unique_ptr<lm::Backend> external;
    if (!score_with_generator) external = scorer.make();
    const lm::Backend& b = external ? *external : generator;
    const auto deep = build_deep_candidates(s1, s2, b, threshold);
    {
      auto out = run.create("candidates.tsv");
      write_candidates_tsv(out, deep.kept);
    }
    {
      auto out = run.create("annotation_sheet.tsv");
      write_candidates_tsv(out, deep.kept, true);
    }
    {
      auto out = run.create("diagnostics.txt");
      for (const auto& d : deep.diagnostics) out << d << '\n';
    }
    run.set_summary("s1", s1.size());
    run.set_summary("s2", s2.size());
    run.set_summary("deep_candidates", deep.kept.size());
    run.set_summary("diagnostics", deep.diagnostics.size());
    run.finish();
  }

  Run run;
  std::string kb_path, taxonomy, generator_table;
  std::size_t gen_steps = 200;
  double gen_lr = 0.5;
  std::size_t width = 5, max_len = 3, h_distance = 1, v_distance = 1;
  double threshold = kDefaultDeepThreshold;
  bool score_with_generator = true;
  BackendOptions scorer;
};

struct NegativeSample {
  explicit NegativeSample(CLI::App& app) : run(app, "negative-sample") {
    app.add_option("--triples", triples, "Positive triples")->required();
    app.add_option("--count", count, "Negatives to draw (default: one per positive)");
  }

  void operator()() {
    run.start();
    auto pos = read_triples(triples);
    if (pos.empty()) throw ParseError(0, triples + ": no triples");
    for (auto& p : pos) p.label = 1;
    const auto neg = negative_sample(pos, count ? *count : pos.size(), run.seed());
    {
      auto out = run.create("negatives.tsv");
      write_triple_file(out, neg);
    }
    auto all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    auto out = run.create("dataset.tsv");
    write_triple_file(out, all);
    run.set_summary("positives", pos.size());
    run.set_summary("negatives", neg.size());
    run.finish();
  }

  Run run;
  std::string triples;
  std::optional<std::size_t> count;
};

}  // namespace

std::vector<Command> kb_commands() {
  return {make_command<Propagate>("propagate", "Generate, propagate over a taxonomy and keep deep candidates"),
          make_command<NegativeSample>("negative-sample", "Corrupt one field of positives to make labeled negatives")};
}

}  // namespace deepck::cli
