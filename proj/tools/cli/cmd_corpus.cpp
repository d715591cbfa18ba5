#include "common.hpp"

namespace deepck::cli {

namespace {

struct IngestCorpus {
  explicit IngestCorpus(CLI::App& app) : run(app, "ingest-corpus") {
    app.add_option("--corpus", corpus, "Raw text file")->required();
    app.add_flag("--line-mode", line_mode, "One sentence per line instead of splitting on . ! ?");
  }

  void operator()() {
    run.start();
    const auto c = read_corpus(corpus, line_mode);
    {
      auto out = run.create("sentences.txt");
      c.write_lines(out);
    }
    {
      auto out = run.create("corpus_stats.csv");
      out << "sentences,distinct_tokens\n" << c.size() << ',' << c.term_index().size() << '\n';
    }
    run.set_summary("sentences", c.size());
    run.finish();
  }

  Run run;
  std::string corpus;
  bool line_mode = false;
};

struct SelectEvidence {
  explicit SelectEvidence(CLI::App& app) : run(app, "select-evidence") {
    app.add_option("--triples", triples, "Triple file")->required();
    app.add_option("--corpus", corpus, "Raw text file")->required();
    app.add_flag("--line-mode", line_mode, "One sentence per line");
    app.add_option("--k", k, "Evidence pairs per triple")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--stopwords", stopwords, "Stop-word file (default: built-in list)");
    app.add_option("--sentence-cap", cap, "Keep only the most recent sentences per term (0 = all)")
        ->capture_default_str();
  }

  void operator()() {
    run.start();
    const auto input = read_triples(triples);
    const auto c = read_corpus(corpus, line_mode);
    const auto sw = read_stopword_file(stopwords);
    auto out = run.create("evidence.jsonl");
    std::size_t fallback = 0;
    for (const auto& t : input) {
      const auto ev = select_evidence(t, c, k, sw, cap);
      fallback += ev.fallback_used ? 1 : 0;
      write_evidence_jsonl(out, ev);
    }
    run.set_summary("triples", input.size());
    run.set_summary("fallback", fallback);
    run.finish();
  }

  Run run;
  std::string triples, corpus, stopwords;
  bool line_mode = false;
  std::size_t k = 3;
  std::size_t cap = kDefaultSentenceCap;
};

}  // namespace

std::vector<Command> corpus_commands() {
  return {make_command<IngestCorpus>("ingest-corpus", "Split a text file into indexed sentences"),
          make_command<SelectEvidence>("select-evidence", "Retrieve the top-K evidence sentence pairs per triple")};
}

}  // namespace deepck::cli
