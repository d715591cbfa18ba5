#include <algorithm>
#include <cmath>
#include <thread>

#include "common.hpp"
#include "deepck/lm/external.hpp"
#include "deepck/plot.hpp"

namespace deepck::cli {

std::unique_ptr<lm::Backend> BackendOptions::make() const {
  if (kind == "toy-uniform") return std::make_unique<lm::BigramBackend>(lm::BigramBackend::uniform(vocab_size, context_window));
  if (kind == "toy-table") {
    if (table.empty()) throw ConfigError("--backend toy-table needs --table");
    return with_file(table, [&](std::istream& in) {
      return std::make_unique<lm::BigramBackend>(lm::BigramBackend::load_table(in, "toy-table", context_window));
    });
  }
  if (external_cmd.empty()) throw ConfigError("--backend external needs --external-cmd");
  return std::make_unique<lm::ExternalBackend>(external_cmd);
}

namespace {

struct ScoreDepth {
  explicit ScoreDepth(CLI::App& app) : run(app, "score-depth") {
    app.add_option("--triples", triples, "Triple file to score")->required();
    backend.add(app);
    app.add_option("--workers", workers, "Scoring threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--threshold", threshold, "Deep-triple boundary on depth rank")->capture_default_str();
  }

  void operator()() {
    run.start();
    const auto input = read_triples(triples);
    const auto b = backend.make();
    const auto scores = score_all(input, *b, workers);
    auto out = run.create("scores.csv");
    write_scores_csv(out, scores);
    const auto deep = std::count_if(scores.begin(), scores.end(), [&](const auto& s) { return is_deep(s, threshold); });
    run.set_summary("triples", scores.size());
    run.set_summary("deep", deep);
    run.set_summary("backend", b->descriptor().name);
    run.finish();
  }

  Run run;
  std::string triples;
  BackendOptions backend;
  unsigned workers = 1;
  double threshold = kDefaultDeepThreshold;
};

DepthMetric parse_metric(const std::string& s) {
  return s == "perplexity" ? DepthMetric::perplexity : DepthMetric::depth_rank;
}

struct AnalyzeDepth {
  explicit AnalyzeDepth(CLI::App& app) : run(app, "analyze-depth") {
    app.add_option("--scores", scores_path, "scores.csv from score-depth")->required();
    app.add_option("--annotations", annotations_path, "Annotated depths: head, relation, tail, depth 1-4 (tab-separated)");
    app.add_option("--metric", metric, "Metric to bin by")
        ->check(CLI::IsMember({"depth_rank", "perplexity"}))
        ->capture_default_str();
    app.add_option("--bins", bins, "Equal-count bins")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--edges", edges, "Depth-rank range edges for the distribution")->capture_default_str();
    app.add_option("--threshold", threshold, "Deep-triple boundary on depth rank")->capture_default_str();
  }

  void operator()() {
    const auto e = parse_edges(edges, "--edges");
    run.start();
    const auto scores = read_scores(scores_path);
    if (scores.empty()) throw ParseError(0, scores_path + ": no scores");
    std::optional<AnnotationMap> ann;
    if (!annotations_path.empty())
      ann = with_file(annotations_path, [](std::istream& in) { return read_annotations(in); });
    const auto m = parse_metric(metric);
    if (bins > scores.size())
      throw ConfigError("--bins " + std::to_string(bins) + " exceeds the " + std::to_string(scores.size()) + " scores");

    const auto stats = bin_statistics(scores, ann ? &*ann : nullptr, m, bins);
    {
      auto out = run.create("bins.csv");
      out << "bin,low,high,count,mean_metric,mean_annotated_depth\n";
      for (const auto& b : stats)
        out << b.bin_index << ',' << fmt(b.low) << ',' << fmt(b.high) << ',' << b.member_count << ','
            << fmt(b.mean_metric) << ',' << (b.mean_annotated_depth ? fmt(*b.mean_annotated_depth) : "") << '\n';
    }
    {
      plot::Series s{ann ? "mean annotated depth" : "mean " + metric, {}, {}};
      for (const auto& b : stats) {
        s.x.push_back(static_cast<double>(b.bin_index));
        s.y.push_back(ann ? b.mean_annotated_depth.value_or(std::nan("")) : b.mean_metric);
      }
      auto out = run.create("bins.svg");
      plot::write_line_plot(out, "Bins by " + metric, "bin (ascending " + metric + ")",
                            ann ? "mean annotated depth" : metric, {s});
    }
    {
      // Per-triple correlation with annotations; bin-level correlation over bins with annotations.
      auto out = run.create("correlation.csv");
      out << "level,metric,pairs,pearson\n";
      if (ann) {
        std::vector<double> x, y, bx, by;
        for (const auto& s : scores)
          if (auto it = ann->find(s.triple.key()); it != ann->end() && std::isfinite(metric_value(s, m))) {
            x.push_back(metric_value(s, m));
            y.push_back(it->second);
          }
        for (const auto& b : stats)
          if (b.mean_annotated_depth && std::isfinite(b.mean_metric)) {
            bx.push_back(b.mean_metric);
            by.push_back(*b.mean_annotated_depth);
          }
        auto row = [&](const char* level, const std::vector<double>& a, const std::vector<double>& c) {
          std::string r;
          try {
            r = fmt(pearson(a, c));
          } catch (const Error&) {
            r = "";
          }
          out << level << ',' << metric << ',' << a.size() << ',' << r << '\n';
        };
        row("triple", x, y);
        row("bin", bx, by);
      }
    }
    const auto dist = depth_distribution(scores, e);
    {
      auto out = run.create("distribution.csv");
      out << "range_low,range_high,proportion\n";
      for (std::size_t i = 0; i < dist.size(); ++i)
        out << (i == 0 ? "" : fmt(e[i - 1])) << ',' << (i < e.size() ? fmt(e[i]) : "") << ',' << fmt(dist[i]) << '\n';
    }
    {
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < dist.size(); ++i)
        labels.push_back(i == 0 ? "<" + fmt(e.empty() ? 0 : e[0]) : i == e.size() ? ">=" + fmt(e[i - 1])
                                                                                  : fmt(e[i - 1]) + "-" + fmt(e[i]));
      if (e.empty()) labels = {"all"};
      auto out = run.create("distribution.svg");
      plot::write_bar_plot(out, "Depth-rank distribution", "proportion", labels, dist);
    }
    const auto deep = std::count_if(scores.begin(), scores.end(), [&](const auto& s) { return is_deep(s, threshold); });
    {
      auto out = run.create("summary.csv");
      out << "triples,deep,deep_fraction,threshold\n"
          << scores.size() << ',' << deep << ',' << fmt(static_cast<double>(deep) / static_cast<double>(scores.size()))
          << ',' << fmt(threshold) << '\n';
    }
    run.finish();
  }

  Run run;
  std::string scores_path, annotations_path;
  std::string metric = "depth_rank";
  std::size_t bins = 10;
  std::string edges = "10,100,1000,2000";
  double threshold = kDefaultDeepThreshold;
};

struct RelationProfileCmd {
  explicit RelationProfileCmd(CLI::App& app) : run(app, "relation-profile") {
    app.add_option("--scores", scores_path, "scores.csv from score-depth")->required();
  }

  void operator()() {
    run.start();
    const auto scores = read_scores(scores_path);
    if (scores.empty()) throw ParseError(0, scores_path + ": no scores");
    const auto prof = relation_depth_profile(scores);
    {
      auto out = run.create("relation_profile.csv");
      out << "relation,count,mean_depth_rank,stddev_depth_rank\n";
      for (const auto& p : prof)
        out << text::csv_field(p.relation) << ',' << p.count << ',' << fmt(p.mean_depth_rank) << ','
            << fmt(p.stddev_depth_rank) << '\n';
    }
    std::vector<std::string> labels;
    std::vector<double> means;
    for (const auto& p : prof) {
      labels.push_back(p.relation);
      means.push_back(p.mean_depth_rank);
    }
    auto out = run.create("relation_profile.svg");
    plot::write_bar_plot(out, "Mean depth rank per relation", "mean depth rank", labels, means);
    run.finish();
  }

  Run run;
  std::string scores_path;
};

}  // namespace

std::vector<Command> depth_commands() {
  return {make_command<ScoreDepth>("score-depth", "Score triples with depth rank and perplexity"),
          make_command<AnalyzeDepth>("analyze-depth", "Bin, correlate and histogram depth scores"),
          make_command<RelationProfileCmd>("relation-profile", "Mean and spread of depth rank per relation")};
}

}  // namespace deepck::cli
