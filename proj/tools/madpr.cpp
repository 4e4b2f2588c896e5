/*
 * Copyright (c) 2026, the madpr authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>

#include "madpr/bench.hpp"
#include "madpr/pipeline.hpp"

namespace {

using namespace madpr;

std::vector<size_t> parse_range_or_list(const std::string& spec) {
  auto dots = spec.find("..");
  std::vector<size_t> out;
  if (dots != std::string::npos) {
    size_t lo = std::stoull(spec.substr(0, dots));
    size_t hi = std::stoull(spec.substr(dots + 2));
    if (lo < 1 || hi < lo)
      throw ValidationError("bad range \"" + spec + "\" (want lo..hi, lo>=1)");
    for (size_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  out = detail::parse_size_list(spec);
  if (out.empty()) throw ValidationError("empty list \"" + spec + "\"");
  return out;
}

EmbeddingMatrix load_maybe_normalized(const std::string& path, bool normalize) {
  EmbeddingMatrix m = load_embeddings_binary(path);
  return normalize ? normalize_l2(m) : m;
}

struct CommonRankArgs {
  std::string embeddings, queries, graph, spectral;
  size_t k = 8;
  std::string query_edge_cost = "distance";
  bool normalize = true;
};

void add_rank_inputs(CLI::App* cmd, CommonRankArgs& a, bool need_queries) {
  cmd->add_option("--embeddings", a.embeddings, "passage container (.bin)")
      ->required();
  auto* q = cmd->add_option("--queries", a.queries, "query container (.bin)");
  if (need_queries) q->required();
  cmd->add_option("--graph", a.graph, "manifold graph file")->required();
  cmd->add_option("--spectral", a.spectral,
                  "spectral embedding file (required for spectral graphs)");
  cmd->add_option("--k", a.k, "query attachment neighbors")
      ->default_val(size_t{8});
  cmd->add_option("--query-edge-cost", a.query_edge_cost,
                  "distance|uniform query edge costs")
      ->default_val("distance");
  cmd->add_flag("--normalize,!--no-normalize", a.normalize,
                "l2-normalize embeddings on load (default on)");
}

int run_app(int argc, char** argv) {
  CLI::App app{
      "madpr: manifold-aware dense passage retrieval over KNN graphs"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors,
               "emit machine-readable errors on stderr");
  std::function<void()> action;

  // ---------------------------------------------------------------- ingest
  {
    auto* cmd = app.add_subcommand(
        "ingest", "validate embeddings and write the binary container");
    auto args = std::make_shared<std::unordered_map<std::string, std::string>>();
    auto normalize = std::make_shared<bool>(true);
    cmd->add_option("--input", (*args)["input"], "input embeddings")->required();
    cmd->add_option("--format", (*args)["format"],
                    "csv|binary (default: by extension)");
    cmd->add_option("--output", (*args)["output"], "output container path")
        ->required();
    cmd->add_flag("--normalize,!--no-normalize", *normalize,
                  "l2-normalize rows (default on)");
    cmd->callback([args, normalize, &action] {
      action = [args, normalize] {
        std::string format = (*args)["format"];
        if (format.empty())
          format = (*args)["input"].ends_with(".csv") ? "csv" : "binary";
        EmbeddingFormat f;
        if (format == "csv") f = EmbeddingFormat::Csv;
        else if (format == "binary") f = EmbeddingFormat::Binary;
        else throw ValidationError("unknown format \"" + format + "\"");
        EmbeddingMatrix m = load_embeddings((*args)["input"], f);
        if (*normalize) m = normalize_l2(m);
        write_embeddings(m, (*args)["output"]);
        std::printf("wrote %zu x %zu embeddings to %s\n", m.n_rows(),
                    m.n_dims(), (*args)["output"].c_str());
      };
    });
  }

  // ------------------------------------------------------------ build-graph
  {
    struct Args {
      std::string embeddings, spectral, output;
      size_t k = 8;
      std::string metric = "euclidean", cost = "dc";
      bool normalize = true;
      unsigned threads = 0;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("build-graph",
                                   "build the symmetrized KNN manifold graph");
    cmd->add_option("--embeddings", a->embeddings, "passage container")
        ->required();
    cmd->add_option("--k", a->k)->default_val(size_t{8});
    cmd->add_option("--metric", a->metric, "euclidean|cosine|spectral")
        ->default_val("euclidean");
    cmd->add_option("--cost", a->cost, "dc|uc edge costs")->default_val("dc");
    cmd->add_option("--spectral", a->spectral,
                    "spectral embedding (for --metric spectral)");
    cmd->add_option("--threads", a->threads, "build workers (0 = auto)");
    cmd->add_flag("--normalize,!--no-normalize", a->normalize);
    cmd->add_option("--output", a->output, "graph file")->required();
    cmd->callback([a, &action] {
      action = [a] {
        EmbeddingMatrix m = load_maybe_normalized(a->embeddings, a->normalize);
        MetricKind kind = metric_kind_from_string(a->metric);
        SpectralEmbedding s;
        DistanceMetric metric{kind, nullptr};
        if (kind == MetricKind::Spectral) {
          if (a->spectral.empty())
            throw ValidationError("--metric spectral requires --spectral");
          s = load_spectral(a->spectral);
          metric = DistanceMetric::spectral_of(s);
        }
        ManifoldGraph g = build_knn_graph(m, a->k, metric,
                                          cost_function_from_string(a->cost),
                                          a->threads);
        save_graph(g, a->output);
        auto stats = degree_stats(g);
        std::printf("graph: N=%llu nnz=%llu k=%u mean degree %.2f\n",
                    (unsigned long long)g.n_vertices(),
                    (unsigned long long)g.nnz(), g.k(), stats.mean);
      };
    });
  }

  // --------------------------------------------------------------- spectral
  {
    struct Args {
      std::string graph, output, weighting = "unit";
      size_t dim = 700, max_iter = 0;
      double tol = 1e-6, sigma = 1.0;
      uint64_t seed = 7;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand(
        "spectral", "spectral embedding from the normalized graph Laplacian");
    cmd->add_option("--graph", a->graph, "base graph file")->required();
    cmd->add_option("--spectral-dim", a->dim)->default_val(size_t{700});
    cmd->add_option("--spectral-tol", a->tol)->default_val(1e-6);
    cmd->add_option("--max-iter", a->max_iter, "Lanczos budget (0 = auto)");
    cmd->add_option("--weighting", a->weighting, "unit|gaussian affinities")
        ->default_val("unit");
    cmd->add_option("--sigma", a->sigma, "gaussian bandwidth");
    cmd->add_option("--seed", a->seed)->default_val(uint64_t{7});
    cmd->add_option("--output", a->output, "spectral container")->required();
    cmd->callback([a, &action] {
      action = [a] {
        ManifoldGraph g = load_graph(a->graph);
        SpectralOptions opt;
        opt.weighting = a->weighting == "gaussian"
                            ? LaplacianWeighting::Gaussian
                            : LaplacianWeighting::Unit;
        if (a->weighting != "unit" && a->weighting != "gaussian")
          throw ValidationError("unknown weighting \"" + a->weighting + "\"");
        opt.sigma = a->sigma;
        opt.tol = a->tol;
        opt.max_iter = a->max_iter;
        opt.seed = a->seed;
        SpectralEmbedding s = spectral_embed(g, a->dim, opt);
        save_spectral(s, a->output);
        std::printf("spectral: N=%zu M=%zu lambda in [%.3g, %.3g]\n", s.n_rows,
                    s.n_dims, s.eigenvalues.front(), s.eigenvalues.back());
      };
    });
  }

  // ------------------------------------------------------------------- rank
  {
    struct Args {
      CommonRankArgs common;
      size_t depth = 20;
      std::string tag = "madpr", output;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand(
        "rank", "rank passages by manifold distance, TREC run output");
    add_rank_inputs(cmd, a->common, /*need_queries=*/true);
    cmd->add_option("--depth", a->depth, "entries per query")
        ->default_val(size_t{20});
    cmd->add_option("--tag", a->tag)->default_val("madpr");
    cmd->add_option("--output", a->output, "run file")->required();
    cmd->callback([a, &action] {
      action = [a] {
        EmbeddingMatrix passages =
            load_maybe_normalized(a->common.embeddings, a->common.normalize);
        EmbeddingMatrix queries =
            load_maybe_normalized(a->common.queries, a->common.normalize);
        ManifoldGraph g = load_graph(a->common.graph);
        SpectralEmbedding s;
        const SpectralEmbedding* sp = nullptr;
        if (g.metric_kind() == MetricKind::Spectral) {
          if (a->common.spectral.empty())
            throw ValidationError(
                "graph uses the spectral metric; supply --spectral");
          s = load_spectral(a->common.spectral);
          sp = &s;
        }
        QueryEdgeCost mode =
            query_edge_cost_from_string(a->common.query_edge_cost);
        std::ofstream out(a->output);
        if (!out) throw RuntimeError("cannot write " + a->output);
        for (size_t qi = 0; qi < queries.n_rows(); ++qi) {
          auto att = attach_query(g, passages, sp, queries.row_span(qi),
                                  a->common.k, mode);
          RankedList list = manifold_rank(g, att, a->depth);
          list.query_id = queries.id(qi);
          resolve_ids(list, passages.ids());
          write_trec_run(out, list, a->tag);
        }
        std::printf("wrote run for %zu queries to %s\n", queries.n_rows(),
                    a->output.c_str());
      };
    });
  }

  // ------------------------------------------------------------------- eval
  {
    struct Args {
      std::string run, qrels, compare, out_report, out_per_query;
      std::string cutoffs = "20", gain = "exp";
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("eval",
                                   "score a run file with recall/mAP/nDCG");
    cmd->add_option("--run", a->run, "TREC run file")->required();
    cmd->add_option("--qrels", a->qrels, "TREC qrels file")->required();
    cmd->add_option("--cutoffs", a->cutoffs, "comma list, default 20");
    cmd->add_option("--ndcg-gain", a->gain, "exp|linear")->default_val("exp");
    cmd->add_option("--compare", a->compare,
                    "second run; adds a paired t-test per metric");
    cmd->add_option("--out-report", a->out_report, "report CSV path");
    cmd->add_option("--out-per-query", a->out_per_query, "per-query CSV path");
    cmd->callback([a, &action] {
      action = [a] {
        auto runs = read_trec_run(a->run);
        Qrels qrels = load_qrels(a->qrels);
        auto cutoffs = detail::parse_size_list(a->cutoffs);
        NdcgGain gain;
        if (a->gain == "exp") gain = NdcgGain::Exponential;
        else if (a->gain == "linear") gain = NdcgGain::Linear;
        else throw ValidationError("unknown ndcg gain \"" + a->gain + "\"");
        MetricReport rep = evaluate_run(runs, qrels, cutoffs, gain);
        std::fputs(format_report_table(rep).c_str(), stdout);
        if (!a->out_report.empty()) {
          std::ofstream os(a->out_report);
          write_report_csv(os, rep);
        }
        if (!a->out_per_query.empty()) {
          std::ofstream os(a->out_per_query);
          write_per_query_csv(os, rep);
        }
        if (!a->compare.empty()) {
          auto other = read_trec_run(a->compare);
          MetricReport rep_b = evaluate_run(other, qrels, cutoffs, gain);
          std::printf("\npaired t-test (%s minus %s):\n", a->run.c_str(),
                      a->compare.c_str());
          for (const auto& row : rep.rows) {
            const auto& row_b = rep_b.row(row.metric, row.cutoff);
            std::unordered_map<std::string, double> b_vals(
                row_b.per_query.begin(), row_b.per_query.end());
            std::vector<double> av, bv;
            for (const auto& [qid, v] : row.per_query) {
              auto it = b_vals.find(qid);
              if (it != b_vals.end()) {
                av.push_back(v);
                bv.push_back(it->second);
              }
            }
            if (av.size() < 2) {
              std::printf("  %s@%zu: fewer than 2 shared queries\n",
                          row.metric.c_str(), row.cutoff);
              continue;
            }
            TTestResult t = paired_t_test(av, bv);
            std::printf("  %s@%zu: t=%.4f p=%.6f%s\n", row.metric.c_str(),
                        row.cutoff, t.t, t.p,
                        t.degenerate ? " (degenerate: zero variance)" : "");
          }
        }
      };
    });
  }

  // --------------------------------------------------------------- diagnose
  {
    struct Args {
      CommonRankArgs common;
      std::string qrels, out_dir = "diagnostics";
      size_t unjudged = 100;
      double percentile = 10.0;
      uint64_t seed = 7;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand(
        "diagnose",
        "distance-scatter CSV and degree-based weak-connectivity report");
    add_rank_inputs(cmd, a->common, /*need_queries=*/true);
    cmd->add_option("--qrels", a->qrels)->required();
    cmd->add_option("--unjudged-sample", a->unjudged,
                    "unjudged pairs sampled per query")
        ->default_val(size_t{100});
    cmd->add_option("--degree-percentile", a->percentile,
                    "flag relevant passages below this degree percentile")
        ->default_val(10.0);
    cmd->add_option("--seed", a->seed)->default_val(uint64_t{7});
    cmd->add_option("--out-dir", a->out_dir)->default_val("diagnostics");
    cmd->callback([a, &action] {
      action = [a] {
        EmbeddingMatrix passages =
            load_maybe_normalized(a->common.embeddings, a->common.normalize);
        EmbeddingMatrix queries =
            load_maybe_normalized(a->common.queries, a->common.normalize);
        ManifoldGraph g = load_graph(a->common.graph);
        SpectralEmbedding s;
        const SpectralEmbedding* sp = nullptr;
        if (g.metric_kind() == MetricKind::Spectral) {
          if (a->common.spectral.empty())
            throw ValidationError(
                "graph uses the spectral metric; supply --spectral");
          s = load_spectral(a->common.spectral);
          sp = &s;
        }
        Qrels qrels = load_qrels(a->qrels);
        std::filesystem::create_directories(a->out_dir);
        auto out_path = [&](const char* name) {
          return (std::filesystem::path(a->out_dir) / name).string();
        };

        auto rows = distance_diagnostics(
            g, passages, sp, queries, qrels, a->common.k,
            query_edge_cost_from_string(a->common.query_edge_cost),
            a->unjudged, a->seed);
        {
          std::ofstream os(out_path("diagnostics.csv"));
          write_diagnostics_csv(os, rows);
        }

        DegreeStats stats = degree_stats(g);
        {
          std::ofstream os(out_path("degree_stats.csv"));
          os << "pid,degree\n";
          for (size_t v = 0; v < passages.n_rows(); ++v)
            os << passages.id(v) << ',' << stats.degrees[v] << '\n';
        }
        double threshold = stats.percentile(a->percentile);
        std::unordered_map<std::string, uint32_t> pid_to_row;
        for (size_t i = 0; i < passages.n_rows(); ++i)
          pid_to_row.emplace(passages.id(i), static_cast<uint32_t>(i));
        size_t flagged = 0;
        {
          std::ofstream os(out_path("low_degree_relevant.csv"));
          os << "qid,pid,degree,threshold\n";
          for (const auto& [qid, judged] : qrels.judgments) {
            std::vector<std::string> pids;
            for (const auto& [pid, grade] : judged)
              if (grade >= 1) pids.push_back(pid);
            std::sort(pids.begin(), pids.end());
            for (const auto& pid : pids) {
              auto it = pid_to_row.find(pid);
              if (it == pid_to_row.end()) continue;
              uint64_t deg = stats.degrees[it->second];
              if (static_cast<double>(deg) < threshold) {
                os << qid << ',' << pid << ',' << deg << ',' << threshold
                   << '\n';
                ++flagged;
              }
            }
          }
        }
        std::printf(
            "diagnostics: %zu scatter rows; degrees mean %.2f min %llu max "
            "%llu; %zu relevant passage(s) below the %.0fth percentile "
            "(threshold %.0f)\n",
            rows.size(), stats.mean, (unsigned long long)stats.min,
            (unsigned long long)stats.max, flagged, a->percentile, threshold);
      };
    });
  }

  // ------------------------------------------------------------------ bench
  {
    auto* bench = app.add_subcommand("bench", "benchmark harnesses");
    bench->require_subcommand(1);
    {
      struct Args {
        BenchConfig cfg;
        std::string dims = "32,64,128,256,512,1024", ks = "2..15", out;
      };
      auto a = std::make_shared<Args>();
      auto* cmd = bench->add_subcommand(
          "latency", "per-query latency of flat vs manifold ranking");
      cmd->add_option("--n", a->cfg.n_passages)->default_val(size_t{100000});
      cmd->add_option("--dims", a->dims, "comma list of dimensions");
      cmd->add_option("--k", a->ks, "range lo..hi or comma list");
      cmd->add_option("--queries", a->cfg.n_queries)->default_val(size_t{200});
      cmd->add_option("--warmup", a->cfg.warmup)->default_val(size_t{10});
      cmd->add_option("--depth", a->cfg.top_k)->default_val(size_t{20});
      cmd->add_option("--seed", a->cfg.seed)->default_val(uint64_t{7});
      cmd->add_option("--threads", a->cfg.threads, "graph build workers");
      cmd->add_flag("--parallel", a->cfg.parallel_mode,
                    "measure aggregate throughput across workers instead");
      cmd->add_option("--out", a->out, "CSV output path")->required();
      cmd->callback([a, &action] {
        action = [a] {
          a->cfg.dims = detail::parse_size_list(a->dims);
          a->cfg.k_values = parse_range_or_list(a->ks);
          LatencyReport rep = run_latency_bench(a->cfg);
          std::ofstream os(a->out);
          if (!os) throw RuntimeError("cannot write " + a->out);
          write_latency_csv(os, rep);
          std::printf("wrote %zu grid rows to %s\n", rep.rows.size(),
                      a->out.c_str());
        };
      });
    }
    {
      struct Args {
        size_t n = 2000, ambient = 64, k = 8, queries = 100;
        double noise = 0.05;
        uint64_t seed = 7;
        bool allow_disconnected = false;
        std::string out;
      };
      auto a = std::make_shared<Args>();
      auto* cmd = bench->add_subcommand(
          "s-curve", "manifold recovery on the synthetic S-curve");
      cmd->add_option("--n", a->n)->default_val(size_t{2000});
      cmd->add_option("--ambient-d", a->ambient)->default_val(size_t{64});
      cmd->add_option("--noise", a->noise)->default_val(0.05);
      cmd->add_option("--k", a->k)->default_val(size_t{8});
      cmd->add_option("--queries", a->queries)->default_val(size_t{100});
      cmd->add_option("--seed", a->seed)->default_val(uint64_t{7});
      cmd->add_flag("--allow-disconnected", a->allow_disconnected,
                    "rank unreachable passages at +inf instead of erroring");
      cmd->add_option("--out", a->out, "optional CSV output");
      cmd->callback([a, &action] {
        action = [a] {
          RecoveryResult r =
              run_manifold_recovery(a->n, a->ambient, a->noise, a->k, a->seed,
                                    a->queries, a->allow_disconnected);
          std::printf(
              "spearman_manifold=%.6f spearman_euclidean=%.6f margin=%.6f\n",
              r.spearman_manifold, r.spearman_euclidean, r.margin());
          if (!a->out.empty()) {
            std::ofstream os(a->out);
            os << "n,ambient_d,noise,k,queries,seed,spearman_manifold,"
                  "spearman_euclidean,margin\n";
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "%zu,%zu,%g,%zu,%zu,%llu,%.6f,%.6f,%.6f", a->n,
                          a->ambient, a->noise, a->k, a->queries,
                          (unsigned long long)a->seed, r.spearman_manifold,
                          r.spearman_euclidean, r.margin());
            os << buf << '\n';
          }
        };
      });
    }
  }

  // ------------------------------------------------------------------ sweep
  {
    struct Args {
      std::string config, ks = "1..15", out;
      std::vector<std::string> sets;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand(
        "sweep", "retrieval quality across graph neighborhood sizes");
    cmd->add_option("--config", a->config, "pipeline config file");
    cmd->add_option("--set", a->sets, "config overrides key=value")
        ->take_all();
    cmd->add_option("--k-range", a->ks, "range lo..hi or comma list");
    cmd->add_option("--out", a->out, "CSV output path")->required();
    cmd->callback([a, &action] {
      action = [a] {
        PipelineConfig cfg = a->config.empty() ? PipelineConfig{}
                                               : load_config_file(a->config);
        for (const auto& s : a->sets) {
          auto eq = s.find('=');
          if (eq == std::string::npos)
            throw ValidationError("--set expects key=value, got \"" + s + "\"");
          apply_config_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (cfg.embeddings.empty() || cfg.queries.empty() || cfg.qrels.empty())
          throw ValidationError(
              "sweep needs embeddings, queries and qrels in the config");
        auto rows = run_k_sweep(cfg, parse_range_or_list(a->ks));
        std::ofstream os(a->out);
        if (!os) throw RuntimeError("cannot write " + a->out);
        write_sweep_csv(os, rows);
        std::printf("wrote %zu sweep rows to %s\n", rows.size(),
                    a->out.c_str());
      };
    });
  }

  // --------------------------------------------------------------- baseline
  {
    auto* baseline = app.add_subcommand("baseline", "projection baselines");
    baseline->require_subcommand(1);
    struct Args {
      std::string embeddings, queries, model, out_embeddings, out_queries;
      size_t dims = 500;
      uint64_t seed = 7;
      bool normalize = true;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = baseline->add_subcommand(
        "pca", "variance-maximizing linear projection");
    cmd->add_option("--embeddings", a->embeddings)->required();
    cmd->add_option("--queries", a->queries, "optional query container");
    cmd->add_option("--dims", a->dims)->default_val(size_t{500});
    cmd->add_option("--seed", a->seed)->default_val(uint64_t{7});
    cmd->add_flag("--normalize,!--no-normalize", a->normalize);
    cmd->add_option("--model", a->model, "output model path");
    cmd->add_option("--out-embeddings", a->out_embeddings,
                    "projected passage container");
    cmd->add_option("--out-queries", a->out_queries,
                    "projected query container");
    cmd->callback([a, &action] {
      action = [a] {
        EmbeddingMatrix m = load_maybe_normalized(a->embeddings, a->normalize);
        PcaModel model = fit_pca(m, a->dims, a->seed);
        if (!a->model.empty()) save_pca(model, a->model);
        if (!a->out_embeddings.empty())
          write_embeddings(pca_project(model, m), a->out_embeddings);
        if (!a->queries.empty() && !a->out_queries.empty()) {
          EmbeddingMatrix q = load_maybe_normalized(a->queries, a->normalize);
          write_embeddings(pca_project(model, q), a->out_queries);
        }
        std::printf("pca: D=%zu -> M=%zu, explained variance [%.4g .. %.4g]\n",
                    model.dims_in, model.dims_out,
                    model.explained_variance.front(),
                    model.explained_variance.back());
      };
    });
  }

  // --------------------------------------------------------------- pipeline
  {
    struct Args {
      std::string config, stages;
      std::vector<std::string> sets;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand(
        "pipeline",
        "run ingest->graph->spectral->rank->eval with artifact caching");
    cmd->add_option("--config", a->config, "pipeline config file")->required();
    cmd->add_option("--set", a->sets, "config overrides key=value")->take_all();
    cmd->add_option("--stages", a->stages,
                    "comma list subset (default: all applicable)");
    cmd->callback([a, &action] {
      action = [a] {
        PipelineConfig cfg = load_config_file(a->config);
        for (const auto& s : a->sets) {
          auto eq = s.find('=');
          if (eq == std::string::npos)
            throw ValidationError("--set expects key=value, got \"" + s + "\"");
          apply_config_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        Pipeline p(cfg);
        std::vector<std::string> stages;
        if (!a->stages.empty()) {
          std::stringstream ss(a->stages);
          std::string item;
          while (std::getline(ss, item, ','))
            if (!item.empty()) stages.push_back(item);
        }
        auto executed = p.run(stages);
        std::printf("pipeline: %zu stage(s) executed, artifacts in %s\n",
                    executed.size(), cfg.output_dir.c_str());
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    action();
    return 0;
  } catch (const ValidationError& e) {
    if (json_errors) {
      nlohmann::json j{{"error", {{"kind", "validation"}, {"message", e.what()}}}};
      std::fprintf(stderr, "%s\n", j.dump().c_str());
    } else {
      std::fprintf(stderr, "error: %s\n", e.what());
    }
    return 1;
  } catch (const std::exception& e) {
    if (json_errors) {
      nlohmann::json j{{"error", {{"kind", "runtime"}, {"message", e.what()}}}};
      std::fprintf(stderr, "%s\n", j.dump().c_str());
    } else {
      std::fprintf(stderr, "error: %s\n", e.what());
    }
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) { return run_app(argc, argv); }
