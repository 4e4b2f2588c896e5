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

#pragma once

#include <chrono>
#include <ostream>

#include "madpr/eval.hpp"
#include "madpr/synth.hpp"

namespace madpr {

struct BenchConfig {
  size_t n_passages = 100000;
  std::vector<size_t> dims = {32, 64, 128, 256, 512, 1024};
  std::vector<size_t> k_values = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  size_t n_queries = 200;
  size_t warmup = 10;
  size_t top_k = 20;  // retrieval depth timed for both methods
  uint64_t seed = 7;
  unsigned threads = 0;        // graph build workers
  bool parallel_mode = false;  // measure throughput across workers instead

  void validate() const {
    if (n_passages < 2 || n_queries < 1 || top_k < 1 || dims.empty() ||
        k_values.empty())
      throw ValidationError("bench config: counts must be positive");
    for (size_t k : k_values)
      if (k < 1) throw ValidationError("bench config: k must be >= 1");
  }
};

struct LatencyStats {
  double mean_ms = 0.0;
  double ci_lo = 0.0;  // mean +- 1.96 * stderr
  double ci_hi = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

struct LatencyRow {
  size_t n = 0, d = 0, k = 0;
  double knn_table_s = 0.0;  // shared per-D exact KNN pass (at max k)
  double assemble_s = 0.0;   // per-k symmetric closure + CSR assembly
  LatencyStats flat;
  LatencyStats manifold;
  double ratio = 0.0;  // manifold mean / flat mean
};

struct LatencyReport {
  std::vector<LatencyRow> rows;
  size_t n_queries = 0;
  size_t top_k = 0;
  uint64_t seed = 0;
  bool parallel_mode = false;
};

namespace detail {

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline LatencyStats summarize_ms(std::vector<double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_ms = sum / static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - s.mean_ms) * (v - s.mean_ms);
  var = samples.size() > 1 ? var / static_cast<double>(samples.size() - 1) : 0.0;
  double stderr_ms = std::sqrt(var / static_cast<double>(samples.size()));
  s.ci_lo = s.mean_ms - 1.96 * stderr_ms;
  s.ci_hi = s.mean_ms + 1.96 * stderr_ms;
  std::sort(samples.begin(), samples.end());
  auto pct = [&](double p) {
    double rank = std::ceil(p / 100.0 * static_cast<double>(samples.size()));
    size_t idx = rank <= 1.0 ? 0 : static_cast<size_t>(rank) - 1;
    return samples[std::min(idx, samples.size() - 1)];
  };
  s.p50 = pct(50);
  s.p95 = pct(95);
  s.p99 = pct(99);
  return s;
}

}  // namespace detail

/// Times one-time graph construction plus per-query flat and manifold
/// ranking over seeded gaussian corpora, for every (D, K) grid point. The
/// exact KNN pass is computed once per D at max(K) and each K reuses its
/// prefix; knn_table_s reports that shared pass, assemble_s the per-K CSR
/// assembly. Queries run on a single worker for clean per-query samples
/// unless parallel_mode requests aggregate throughput (then per-query
/// percentiles are not meaningful and are reported as 0).
inline LatencyReport run_latency_bench(const BenchConfig& cfg) {
  cfg.validate();
  LatencyReport report;
  report.n_queries = cfg.n_queries;
  report.top_k = cfg.top_k;
  report.seed = cfg.seed;
  report.parallel_mode = cfg.parallel_mode;
  size_t k_max = *std::max_element(cfg.k_values.begin(), cfg.k_values.end());

  for (size_t d : cfg.dims) {
    EmbeddingMatrix corpus, queries;
    KnnTable table;
    double table_s = 0.0;
    try {
      corpus = synth_gaussian(cfg.n_passages, d, cfg.seed, kStreamCorpus, "p");
      queries = synth_gaussian(cfg.n_queries, d, cfg.seed, kStreamQueries, "q");
      auto t0 = std::chrono::steady_clock::now();
      table = build_knn_table(corpus, k_max, DistanceMetric::euclidean(),
                              cfg.threads);
      table_s = detail::elapsed_s(t0);
    } catch (const std::bad_alloc&) {
      throw RuntimeError("allocation failure at grid point N=" +
                         std::to_string(cfg.n_passages) +
                         " D=" + std::to_string(d));
    }
    log_info("bench: D=" + std::to_string(d) + " knn table " +
             std::to_string(table_s) + "s");

    for (size_t k : cfg.k_values) {
      LatencyRow row;
      row.n = cfg.n_passages;
      row.d = d;
      row.k = std::min(k, table.width);
      row.knn_table_s = table_s;
      ManifoldGraph graph;
      try {
        auto t0 = std::chrono::steady_clock::now();
        graph = assemble_graph(table, row.k, CostFunction::DistanceCost);
        row.assemble_s = detail::elapsed_s(t0);
      } catch (const std::bad_alloc&) {
        throw RuntimeError("allocation failure at grid point N=" +
                           std::to_string(cfg.n_passages) + " D=" +
                           std::to_string(d) + " K=" + std::to_string(k));
      }

      auto run_flat = [&](size_t qi) {
        return flat_rank(corpus, queries.row_span(qi), MetricKind::Euclidean,
                         cfg.top_k);
      };
      auto run_manifold = [&](size_t qi) {
        auto att = attach_query(graph, corpus, nullptr, queries.row_span(qi),
                                row.k, QueryEdgeCost::Distance);
        return manifold_rank(graph, att, cfg.top_k);
      };
      for (size_t w = 0; w < std::min(cfg.warmup, cfg.n_queries); ++w) {
        run_flat(w);
        run_manifold(w);
      }
      if (!cfg.parallel_mode) {
        std::vector<double> flat_ms(cfg.n_queries), man_ms(cfg.n_queries);
        for (size_t qi = 0; qi < cfg.n_queries; ++qi) {
          auto t0 = std::chrono::steady_clock::now();
          volatile size_t sink = run_flat(qi).entries.size();
          flat_ms[qi] = detail::elapsed_s(t0) * 1e3;
          t0 = std::chrono::steady_clock::now();
          sink = run_manifold(qi).entries.size();
          man_ms[qi] = detail::elapsed_s(t0) * 1e3;
          (void)sink;
        }
        row.flat = detail::summarize_ms(std::move(flat_ms));
        row.manifold = detail::summarize_ms(std::move(man_ms));
      } else {
        auto t0 = std::chrono::steady_clock::now();
        parallel_for_chunks(cfg.n_queries, cfg.threads,
                            [&](size_t begin, size_t end) {
                              for (size_t qi = begin; qi < end; ++qi)
                                run_flat(qi);
                            });
        row.flat.mean_ms =
            detail::elapsed_s(t0) * 1e3 / static_cast<double>(cfg.n_queries);
        t0 = std::chrono::steady_clock::now();
        parallel_for_chunks(cfg.n_queries, cfg.threads,
                            [&](size_t begin, size_t end) {
                              for (size_t qi = begin; qi < end; ++qi)
                                run_manifold(qi);
                            });
        row.manifold.mean_ms =
            detail::elapsed_s(t0) * 1e3 / static_cast<double>(cfg.n_queries);
      }
      row.ratio = row.flat.mean_ms > 0.0 ? row.manifold.mean_ms / row.flat.mean_ms
                                         : 0.0;
      log_info("bench: D=" + std::to_string(d) + " K=" + std::to_string(k) +
               " flat " + std::to_string(row.flat.mean_ms) + "ms manifold " +
               std::to_string(row.manifold.mean_ms) + "ms");
      report.rows.push_back(row);
    }
  }
  return report;
}

inline void write_latency_csv(std::ostream& os, const LatencyReport& r) {
  os << "mode,n,d,k,queries,depth,knn_table_s,assemble_s,"
        "flat_mean_ms,flat_ci_lo,flat_ci_hi,flat_p50,flat_p95,flat_p99,"
        "manifold_mean_ms,manifold_ci_lo,manifold_ci_hi,manifold_p50,"
        "manifold_p95,manifold_p99,ratio\n";
  const char* mode = r.parallel_mode ? "parallel-throughput" : "latency";
  char buf[512];
  for (const auto& row : r.rows) {
    std::snprintf(
        buf, sizeof(buf),
        "%s,%zu,%zu,%zu,%zu,%zu,%.4f,%.4f,%.5f,%.5f,%.5f,%.5f,%.5f,%.5f,"
        "%.5f,%.5f,%.5f,%.5f,%.5f,%.5f,%.4f",
        mode, row.n, row.d, row.k, r.n_queries, r.top_k, row.knn_table_s,
        row.assemble_s, row.flat.mean_ms, row.flat.ci_lo, row.flat.ci_hi,
        row.flat.p50, row.flat.p95, row.flat.p99, row.manifold.mean_ms,
        row.manifold.ci_lo, row.manifold.ci_hi, row.manifold.p50,
        row.manifold.p95, row.manifold.p99, row.ratio);
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// S-curve manifold recovery: does shortest-path distance on the KNN graph
// track the true arc-length ordering better than flat euclidean distance?
// ---------------------------------------------------------------------------

struct RecoveryResult {
  double spearman_manifold = 0.0;
  double spearman_euclidean = 0.0;
  double margin() const { return spearman_manifold - spearman_euclidean; }
};

/// Builds a DC+euclidean graph over an S-curve sample and averages, over
/// held-out on-curve queries, the Spearman correlation of (manifold,
/// euclidean) distances against the true |delta t| geodesic ordering.
/// A disconnected graph is an error unless allow_disconnected, in which case
/// unreachable passages enter the correlation at +inf (tied last).
inline RecoveryResult run_manifold_recovery(size_t n, size_t ambient_d,
                                            double noise_sigma, size_t k,
                                            uint64_t seed,
                                            size_t n_queries = 100,
                                            bool allow_disconnected = false,
                                            unsigned threads = 0) {
  SCurveSampler sampler(ambient_d, noise_sigma, seed);
  auto [corpus, t_corpus] =
      sampler.sample(n, kStreamParam, kStreamNoise, "p");
  auto [queries, t_queries] = sampler.sample(n_queries, kStreamParamQueries,
                                             kStreamNoiseQueries, "q");
  ManifoldGraph graph = build_knn_graph(corpus, k, DistanceMetric::euclidean(),
                                        CostFunction::DistanceCost, threads);
  if (!allow_disconnected && !is_connected(graph))
    throw ValidationError(
        "s-curve graph is disconnected at k=" + std::to_string(k) +
        "; raise k");

  double sum_man = 0.0, sum_eu = 0.0;
  std::vector<double> d_man(n), d_eu(n), truth(n);
  for (size_t qi = 0; qi < n_queries; ++qi) {
    auto att = attach_query(graph, corpus, nullptr, queries.row_span(qi),
                            std::min(k, n), QueryEdgeCost::Distance);
    RankedList full = manifold_rank(graph, att, 0);
    std::fill(d_man.begin(), d_man.end(),
              std::numeric_limits<double>::infinity());
    for (const auto& e : full.entries) d_man[e.index] = e.distance;
    for (size_t j = 0; j < n; ++j) {
      d_eu[j] = std::sqrt(att.query_sqeuclidean[j]);
      truth[j] = std::abs(t_corpus[j] - t_queries[qi]);
    }
    sum_man += spearman(d_man, truth);
    sum_eu += spearman(d_eu, truth);
  }
  return {sum_man / static_cast<double>(n_queries),
          sum_eu / static_cast<double>(n_queries)};
}

}  // namespace madpr
