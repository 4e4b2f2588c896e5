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

#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "madpr/graph.hpp"
#include "madpr/spectral.hpp"

namespace madpr {

enum class QueryEdgeCost : uint8_t { Distance = 0, Uniform = 1 };

inline QueryEdgeCost query_edge_cost_from_string(const std::string& s) {
  if (s == "distance") return QueryEdgeCost::Distance;
  if (s == "uniform") return QueryEdgeCost::Uniform;
  throw ValidationError("unknown query edge cost mode \"" + s + "\"");
}

/// Virtual query vertex: the k attachment edges of Algorithm-1 Step 1, kept
/// as an overlay so the shared graph is never mutated (Step 3's cleanup is a
/// no-op by construction). query_sqeuclidean holds squared raw euclidean
/// distances to every passage for tie-breaking and the unreachable fallback.
struct QueryAttachment {
  std::vector<uint32_t> neighbor_indices;
  std::vector<double> edge_costs;      // c(v_{N+1}, v): metric distance or 1
  std::vector<double> base_distances;  // raw euclidean of the k neighbors
  std::vector<double> query_sqeuclidean;  // size N
};

struct RankedEntry {
  uint32_t index = UINT32_MAX;  // corpus row, UINT32_MAX when built from a run file
  std::string id;
  double distance = 0.0;  // +inf for unreachable passages
  int64_t hops = -1;      // edge count on one optimal path; -1 = none
};

struct RankedList {
  std::string query_id;
  MetricKind metric = MetricKind::Euclidean;
  std::optional<CostFunction> cost;  // set for manifold rankings
  std::vector<RankedEntry> entries;
};

inline void resolve_ids(RankedList& r, const std::vector<std::string>& ids) {
  for (auto& e : r.entries)
    if (e.index != UINT32_MAX) e.id = ids[e.index];
}

/// Step 1 of Algorithm 1: connect the query to its k nearest passages under
/// the graph's metric. Edge costs follow the pseudocode (metric distance)
/// in Distance mode, or the UC convention (1 per edge) in Uniform mode.
inline QueryAttachment attach_query(const ManifoldGraph& g,
                                    const EmbeddingMatrix& base,
                                    const SpectralEmbedding* spectral,
                                    std::span<const float> q, size_t k,
                                    QueryEdgeCost mode) {
  if (k < 1) throw ValidationError("attach_query requires k >= 1");
  size_t n = base.n_rows();
  if (g.n_vertices() != n)
    throw ValidationError("graph and embedding matrix disagree on N");
  check_same_dims(q.size(), base.n_dims());
  if (k > n) k = n;

  QueryAttachment att;
  att.query_sqeuclidean.resize(n);
  BoundedNeighborHeap euclid_heap(k);
  for (size_t j = 0; j < n; ++j) {
    double sq = squared_l2(q.data(), base.row(j), base.n_dims());
    att.query_sqeuclidean[j] = sq;
    euclid_heap.offer(sq, static_cast<uint32_t>(j));
  }

  std::vector<std::pair<double, uint32_t>> picked;  // (metric distance, index)
  switch (g.metric_kind()) {
    case MetricKind::Euclidean: {
      for (auto& [sq, j] : euclid_heap.sorted())
        picked.emplace_back(std::sqrt(sq), j);
      break;
    }
    case MetricKind::Cosine: {
      double qn = l2_norm(q.data(), q.size());
      if (qn == 0.0)
        throw ValidationError("cosine attachment with zero-norm query");
      BoundedNeighborHeap h(k);
      for (size_t j = 0; j < n; ++j) {
        double rn = base.row_norm(j);
        if (rn == 0.0)
          throw ValidationError(
              "cosine distance undefined for zero-norm row \"" + base.id(j) +
              "\"");
        h.offer(1.0 - dot(q.data(), base.row(j), q.size()) / (qn * rn),
                static_cast<uint32_t>(j));
      }
      picked = h.sorted();
      break;
    }
    case MetricKind::Spectral: {
      if (spectral == nullptr)
        throw ValidationError(
            "graph was built with the spectral metric; supply the spectral "
            "embedding");
      if (spectral->n_rows != n)
        throw ValidationError("spectral embedding does not match the corpus");
      std::vector<double> qext = extend_query(*spectral, base, q, k);
      BoundedNeighborHeap h(k);
      for (size_t j = 0; j < n; ++j)
        h.offer(squared_l2(qext.data(), spectral->row(j), spectral->n_dims),
                static_cast<uint32_t>(j));
      for (auto& [sq, j] : h.sorted()) picked.emplace_back(std::sqrt(sq), j);
      break;
    }
  }

  for (auto& [d, j] : picked) {
    att.neighbor_indices.push_back(j);
    att.edge_costs.push_back(mode == QueryEdgeCost::Distance ? d : 1.0);
    att.base_distances.push_back(std::sqrt(att.query_sqeuclidean[j]));
  }
  return att;
}

/// d_Manifold for every passage: Dijkstra from the virtual query vertex over
/// attachment + graph edges. top_k = 0 requests the full ranking; otherwise
/// traversal stops once the top_k'th distance is certain (whole tie groups
/// are finalized, so a truncated ranking is a prefix of the full one).
/// Unreachable passages get +inf and rank after all finite entries, ordered
/// by raw euclidean distance to the query.
inline RankedList manifold_rank(const ManifoldGraph& g,
                                const QueryAttachment& att, size_t top_k = 0) {
  size_t n = static_cast<size_t>(g.n_vertices());
  if (att.query_sqeuclidean.size() != n)
    throw ValidationError("attachment does not match the graph");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int64_t> hops(n, -1);
  std::vector<uint8_t> done(n, 0);

  using HeapItem = std::pair<double, uint32_t>;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
  for (size_t e = 0; e < att.neighbor_indices.size(); ++e) {
    uint32_t v = att.neighbor_indices[e];
    double c = att.edge_costs[e];
    if (c < dist[v]) {
      dist[v] = c;
      hops[v] = 1;
      heap.emplace(c, v);
    }
  }

  size_t target = top_k == 0 ? n : std::min(top_k, n);
  std::vector<uint32_t> finalized;
  finalized.reserve(target + 16);
  double cutoff = kInf;
  bool cutoff_set = false;
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (done[v]) continue;  // stale entry
    if (cutoff_set && d > cutoff) break;
    done[v] = 1;
    finalized.push_back(v);
    if (!cutoff_set && finalized.size() == target) {
      cutoff = d;
      cutoff_set = true;
    }
    auto adj = g.adjacent(v);
    auto adj_costs = g.adjacent_costs(v);
    for (size_t e = 0; e < adj.size(); ++e) {
      uint32_t u = adj[e];
      if (done[u]) continue;
      double nd = d + static_cast<double>(adj_costs[e]);
      if (nd < dist[u]) {
        dist[u] = nd;
        hops[u] = hops[v] + 1;
        heap.emplace(nd, u);
      }
    }
  }

  auto order_key = [&](uint32_t v) {
    return std::make_tuple(dist[v], att.query_sqeuclidean[v], v);
  };
  std::sort(finalized.begin(), finalized.end(),
            [&](uint32_t a, uint32_t b) { return order_key(a) < order_key(b); });

  RankedList out;
  out.metric = g.metric_kind();
  out.cost = g.cost_function();
  out.entries.reserve(target);
  for (uint32_t v : finalized) {
    if (out.entries.size() == target) break;
    out.entries.push_back({v, {}, dist[v], hops[v]});
  }
  if (out.entries.size() < target) {
    // graph exhausted: append unreachable passages by euclidean fallback
    std::vector<uint32_t> rest;
    for (size_t v = 0; v < n; ++v)
      if (!done[v]) rest.push_back(static_cast<uint32_t>(v));
    std::sort(rest.begin(), rest.end(), [&](uint32_t a, uint32_t b) {
      return std::make_pair(att.query_sqeuclidean[a], a) <
             std::make_pair(att.query_sqeuclidean[b], b);
    });
    for (uint32_t v : rest) {
      if (out.entries.size() == target) break;
      out.entries.push_back({v, {}, kInf, -1});
    }
  }
  return out;
}

/// Eq. (1) with the flat metric: passages sorted by distance ascending,
/// ties by ascending index.
inline RankedList flat_rank(const EmbeddingMatrix& base,
                            std::span<const float> q, MetricKind metric,
                            size_t top_k = 0) {
  if (metric == MetricKind::Spectral)
    throw ValidationError("flat_rank supports euclidean or cosine");
  check_same_dims(q.size(), base.n_dims());
  size_t n = base.n_rows();
  size_t target = top_k == 0 ? n : std::min(top_k, n);

  double qn = 0.0;
  if (metric == MetricKind::Cosine) {
    qn = l2_norm(q.data(), q.size());
    if (qn == 0.0) throw ValidationError("cosine ranking with zero-norm query");
  }
  BoundedNeighborHeap heap(target);
  for (size_t j = 0; j < n; ++j) {
    double d;
    if (metric == MetricKind::Euclidean) {
      d = squared_l2(q.data(), base.row(j), base.n_dims());
    } else {
      double rn = base.row_norm(j);
      if (rn == 0.0)
        throw ValidationError("cosine distance undefined for zero-norm row \"" +
                              base.id(j) + "\"");
      d = 1.0 - dot(q.data(), base.row(j), q.size()) / (qn * rn);
    }
    heap.offer(d, static_cast<uint32_t>(j));
  }
  RankedList out;
  out.metric = metric;
  out.entries.reserve(target);
  for (auto& [d, j] : heap.sorted()) {
    double dd = metric == MetricKind::Euclidean ? std::sqrt(d) : d;
    out.entries.push_back({j, base.id(j), dd, -1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// TREC run format: "qid Q0 docid rank score tag", score = -distance so that
// higher is better, with infinite distances mapped to -1e30.
// ---------------------------------------------------------------------------

inline void write_trec_run(std::ostream& os, const RankedList& r,
                           const std::string& tag) {
  char buf[64];
  for (size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    double score = std::isinf(e.distance) ? -1e30 : -e.distance;
    if (score == 0.0) score = 0.0;  // canonical +0
    std::snprintf(buf, sizeof(buf), "%.9g", score);
    os << r.query_id << " Q0 " << e.id << ' ' << (i + 1) << ' ' << buf << ' '
       << tag << '\n';
  }
}

/// Parses a run file back into ranked lists (ids only; indices unresolved).
/// Lists keep first-appearance query order; entries sort by the rank column.
inline std::vector<RankedList> read_trec_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run file: " + path);
  std::vector<RankedList> runs;
  std::unordered_map<std::string, size_t> index;
  std::vector<std::vector<std::pair<int64_t, RankedEntry>>> staged;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, docid, tag;
    int64_t rank;
    double score;
    if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag))
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed run line");
    auto [it, fresh] = index.try_emplace(qid, runs.size());
    if (fresh) {
      runs.push_back({qid, MetricKind::Euclidean, std::nullopt, {}});
      staged.emplace_back();
    }
    RankedEntry e;
    e.id = docid;
    e.distance = -score;
    staged[it->second].emplace_back(rank, std::move(e));
  }
  for (size_t i = 0; i < runs.size(); ++i) {
    std::stable_sort(staged[i].begin(), staged[i].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [rank, e] : staged[i]) runs[i].entries.push_back(std::move(e));
  }
  return runs;
}

}  // namespace madpr
