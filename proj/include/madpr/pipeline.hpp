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

#include <filesystem>
#include <functional>

#include <json.hpp>

#include "madpr/bench.hpp"
#include "madpr/eval.hpp"
#include "madpr/pca.hpp"
#include "madpr/spectral.hpp"

namespace madpr {

struct PipelineConfig {
  std::string embeddings;  // passage container (binary)
  std::string queries;     // query container (binary)
  std::string qrels;       // TREC qrels, needed by the eval stage
  std::string output_dir = "madpr_out";
  size_t k = 8;
  MetricKind metric = MetricKind::Euclidean;
  CostFunction cost = CostFunction::DistanceCost;
  QueryEdgeCost query_edge_cost = QueryEdgeCost::Distance;
  size_t spectral_dim = 700;
  double spectral_tol = 1e-6;
  size_t spectral_max_iter = 0;
  LaplacianWeighting weighting = LaplacianWeighting::Unit;
  double sigma = 1.0;
  bool normalize = true;
  std::vector<size_t> cutoffs = {20};
  size_t depth = 20;  // run lines per query
  uint64_t seed = 7;
  unsigned threads = 0;
  NdcgGain ndcg_gain = NdcgGain::Exponential;
  std::string tag = "madpr";

  void validate() const {
    if (k < 1) throw ValidationError("config: k must be >= 1");
    if (spectral_dim < 1)
      throw ValidationError("config: spectral_dim must be >= 1");
    if (depth < 1) throw ValidationError("config: depth must be >= 1");
    if (cutoffs.empty())
      throw ValidationError("config: at least one cutoff required");
    for (size_t c : cutoffs)
      if (c < 1) throw ValidationError("config: cutoffs must be >= 1");
    if (weighting == LaplacianWeighting::Gaussian && !(sigma > 0.0))
      throw ValidationError("config: gaussian weighting requires sigma > 0");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("cannot parse boolean \"" + v + "\"");
}

inline std::vector<size_t> parse_size_list(const std::string& v) {
  std::vector<size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<size_t>(std::stoull(item)));
  }
  return out;
}

}  // namespace detail

/// Applies one "key = value" setting; shared by the config-file parser and
/// CLI flag overrides (flags win by being applied last). Unknown keys are an
/// error.
inline void apply_config_setting(PipelineConfig& cfg, const std::string& key,
                                 const std::string& value) {
  try {
    if (key == "embeddings") cfg.embeddings = value;
    else if (key == "queries") cfg.queries = value;
    else if (key == "qrels") cfg.qrels = value;
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "k") cfg.k = std::stoull(value);
    else if (key == "metric") cfg.metric = metric_kind_from_string(value);
    else if (key == "cost") cfg.cost = cost_function_from_string(value);
    else if (key == "query_edge_cost")
      cfg.query_edge_cost = query_edge_cost_from_string(value);
    else if (key == "spectral_dim") cfg.spectral_dim = std::stoull(value);
    else if (key == "spectral_tol") cfg.spectral_tol = std::stod(value);
    else if (key == "spectral_max_iter")
      cfg.spectral_max_iter = std::stoull(value);
    else if (key == "weighting") {
      if (value == "unit") cfg.weighting = LaplacianWeighting::Unit;
      else if (value == "gaussian") cfg.weighting = LaplacianWeighting::Gaussian;
      else throw ValidationError("unknown weighting \"" + value + "\"");
    } else if (key == "sigma") cfg.sigma = std::stod(value);
    else if (key == "normalize") cfg.normalize = detail::parse_bool(value);
    else if (key == "cutoffs") cfg.cutoffs = detail::parse_size_list(value);
    else if (key == "depth") cfg.depth = std::stoull(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "threads")
      cfg.threads = static_cast<unsigned>(std::stoul(value));
    else if (key == "ndcg_gain") {
      if (value == "exp") cfg.ndcg_gain = NdcgGain::Exponential;
      else if (value == "linear") cfg.ndcg_gain = NdcgGain::Linear;
      else throw ValidationError("unknown ndcg_gain \"" + value + "\"");
    } else if (key == "tag") cfg.tag = value;
    else throw ValidationError("unknown config key \"" + key + "\"");
  } catch (const std::invalid_argument&) {
    throw ValidationError("cannot parse value \"" + value + "\" for key \"" +
                          key + "\"");
  } catch (const std::out_of_range&) {
    throw ValidationError("value \"" + value + "\" out of range for key \"" +
                          key + "\"");
  }
}

/// Key-value config file: "key = value" per line, '#' starts a comment.
inline PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  PipelineConfig cfg;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected key = value");
    apply_config_setting(cfg, strip(stripped.substr(0, eq)),
                         strip(stripped.substr(eq + 1)));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline: ingest -> graph -> [spectral -> spectral graph] -> rank -> eval,
// with a JSON manifest so stages whose config and input fingerprints are
// unchanged reuse their on-disk artifacts.
// ---------------------------------------------------------------------------

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.embeddings.empty())
      throw ValidationError("config: embeddings path required");
    std::filesystem::create_directories(cfg_.output_dir);
    manifest_path_ = out("manifest.json");
    if (std::filesystem::exists(manifest_path_)) {
      std::ifstream in(manifest_path_);
      try {
        in >> manifest_;
      } catch (const std::exception&) {
        log_warn("unreadable manifest; rebuilding all stages");
        manifest_ = nlohmann::json::object();
      }
    } else {
      manifest_ = nlohmann::json::object();
    }
    if (!manifest_.contains("stages")) manifest_["stages"] = nlohmann::json::object();
  }

  std::string out(const std::string& name) const {
    return (std::filesystem::path(cfg_.output_dir) / name).string();
  }
  std::string base_graph_path() const { return out("graph.bin"); }
  std::string spectral_path() const { return out("spectral.spc"); }
  std::string spectral_graph_path() const { return out("graph_spectral.bin"); }
  std::string ranking_graph_path() const {
    return cfg_.metric == MetricKind::Spectral ? spectral_graph_path()
                                               : base_graph_path();
  }
  std::string run_path() const { return out("run.trec"); }
  std::string report_path() const { return out("report.csv"); }
  std::string per_query_path() const { return out("per_query.csv"); }
  const PipelineConfig& config() const { return cfg_; }

  /// Runs the requested stages in pipeline order; empty set = all that the
  /// config calls for. Returns the names of stages actually executed
  /// (cached stages are skipped and logged).
  std::vector<std::string> run(std::vector<std::string> stages = {}) {
    if (stages.empty()) {
      stages = {"graph", "rank"};
      if (cfg_.metric == MetricKind::Spectral) {
        stages.insert(stages.begin() + 1, "spectral-graph");
        stages.insert(stages.begin() + 1, "spectral");
      }
      if (!cfg_.qrels.empty()) stages.push_back("eval");
    }
    std::vector<std::string> executed;
    for (const auto& s : stages) {
      bool ran = run_stage(s);
      if (ran) executed.push_back(s);
    }
    return executed;
  }

  bool run_stage(const std::string& name) {
    if (name == "graph") return stage_graph();
    if (name == "spectral") return stage_spectral();
    if (name == "spectral-graph") return stage_spectral_graph();
    if (name == "rank") return stage_rank();
    if (name == "eval") return stage_eval();
    throw ValidationError("unknown stage \"" + name + "\"");
  }

 private:
  const EmbeddingMatrix& passages() {
    if (!passages_loaded_) {
      EmbeddingMatrix m = load_embeddings_binary(cfg_.embeddings);
      passages_ = cfg_.normalize ? normalize_l2(m) : std::move(m);
      passages_loaded_ = true;
    }
    return passages_;
  }
  const EmbeddingMatrix& query_matrix() {
    if (!queries_loaded_) {
      if (cfg_.queries.empty())
        throw ValidationError("config: queries path required for this stage");
      EmbeddingMatrix m = load_embeddings_binary(cfg_.queries);
      queries_ = cfg_.normalize ? normalize_l2(m) : std::move(m);
      queries_loaded_ = true;
    }
    return queries_;
  }

  uint64_t stage_config_hash(const std::string& stage) const {
    Fnv1a64 h;
    h.update_string(stage);
    h.update_u64(cfg_.k);
    h.update_u64(cfg_.normalize ? 1 : 0);
    if (stage == "graph") {
      // base graph: ranking metric unless spectral (then euclidean + DC so
      // gaussian laplacian weighting stays available)
      MetricKind base = cfg_.metric == MetricKind::Spectral
                            ? MetricKind::Euclidean
                            : cfg_.metric;
      CostFunction cost = cfg_.metric == MetricKind::Spectral
                              ? CostFunction::DistanceCost
                              : cfg_.cost;
      h.update_u64(static_cast<uint64_t>(base));
      h.update_u64(static_cast<uint64_t>(cost));
    } else if (stage == "spectral") {
      h.update_u64(cfg_.spectral_dim);
      h.update_u64(static_cast<uint64_t>(cfg_.weighting));
      h.update_string(std::to_string(cfg_.spectral_tol));
      h.update_string(std::to_string(cfg_.sigma));
      h.update_u64(cfg_.spectral_max_iter);
      h.update_u64(cfg_.seed);
    } else if (stage == "spectral-graph") {
      h.update_u64(static_cast<uint64_t>(cfg_.cost));
    } else if (stage == "rank") {
      h.update_u64(static_cast<uint64_t>(cfg_.metric));
      h.update_u64(static_cast<uint64_t>(cfg_.query_edge_cost));
      h.update_u64(cfg_.depth);
      h.update_string(cfg_.tag);
    } else if (stage == "eval") {
      for (size_t c : cfg_.cutoffs) h.update_u64(c);
      h.update_u64(static_cast<uint64_t>(cfg_.ndcg_gain));
    }
    return h.digest();
  }

  bool cached(const std::string& stage, uint64_t config_hash,
              const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) const {
    const auto& stages = manifest_["stages"];
    if (!stages.contains(stage)) return false;
    const auto& rec = stages[stage];
    if (rec.value("config", "") != hex64(config_hash)) return false;
    for (const auto& in : inputs) {
      if (!std::filesystem::exists(in)) return false;
      if (!rec["inputs"].contains(in) ||
          rec["inputs"][in] != hex64(fingerprint_file(in)))
        return false;
    }
    for (const auto& out_file : outputs) {
      if (!std::filesystem::exists(out_file)) return false;
      if (!rec["outputs"].contains(out_file) ||
          rec["outputs"][out_file] != hex64(fingerprint_file(out_file)))
        return false;
    }
    return true;
  }

  void record(const std::string& stage, uint64_t config_hash,
              const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) {
    nlohmann::json rec;
    rec["config"] = hex64(config_hash);
    rec["inputs"] = nlohmann::json::object();
    for (const auto& in : inputs)
      rec["inputs"][in] = hex64(fingerprint_file(in));
    rec["outputs"] = nlohmann::json::object();
    for (const auto& out_file : outputs)
      rec["outputs"][out_file] = hex64(fingerprint_file(out_file));
    manifest_["stages"][stage] = rec;
    std::ofstream out_stream(manifest_path_);
    out_stream << manifest_.dump(2) << '\n';
    if (!out_stream) throw RuntimeError("cannot write manifest");
  }

  bool stage_graph() {
    uint64_t ch = stage_config_hash("graph");
    std::vector<std::string> inputs = {cfg_.embeddings};
    std::vector<std::string> outputs = {base_graph_path()};
    if (cached("graph", ch, inputs, outputs)) {
      log_info("graph: cached, skipping build (manifest hit)");
      return false;
    }
    MetricKind base = cfg_.metric == MetricKind::Spectral ? MetricKind::Euclidean
                                                          : cfg_.metric;
    CostFunction cost = cfg_.metric == MetricKind::Spectral
                            ? CostFunction::DistanceCost
                            : cfg_.cost;
    DistanceMetric metric{base, nullptr};
    ManifoldGraph g =
        build_knn_graph(passages(), cfg_.k, metric, cost, cfg_.threads);
    save_graph(g, base_graph_path());
    record("graph", ch, inputs, outputs);
    log_info("graph: built k=" + std::to_string(g.k()) + " nnz=" +
             std::to_string(g.nnz()));
    return true;
  }

  bool stage_spectral() {
    uint64_t ch = stage_config_hash("spectral");
    std::vector<std::string> inputs = {base_graph_path()};
    std::vector<std::string> outputs = {spectral_path()};
    if (cached("spectral", ch, inputs, outputs)) {
      log_info("spectral: cached, skipping (manifest hit)");
      return false;
    }
    ManifoldGraph g = load_graph(base_graph_path());
    SpectralOptions opt;
    opt.weighting = cfg_.weighting;
    opt.sigma = cfg_.sigma;
    opt.tol = cfg_.spectral_tol;
    opt.max_iter = cfg_.spectral_max_iter;
    opt.seed = cfg_.seed;
    SpectralEmbedding s = spectral_embed(g, cfg_.spectral_dim, opt);
    save_spectral(s, spectral_path());
    record("spectral", ch, inputs, outputs);
    log_info("spectral: embedded M=" + std::to_string(s.n_dims));
    return true;
  }

  bool stage_spectral_graph() {
    uint64_t ch = stage_config_hash("spectral-graph");
    std::vector<std::string> inputs = {spectral_path(), cfg_.embeddings};
    std::vector<std::string> outputs = {spectral_graph_path()};
    if (cached("spectral-graph", ch, inputs, outputs)) {
      log_info("spectral-graph: cached, skipping (manifest hit)");
      return false;
    }
    SpectralEmbedding s = load_spectral(spectral_path());
    DistanceMetric metric = DistanceMetric::spectral_of(s);
    ManifoldGraph g =
        build_knn_graph(passages(), cfg_.k, metric, cfg_.cost, cfg_.threads);
    save_graph(g, spectral_graph_path());
    record("spectral-graph", ch, inputs, outputs);
    return true;
  }

  bool stage_rank() {
    uint64_t ch = stage_config_hash("rank");
    std::vector<std::string> inputs = {cfg_.embeddings, cfg_.queries,
                                       ranking_graph_path()};
    if (cfg_.metric == MetricKind::Spectral) inputs.push_back(spectral_path());
    std::vector<std::string> outputs = {run_path()};
    if (cached("rank", ch, inputs, outputs)) {
      log_info("rank: cached, skipping (manifest hit)");
      return false;
    }
    ManifoldGraph g = load_graph(ranking_graph_path());
    if (g.n_vertices() != passages().n_rows())
      throw ValidationError(
          "stale artifact: graph at " + ranking_graph_path() + " has " +
          std::to_string(g.n_vertices()) + " vertices but the corpus has " +
          std::to_string(passages().n_rows()) + " rows; rerun the graph stage");
    SpectralEmbedding spectral;
    const SpectralEmbedding* spectral_ptr = nullptr;
    if (cfg_.metric == MetricKind::Spectral) {
      spectral = load_spectral(spectral_path());
      if (spectral.base_graph_fingerprint !=
          load_graph(base_graph_path()).fingerprint())
        throw ValidationError(
            "stale artifact: spectral embedding was computed from a "
            "different base graph (fingerprint mismatch); rerun the spectral "
            "stage");
      spectral_ptr = &spectral;
    }
    std::ofstream run_file(run_path());
    if (!run_file) throw RuntimeError("cannot write " + run_path());
    const auto& qm = query_matrix();
    for (size_t qi = 0; qi < qm.n_rows(); ++qi) {
      auto att = attach_query(g, passages(), spectral_ptr, qm.row_span(qi),
                              cfg_.k, cfg_.query_edge_cost);
      RankedList list = manifold_rank(g, att, cfg_.depth);
      list.query_id = qm.id(qi);
      resolve_ids(list, passages().ids());
      write_trec_run(run_file, list, cfg_.tag);
    }
    run_file.close();
    record("rank", ch, inputs, outputs);
    log_info("rank: wrote " + run_path());
    return true;
  }

  bool stage_eval() {
    if (cfg_.qrels.empty())
      throw ValidationError("config: qrels path required for eval");
    uint64_t ch = stage_config_hash("eval");
    std::vector<std::string> inputs = {run_path(), cfg_.qrels};
    std::vector<std::string> outputs = {report_path(), per_query_path()};
    if (cached("eval", ch, inputs, outputs)) {
      log_info("eval: cached, skipping (manifest hit)");
      return false;
    }
    auto runs = read_trec_run(run_path());
    Qrels qrels = load_qrels(cfg_.qrels);
    MetricReport rep = evaluate_run(runs, qrels, cfg_.cutoffs, cfg_.ndcg_gain);
    {
      std::ofstream os(report_path());
      write_report_csv(os, rep);
    }
    {
      std::ofstream os(per_query_path());
      write_per_query_csv(os, rep);
    }
    std::fputs(format_report_table(rep).c_str(), stdout);
    record("eval", ch, inputs, outputs);
    return true;
  }

  PipelineConfig cfg_;
  std::string manifest_path_;
  nlohmann::json manifest_;
  EmbeddingMatrix passages_, queries_;
  bool passages_loaded_ = false, queries_loaded_ = false;
};

// ---------------------------------------------------------------------------
// K-sweep: retrieval quality across graph neighborhood sizes, with the flat
// ranking as the k-independent baseline row.
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string method;  // "flat" or "manifold"
  size_t k = 0;        // 0 for flat
  size_t cutoff = 0;
  double recall = 0.0;
  double map = 0.0;
  double ndcg = 0.0;
};

inline std::vector<SweepRow> run_k_sweep(const PipelineConfig& cfg,
                                         const std::vector<size_t>& k_values) {
  cfg.validate();
  if (k_values.empty()) throw ValidationError("sweep: no k values");
  EmbeddingMatrix passages = load_embeddings_binary(cfg.embeddings);
  if (cfg.normalize) passages = normalize_l2(passages);
  EmbeddingMatrix queries = load_embeddings_binary(cfg.queries);
  if (cfg.normalize) queries = normalize_l2(queries);
  Qrels qrels = load_qrels(cfg.qrels);

  auto evaluate_lists = [&](std::vector<RankedList>& lists,
                            const std::string& method, size_t k,
                            std::vector<SweepRow>& out) {
    MetricReport rep = evaluate_run(lists, qrels, cfg.cutoffs, cfg.ndcg_gain);
    for (size_t c : cfg.cutoffs)
      out.push_back({method, k, c, rep.row("recall", c).mean,
                     rep.row("map", c).mean, rep.row("ndcg", c).mean});
  };

  std::vector<SweepRow> rows;
  {
    std::vector<RankedList> flat_lists;
    MetricKind flat_metric = cfg.metric == MetricKind::Cosine
                                 ? MetricKind::Cosine
                                 : MetricKind::Euclidean;
    for (size_t qi = 0; qi < queries.n_rows(); ++qi) {
      RankedList l = flat_rank(passages, queries.row_span(qi), flat_metric,
                               cfg.depth);
      l.query_id = queries.id(qi);
      flat_lists.push_back(std::move(l));
    }
    evaluate_lists(flat_lists, "flat", 0, rows);
  }

  size_t k_max = *std::max_element(k_values.begin(), k_values.end());
  k_max = std::min(k_max, passages.n_rows() - 1);
  MetricKind base_metric = cfg.metric == MetricKind::Spectral
                               ? MetricKind::Euclidean
                               : cfg.metric;
  KnnTable table = build_knn_table(passages, k_max,
                                   DistanceMetric{base_metric, nullptr},
                                   cfg.threads);
  for (size_t k : k_values) {
    size_t kk = std::min(k, table.width);
    ManifoldGraph graph;
    SpectralEmbedding spectral;
    const SpectralEmbedding* spectral_ptr = nullptr;
    if (cfg.metric == MetricKind::Spectral) {
      ManifoldGraph base =
          assemble_graph(table, kk, CostFunction::DistanceCost);
      SpectralOptions opt;
      opt.weighting = cfg.weighting;
      opt.sigma = cfg.sigma;
      opt.tol = cfg.spectral_tol;
      opt.max_iter = cfg.spectral_max_iter;
      opt.seed = cfg.seed;
      spectral = spectral_embed(base, cfg.spectral_dim, opt);
      spectral_ptr = &spectral;
      graph = build_knn_graph(passages, kk, DistanceMetric::spectral_of(spectral),
                              cfg.cost, cfg.threads);
    } else {
      graph = assemble_graph(table, kk, cfg.cost);
    }
    std::vector<RankedList> lists;
    for (size_t qi = 0; qi < queries.n_rows(); ++qi) {
      auto att = attach_query(graph, passages, spectral_ptr,
                              queries.row_span(qi), kk, cfg.query_edge_cost);
      RankedList l = manifold_rank(graph, att, cfg.depth);
      l.query_id = queries.id(qi);
      resolve_ids(l, passages.ids());
      lists.push_back(std::move(l));
    }
    evaluate_lists(lists, "manifold", kk, rows);
    log_info("sweep: k=" + std::to_string(kk) + " done");
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "method,k,cutoff,recall,map,ndcg\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6f,%.6f,%.6f",
                  r.method.c_str(), r.k, r.cutoff, r.recall, r.map, r.ndcg);
    os << buf << '\n';
  }
}

}  // namespace madpr
