// canet: cell attention networks on graphs lifted to regular 2-complexes.
// Subcommands cover the pipeline end to end: dataset statistics, lifting
// debug dumps, training (single split and k-fold), checkpoint evaluation,
// gradient checking, the ablation comparison table, and a scaling
// benchmark for the lifting kernels.
//
// Exit codes: 0 success, 1 failed check / internal contract breach,
// 2 usage or config error, 3 data error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "canet/cell_complex.hpp"
#include "canet/checkpoint.hpp"
#include "canet/config.hpp"
#include "canet/lifting.hpp"
#include "canet/model.hpp"
#include "canet/optimizer.hpp"
#include "canet/training.hpp"
#include "canet/tud_parser.hpp"
#include "json.hpp"

namespace {

using namespace canet;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kOutputFormatVersion = 1;

struct Options {
  std::string data_dir = "data";
  std::string dataset;
  std::string config_path;
  std::string out_dir = "out";
  std::string precision;  // overrides the config when set
  std::string checkpoint;
  int64_t seed = -1;      // overrides the config when >= 0
  int max_ring_size = 0;  // overrides the config when > 0
  int folds = 10;
  int jobs = 1;
  bool dump_attention = false;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string out_path(const Options& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  return opt.out_dir + "/" + name;
}

// Synthetic datasets train without a bundle on disk; anything else is a
// TUDataset-style directory under --data-dir.
bool is_synthetic(const std::string& name) {
  return name == "ring" || name == "memorize";
}

// Every run starts from the config file (or defaults), then the command
// line overrides, and echoes the result so runs are self-describing.
RunConfig resolve_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty())
    cfg = load_config(opt.config_path);
  else if (is_synthetic(opt.dataset))
    cfg = ring_task_config();
  if (opt.seed >= 0) cfg.seed = static_cast<uint64_t>(opt.seed);
  if (!opt.precision.empty()) cfg.precision = opt.precision;
  if (opt.max_ring_size > 0) cfg.max_ring_size = opt.max_ring_size;
  cfg.validate();
  std::printf("resolved config:\n%s\n", config_to_json_text(cfg).c_str());
  return cfg;
}

json config_json(const RunConfig& cfg) {
  return json::parse(config_to_json_text(cfg));
}

TudDataset load_bundle(const Options& opt) {
  if (opt.dataset.empty())
    throw ConfigError("this command needs --dataset");
  return parse_tud(opt.data_dir + "/" + opt.dataset, opt.dataset);
}

LiftedDataset load_lifted(const Options& opt, const RunConfig& cfg) {
  if (opt.dataset == "ring") return make_ring_task(200, cfg.seed);
  if (opt.dataset == "memorize") return make_memorization_fixture();
  return lift_tud_dataset(load_bundle(opt), LiftConfig{cfg.max_ring_size},
                          opt.jobs);
}

// --dump-attention: one eval-mode forward over a handful of samples with
// the diagnostics channel on, serialized per layer.
template <typename T>
void dump_attention(CanModel<T>& model, const LiftedDataset& data,
                    const std::vector<int>& ids, const std::string& path) {
  std::vector<const LiftedSample*> batch;
  for (size_t i = 0; i < ids.size() && i < 8; ++i)
    batch.push_back(&data.samples[ids[i]]);
  if (batch.empty()) throw ContractViolation("attention dump: no samples");

  Rng rng(0);
  ForwardDiagnostics diag;
  auto logits = model.forward(batch, false, rng, &diag);

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(model.config());
  j["samples"] = json::array();
  for (size_t i = 0; i < batch.size(); ++i) j["samples"].push_back(ids[i]);
  j["logits"] = std::vector<double>(logits.values().begin(),
                                    logits.values().end());
  j["layers"] = json::array();
  for (const auto& layer : diag.layers) {
    json jl;
    jl["lower_pairs_e"] = layer.low_e;
    jl["lower_pairs_k"] = layer.low_k;
    jl["lower_alpha"] = layer.low_alpha;
    jl["upper_pairs_e"] = layer.up_e;
    jl["upper_pairs_k"] = layer.up_k;
    jl["upper_alpha"] = layer.up_alpha;
    jl["gamma"] = layer.gamma;
    jl["kept_edges"] = layer.kept_edges;
    jl["orig_edge"] = layer.orig_edge;
    j["layers"].push_back(std::move(jl));
  }
  write_file(path, j.dump(2));
  std::printf("attention dump: %s\n", path.c_str());
}

// ------------------------------------------------------------------ stats

int cmd_stats(const Options& opt) {
  auto cfg = resolve_config(opt);
  auto t0 = Clock::now();
  auto tud = load_bundle(opt);
  std::vector<GraphTopology> tops;
  tops.reserve(tud.graphs.size());
  for (const auto& g : tud.graphs) tops.push_back(g.topology);
  auto stats =
      dataset_stats(lift_dataset(tops, LiftConfig{cfg.max_ring_size}, opt.jobs));
  stats.num_classes = tud.num_classes;
  double secs = seconds_since(t0);

  std::ostringstream txt;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %7s %8s %10s %10s", "dataset",
                "graphs", "classes", "avg nodes", "avg edges");
  txt << line;
  for (const auto& [size, avg] : stats.avg_rings_by_size) {
    std::snprintf(line, sizeof(line), " %9s", (std::to_string(size) + "-cells").c_str());
    txt << line;
  }
  txt << "\n";
  std::snprintf(line, sizeof(line), "%-10s %7d %8d %10.2f %10.2f",
                tud.name.c_str(), stats.num_graphs, stats.num_classes,
                stats.avg_vertices, stats.avg_edges);
  txt << line;
  for (const auto& [size, avg] : stats.avg_rings_by_size) {
    std::snprintf(line, sizeof(line), " %9.2f", avg);
    txt << line;
  }
  std::snprintf(line, sizeof(line), "\nlift R=%d in %.2fs\n",
                cfg.max_ring_size, secs);
  txt << line;
  std::printf("%s", txt.str().c_str());

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["dataset"] = tud.name;
  j["graphs"] = stats.num_graphs;
  j["classes"] = stats.num_classes;
  j["avg_nodes"] = stats.avg_vertices;
  j["avg_edges"] = stats.avg_edges;
  for (const auto& [size, avg] : stats.avg_rings_by_size)
    j["avg_cells"][std::to_string(size)] = avg;
  j["seconds"] = secs;
  write_file(out_path(opt, "stats_" + tud.name + ".json"), j.dump(2));
  write_file(out_path(opt, "stats_" + tud.name + ".txt"), txt.str());
  return 0;
}

// ------------------------------------------------------------------- lift

int cmd_lift(const Options& opt) {
  auto cfg = resolve_config(opt);
  auto t0 = Clock::now();
  auto tud = load_bundle(opt);
  std::vector<GraphTopology> tops;
  tops.reserve(tud.graphs.size());
  for (const auto& g : tud.graphs) tops.push_back(g.topology);
  auto complexes = lift_dataset(tops, LiftConfig{cfg.max_ring_size}, opt.jobs);
  double secs = seconds_since(t0);

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["dataset"] = tud.name;
  j["complexes"] = json::array();
  int64_t total_rings = 0;
  for (const auto& c : complexes) {
    json jc;
    jc["vertices"] = c.num_vertices;
    jc["edges"] = c.edges;
    jc["rings"] = json::array();
    for (const auto& r : c.rings)
      jc["rings"].push_back(
          {{"vertices", r.vertices}, {"edges", r.edge_ids}, {"signs", r.signs}});
    total_rings += c.num_rings();
    j["complexes"].push_back(std::move(jc));
  }
  write_file(out_path(opt, "lift_" + tud.name + ".json"), j.dump());

  // signed incidence dump, one block per graph, for eyeballing B1/B2
  std::ostringstream inc;
  for (size_t g = 0; g < complexes.size(); ++g) {
    auto b = build_incidence(complexes[g]);
    inc << "graph " << g << ": V=" << complexes[g].num_vertices
        << " E=" << complexes[g].num_edges()
        << " R=" << complexes[g].num_rings() << "\n";
    inc << "  B1 (vertex,edge,sign):";
    for (const auto& t : b.b1)
      inc << " (" << t[0] << "," << t[1] << "," << t[2] << ")";
    inc << "\n  B2 (edge,ring,sign):";
    for (const auto& t : b.b2)
      inc << " (" << t[0] << "," << t[1] << "," << t[2] << ")";
    inc << "\n";
  }
  write_file(out_path(opt, "lift_" + tud.name + "_incidence.txt"), inc.str());

  std::printf("lifted %zu graphs, %lld rings, R=%d, %.2fs -> %s\n",
              complexes.size(), static_cast<long long>(total_rings),
              cfg.max_ring_size, secs,
              out_path(opt, "lift_" + tud.name + ".json").c_str());
  return 0;
}

// ------------------------------------------------------------- train / cv

std::string epoch_table(const std::vector<EpochMetrics>& epochs,
                        bool with_val) {
  std::ostringstream txt;
  char line[160];
  std::snprintf(line, sizeof(line), "%5s %11s %10s %11s %10s\n", "epoch",
                "train_loss", "train_acc", "val_loss", "val_acc");
  txt << line;
  for (size_t e = 0; e < epochs.size(); ++e) {
    if (with_val)
      std::snprintf(line, sizeof(line), "%5zu %11.4f %10.4f %11.4f %10.4f\n",
                    e, epochs[e].train_loss, epochs[e].train_acc,
                    epochs[e].val_loss, epochs[e].val_acc);
    else
      std::snprintf(line, sizeof(line), "%5zu %11.4f %10.4f %11s %10s\n", e,
                    epochs[e].train_loss, epochs[e].train_acc, "-", "-");
    txt << line;
  }
  return txt.str();
}

template <typename T>
int train_split(const Options& opt, const RunConfig& cfg,
                const LiftedDataset& data) {
  auto plan = make_folds(static_cast<int>(data.samples.size()), data.labels(),
                         cfg.seed, opt.folds);
  for (const auto& w : plan.warnings) std::printf("warning: %s\n", w.c_str());
  const auto& split = plan.folds[0];

  CanModel<T> best(cfg, data.node_dim, data.edge_feat_dim, data.num_classes);
  auto fold = train_fold<T>(data, split.train_ids, split.val_ids, cfg, 0,
                            &best);

  auto txt = epoch_table(fold.epochs, !split.val_ids.empty());
  std::printf("%s", txt.c_str());
  if (fold.diverged) std::printf("diverged: %s\n", fold.note.c_str());
  std::printf("best epoch %d\n", fold.best_epoch);

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["dataset"] = data.name;
  j["train_samples"] = split.train_ids.size();
  j["val_samples"] = split.val_ids.size();
  j["best_epoch"] = fold.best_epoch;
  j["diverged"] = fold.diverged;
  if (fold.diverged) j["note"] = fold.note;
  j["epochs"] = json::array();
  for (const auto& e : fold.epochs)
    j["epochs"].push_back({{"train_loss", e.train_loss},
                           {"train_acc", e.train_acc},
                           {"val_loss", e.val_loss},
                           {"val_acc", e.val_acc}});
  write_file(out_path(opt, "train_" + data.name + ".json"), j.dump(2));
  write_file(out_path(opt, "train_" + data.name + ".txt"), txt);

  auto ckpt = out_path(opt, "train_" + data.name + ".ckpt.json");
  save_checkpoint(best, ckpt);
  std::printf("checkpoint: %s\n", ckpt.c_str());

  if (opt.dump_attention)
    dump_attention(best, data,
                   split.val_ids.empty() ? split.train_ids : split.val_ids,
                   out_path(opt, "attention_train_" + data.name + ".json"));
  return fold.diverged ? 1 : 0;
}

int cmd_train(const Options& opt) {
  auto cfg = resolve_config(opt);
  auto data = load_lifted(opt, cfg);
  if (cfg.precision == "f32") return train_split<float>(opt, cfg, data);
  return train_split<double>(opt, cfg, data);
}

int cmd_cv(const Options& opt) {
  auto cfg = resolve_config(opt);
  auto data = load_lifted(opt, cfg);
  auto ckpt_dir = out_path(opt, "cv_" + data.name);
  std::filesystem::create_directories(ckpt_dir);
  auto report = run_cross_validation(data, cfg, opt.folds, opt.jobs, ckpt_dir);

  auto txt = report_to_text(report);
  std::printf("%s", txt.c_str());
  write_file(out_path(opt, "cv_" + data.name + ".json"),
             report_to_json_text(report));
  write_file(out_path(opt, "cv_" + data.name + ".txt"), txt);

  if (opt.dump_attention) {
    auto plan = make_folds(static_cast<int>(data.samples.size()),
                           data.labels(), cfg.seed, opt.folds);
    auto path = out_path(opt, "attention_cv_" + data.name + ".json");
    auto ckpt = ckpt_dir + "/fold0.ckpt.json";
    if (checkpoint_precision(ckpt) == "f32") {
      auto model = load_checkpoint_f32(ckpt);
      dump_attention(model, data, plan.folds[0].val_ids, path);
    } else {
      auto model = load_checkpoint_f64(ckpt);
      dump_attention(model, data, plan.folds[0].val_ids, path);
    }
  }
  return 0;
}

// ------------------------------------------------------------------- eval

template <typename T>
int eval_checkpoint(const Options& opt, CanModel<T>& model) {
  const auto& cfg = model.config();
  std::printf("resolved config (from checkpoint):\n%s\n",
              config_to_json_text(cfg).c_str());
  auto data = load_lifted(opt, cfg);
  if (data.node_dim != model.node_dim() ||
      data.edge_feat_dim != model.edge_feat_dim() ||
      data.num_classes != model.num_classes())
    throw DataError("checkpoint dims (" + std::to_string(model.node_dim()) +
                    "," + std::to_string(model.edge_feat_dim()) + "," +
                    std::to_string(model.num_classes()) + ") do not match " +
                    data.name + " (" + std::to_string(data.node_dim) + "," +
                    std::to_string(data.edge_feat_dim) + "," +
                    std::to_string(data.num_classes) + ")");

  std::vector<int> ids(data.samples.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  double loss = 0.0;
  double acc = evaluate_accuracy(model, data, ids, cfg.batch_size, opt.jobs,
                                 &loss);
  std::printf("%s: accuracy %.4f, mean loss %.4f over %zu samples\n",
              data.name.c_str(), acc, loss, ids.size());

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["dataset"] = data.name;
  j["checkpoint"] = opt.checkpoint;
  j["samples"] = ids.size();
  j["accuracy"] = acc;
  j["mean_loss"] = loss;
  write_file(out_path(opt, "eval_" + data.name + ".json"), j.dump(2));

  if (opt.dump_attention)
    dump_attention(model, data, ids,
                   out_path(opt, "attention_eval_" + data.name + ".json"));
  return 0;
}

int cmd_eval(const Options& opt) {
  if (opt.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  if (checkpoint_precision(opt.checkpoint) == "f32") {
    auto model = load_checkpoint_f32(opt.checkpoint);
    return eval_checkpoint(opt, model);
  }
  auto model = load_checkpoint_f64(opt.checkpoint);
  return eval_checkpoint(opt, model);
}

// -------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Options& opt) {
  // triangle + hexagon batch, every named parameter, central differences
  RunConfig cfg;
  cfg.lift_heads = 2;
  cfg.lift_activation = Activation::ELU;
  cfg.hidden_features = {3, 2};
  cfg.attention_heads = {2, 1};
  cfg.attention_activation = Activation::Tanh;
  cfg.update_activation = Activation::ELU;
  cfg.pool_ratio = 1.0;
  cfg.pool_type = "glob";
  cfg.mlp_neurons = 4;
  cfg.dropout = 0.0;
  if (opt.seed >= 0) cfg.seed = static_cast<uint64_t>(opt.seed);
  cfg.validate();
  std::printf("resolved config:\n%s\n", config_to_json_text(cfg).c_str());

  Rng feat_rng(cfg.seed ^ 0xF1F1);
  auto make_sample = [&](const std::vector<std::pair<int, int>>& edges, int n,
                         int label) {
    LiftedSample s;
    s.complex = lift_graph(GraphTopology{n, edges}, {6});
    s.node_features.assign(n, std::vector<double>(2));
    for (auto& row : s.node_features)
      for (auto& x : row) x = feat_rng.uniform(-1.0, 1.0);
    s.label = label;
    return s;
  };
  auto tri = make_sample({{0, 1}, {0, 2}, {1, 2}}, 3, 0);
  auto hex = make_sample({{0, 1}, {0, 5}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, 6, 1);
  std::vector<const LiftedSample*> batch = {&tri, &hex};
  std::vector<int> labels = {0, 1};

  CanModel<double> model(cfg, 2, 0, 2);
  Rng init(cfg.seed);
  model.init_parameters(init);
  std::vector<std::pair<std::string, Tensor<double>>> params;
  for (const auto& nt : model.named_parameters())
    params.push_back({nt.name, nt.tensor});

  Rng rng(0);
  auto report = grad_check(
      [&] { return cross_entropy(model.forward(batch, false, rng), labels); },
      params, 1e-6, 1e-5);

  std::printf("gradcheck: %s, %d entries, worst rel %.2e at %s[%d] "
              "(analytic %.3e numeric %.3e)\n",
              report.passed ? "PASS" : "FAIL", report.entries_checked,
              report.worst.rel_err, report.worst.param.c_str(),
              report.worst.index, report.worst.analytic,
              report.worst.numeric);

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["passed"] = report.passed;
  j["entries_checked"] = report.entries_checked;
  j["tolerance"] = report.tolerance;
  j["worst"] = {{"param", report.worst.param},
                {"index", report.worst.index},
                {"analytic", report.worst.analytic},
                {"numeric", report.worst.numeric},
                {"rel_err", report.worst.rel_err}};
  write_file(out_path(opt, "gradcheck.json"), j.dump(2));
  return report.passed ? 0 : 1;
}

// ----------------------------------------------------------------- ablate

int cmd_ablate(const Options& opt) {
  Options o = opt;
  if (o.dataset.empty()) o.dataset = "ring";
  auto cfg = resolve_config(o);
  auto data = load_lifted(o, cfg);

  struct Row {
    std::string name;
    double mean = 0.0, std = 0.0, delta = 0.0;
  };
  std::vector<Row> rows;
  double baseline = 0.0;
  for (const auto& name : ablation_switch_names()) {
    auto variant = apply_ablation(cfg, name);
    auto report = run_cross_validation(data, variant, o.folds, o.jobs);
    Row row{name, report.summary_mean, report.summary_std, 0.0};
    if (name == "none")
      baseline = row.mean;
    else
      row.delta = row.mean - baseline;
    rows.push_back(row);
    std::printf("%-13s done (%.1fs)\n", name.c_str(), report.wall_seconds);
  }

  std::ostringstream txt;
  char line[160];
  std::snprintf(line, sizeof(line), "%-13s %9s %8s %9s\n", "switch",
                "val_acc", "std", "delta");
  txt << line;
  for (const auto& r : rows) {
    if (r.name == "none")
      std::snprintf(line, sizeof(line), "%-13s %9.4f %8.4f %9s\n",
                    r.name.c_str(), r.mean, r.std, "-");
    else
      std::snprintf(line, sizeof(line), "%-13s %9.4f %8.4f %+9.4f\n",
                    r.name.c_str(), r.mean, r.std, r.delta);
    txt << line;
  }
  std::printf("%s", txt.str().c_str());

  json j;
  j["format_version"] = kOutputFormatVersion;
  j["config"] = config_json(cfg);
  j["dataset"] = data.name;
  j["folds"] = o.folds;
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"switch", r.name},
                         {"val_acc_mean", r.mean},
                         {"val_acc_std", r.std},
                         {"delta_vs_baseline", r.name == "none" ? 0.0 : r.delta}});
  write_file(out_path(o, "ablate_" + data.name + ".json"), j.dump(2));
  write_file(out_path(o, "ablate_" + data.name + ".txt"), txt.str());
  return 0;
}

// ------------------------------------------------------------------ bench

GraphTopology bench_graph(Rng& rng, int n, double avg_degree) {
  GraphTopology g;
  g.num_vertices = n;
  double p = avg_degree / (n - 1);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v});
  return g;
}

int cmd_bench(const Options& opt) {
  json j;
  j["format_version"] = kOutputFormatVersion;
  std::ostringstream txt;
  char line[256];
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  txt << "hardware threads available: " << hw << "\n";

  // 1. chordless-cycle enumeration: cost should track (|E|+|V|)*R per
  //    cycle plus the search overhead, so the normalized column stays
  //    roughly flat as the graph grows.
  txt << "\ncycle enumeration growth (avg degree 4)\n";
  std::snprintf(line, sizeof(line), "%6s %7s %3s %8s %10s %14s\n", "n", "|E|",
                "R", "cycles", "ms", "ms/((E+V)R)");
  txt << line;
  j["enumeration"] = json::array();
  Rng rng(0xBE);
  for (int rcap : {4, 6, 8}) {
    for (int n : {64, 128, 256, 512, 1024}) {
      auto g = bench_graph(rng, n, 4.0);
      auto t0 = Clock::now();
      auto cycles = chordless_cycles(g.num_vertices, g.edges, rcap);
      double ms = seconds_since(t0) * 1e3;
      double norm = ms / ((g.edges.size() + n) * rcap);
      std::snprintf(line, sizeof(line), "%6d %7zu %3d %8zu %10.2f %14.6f\n",
                    n, g.edges.size(), rcap, cycles.size(), ms, norm);
      txt << line;
      j["enumeration"].push_back({{"n", n},
                                  {"edges", g.edges.size()},
                                  {"max_ring_size", rcap},
                                  {"cycles", cycles.size()},
                                  {"ms", ms},
                                  {"ms_per_EV_R", norm}});
    }
  }

  // 2. dataset lifting, serial reference vs the OpenMP kernel
  std::string name = opt.dataset.empty() ? "MUTAG" : opt.dataset;
  Options o = opt;
  o.dataset = name;
  auto tud = load_bundle(o);
  std::vector<GraphTopology> tops;
  for (const auto& g : tud.graphs) tops.push_back(g.topology);
  LiftConfig lift_cfg{opt.max_ring_size > 0 ? opt.max_ring_size : 6};

  auto t0 = Clock::now();
  auto serial = lift_dataset_serial(tops, lift_cfg);
  double serial_s = seconds_since(t0);
  t0 = Clock::now();
  auto parallel = lift_dataset(tops, lift_cfg, 0);
  double parallel_s = seconds_since(t0);

  bool equal = serial.size() == parallel.size();
  for (size_t i = 0; equal && i < serial.size(); ++i) {
    equal = serial[i].edges == parallel[i].edges &&
            serial[i].num_rings() == parallel[i].num_rings();
    for (int r = 0; equal && r < serial[i].num_rings(); ++r)
      equal = serial[i].rings[r].vertices == parallel[i].rings[r].vertices;
  }
  std::snprintf(line, sizeof(line),
                "\ndataset lift %s (R=%d): serial %.3fs, openmp %.3fs "
                "(%d threads), speedup %.2fx, results %s\n",
                name.c_str(), lift_cfg.max_ring_size, serial_s, parallel_s,
                hw, serial_s / std::max(parallel_s, 1e-9),
                equal ? "identical" : "DIFFER");
  txt << line;
  j["dataset_lift"] = {{"dataset", name},
                       {"serial_seconds", serial_s},
                       {"openmp_seconds", parallel_s},
                       {"threads", hw},
                       {"identical", equal}};
  if (!equal) throw ContractViolation("parallel lift diverged from serial");

  // 3. model forward: pooling sorts the edges, so per-edge cost may grow
  //    with log|E|; everything else is linear in the pair lists.
  txt << "\nforward pass scaling (1 layer, k=0.5)\n";
  std::snprintf(line, sizeof(line), "%6s %7s %10s %12s %16s\n", "n", "|E|",
                "ms", "ms/|E|", "ms/(|E|log|E|)");
  txt << line;
  j["forward"] = json::array();
  RunConfig fcfg;
  fcfg.lift_heads = 4;
  fcfg.lift_activation = Activation::ELU;
  fcfg.hidden_features = {8};
  fcfg.attention_heads = {1};
  fcfg.pool_ratio = 0.5;
  fcfg.pool_type = "glob";
  fcfg.mlp_neurons = 4;
  fcfg.dropout = 0.0;
  fcfg.validate();
  CanModel<double> model(fcfg, 1, 0, 2);
  Rng init(3);
  model.init_parameters(init);
  for (int n : {32, 64, 128, 256, 512}) {
    auto g = bench_graph(rng, n, 4.0);
    LiftedSample s;
    s.complex = lift_graph(g, lift_cfg);
    s.node_features.assign(n, {1.0});
    Rng fw(0);
    double best_ms = 1e99;
    for (int rep = 0; rep < 5; ++rep) {
      auto r0 = Clock::now();
      model.forward({&s}, false, fw);
      best_ms = std::min(best_ms, seconds_since(r0) * 1e3);
    }
    double e = static_cast<double>(s.complex.num_edges());
    std::snprintf(line, sizeof(line), "%6d %7d %10.3f %12.6f %16.6f\n", n,
                  s.complex.num_edges(), best_ms, best_ms / e,
                  best_ms / (e * std::log2(std::max(e, 2.0))));
    txt << line;
    j["forward"].push_back({{"n", n},
                            {"edges", s.complex.num_edges()},
                            {"ms", best_ms},
                            {"ms_per_edge", best_ms / e}});
  }

  std::printf("%s", txt.str().c_str());
  write_file(out_path(opt, "bench.json"), j.dump(2));
  write_file(out_path(opt, "bench.txt"), txt.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cell attention networks on lifted 2-complexes"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--data-dir", opt.data_dir, "dataset bundle root");
  app.add_option("--dataset", opt.dataset,
                 "bundle name under --data-dir, or 'ring' / 'memorize'");
  app.add_option("--config", opt.config_path, "RunConfig JSON file");
  app.add_option("--seed", opt.seed, "override the config seed");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--precision", opt.precision, "f64 or f32")
      ->check(CLI::IsMember({"f64", "f32"}));
  app.add_option("--max-ring-size", opt.max_ring_size,
                 "override the config ring cap R");
  app.add_option("--jobs", opt.jobs, "worker cap for parallel sections");
  app.add_flag("--dump-attention", opt.dump_attention,
               "write attention coefficients from an eval forward");

  auto* stats = app.add_subcommand("stats", "dataset statistics table");
  auto* lift = app.add_subcommand("lift", "lift a dataset, dump complexes");
  auto* train = app.add_subcommand("train", "train one stratified split");
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient check");
  auto* ablate = app.add_subcommand("ablate", "ablation comparison table");
  auto* bench = app.add_subcommand("bench", "lifting / forward benchmarks");

  for (auto* c : {train, cv, ablate})
    c->add_option("--folds", opt.folds, "fold count (default 10)");
  eval->add_option("--checkpoint", opt.checkpoint, "checkpoint JSON path");

  // global flags may appear after the subcommand name
  for (auto* c : {stats, lift, train, cv, eval, gradcheck, ablate, bench})
    c->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage errors get a fixed conventional code
  }

  try {
    if (stats->parsed()) return cmd_stats(opt);
    if (lift->parsed()) return cmd_lift(opt);
    if (train->parsed()) return cmd_train(opt);
    if (cv->parsed()) return cmd_cv(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (gradcheck->parsed()) return cmd_gradcheck(opt);
    if (ablate->parsed()) return cmd_ablate(opt);
    if (bench->parsed()) return cmd_bench(opt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "contract violation: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
