#include "canet/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace canet {

using nlohmann::json;

LiftedDataset lift_tud_dataset(const TudDataset& data, const LiftConfig& cfg,
                               int jobs) {
  std::vector<GraphTopology> graphs;
  graphs.reserve(data.graphs.size());
  for (const auto& g : data.graphs) graphs.push_back(g.topology);
  auto complexes = lift_dataset(graphs, cfg, jobs);

  LiftedDataset out;
  out.name = data.name;
  out.node_dim = data.feature_dim;
  out.edge_feat_dim = data.edge_feature_dim;
  out.num_classes = data.num_classes;
  out.samples.reserve(data.graphs.size());
  for (size_t i = 0; i < data.graphs.size(); ++i) {
    LiftedSample s;
    s.complex = std::move(complexes[i]);
    s.node_features = data.graphs[i].node_features;
    s.edge_features = data.graphs[i].edge_features;
    s.label = data.graphs[i].label;
    out.samples.push_back(std::move(s));
  }
  return out;
}

namespace {

LiftedSample lift_plain(const GraphTopology& g, int label, int max_ring) {
  LiftedSample s;
  s.complex = lift_graph(g, LiftConfig{max_ring});
  s.node_features.assign(g.num_vertices, {1.0});
  s.label = label;
  return s;
}

}  // namespace

LiftedDataset make_ring_task(int num_graphs, uint64_t seed,
                             int max_ring_size) {
  if (num_graphs < 2) throw ConfigError("ring task needs at least 2 graphs");
  LiftedDataset out;
  out.name = "ring_task";
  out.node_dim = 1;
  out.edge_feat_dim = 0;
  out.num_classes = 2;
  Rng root(seed);
  for (int i = 0; i < num_graphs; ++i) {
    Rng rng = root.derive(static_cast<uint64_t>(i));
    int label = i % 2;
    int n = 7 + static_cast<int>(rng.below(8));  // 7..14 vertices
    GraphTopology g;
    g.num_vertices = n;
    int first_free = 1;
    if (label == 1) {
      // A 6-ring, then random tree decorations hanging off it.
      for (int v = 0; v < 6; ++v) g.edges.push_back({v, (v + 1) % 6});
      first_free = 6;
    }
    for (int v = first_free; v < n; ++v) {
      int parent = static_cast<int>(rng.below(static_cast<uint64_t>(v)));
      g.edges.push_back({parent, v});
    }
    out.samples.push_back(lift_plain(g, label, max_ring_size));
  }
  return out;
}

LiftedDataset make_memorization_fixture() {
  LiftedDataset out;
  out.name = "memorization";
  out.node_dim = 1;
  out.edge_feat_dim = 0;
  out.num_classes = 2;

  GraphTopology path;  // P4: no rings anywhere
  path.num_vertices = 4;
  path.edges = {{0, 1}, {1, 2}, {2, 3}};

  GraphTopology ring;  // C6: one 6-ring
  ring.num_vertices = 6;
  for (int v = 0; v < 6; ++v) ring.edges.push_back({v, (v + 1) % 6});

  for (int i = 0; i < 5; ++i) {
    out.samples.push_back(lift_plain(path, 0, 6));
    out.samples.push_back(lift_plain(ring, 1, 6));
  }
  return out;
}

void summarize(CvReport& report) {
  size_t max_epochs = 0;
  for (const auto& f : report.folds)
    max_epochs = std::max(max_epochs, f.epochs.size());

  report.summary_epoch = -1;
  report.summary_mean = 0.0;
  report.summary_std = 0.0;
  for (size_t e = 0; e < max_epochs; ++e) {
    std::vector<double> accs;
    for (const auto& f : report.folds)
      if (e < f.epochs.size()) accs.push_back(f.epochs[e].val_acc);
    if (accs.empty()) continue;
    double mean =
        std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
    if (mean > report.summary_mean || report.summary_epoch < 0) {
      double var = 0.0;
      for (double a : accs) var += (a - mean) * (a - mean);
      var /= static_cast<double>(accs.size());
      report.summary_epoch = static_cast<int>(e);
      report.summary_mean = mean;
      report.summary_std = std::sqrt(var);
    }
  }
}

std::string report_to_json_text(const CvReport& report) {
  json j;
  j["format_version"] = 1;
  j["dataset"] = report.dataset;
  j["num_folds"] = report.num_folds;
  j["config"] = json::parse(config_to_json_text(report.config));
  j["warnings"] = report.warnings;
  j["summary"] = {{"epoch", report.summary_epoch},
                  {"val_acc_mean", report.summary_mean},
                  {"val_acc_std", report.summary_std}};
  // wall time stays out of the JSON so reruns of one seed diff clean
  j["folds"] = json::array();
  for (const auto& f : report.folds) {
    json jf;
    jf["best_epoch"] = f.best_epoch;
    jf["diverged"] = f.diverged;
    if (f.diverged) jf["note"] = f.note;
    jf["epochs"] = json::array();
    for (const auto& e : f.epochs)
      jf["epochs"].push_back({{"train_loss", e.train_loss},
                              {"train_acc", e.train_acc},
                              {"val_loss", e.val_loss},
                              {"val_acc", e.val_acc}});
    j["folds"].push_back(std::move(jf));
  }
  return j.dump(2);
}

std::string report_to_text(const CvReport& report) {
  std::ostringstream os;
  os << "dataset: " << report.dataset << "  (" << report.num_folds
     << "-fold cross-validation)\n";
  for (const auto& w : report.warnings) os << "warning: " << w << "\n";

  size_t max_epochs = 0;
  for (const auto& f : report.folds)
    max_epochs = std::max(max_epochs, f.epochs.size());

  os << "\nepoch  mean_train_loss  mean_train_acc  mean_val_acc  val_std\n";
  char line[128];
  for (size_t e = 0; e < max_epochs; ++e) {
    double tl = 0, ta = 0, va = 0, vv = 0;
    int n = 0;
    for (const auto& f : report.folds) {
      if (e >= f.epochs.size()) continue;
      tl += f.epochs[e].train_loss;
      ta += f.epochs[e].train_acc;
      va += f.epochs[e].val_acc;
      ++n;
    }
    if (n == 0) continue;
    tl /= n;
    ta /= n;
    va /= n;
    for (const auto& f : report.folds)
      if (e < f.epochs.size())
        vv += (f.epochs[e].val_acc - va) * (f.epochs[e].val_acc - va);
    vv = std::sqrt(vv / n);
    std::snprintf(line, sizeof(line), "%5zu  %15.4f  %14.4f  %12.4f  %7.4f\n",
                  e, tl, ta, va, vv);
    os << line;
  }

  for (size_t f = 0; f < report.folds.size(); ++f)
    if (report.folds[f].diverged)
      os << "fold " << f << " diverged: " << report.folds[f].note << "\n";

  std::snprintf(line, sizeof(line),
                "\nsummary: %.4f +/- %.4f at epoch %d  (%.1fs)\n",
                report.summary_mean, report.summary_std, report.summary_epoch,
                report.wall_seconds);
  os << line;
  return os.str();
}

RunConfig ring_task_config() {
  RunConfig cfg;
  cfg.lift_heads = 1;
  cfg.lift_activation = Activation::ELU;
  cfg.hidden_features = {16, 16};
  cfg.attention_heads = {1, 1};
  cfg.attention_activation = Activation::LeakyReLU;
  cfg.update_activation = Activation::ELU;
  cfg.pool_ratio = 1.0;
  cfg.pool_type = "hier";
  cfg.dropout = 0.0;
  cfg.mlp_neurons = 16;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.epochs = 30;
  cfg.seed = 0;
  return cfg;
}

const std::vector<std::string>& ablation_switch_names() {
  static const std::vector<std::string> names = {
      "none", "no_lift", "no_lower", "no_upper", "no_attention", "no_pooling"};
  return names;
}

RunConfig apply_ablation(const RunConfig& base, const std::string& name) {
  RunConfig cfg = base;
  if (name == "none") {
  } else if (name == "no_lift") {
    cfg.no_lift = true;
  } else if (name == "no_lower") {
    cfg.no_lower = true;
  } else if (name == "no_upper") {
    cfg.no_upper = true;
  } else if (name == "no_attention") {
    cfg.no_attention = true;
  } else if (name == "no_pooling") {
    cfg.no_pooling = true;
  } else {
    throw ConfigError("unknown ablation switch: " + name);
  }
  cfg.validate();
  return cfg;
}

}  // namespace canet
