#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "canet/checkpoint.hpp"
#include "canet/model.hpp"
#include "canet/optimizer.hpp"
#include "canet/tud_parser.hpp"

namespace canet {

// A parsed dataset after lifting: what training actually consumes.
struct LiftedDataset {
  std::string name;
  std::vector<LiftedSample> samples;
  int node_dim = 0;
  int edge_feat_dim = 0;
  int num_classes = 0;

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }
};

// Lifts every graph of a parsed bundle (OpenMP across graphs).
LiftedDataset lift_tud_dataset(const TudDataset& data, const LiftConfig& cfg,
                               int jobs = 0);

// Synthetic benchmark: class 1 graphs contain exactly one 6-ring (plus
// random tree decorations), class 0 graphs are random trees; all node
// features are the constant 1, so ring structure is the only signal.
LiftedDataset make_ring_task(int num_graphs, uint64_t seed,
                             int max_ring_size = 6);

// Tiny two-class fixture (paths vs 6-rings, a few copies each) that a
// correct model must drive to 100% training accuracy quickly.
LiftedDataset make_memorization_fixture();

struct EpochMetrics {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct FoldResult {
  std::vector<EpochMetrics> epochs;
  int best_epoch = -1;  // by validation accuracy, earliest on ties
  bool diverged = false;
  std::string note;  // divergence diagnostic
};

struct CvReport {
  RunConfig config;
  std::string dataset;
  int num_folds = 0;
  std::vector<FoldResult> folds;
  std::vector<std::string> warnings;
  // Protocol summary: the epoch maximizing the across-fold mean
  // validation accuracy, that mean, and the std across folds there.
  int summary_epoch = -1;
  double summary_mean = 0.0;
  double summary_std = 0.0;
  double wall_seconds = 0.0;
};

// Fills the summary fields from the per-fold tables (max-of-means rule).
void summarize(CvReport& report);

std::string report_to_json_text(const CvReport& report);
std::string report_to_text(const CvReport& report);

// Default hyperparameters for the synthetic ring task: small, fast, and
// with an ELU lift so constant node features cannot dead-zone the lift.
RunConfig ring_task_config();

const std::vector<std::string>& ablation_switch_names();

// Returns base with exactly the named switch enabled ("none" returns it
// unchanged); ConfigError on unknown names or contradictory results.
RunConfig apply_ablation(const RunConfig& base, const std::string& name);

// ---------------------------------------------------------------------------
// Templated training core (double for f64 runs, float for f32)

namespace detail {

template <typename T>
struct BatchEval {
  double loss_sum = 0.0;  // summed over samples
  int correct = 0;
  int count = 0;
};

template <typename T>
BatchEval<T> eval_batch(CanModel<T>& model,
                        const std::vector<const LiftedSample*>& batch,
                        const std::vector<int>& labels, bool train, Rng& rng) {
  auto logits = model.forward(batch, train, rng);
  auto loss = cross_entropy(logits, labels);
  BatchEval<T> out;
  out.count = static_cast<int>(batch.size());
  out.loss_sum = static_cast<double>(loss.item()) * out.count;
  int classes = logits.cols();
  for (int i = 0; i < logits.rows(); ++i) {
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (logits.at(i, c) > logits.at(i, arg)) arg = c;
    if (arg == labels[i]) ++out.correct;
  }
  if (train) loss.backward();
  return out;
}

}  // namespace detail

// Accuracy (and optionally mean loss) over the given sample ids, eval
// mode. Batches may be evaluated in parallel; the reduction is ordered,
// so results match the serial run bitwise.
template <typename T>
double evaluate_accuracy(CanModel<T>& model, const LiftedDataset& data,
                         const std::vector<int>& ids, int batch_size,
                         int jobs = 1, double* mean_loss = nullptr) {
  if (ids.empty()) throw ContractViolation("evaluate_accuracy: no samples");
  int num_batches =
      (static_cast<int>(ids.size()) + batch_size - 1) / batch_size;
  std::vector<detail::BatchEval<T>> slots(num_batches);

  auto run_batch = [&](int b) {
    std::vector<const LiftedSample*> batch;
    std::vector<int> labels;
    int lo = b * batch_size;
    int hi = std::min<int>(lo + batch_size, static_cast<int>(ids.size()));
    for (int i = lo; i < hi; ++i) {
      batch.push_back(&data.samples[ids[i]]);
      labels.push_back(data.samples[ids[i]].label);
    }
    Rng unused(0);  // eval mode draws nothing
    slots[b] = detail::eval_batch(model, batch, labels, false, unused);
  };

#ifdef _OPENMP
  if (jobs != 1) {
    int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int b = 0; b < num_batches; ++b) run_batch(b);
  } else {
    for (int b = 0; b < num_batches; ++b) run_batch(b);
  }
#else
  (void)jobs;
  for (int b = 0; b < num_batches; ++b) run_batch(b);
#endif

  double loss_sum = 0.0;
  int correct = 0, count = 0;
  for (const auto& s : slots) {
    loss_sum += s.loss_sum;
    correct += s.correct;
    count += s.count;
  }
  if (mean_loss) *mean_loss = loss_sum / count;
  return static_cast<double>(correct) / count;
}

// One fold: seeded init, AdamW over shuffled mini-batches, per-epoch
// metrics, best-epoch parameter snapshot. fold_salt separates the fold's
// random streams so folds can run concurrently yet reproducibly.
template <typename T>
FoldResult train_fold(const LiftedDataset& data,
                      const std::vector<int>& train_ids,
                      const std::vector<int>& val_ids, const RunConfig& cfg,
                      uint64_t fold_salt = 0,
                      CanModel<T>* best_model_out = nullptr) {
  if (train_ids.empty()) throw ContractViolation("train_fold: no samples");
  Rng root(cfg.seed);
  Rng init_rng = root.derive(0x100 + fold_salt);
  Rng order_rng = root.derive(0x200 + fold_salt);
  Rng dropout_rng = root.derive(0x300 + fold_salt);

  CanModel<T> model(cfg, data.node_dim, data.edge_feat_dim, data.num_classes);
  model.init_parameters(init_rng);
  auto params = model.named_parameters();
  auto opt = adamw_init(model.trainable_parameters(), cfg.learning_rate,
                        cfg.weight_decay);

  FoldResult result;
  std::vector<std::vector<T>> best_values;
  std::vector<std::vector<T>> best_buffers;
  double best_val = -1.0;

  std::vector<int> order(train_ids);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the fold's own stream.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.below(i)]);

    double loss_sum = 0.0;
    int correct = 0;
    for (size_t lo = 0; lo < order.size();
         lo += static_cast<size_t>(cfg.batch_size)) {
      size_t hi = std::min(lo + cfg.batch_size, order.size());
      std::vector<const LiftedSample*> batch;
      std::vector<int> labels;
      for (size_t i = lo; i < hi; ++i) {
        batch.push_back(&data.samples[order[i]]);
        labels.push_back(data.samples[order[i]].label);
      }
      for (auto& np : params) np.tensor.zero_grad();
      auto stats = detail::eval_batch(model, batch, labels, true, dropout_rng);
      if (!std::isfinite(stats.loss_sum)) {
        result.diverged = true;
        result.note = "non-finite loss at epoch " + std::to_string(epoch) +
                      ", batch starting at sample " + std::to_string(lo);
        return result;
      }
      loss_sum += stats.loss_sum;
      correct += stats.correct;
      adamw_step(opt);
    }

    EpochMetrics metrics;
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    metrics.train_acc =
        static_cast<double>(correct) / static_cast<double>(order.size());
    if (!val_ids.empty())
      metrics.val_acc = evaluate_accuracy(model, data, val_ids,
                                          cfg.batch_size, 1, &metrics.val_loss);
    result.epochs.push_back(metrics);

    if (!val_ids.empty() && metrics.val_acc > best_val) {
      best_val = metrics.val_acc;
      result.best_epoch = epoch;
      if (best_model_out) {
        best_values.clear();
        for (auto& np : params) best_values.push_back(np.tensor.values());
        best_buffers.clear();
        for (auto& [name, buf] : model.named_buffers())
          best_buffers.push_back(*buf);
      }
    }
  }

  if (best_model_out) {
    if (result.best_epoch >= 0) {
      auto out_params = best_model_out->named_parameters();
      for (size_t i = 0; i < out_params.size(); ++i)
        out_params[i].tensor.values() = best_values[i];
      auto out_buffers = best_model_out->named_buffers();
      for (size_t i = 0; i < out_buffers.size(); ++i)
        *out_buffers[i].second = best_buffers[i];
    } else {
      // No validation set: hand back the final state.
      auto out_params = best_model_out->named_parameters();
      for (size_t i = 0; i < out_params.size(); ++i)
        out_params[i].tensor.values() = params[i].tensor.values();
      auto out_buffers = best_model_out->named_buffers();
      auto buffers = model.named_buffers();
      for (size_t i = 0; i < out_buffers.size(); ++i)
        *out_buffers[i].second = *buffers[i].second;
    }
  }
  return result;
}

// Stratified k-fold protocol. Folds are independent and may run in
// parallel; per-fold streams are derived from (seed, fold), so the
// report is identical regardless of jobs.
template <typename T>
CvReport cross_validate(const LiftedDataset& data, const RunConfig& cfg,
                        int num_folds = 10, int jobs = 1,
                        const std::string& checkpoint_dir = "") {
  auto start = std::chrono::steady_clock::now();
  CvReport report;
  report.config = cfg;
  report.dataset = data.name;
  report.num_folds = num_folds;

  auto plan = make_folds(static_cast<int>(data.samples.size()),
                         data.labels(), cfg.seed, num_folds);
  report.warnings = plan.warnings;
  report.folds.resize(num_folds);

  auto run_fold = [&](int f) {
    if (checkpoint_dir.empty()) {
      report.folds[f] = train_fold<T>(data, plan.folds[f].train_ids,
                                      plan.folds[f].val_ids, cfg,
                                      static_cast<uint64_t>(f));
    } else {
      CanModel<T> best(cfg, data.node_dim, data.edge_feat_dim,
                       data.num_classes);
      report.folds[f] = train_fold<T>(data, plan.folds[f].train_ids,
                                      plan.folds[f].val_ids, cfg,
                                      static_cast<uint64_t>(f), &best);
      save_checkpoint(best, checkpoint_dir + "/fold" + std::to_string(f) +
                                ".ckpt.json");
    }
  };

#ifdef _OPENMP
  if (jobs != 1) {
    int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int f = 0; f < num_folds; ++f) run_fold(f);
  } else {
    for (int f = 0; f < num_folds; ++f) run_fold(f);
  }
#else
  (void)jobs;
  for (int f = 0; f < num_folds; ++f) run_fold(f);
#endif

  summarize(report);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

// Precision dispatcher used by the CLI and tests.
inline CvReport run_cross_validation(const LiftedDataset& data,
                                     const RunConfig& cfg, int num_folds = 10,
                                     int jobs = 1,
                                     const std::string& checkpoint_dir = "") {
  if (cfg.precision == "f32")
    return cross_validate<float>(data, cfg, num_folds, jobs, checkpoint_dir);
  return cross_validate<double>(data, cfg, num_folds, jobs, checkpoint_dir);
}

}  // namespace canet
