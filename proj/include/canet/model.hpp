#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "canet/cell_complex.hpp"
#include "canet/config.hpp"
#include "canet/tensor.hpp"

namespace canet {

// One dataset sample after lifting: the cell complex plus the raw feature
// arrays it was built from. Produced once per dataset and shared between
// folds; the model reads it, never mutates it.
struct LiftedSample {
  CellComplex complex;
  std::vector<std::vector<double>> node_features;
  std::vector<std::vector<double>> edge_features;  // aligned with edges
  int label = 0;
};

// Flattened pair lists for a batch of disjoint complexes: one contiguous
// span of (e, k) neighbor pairs per edge, lower and upper separately.
// Offsets have one extra trailing entry so span g is [off[g], off[g+1]).
struct FlatView {
  int total_edges = 0;
  std::vector<int> edge_offset;    // per graph, plus total at the end
  std::vector<int> graph_of_edge;
  std::vector<int> low_e, low_k, low_off;
  std::vector<int> up_e, up_k, up_off;
};

inline FlatView flatten_batch(const std::vector<const CellComplex*>& complexes) {
  FlatView view;
  view.edge_offset.push_back(0);
  for (const auto* c : complexes) {
    view.total_edges += c->num_edges();
    view.edge_offset.push_back(view.total_edges);
  }
  view.graph_of_edge.resize(view.total_edges);
  view.low_off.reserve(view.total_edges + 1);
  view.up_off.reserve(view.total_edges + 1);
  view.low_off.push_back(0);
  view.up_off.push_back(0);
  for (size_t g = 0; g < complexes.size(); ++g) {
    int base = view.edge_offset[g];
    const auto& c = *complexes[g];
    for (int e = 0; e < c.num_edges(); ++e) {
      view.graph_of_edge[base + e] = static_cast<int>(g);
      for (int k : c.lower_nbrs[e]) {
        view.low_e.push_back(base + e);
        view.low_k.push_back(base + k);
      }
      view.low_off.push_back(static_cast<int>(view.low_e.size()));
      for (int k : c.upper_nbrs[e]) {
        view.up_e.push_back(base + e);
        view.up_k.push_back(base + k);
      }
      view.up_off.push_back(static_cast<int>(view.up_e.size()));
    }
  }
  return view;
}

// Exact-intent ceiling for the top-k size: pool ratios are decimals like
// 0.6 whose doubles sit within 1e-13 of the intended rational, so a tiny
// backoff keeps ceil(0.6 * 5) = 3 instead of tripping on rounding.
inline int pool_keep_count(double ratio, int edge_count) {
  if (edge_count == 0) return 0;
  int keep = static_cast<int>(std::ceil(ratio * edge_count - 1e-9));
  return std::max(1, std::min(keep, edge_count));
}

// Per-layer attention coefficients and pooling scores captured during a
// forward pass, for the --dump-attention explainability output. Pair ids
// and edge ids are batch-global at that layer's level; orig_edge maps a
// level-local edge back to the edge id in the unpooled complex.
struct ForwardDiagnostics {
  struct Layer {
    std::vector<int> low_e, low_k, up_e, up_k;
    std::vector<std::vector<double>> low_alpha;  // one column per head
    std::vector<std::vector<double>> up_alpha;
    std::vector<double> gamma;
    std::vector<int> kept_edges;
    std::vector<int> orig_edge;  // level edge id -> original edge id
  };
  std::vector<Layer> layers;
  // Final per-edge states (after the last layer's update and pooling),
  // row-major, one row per surviving edge in batch order.
  std::vector<double> final_edge_state;
  int final_state_cols = 0;
};

struct ParamBlock {
  std::string name;
  int64_t count = 0;
};

struct ParamCountReport {
  std::vector<ParamBlock> blocks;
  int64_t total = 0;
  int64_t trainable = 0;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

// The full network: attentional lift, a stack of cell attention layers
// with batch norm / dropout / self-attention pooling, readout, MLP head.
// Batches are disjoint unions of complexes; per-graph semantics (pooling,
// readout) are preserved via the flat views' graph bookkeeping.
template <typename T>
class CanModel {
 public:
  CanModel(const RunConfig& cfg, int node_dim, int edge_feat_dim,
           int num_classes)
      : cfg_(cfg),
        node_dim_(node_dim),
        edge_feat_dim_(edge_feat_dim),
        num_classes_(num_classes) {
    cfg_.validate();
    if (!cfg_.no_lift)
      for (int k = 0; k < cfg_.lift_heads; ++k)
        lift_heads_.push_back(Tensor<T>::zeros(2 * node_dim_, 1));

    int width = lift_width();
    for (int l = 0; l < cfg_.num_layers(); ++l) {
      Layer layer;
      layer.in_width = width;
      int f_out = cfg_.hidden_features[l];
      int heads = cfg_.attention_heads[l];
      layer.out_width = cfg_.head_aggregation == "cat" ? heads * f_out : f_out;
      for (int h = 0; h < heads; ++h) {
        Head head;
        head.a_d = Tensor<T>::zeros(width, 1);
        head.a_u = Tensor<T>::zeros(width, 1);
        head.w_s = Tensor<T>::zeros(width, f_out);
        head.w_d = Tensor<T>::zeros(width, f_out);
        head.w_u = Tensor<T>::zeros(width, f_out);
        layer.heads.push_back(std::move(head));
      }
      layer.bn_gamma = Tensor<T>::from(
          1, layer.out_width, std::vector<T>(layer.out_width, T(1)));
      layer.bn_beta = Tensor<T>::zeros(1, layer.out_width);
      layer.bn_run_mean.assign(layer.out_width, T(0));
      layer.bn_run_var.assign(layer.out_width, T(1));
      if (!cfg_.no_pooling)
        layer.a_p = Tensor<T>::zeros(layer.out_width, 1);
      layers_.push_back(std::move(layer));
      width = layers_.back().out_width;
    }
    mlp_w1_ = Tensor<T>::zeros(readout_width(), cfg_.mlp_neurons);
    mlp_b1_ = Tensor<T>::zeros(1, cfg_.mlp_neurons);
    mlp_w2_ = Tensor<T>::zeros(cfg_.mlp_neurons, num_classes_);
    mlp_b2_ = Tensor<T>::zeros(1, num_classes_);
  }

  // Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor;
  // batch-norm scale starts at 1, shift at 0; frozen attention vectors
  // (ablations) are pinned to all-ones.
  void init_parameters(Rng rng) {
    auto fill = [&rng](Tensor<T>& t, int fan_in) {
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.values()) v = T(rng.uniform(-bound, bound));
    };
    for (auto& a : lift_heads_) fill(a, 2 * node_dim_);
    for (auto& layer : layers_) {
      for (auto& head : layer.heads) {
        if (frozen_lower())
          std::fill(head.a_d.values().begin(), head.a_d.values().end(), T(1));
        else
          fill(head.a_d, layer.in_width);
        if (frozen_upper())
          std::fill(head.a_u.values().begin(), head.a_u.values().end(), T(1));
        else
          fill(head.a_u, layer.in_width);
        fill(head.w_s, layer.in_width);
        fill(head.w_d, layer.in_width);
        fill(head.w_u, layer.in_width);
      }
      std::fill(layer.bn_gamma.values().begin(), layer.bn_gamma.values().end(),
                T(1));
      std::fill(layer.bn_beta.values().begin(), layer.bn_beta.values().end(),
                T(0));
      layer.bn_run_mean.assign(layer.out_width, T(0));
      layer.bn_run_var.assign(layer.out_width, T(1));
      if (layer.a_p.defined()) fill(layer.a_p, layer.out_width);
    }
    fill(mlp_w1_, readout_width());
    fill(mlp_b1_, readout_width());
    fill(mlp_w2_, cfg_.mlp_neurons);
    fill(mlp_b2_, cfg_.mlp_neurons);
  }

  // Logits for a batch, one row per sample. train toggles dropout and
  // batch-norm statistics; rng feeds dropout masks only.
  Tensor<T> forward(const std::vector<const LiftedSample*>& batch, bool train,
                    Rng& rng, ForwardDiagnostics* diag = nullptr) {
    if (batch.empty()) throw ContractViolation("forward: empty batch");
    int num_graphs = static_cast<int>(batch.size());

    Tensor<T> h = lift_features(batch, train, rng);

    // Pooling rewires complexes level by level; keep per-graph copies.
    std::vector<CellComplex> current;
    current.reserve(batch.size());
    for (const auto* s : batch) current.push_back(s->complex);
    std::vector<std::vector<int>> orig_edge(batch.size());
    for (size_t g = 0; g < batch.size(); ++g) {
      orig_edge[g].resize(current[g].num_edges());
      for (int e = 0; e < current[g].num_edges(); ++e) orig_edge[g][e] = e;
    }

    std::vector<Tensor<T>> readouts;
    if (diag) diag->layers.clear();

    for (size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      std::vector<const CellComplex*> ptrs;
      for (const auto& c : current) ptrs.push_back(&c);
      FlatView view = flatten_batch(ptrs);

      ForwardDiagnostics::Layer* ldiag = nullptr;
      if (diag) {
        diag->layers.emplace_back();
        ldiag = &diag->layers.back();
        ldiag->low_e = view.low_e;
        ldiag->low_k = view.low_k;
        ldiag->up_e = view.up_e;
        ldiag->up_k = view.up_k;
        for (size_t g = 0; g < batch.size(); ++g)
          ldiag->orig_edge.insert(ldiag->orig_edge.end(), orig_edge[g].begin(),
                                  orig_edge[g].end());
      }

      // Attention heads, combined per the configured aggregation.
      std::vector<Tensor<T>> head_outs;
      for (auto& head : layer.heads)
        head_outs.push_back(attention_head(h, view, head, ldiag));
      Tensor<T> z;
      if (head_outs.size() == 1) {
        z = head_outs[0];
      } else if (cfg_.head_aggregation == "cat") {
        z = concat_cols(head_outs);
      } else {
        z = head_outs[0];
        for (size_t i = 1; i < head_outs.size(); ++i) z = add(z, head_outs[i]);
        z = scalar_mul(z, T(1.0 / static_cast<double>(head_outs.size())));
      }

      z = batch_norm_1d(z, layer.bn_gamma, layer.bn_beta, layer.bn_run_mean,
                        layer.bn_run_var, train && view.total_edges > 0);
      z = dropout(z, cfg_.dropout, train, rng);

      if (!cfg_.no_pooling) {
        z = pool_level(z, layer, current, orig_edge, view, ldiag);
      }

      // Hierarchical mode reads out every layer; global (and the pooling
      // ablation) read out the final layer only.
      bool is_last = l + 1 == layers_.size();
      bool hierarchical = cfg_.pool_type == "hier" && !cfg_.no_pooling;
      if (hierarchical || is_last)
        readouts.push_back(
            scatter_add_rows(z, rebuilt_graph_ids(current), num_graphs));
      if (diag && is_last) {
        diag->final_edge_state.assign(z.values().begin(), z.values().end());
        diag->final_state_cols = z.cols();
      }
      h = z;
    }

    Tensor<T> pooled = readouts[0];
    for (size_t i = 1; i < readouts.size(); ++i)
      pooled = add(pooled, readouts[i]);

    auto hidden = apply_activation(
        add_bias(matmul(pooled, mlp_w1_), mlp_b1_), cfg_.update_activation,
        T(cfg_.negative_slope));
    return add_bias(matmul(hidden, mlp_w2_), mlp_b2_);
  }

  // All parameter tensors, stable order; trainable == false marks the
  // frozen ablation vectors the optimizer must skip.
  std::vector<NamedTensor<T>> named_parameters() {
    std::vector<NamedTensor<T>> out;
    for (size_t k = 0; k < lift_heads_.size(); ++k)
      out.push_back({"lift.a" + std::to_string(k), lift_heads_[k], true});
    for (size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      std::string base = "layer" + std::to_string(l) + ".";
      for (size_t h = 0; h < layer.heads.size(); ++h) {
        std::string hb = base + "head" + std::to_string(h) + ".";
        auto& head = layer.heads[h];
        out.push_back({hb + "a_d", head.a_d, !frozen_lower()});
        out.push_back({hb + "a_u", head.a_u, !frozen_upper()});
        out.push_back({hb + "w_s", head.w_s, true});
        out.push_back({hb + "w_d", head.w_d, true});
        out.push_back({hb + "w_u", head.w_u, true});
      }
      out.push_back({base + "bn.gamma", layer.bn_gamma, true});
      out.push_back({base + "bn.beta", layer.bn_beta, true});
      if (layer.a_p.defined()) out.push_back({base + "pool.a_p", layer.a_p, true});
    }
    out.push_back({"mlp.w1", mlp_w1_, true});
    out.push_back({"mlp.b1", mlp_b1_, true});
    out.push_back({"mlp.w2", mlp_w2_, true});
    out.push_back({"mlp.b2", mlp_b2_, true});
    return out;
  }

  std::vector<Tensor<T>> trainable_parameters() {
    std::vector<Tensor<T>> out;
    for (auto& np : named_parameters())
      if (np.trainable) out.push_back(np.tensor);
    return out;
  }

  // Running batch-norm buffers (not parameters); order matches layers.
  std::vector<std::pair<std::string, std::vector<T>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    for (size_t l = 0; l < layers_.size(); ++l) {
      std::string base = "layer" + std::to_string(l) + ".bn.";
      out.push_back({base + "running_mean", &layers_[l].bn_run_mean});
      out.push_back({base + "running_var", &layers_[l].bn_run_var});
    }
    return out;
  }

  // Closed-form-friendly breakdown: the lift block, one attention block
  // per layer (all heads), the pool vector and batch-norm affine pair per
  // layer, and the MLP head. Counts are the actual tensor sizes.
  ParamCountReport count_parameters() {
    ParamCountReport report;
    auto push = [&report](const std::string& name, int64_t count) {
      report.blocks.push_back({name, count});
      report.total += count;
    };
    int64_t lift = 0;
    for (const auto& a : lift_heads_) lift += a.size();
    push("lift", lift);
    for (size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      std::string base = "layer" + std::to_string(l) + ".";
      int64_t attn = 0;
      for (const auto& head : layer.heads)
        attn += head.a_d.size() + head.a_u.size() + head.w_s.size() +
                head.w_d.size() + head.w_u.size();
      push(base + "attention", attn);
      push(base + "batch_norm", layer.bn_gamma.size() + layer.bn_beta.size());
      if (layer.a_p.defined()) push(base + "pool", layer.a_p.size());
    }
    push("mlp", mlp_w1_.size() + mlp_b1_.size() + mlp_w2_.size() +
                    mlp_b2_.size());
    for (auto& np : named_parameters())
      if (np.trainable) report.trainable += np.tensor.size();
    return report;
  }

  const RunConfig& config() const { return cfg_; }
  int node_dim() const { return node_dim_; }
  int edge_feat_dim() const { return edge_feat_dim_; }
  int num_classes() const { return num_classes_; }

  // Width of the edge features entering the first attention layer.
  int lift_width() const {
    return (cfg_.no_lift ? 1 : cfg_.lift_heads) + edge_feat_dim_;
  }

  int readout_width() const {
    // Hierarchical readout sums equal-width layers; otherwise only the
    // last layer feeds the head.
    return layers_.back().out_width;
  }

 private:
  struct Head {
    Tensor<T> a_d, a_u, w_s, w_d, w_u;
  };
  struct Layer {
    std::vector<Head> heads;
    Tensor<T> bn_gamma, bn_beta;
    std::vector<T> bn_run_mean, bn_run_var;
    Tensor<T> a_p;  // undefined when pooling is ablated away
    int in_width = 0;
    int out_width = 0;
  };

  bool frozen_lower() const { return cfg_.no_lower || cfg_.no_attention; }
  bool frozen_upper() const { return cfg_.no_upper || cfg_.no_attention; }

  // Edge features: per-edge attention over the two endpoint node feature
  // vectors (one score per lift head, concatenated), or their plain dot
  // product when the lift is ablated; dataset edge features append.
  Tensor<T> lift_features(const std::vector<const LiftedSample*>& batch,
                          bool train, Rng& rng) {
    int total_nodes = 0, total_edges = 0;
    for (const auto* s : batch) {
      total_nodes += s->complex.num_vertices;
      total_edges += s->complex.num_edges();
    }
    std::vector<T> xv(static_cast<size_t>(total_nodes) * node_dim_);
    std::vector<int> tails, heads;
    tails.reserve(total_edges);
    heads.reserve(total_edges);
    int node_base = 0;
    for (const auto* s : batch) {
      for (int v = 0; v < s->complex.num_vertices; ++v) {
        if (static_cast<int>(s->node_features[v].size()) != node_dim_)
          throw ContractViolation("node feature width " +
                                  std::to_string(s->node_features[v].size()) +
                                  " does not match model width " +
                                  std::to_string(node_dim_));
        for (int f = 0; f < node_dim_; ++f)
          xv[static_cast<size_t>(node_base + v) * node_dim_ + f] =
              T(s->node_features[v][f]);
      }
      for (auto [u, v] : s->complex.edges) {
        tails.push_back(node_base + u);
        heads.push_back(node_base + v);
      }
      node_base += s->complex.num_vertices;
    }
    auto x = Tensor<T>::from(total_nodes, node_dim_, std::move(xv));
    auto xi = gather_rows(x, tails);
    auto xj = gather_rows(x, heads);

    Tensor<T> lifted;
    if (cfg_.no_lift) {
      auto ones = Tensor<T>::from(node_dim_, 1,
                                  std::vector<T>(node_dim_, T(1)));
      lifted = matmul(mul(xi, xj), ones);  // row-wise dot product
    } else {
      auto fwd = concat_cols<T>({xi, xj});
      Tensor<T> rev;
      if (cfg_.lift_symmetric) rev = concat_cols<T>({xj, xi});
      std::vector<Tensor<T>> scores;
      for (auto& a : lift_heads_) {
        auto s = matmul(fwd, a);
        if (cfg_.lift_symmetric)
          s = scalar_mul(add(s, matmul(rev, a)), T(0.5));
        scores.push_back(s);
      }
      lifted = scores.size() == 1 ? scores[0] : concat_cols(scores);
      lifted = apply_activation(lifted, cfg_.lift_activation,
                                T(cfg_.negative_slope));
      lifted = dropout(lifted, cfg_.lift_dropout, train, rng);
    }

    if (edge_feat_dim_ > 0) {
      std::vector<T> ev(static_cast<size_t>(total_edges) * edge_feat_dim_);
      int row = 0;
      for (const auto* s : batch) {
        if (static_cast<int>(s->edge_features.size()) !=
            s->complex.num_edges())
          throw ContractViolation(
              "edge feature rows " + std::to_string(s->edge_features.size()) +
              " do not match edge count " +
              std::to_string(s->complex.num_edges()));
        for (const auto& feat : s->edge_features) {
          for (int f = 0; f < edge_feat_dim_; ++f)
            ev[static_cast<size_t>(row) * edge_feat_dim_ + f] = T(feat[f]);
          ++row;
        }
      }
      auto edge_x = Tensor<T>::from(total_edges, edge_feat_dim_,
                                    std::move(ev));
      lifted = concat_cols<T>({lifted, edge_x});
    }
    return lifted;
  }

  // One head of the message-passing update
  //   phi((1+eps) W_s h_e + sum_d alpha W_d h_k + sum_u alpha W_u h_k)
  // with scores a^T h_e + a^T h_k softmax-normalized per neighborhood;
  // empty neighborhoods contribute nothing.
  Tensor<T> attention_head(const Tensor<T>& h, const FlatView& view,
                           Head& head, ForwardDiagnostics::Layer* ldiag) {
    auto z = scalar_mul(matmul(h, head.w_s), T(1.0 + cfg_.epsilon));
    z = add(z, neighborhood_term(h, head.a_d, head.w_d, view.low_e,
                                 view.low_k, view.low_off,
                                 ldiag ? &ldiag->low_alpha : nullptr));
    z = add(z, neighborhood_term(h, head.a_u, head.w_u, view.up_e, view.up_k,
                                 view.up_off,
                                 ldiag ? &ldiag->up_alpha : nullptr));
    return apply_activation(z, cfg_.update_activation, T(cfg_.negative_slope));
  }

  Tensor<T> neighborhood_term(const Tensor<T>& h, Tensor<T>& a, Tensor<T>& w,
                              const std::vector<int>& pair_e,
                              const std::vector<int>& pair_k,
                              const std::vector<int>& offsets,
                              std::vector<std::vector<double>>* alpha_dump) {
    auto transformed = matmul(h, w);
    auto score_col = matmul(h, a);  // per-edge scalar a^T h
    auto pair_scores =
        add(gather_rows(score_col, pair_e), gather_rows(score_col, pair_k));
    pair_scores = apply_activation(pair_scores, cfg_.attention_activation,
                                   T(cfg_.negative_slope));
    auto alpha = masked_softmax(pair_scores, offsets);
    if (alpha_dump) {
      std::vector<double> col(alpha.values().begin(), alpha.values().end());
      alpha_dump->push_back(std::move(col));
    }
    auto messages = mul_rows(gather_rows(transformed, pair_k), alpha);
    return scatter_add_rows(messages, pair_e, h.rows());
  }

  // Self-attention top-k pooling: gamma = phi_p(a_p^T z); keep the top
  // ceil(k E_g) edges per graph (ties to the lower edge index), scale the
  // survivors by gamma, and rebuild each complex on the kept edges.
  Tensor<T> pool_level(const Tensor<T>& z, Layer& layer,
                       std::vector<CellComplex>& current,
                       std::vector<std::vector<int>>& orig_edge,
                       const FlatView& view,
                       ForwardDiagnostics::Layer* ldiag) {
    auto gamma = apply_activation(matmul(z, layer.a_p), cfg_.pool_activation,
                                  T(cfg_.negative_slope));
    if (ldiag)
      ldiag->gamma.assign(gamma.values().begin(), gamma.values().end());

    std::vector<int> kept_global;
    for (size_t g = 0; g < current.size(); ++g) {
      int base = view.edge_offset[g];
      int count = current[g].num_edges();
      int keep = pool_keep_count(cfg_.pool_ratio, count);
      std::vector<int> local(count);
      for (int e = 0; e < count; ++e) local[e] = e;
      std::stable_sort(local.begin(), local.end(), [&](int a_, int b_) {
        return gamma.values()[base + a_] > gamma.values()[base + b_];
      });
      local.resize(keep);
      std::sort(local.begin(), local.end());
      current[g] = restrict_to_edges(current[g], local);
      std::vector<int> new_orig(keep);
      for (int i = 0; i < keep; ++i) new_orig[i] = orig_edge[g][local[i]];
      orig_edge[g] = std::move(new_orig);
      for (int e : local) kept_global.push_back(base + e);
    }
    if (ldiag) ldiag->kept_edges = kept_global;
    return mul_rows(gather_rows(z, kept_global),
                    gather_rows(gamma, kept_global));
  }

  std::vector<int> rebuilt_graph_ids(const std::vector<CellComplex>& current) {
    std::vector<int> ids;
    for (size_t g = 0; g < current.size(); ++g)
      ids.insert(ids.end(), current[g].num_edges(), static_cast<int>(g));
    return ids;
  }

  RunConfig cfg_;
  int node_dim_ = 0;
  int edge_feat_dim_ = 0;
  int num_classes_ = 0;
  std::vector<Tensor<T>> lift_heads_;
  std::vector<Layer> layers_;
  Tensor<T> mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
};

}  // namespace canet
