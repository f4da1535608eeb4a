#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "canet/checkpoint.hpp"
#include "canet/lifting.hpp"
#include "canet/model.hpp"
#include "canet/optimizer.hpp"
#include "json.hpp"

using namespace canet;

namespace {

// Batch-norm in eval mode with fresh (0, 1) running stats shrinks every
// activation by this factor.
const double kBnEval = 1.0 / std::sqrt(1.0 + 1e-5);

LiftedSample single_edge_sample(std::vector<std::vector<double>> feats) {
  GraphTopology g;
  g.num_vertices = 2;
  g.edges = {{0, 1}};
  LiftedSample s;
  s.complex = lift_graph(g, LiftConfig{6});
  s.node_features = std::move(feats);
  return s;
}

LiftedSample triangle_sample(std::vector<double> x) {
  GraphTopology g;
  g.num_vertices = 3;
  g.edges = {{0, 1}, {0, 2}, {1, 2}};
  LiftedSample s;
  s.complex = lift_graph(g, LiftConfig{6});
  for (double v : x) s.node_features.push_back({v});
  return s;
}

LiftedSample hexagon_sample(std::vector<double> x) {
  GraphTopology g;
  g.num_vertices = 6;
  for (int v = 0; v < 6; ++v) g.edges.push_back({v, (v + 1) % 6});
  LiftedSample s;
  s.complex = lift_graph(g, LiftConfig{6});
  for (double v : x) s.node_features.push_back({v});
  return s;
}

// A config whose every nonlinearity is the identity, one layer, one head,
// no pooling: the forward pass becomes hand-checkable arithmetic.
RunConfig identity_config() {
  RunConfig cfg;
  cfg.lift_heads = 1;
  cfg.lift_activation = Activation::Identity;
  cfg.hidden_features = {1};
  cfg.attention_heads = {1};
  cfg.attention_activation = Activation::Identity;
  cfg.update_activation = Activation::Identity;
  cfg.mlp_neurons = 1;
  cfg.dropout = 0.0;
  cfg.no_pooling = true;
  cfg.pool_type = "glob";
  return cfg;
}

void set_param(std::vector<NamedTensor<double>>& params,
               const std::string& name, const std::vector<double>& values) {
  for (auto& np : params) {
    if (np.name != name) continue;
    REQUIRE(np.tensor.size() == static_cast<int64_t>(values.size()));
    np.tensor.values() = values;
    return;
  }
  FAIL("no parameter named " << name);
}

// Zeroes everything, then routes the (scalar) readout straight through
// the MLP into logit 0.
void wire_identity_mlp(std::vector<NamedTensor<double>>& params) {
  set_param(params, "mlp.w1", {1.0});
  set_param(params, "mlp.b1", {0.0});
  set_param(params, "mlp.w2", {1.0, 0.0});
  set_param(params, "mlp.b2", {0.0, 0.0});
}

double forward_logit0(CanModel<double>& model,
                      const std::vector<const LiftedSample*>& batch,
                      ForwardDiagnostics* diag = nullptr) {
  Rng rng(0);
  auto logits = model.forward(batch, false, rng, diag);
  return logits.at(0, 0);
}

}  // namespace

TEST_CASE("lift scores one edge as a^T [x_i || x_j]") {
  auto cfg = identity_config();
  auto sample = single_edge_sample({{1.0, 0.0}, {0.0, 1.0}});

  CanModel<double> model(cfg, 2, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 2.0, 3.0, 5.0});
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {0.0});
  set_param(params, "layer0.head0.w_u", {0.0});
  wire_identity_mlp(params);

  // [x_0 || x_1] = (1, 0, 0, 1) so the score is 1 + 5.
  CHECK(forward_logit0(model, {&sample}) ==
        doctest::Approx(6.0 * kBnEval).epsilon(1e-12));

  // Symmetric mode averages both orderings: (6 + (2 + 3)) / 2.
  auto sym_cfg = cfg;
  sym_cfg.lift_symmetric = true;
  CanModel<double> sym(sym_cfg, 2, 0, 2);
  auto sym_params = sym.named_parameters();
  set_param(sym_params, "lift.a0", {1.0, 2.0, 3.0, 5.0});
  set_param(sym_params, "layer0.head0.a_d", {0.0});
  set_param(sym_params, "layer0.head0.a_u", {0.0});
  set_param(sym_params, "layer0.head0.w_s", {1.0});
  set_param(sym_params, "layer0.head0.w_d", {0.0});
  set_param(sym_params, "layer0.head0.w_u", {0.0});
  wire_identity_mlp(sym_params);
  CHECK(forward_logit0(sym, {&sample}) ==
        doctest::Approx(5.5 * kBnEval).epsilon(1e-12));
}

TEST_CASE("the (1+eps) self-term scales the update") {
  auto cfg = identity_config();
  cfg.epsilon = 1.0;
  auto sample = single_edge_sample({{1.0, 0.0}, {0.0, 1.0}});
  CanModel<double> model(cfg, 2, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 2.0, 3.0, 5.0});
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {0.0});
  set_param(params, "layer0.head0.w_u", {0.0});
  wire_identity_mlp(params);
  CHECK(forward_logit0(model, {&sample}) ==
        doctest::Approx(2.0 * 6.0 * kBnEval).epsilon(1e-12));
}

TEST_CASE("triangle attention: softmax weights match hand arithmetic") {
  // Node values (1, 2, 4) give edge features h = (3, 5, 6) for the
  // canonical edges (0,1), (0,2), (1,2).
  auto cfg = identity_config();
  auto sample = triangle_sample({1.0, 2.0, 4.0});
  CanModel<double> model(cfg, 1, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 1.0});
  set_param(params, "layer0.head0.a_d", {1.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {1.0});
  set_param(params, "layer0.head0.w_u", {1.0});
  wire_identity_mlp(params);

  // Lower scores are h_e + h_k; upper scores are uniform (a_u = 0).
  auto soft2 = [](double s1, double s2, double v1, double v2) {
    double m = std::max(s1, s2);
    double e1 = std::exp(s1 - m), e2 = std::exp(s2 - m);
    return (v1 * e1 + v2 * e2) / (e1 + e2);
  };
  double z0 = 3.0 + soft2(3 + 5, 3 + 6, 5, 6) + 5.5;
  double z1 = 5.0 + soft2(5 + 3, 5 + 6, 3, 6) + 4.5;
  double z2 = 6.0 + soft2(6 + 3, 6 + 5, 3, 5) + 4.0;
  double expected = (z0 + z1 + z2) * kBnEval;

  ForwardDiagnostics diag;
  CHECK(forward_logit0(model, {&sample}, &diag) ==
        doctest::Approx(expected).epsilon(1e-12));

  // The dumped attention rows are normalized and asymmetric: the weight
  // e0 puts on e1 differs from the weight e1 puts on e0.
  REQUIRE(diag.layers.size() == 1);
  REQUIRE(diag.layers[0].low_alpha.size() == 1);  // one head
  const auto& alpha = diag.layers[0].low_alpha[0];
  REQUIRE(alpha.size() == 6);  // three edges, two lower neighbours each
  CHECK(alpha[0] + alpha[1] == doctest::Approx(1.0).epsilon(1e-12));
  double a_e0_e1 = alpha[0];
  double a_e1_e0 = alpha[2];
  CHECK(a_e0_e1 == doctest::Approx(std::exp(8.0) /
                                   (std::exp(8.0) + std::exp(9.0))));
  CHECK(a_e1_e0 == doctest::Approx(std::exp(8.0) /
                                   (std::exp(8.0) + std::exp(11.0))));
  CHECK(a_e0_e1 != doctest::Approx(a_e1_e0));
}

TEST_CASE("uniform attention averages the neighbourhood") {
  // With zeroed score vectors every neighbour weighs the same, so each
  // triangle edge receives mean(lower) + mean(upper) on top of itself.
  auto cfg = identity_config();
  auto sample = triangle_sample({1.0, 2.0, 4.0});
  CanModel<double> model(cfg, 1, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 1.0});
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {1.0});
  set_param(params, "layer0.head0.w_u", {1.0});
  wire_identity_mlp(params);
  // Each edge: h_e + mean(others) + mean(others); totals to 14 each.
  CHECK(forward_logit0(model, {&sample}) ==
        doctest::Approx(42.0 * kBnEval).epsilon(1e-12));
}

TEST_CASE("pool keep counts honour the ceiling with a rounding guard") {
  CHECK(pool_keep_count(0.5, 5) == 3);
  CHECK(pool_keep_count(0.6, 5) == 3);  // 0.6 * 5 is 3, not 3.0000000001
  CHECK(pool_keep_count(0.75, 4) == 3);
  CHECK(pool_keep_count(1.0, 7) == 7);
  CHECK(pool_keep_count(0.1, 3) == 1);  // never empties a graph
  CHECK(pool_keep_count(0.5, 0) == 0);
  CHECK(pool_keep_count(0.25, 2) == 1);
}

TEST_CASE("pooling keeps the top-gamma edges, ties to lower ids") {
  auto cfg = identity_config();
  cfg.no_pooling = false;
  cfg.pool_ratio = 0.5;
  cfg.pool_type = "glob";
  auto sample = hexagon_sample({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});

  CanModel<double> model(cfg, 1, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 1.0});
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {0.0});
  set_param(params, "layer0.head0.w_u", {0.0});
  set_param(params, "layer0.pool.a_p", {1.0});
  wire_identity_mlp(params);

  // Canonical hexagon edges: (0,1) (0,5) (1,2) (2,3) (3,4) (4,5) with
  // endpoint sums (3, 7, 5, 7, 9, 11); edges 1 and 3 tie at 7, so the
  // keep-3 set is {5, 4, 1} with the tie resolved to the lower id.
  ForwardDiagnostics diag;
  double logit = forward_logit0(model, {&sample}, &diag);
  REQUIRE(diag.layers.size() == 1);
  CHECK(diag.layers[0].kept_edges == std::vector<int>{1, 4, 5});

  double expected = 0.0;
  for (double h : {7.0, 9.0, 11.0}) {
    double z = h * kBnEval;  // uniform attention sends h through unchanged
    expected += z * std::tanh(z);
  }
  CHECK(logit == doctest::Approx(expected).epsilon(1e-12));

  // gamma diagnostics cover all six edges before selection.
  CHECK(diag.layers[0].gamma.size() == 6);
}

TEST_CASE("equal scores keep the lowest edge ids") {
  auto cfg = identity_config();
  cfg.no_pooling = false;
  cfg.pool_ratio = 0.5;
  cfg.pool_type = "glob";
  auto sample = hexagon_sample({1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
  CanModel<double> model(cfg, 1, 0, 2);
  auto params = model.named_parameters();
  set_param(params, "lift.a0", {1.0, 1.0});
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {0.0});
  set_param(params, "layer0.head0.w_u", {0.0});
  set_param(params, "layer0.pool.a_p", {0.0});
  wire_identity_mlp(params);
  ForwardDiagnostics diag;
  forward_logit0(model, {&sample}, &diag);
  CHECK(diag.layers[0].kept_edges == std::vector<int>{0, 1, 2});
}

TEST_CASE("pooling rewires the complex seen by the next layer") {
  auto cfg = identity_config();
  cfg.no_pooling = false;
  cfg.pool_ratio = 0.5;
  cfg.pool_type = "glob";
  cfg.hidden_features = {1, 1};
  cfg.attention_heads = {1, 1};
  auto sample = hexagon_sample({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  CanModel<double> model(cfg, 1, 0, 2);
  Rng init(3);
  model.init_parameters(init);

  ForwardDiagnostics diag;
  Rng rng(0);
  model.forward({&sample}, false, rng, &diag);
  REQUIRE(diag.layers.size() == 2);
  // Layer 0 saw the full hexagon: 6 edges, 2 lower neighbours each.
  CHECK(diag.layers[0].low_e.size() == 12);
  CHECK(diag.layers[0].up_e.size() == 30);
  // Layer 1 sees 3 surviving edges and no ring (it was broken).
  CHECK(diag.layers[0].kept_edges.size() == 3);
  CHECK(diag.layers[1].up_e.empty());
  CHECK(diag.layers[1].orig_edge.size() == 3);
  // After the second pooling, ceil(0.5 * 3) = 2 edges remain, and their
  // original ids are a subset of the first survivors.
  CHECK(diag.layers[1].kept_edges.size() == 2);
}

TEST_CASE("hierarchical readout sums layers; global reads the last") {
  auto base = identity_config();
  base.no_pooling = false;
  base.pool_ratio = 1.0;
  base.hidden_features = {1, 1};
  base.attention_heads = {1, 1};

  auto sample = triangle_sample({1.0, 2.0, 4.0});
  auto build = [&](const std::string& pool_type) {
    auto cfg = base;
    cfg.pool_type = pool_type;
    CanModel<double> model(cfg, 1, 0, 2);
    auto params = model.named_parameters();
    set_param(params, "lift.a0", {1.0, 1.0});
    for (int l = 0; l < 2; ++l) {
      std::string p = "layer" + std::to_string(l) + ".head0.";
      set_param(params, p + "a_d", {0.0});
      set_param(params, p + "a_u", {0.0});
      // Layer 1 maps everything to zero; layer 0 is the identity pipe.
      set_param(params, p + "w_s", {l == 0 ? 1.0 : 0.0});
      set_param(params, p + "w_d", {0.0});
      set_param(params, p + "w_u", {0.0});
      set_param(params, "layer" + std::to_string(l) + ".pool.a_p", {0.0});
    }
    wire_identity_mlp(params);
    return model;
  };

  // gamma = tanh(0) = 0 would zero the survivors, so give pool scores a
  // bias through a_p = 0 -> gamma = 0; instead keep gamma nonzero by
  // scaling: use a_p = 1 on layer 0 only.
  auto hier = build("hier");
  auto hier_params = hier.named_parameters();
  set_param(hier_params, "layer0.pool.a_p", {1.0});
  auto glob = build("glob");
  auto glob_params = glob.named_parameters();
  set_param(glob_params, "layer0.pool.a_p", {1.0});

  // Layer 0 output per edge: z = h * kBnEval (uniform attention with
  // zero message weights), scaled by gamma = tanh(z). Layer 1 maps to
  // zero, and BN in eval mode keeps zero at zero.
  double layer0_sum = 0.0;
  for (double h : {3.0, 5.0, 6.0}) {
    double z = h * kBnEval;
    layer0_sum += z * std::tanh(z);
  }
  CHECK(forward_logit0(hier, {&sample}) ==
        doctest::Approx(layer0_sum).epsilon(1e-9));
  CHECK(forward_logit0(glob, {&sample}) == doctest::Approx(0.0));
}

TEST_CASE("parameter counts match the closed forms") {
  RunConfig cfg;
  cfg.lift_heads = 4;
  cfg.hidden_features = {8, 8};
  cfg.attention_heads = {2, 1};
  cfg.head_aggregation = "cat";
  cfg.pool_type = "glob";
  cfg.mlp_neurons = 4;
  int node_dim = 3, edge_dim = 2, classes = 2;
  CanModel<double> model(cfg, node_dim, edge_dim, classes);

  auto report = model.count_parameters();
  int64_t lift = 4 * 2 * node_dim;
  int64_t in0 = 4 + edge_dim;
  int64_t attn0 = 2 * (2 * in0 + 3 * in0 * 8);
  int64_t out0 = 2 * 8;
  int64_t in1 = out0;
  int64_t attn1 = 1 * (2 * in1 + 3 * in1 * 8);
  int64_t out1 = 8;
  int64_t mlp = out1 * 4 + 4 + 4 * classes + classes;

  auto block = [&](const std::string& name) {
    for (const auto& b : report.blocks)
      if (b.name == name) return b.count;
    FAIL("missing block " << name);
    return int64_t{-1};
  };
  CHECK(block("lift") == lift);
  CHECK(block("layer0.attention") == attn0);
  CHECK(block("layer0.batch_norm") == 2 * out0);
  CHECK(block("layer0.pool") == out0);
  CHECK(block("layer1.attention") == attn1);
  CHECK(block("layer1.batch_norm") == 2 * out1);
  CHECK(block("layer1.pool") == out1);
  CHECK(block("mlp") == mlp);
  CHECK(report.total == lift + attn0 + 2 * out0 + out0 + attn1 + 2 * out1 +
                            out1 + mlp);
  CHECK(report.trainable == report.total);

  // Frozen ablation vectors drop out of the trainable count only.
  auto frozen_cfg = cfg;
  frozen_cfg.no_lower = true;
  CanModel<double> frozen(frozen_cfg, node_dim, edge_dim, classes);
  auto fr = frozen.count_parameters();
  CHECK(fr.total == report.total);
  CHECK(fr.trainable == report.total - (2 * in0 + in1));  // the a_d vectors
}

TEST_CASE("config validation rejects inconsistent settings") {
  RunConfig cfg;
  cfg.hidden_features = {8, 4};
  cfg.attention_heads = {1, 1};
  cfg.pool_type = "hier";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.pool_type = "glob";
  CHECK_NOTHROW(cfg.validate());
  cfg.pool_type = "hier";
  cfg.no_pooling = true;  // only the last layer is read out
  CHECK_NOTHROW(cfg.validate());

  RunConfig heads;
  heads.hidden_features = {8, 8};
  heads.attention_heads = {2, 1};
  heads.head_aggregation = "cat";  // widths 16 vs 8
  CHECK_THROWS_AS(heads.validate(), ConfigError);
  heads.head_aggregation = "avg";  // widths 8 vs 8
  CHECK_NOTHROW(heads.validate());

  RunConfig contra;
  contra.no_attention = true;
  contra.no_lower = true;
  CHECK_THROWS_AS(contra.validate(), ConfigError);
  contra.no_lower = false;
  CHECK_NOTHROW(contra.validate());

  RunConfig bad_ratio;
  bad_ratio.pool_ratio = 0.0;
  CHECK_THROWS_AS(bad_ratio.validate(), ConfigError);
  bad_ratio.pool_ratio = 1.5;
  CHECK_THROWS_AS(bad_ratio.validate(), ConfigError);

  RunConfig mismatch;
  mismatch.hidden_features = {8, 8};
  mismatch.attention_heads = {1};
  CHECK_THROWS_AS(mismatch.validate(), ConfigError);
}

TEST_CASE("ablation switches change structure the way they should") {
  RunConfig cfg;
  cfg.hidden_features = {4};
  cfg.attention_heads = {1};
  cfg.pool_type = "glob";

  auto no_lift_cfg = cfg;
  no_lift_cfg.no_lift = true;
  CanModel<double> no_lift_model(no_lift_cfg, 3, 2, 2);
  CHECK(no_lift_model.lift_width() == 1 + 2);
  auto report = no_lift_model.count_parameters();
  for (const auto& b : report.blocks)
    if (b.name == "lift") CHECK(b.count == 0);
  for (auto& np : no_lift_model.named_parameters())
    CHECK(np.name.substr(0, 4) != "lift");

  // The plain dot product replaces the learned lift.
  auto id_cfg = identity_config();
  id_cfg.no_lift = true;
  auto sample = single_edge_sample({{1.0, 2.0}, {3.0, 4.0}});
  CanModel<double> dot(id_cfg, 2, 0, 2);
  auto params = dot.named_parameters();
  set_param(params, "layer0.head0.a_d", {0.0});
  set_param(params, "layer0.head0.a_u", {0.0});
  set_param(params, "layer0.head0.w_s", {1.0});
  set_param(params, "layer0.head0.w_d", {0.0});
  set_param(params, "layer0.head0.w_u", {0.0});
  wire_identity_mlp(params);
  CHECK(forward_logit0(dot, {&sample}) ==
        doctest::Approx(11.0 * kBnEval).epsilon(1e-12));  // 1*3 + 2*4

  auto no_lower_cfg = cfg;
  no_lower_cfg.no_lower = true;
  CanModel<double> frozen(no_lower_cfg, 3, 0, 2);
  Rng init(1);
  frozen.init_parameters(init);
  for (auto& np : frozen.named_parameters()) {
    if (np.name.find("a_d") == std::string::npos) continue;
    CHECK(!np.trainable);
    for (double v : np.tensor.values()) CHECK(v == 1.0);
  }

  auto no_pool_cfg = cfg;
  no_pool_cfg.no_pooling = true;
  CanModel<double> no_pool(no_pool_cfg, 3, 0, 2);
  for (const auto& b : no_pool.count_parameters().blocks)
    CHECK(b.name.find("pool") == std::string::npos);
}

TEST_CASE("full model gradients survive a central-difference audit") {
  RunConfig cfg;
  cfg.lift_heads = 2;
  cfg.lift_activation = Activation::ELU;
  cfg.hidden_features = {2, 2};
  cfg.attention_heads = {2, 1};
  cfg.head_aggregation = "cat";
  cfg.attention_activation = Activation::Tanh;
  cfg.update_activation = Activation::ELU;
  cfg.pool_activation = Activation::Tanh;
  cfg.pool_type = "glob";
  cfg.pool_ratio = 1.0;  // keep-all: selection cannot flip under h
  cfg.dropout = 0.0;
  cfg.lift_dropout = 0.0;
  cfg.mlp_neurons = 4;

  auto tri = triangle_sample({0.3, -0.7, 1.1});
  auto hex = hexagon_sample({0.5, -0.2, 0.9, -1.0, 0.4, 0.1});
  std::vector<const LiftedSample*> batch = {&tri, &hex};
  std::vector<int> labels = {0, 1};

  CanModel<double> model(cfg, 1, 0, 2);
  Rng init(11);
  model.init_parameters(init);

  std::vector<std::pair<std::string, Tensor<double>>> params;
  for (auto& np : model.named_parameters())
    params.push_back({np.name, np.tensor});

  Rng rng(0);
  auto report = grad_check(
      [&] { return cross_entropy(model.forward(batch, false, rng), labels); },
      params, 1e-6, 1e-5);
  INFO("worst: " << report.worst.param << "[" << report.worst.index
                 << "] rel_err=" << report.worst.rel_err);
  CHECK(report.passed);
  CHECK(report.entries_checked > 100);
}

TEST_CASE("checkpoints round-trip bitwise and validate on load") {
  RunConfig cfg;
  cfg.hidden_features = {3, 3};
  cfg.attention_heads = {2, 2};
  cfg.head_aggregation = "avg";
  cfg.pool_ratio = 0.75;
  cfg.dropout = 0.0;
  CanModel<double> model(cfg, 2, 0, 2);
  Rng init(5);
  model.init_parameters(init);

  // Make the running stats nontrivial before saving.
  auto tri = triangle_sample({1.0, -1.0, 0.5});
  for (auto& s : tri.node_features) s.resize(2, 0.25);
  std::vector<const LiftedSample*> batch = {&tri};
  Rng rng(1);
  model.forward(batch, true, rng);

  std::string path = "test_ckpt_roundtrip.json";
  save_checkpoint(model, path);
  CHECK(checkpoint_precision(path) == "f64");
  auto loaded = load_checkpoint_f64(path);

  Rng r1(2), r2(2);
  auto a = model.forward(batch, false, r1);
  auto b = loaded.forward(batch, false, r2);
  CHECK(a.values() == b.values());

  // Corrupting a stored shape must be caught, not segfault.
  {
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    j["parameters"]["mlp.w1"]["values"].erase(0);
    std::ofstream out("test_ckpt_bad.json");
    out << j.dump();
  }
  CHECK_THROWS_AS(load_checkpoint_f64("test_ckpt_bad.json"), DataError);

  {
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    j["format_version"] = 99;
    std::ofstream out("test_ckpt_ver.json");
    out << j.dump();
  }
  CHECK_THROWS_AS(load_checkpoint_f64("test_ckpt_ver.json"), DataError);

  std::remove(path.c_str());
  std::remove("test_ckpt_bad.json");
  std::remove("test_ckpt_ver.json");
}
