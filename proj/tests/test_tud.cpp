#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "canet/common.hpp"
#include "canet/tud_parser.hpp"

using namespace canet;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = CANET_DATA_DIR;

// A two-graph bundle exercising every optional file: node attributes,
// node labels, and edge labels, with messy 1-based ids and duplicated
// directed edges.
fs::path write_toy_bundle() {
  auto dir = fs::temp_directory_path() / "canet_toy_bundle";
  fs::create_directories(dir);
  auto put = [&](const std::string& file, const std::string& text) {
    std::ofstream out(dir / file);
    out << text;
  };
  put("TOY_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n");
  put("TOY_graph_indicator.txt", "1\n1\n1\n2\n2\n");
  put("TOY_graph_labels.txt", "5\n3\n");
  put("TOY_node_labels.txt", "10\n20\n10\n20\n30\n");
  put("TOY_node_attributes.txt", "0.5\n1.5\n2.5\n3.5\n4.5\n");
  put("TOY_edge_labels.txt", "7\n7\n9\n9\n7\n7\n");
  return dir;
}

}  // namespace

TEST_CASE("toy bundle: ids, dedup, vocabularies, feature layout") {
  auto dir = write_toy_bundle();
  auto data = parse_tud(dir.string(), "TOY");

  CHECK(data.num_classes == 2);
  CHECK(data.raw_class_values == std::vector<int>{3, 5});
  REQUIRE(data.graphs.size() == 2);

  const auto& g1 = data.graphs[0];
  CHECK(g1.label == 1);  // raw 5 is the second sorted class value
  CHECK(g1.topology.num_vertices == 3);
  CHECK(g1.topology.edges ==
        std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});

  // Attributes come first, then the one-hot of the label vocabulary
  // {10, 20, 30}.
  CHECK(data.feature_dim == 4);
  CHECK(g1.node_features[0] == std::vector<double>{0.5, 1, 0, 0});
  CHECK(g1.node_features[1] == std::vector<double>{1.5, 0, 1, 0});
  CHECK(g1.node_features[2] == std::vector<double>{2.5, 1, 0, 0});

  // Edge label vocabulary {7, 9}, aligned with the canonical edges.
  CHECK(data.edge_feature_dim == 2);
  CHECK(g1.edge_features[0] == std::vector<double>{1, 0});
  CHECK(g1.edge_features[1] == std::vector<double>{0, 1});

  const auto& g2 = data.graphs[1];
  CHECK(g2.label == 0);
  CHECK(g2.topology.num_vertices == 2);
  CHECK(g2.topology.edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(g2.node_features[0] == std::vector<double>{3.5, 0, 1, 0});
  CHECK(g2.edge_features[0] == std::vector<double>{1, 0});
}

TEST_CASE("graphs without any node information get a constant feature") {
  auto dir = fs::temp_directory_path() / "canet_bare_bundle";
  fs::create_directories(dir);
  auto put = [&](const std::string& file, const std::string& text) {
    std::ofstream out(dir / file);
    out << text;
  };
  put("BARE_A.txt", "1, 2\n2, 1\n");
  put("BARE_graph_indicator.txt", "1\n1\n");
  put("BARE_graph_labels.txt", "0\n");
  auto data = parse_tud(dir.string(), "BARE");
  CHECK(data.feature_dim == 1);
  CHECK(data.edge_feature_dim == 0);
  CHECK(data.graphs[0].node_features[0] == std::vector<double>{1.0});
  CHECK(data.num_classes == 1);
}

TEST_CASE("malformed bundles fail with the file named") {
  auto dir = write_toy_bundle();

  fs::remove(dir / "TOY_A.txt");
  CHECK_THROWS_WITH_AS(parse_tud(dir.string(), "TOY"),
                       doctest::Contains("TOY_A.txt"), DataError);
  dir = write_toy_bundle();

  {
    std::ofstream out(dir / "TOY_A.txt", std::ios::app);
    out << "3, 4\n";  // vertex 3 is in graph 1, vertex 4 in graph 2
    std::ofstream lab(dir / "TOY_edge_labels.txt", std::ios::app);
    lab << "7\n";
  }
  CHECK_THROWS_WITH_AS(parse_tud(dir.string(), "TOY"),
                       doctest::Contains("crosses"), DataError);
  dir = write_toy_bundle();

  {
    std::ofstream out(dir / "TOY_graph_labels.txt");
    out << "5\n";  // one label for two graphs
  }
  CHECK_THROWS_AS(parse_tud(dir.string(), "TOY"), DataError);
  dir = write_toy_bundle();

  {
    std::ofstream out(dir / "TOY_node_labels.txt");
    out << "10\nbananas\n10\n20\n30\n";
  }
  CHECK_THROWS_WITH_AS(parse_tud(dir.string(), "TOY"),
                       doctest::Contains("TOY_node_labels.txt:2"), DataError);
}

TEST_CASE("MUTAG bundle: counts, dims, and class mapping") {
  auto data = parse_tud(kDataDir + "/MUTAG", "MUTAG");
  CHECK(data.graphs.size() == 188);
  CHECK(data.num_classes == 2);
  CHECK(data.feature_dim == 7);       // one-hot of 7 atom types
  CHECK(data.edge_feature_dim == 4);  // one-hot of 4 bond types
  for (const auto& g : data.graphs) {
    CHECK(g.label >= 0);
    CHECK(g.label < 2);
    CHECK(static_cast<int>(g.edge_features.size()) ==
          static_cast<int>(g.topology.edges.size()));
  }
}

TEST_CASE("PROTEINS bundle parses with label-only features") {
  auto data = parse_tud(kDataDir + "/PROTEINS", "PROTEINS");
  CHECK(data.graphs.size() == 1113);
  CHECK(data.num_classes == 2);
  CHECK(data.feature_dim == 3);
  CHECK(data.edge_feature_dim == 0);
}

TEST_CASE("parsing is deterministic and round-trips through serialize") {
  auto first = parse_tud(kDataDir + "/MUTAG", "MUTAG");
  auto second = parse_tud(kDataDir + "/MUTAG", "MUTAG");
  REQUIRE(first.graphs.size() == second.graphs.size());
  for (size_t i = 0; i < first.graphs.size(); ++i)
    CHECK(first.graphs[i] == second.graphs[i]);

  auto dir = fs::temp_directory_path() / "canet_mutag_roundtrip";
  serialize_tud(first, dir.string());
  auto reparsed = parse_tud(dir.string(), "MUTAG");
  CHECK(reparsed.num_classes == first.num_classes);
  CHECK(reparsed.feature_dim == first.feature_dim);
  CHECK(reparsed.edge_feature_dim == first.edge_feature_dim);
  REQUIRE(reparsed.graphs.size() == first.graphs.size());
  for (size_t i = 0; i < first.graphs.size(); ++i)
    CHECK(first.graphs[i] == reparsed.graphs[i]);
}

TEST_CASE("stratified folds: MUTAG sizes and class balance") {
  auto data = parse_tud(kDataDir + "/MUTAG", "MUTAG");
  std::vector<int> labels;
  for (const auto& g : data.graphs) labels.push_back(g.label);
  int class0 = 0;
  for (int y : labels) class0 += y == 0 ? 1 : 0;

  auto plan = make_folds(188, labels, 7, 10);
  CHECK(plan.warnings.empty());
  REQUIRE(plan.folds.size() == 10);

  std::set<int> seen;
  int smaller = 0;
  for (const auto& fold : plan.folds) {
    int size = static_cast<int>(fold.val_ids.size());
    CHECK((size == 18 || size == 19));
    smaller += size == 18 ? 1 : 0;
    CHECK(fold.train_ids.size() + fold.val_ids.size() == 188);
    for (int id : fold.val_ids) {
      CHECK(!seen.count(id));
      seen.insert(id);
    }
    // Every fold sees close to the global class ratio.
    int c0 = 0;
    for (int id : fold.val_ids) c0 += labels[id] == 0 ? 1 : 0;
    double global = static_cast<double>(class0) / 188.0;
    CHECK(std::abs(c0 / static_cast<double>(size) - global) < 0.06);
    // train and val are disjoint and sorted
    std::set<int> train(fold.train_ids.begin(), fold.train_ids.end());
    for (int id : fold.val_ids) CHECK(!train.count(id));
  }
  CHECK(seen.size() == 188);
  CHECK(smaller == 2);  // 188 = 8 * 19 + 2 * 18
}

TEST_CASE("balanced folds deal classes evenly") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 2);
  auto plan = make_folds(100, labels, 3, 10);
  for (const auto& fold : plan.folds) {
    REQUIRE(fold.val_ids.size() == 10);
    int ones = 0;
    for (int id : fold.val_ids) ones += labels[id];
    CHECK(ones == 5);
  }
}

TEST_CASE("fold plans are seed-deterministic") {
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3);
  auto a = make_folds(60, labels, 42, 10);
  auto b = make_folds(60, labels, 42, 10);
  bool same = true;
  for (int f = 0; f < 10; ++f)
    same = same && a.folds[f].val_ids == b.folds[f].val_ids &&
           a.folds[f].train_ids == b.folds[f].train_ids;
  CHECK(same);

  auto c = make_folds(60, labels, 43, 10);
  bool identical = true;
  for (int f = 0; f < 10; ++f)
    identical = identical && a.folds[f].val_ids == c.folds[f].val_ids;
  CHECK(!identical);
}

TEST_CASE("tiny classes fall back to unstratified folds with a warning") {
  std::vector<int> labels(30, 0);
  labels[3] = 1;  // a single member of class 1
  auto plan = make_folds(30, labels, 1, 10);
  REQUIRE(!plan.warnings.empty());
  CHECK(plan.warnings[0].find("unstratified") != std::string::npos);
  std::set<int> seen;
  for (const auto& fold : plan.folds)
    for (int id : fold.val_ids) seen.insert(id);
  CHECK(seen.size() == 30);

  CHECK_THROWS_AS(make_folds(5, std::vector<int>(5, 0), 1, 10), ConfigError);
  CHECK_THROWS_AS(make_folds(4, std::vector<int>(5, 0), 1, 4),
                  ContractViolation);
}
