#include "canet/tud_parser.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "canet/common.hpp"

namespace canet {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void parse_fail(const std::string& file, size_t line,
                             const std::string& what) {
  throw DataError(file + ":" + std::to_string(line) + ": " + what);
}

// Reads non-empty lines; the TUD text files are one record per line.
std::vector<std::string> read_lines(const std::string& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) throw DataError("missing mandatory file: " + path);
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Splits on commas and/or whitespace; every field must parse fully.
template <typename T>
std::vector<T> parse_fields(const std::string& text, const std::string& file,
                            size_t line) {
  std::string spaced = text;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::istringstream in(spaced);
  std::vector<T> fields;
  std::string token;
  while (in >> token) {
    T value;
    size_t used = 0;
    try {
      if constexpr (std::is_integral_v<T>)
        value = static_cast<T>(std::stoll(token, &used));
      else
        value = static_cast<T>(std::stod(token, &used));
    } catch (const std::exception&) {
      parse_fail(file, line, "cannot parse '" + token + "'");
    }
    if (used != token.size())
      parse_fail(file, line, "trailing characters in '" + token + "'");
    fields.push_back(value);
  }
  return fields;
}

template <typename T>
T parse_single(const std::string& text, const std::string& file, size_t line) {
  auto fields = parse_fields<T>(text, file, line);
  if (fields.size() != 1)
    parse_fail(file, line,
               "expected one value, got " + std::to_string(fields.size()));
  return fields[0];
}

std::vector<double> one_hot(int value, const std::vector<int>& vocabulary) {
  std::vector<double> v(vocabulary.size(), 0.0);
  auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), value);
  v[static_cast<size_t>(it - vocabulary.begin())] = 1.0;
  return v;
}

}  // namespace

TudDataset parse_tud(const std::string& dir, const std::string& name) {
  auto path_of = [&](const std::string& suffix) {
    return (fs::path(dir) / (name + suffix)).string();
  };
  const std::string a_file = path_of("_A.txt");
  const std::string ind_file = path_of("_graph_indicator.txt");
  const std::string lab_file = path_of("_graph_labels.txt");

  auto a_lines = read_lines(a_file, true);
  auto ind_lines = read_lines(ind_file, true);
  auto lab_lines = read_lines(lab_file, true);
  auto nlab_lines = read_lines(path_of("_node_labels.txt"), false);
  auto nattr_lines = read_lines(path_of("_node_attributes.txt"), false);
  auto elab_lines = read_lines(path_of("_edge_labels.txt"), false);

  // Graph membership of every (1-based) node; nodes get local ids in
  // global order, so TUD's contiguous-per-graph layout is preserved.
  size_t num_nodes = ind_lines.size();
  std::vector<int> node_graph(num_nodes);
  int num_graphs = 0;
  for (size_t i = 0; i < num_nodes; ++i) {
    int g = parse_single<int>(ind_lines[i], ind_file, i + 1);
    if (g < 1)
      parse_fail(ind_file, i + 1, "graph ids are 1-based, got " +
                                      std::to_string(g));
    node_graph[i] = g - 1;
    num_graphs = std::max(num_graphs, g);
  }
  if (static_cast<size_t>(num_graphs) != lab_lines.size())
    throw DataError(lab_file + ": has " + std::to_string(lab_lines.size()) +
                    " labels for " + std::to_string(num_graphs) + " graphs");

  std::vector<int> local_id(num_nodes);
  std::vector<int> graph_size(num_graphs, 0);
  for (size_t i = 0; i < num_nodes; ++i)
    local_id[i] = graph_size[node_graph[i]]++;

  TudDataset data;
  data.name = name;
  data.graphs.resize(num_graphs);
  for (int g = 0; g < num_graphs; ++g)
    data.graphs[g].topology.num_vertices = graph_size[g];

  // Edges: merge the two stored directions into one canonical pair, and
  // keep the edge label (identical across directions) when present.
  if (!elab_lines.empty() && elab_lines.size() != a_lines.size())
    throw DataError(path_of("_edge_labels.txt") + ": has " +
                    std::to_string(elab_lines.size()) + " labels for " +
                    std::to_string(a_lines.size()) + " edge lines");
  std::vector<std::map<std::pair<int, int>, int>> edge_label(num_graphs);
  std::set<int> edge_label_values;
  for (size_t i = 0; i < a_lines.size(); ++i) {
    auto uv = parse_fields<long long>(a_lines[i], a_file, i + 1);
    if (uv.size() != 2)
      parse_fail(a_file, i + 1, "expected 'u, v', got " +
                                    std::to_string(uv.size()) + " fields");
    long long u = uv[0], v = uv[1];
    if (u < 1 || v < 1 || u > static_cast<long long>(num_nodes) ||
        v > static_cast<long long>(num_nodes))
      parse_fail(a_file, i + 1,
                 "node id outside 1.." + std::to_string(num_nodes));
    int gu = node_graph[u - 1], gv = node_graph[v - 1];
    if (gu != gv)
      parse_fail(a_file, i + 1,
                 "edge crosses graphs " + std::to_string(gu + 1) + " and " +
                     std::to_string(gv + 1));
    int a = local_id[u - 1], b = local_id[v - 1];
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    int label = 0;
    if (!elab_lines.empty()) {
      label = parse_single<int>(elab_lines[i], path_of("_edge_labels.txt"),
                                i + 1);
      edge_label_values.insert(label);
    }
    edge_label[gu].emplace(key, label);  // first direction wins; symmetric
  }
  for (int g = 0; g < num_graphs; ++g) {
    auto& topo = data.graphs[g].topology;
    topo.edges.reserve(edge_label[g].size());
    for (const auto& [key, label] : edge_label[g]) topo.edges.push_back(key);
  }

  // Node features: attributes first, then the one-hot node label.
  if (!nlab_lines.empty() && nlab_lines.size() != num_nodes)
    throw DataError(path_of("_node_labels.txt") + ": has " +
                    std::to_string(nlab_lines.size()) + " labels for " +
                    std::to_string(num_nodes) + " nodes");
  if (!nattr_lines.empty() && nattr_lines.size() != num_nodes)
    throw DataError(path_of("_node_attributes.txt") + ": has " +
                    std::to_string(nattr_lines.size()) + " rows for " +
                    std::to_string(num_nodes) + " nodes");
  std::vector<int> node_labels(num_nodes, 0);
  std::vector<int> node_label_vocab;
  if (!nlab_lines.empty()) {
    std::set<int> values;
    for (size_t i = 0; i < num_nodes; ++i) {
      node_labels[i] = parse_single<int>(nlab_lines[i],
                                         path_of("_node_labels.txt"), i + 1);
      values.insert(node_labels[i]);
    }
    node_label_vocab.assign(values.begin(), values.end());
  }
  std::vector<std::vector<double>> node_attrs;
  if (!nattr_lines.empty()) {
    node_attrs.resize(num_nodes);
    for (size_t i = 0; i < num_nodes; ++i) {
      node_attrs[i] = parse_fields<double>(nattr_lines[i],
                                           path_of("_node_attributes.txt"),
                                           i + 1);
      if (i > 0 && node_attrs[i].size() != node_attrs[0].size())
        parse_fail(path_of("_node_attributes.txt"), i + 1,
                   "inconsistent attribute count");
    }
  }
  size_t attr_dim = node_attrs.empty() ? 0 : node_attrs[0].size();
  data.feature_dim = static_cast<int>(attr_dim + node_label_vocab.size());
  if (data.feature_dim == 0) data.feature_dim = 1;  // constant fallback
  for (int g = 0; g < num_graphs; ++g)
    data.graphs[g].node_features.resize(
        graph_size[g], std::vector<double>(data.feature_dim, 0.0));
  for (size_t i = 0; i < num_nodes; ++i) {
    auto& row = data.graphs[node_graph[i]].node_features[local_id[i]];
    if (attr_dim == 0 && node_label_vocab.empty()) {
      row[0] = 1.0;
      continue;
    }
    for (size_t k = 0; k < attr_dim; ++k) row[k] = node_attrs[i][k];
    if (!node_label_vocab.empty()) {
      auto hot = one_hot(node_labels[i], node_label_vocab);
      std::copy(hot.begin(), hot.end(), row.begin() + attr_dim);
    }
  }

  // Edge features from edge labels.
  if (!elab_lines.empty()) {
    std::vector<int> vocab(edge_label_values.begin(), edge_label_values.end());
    data.edge_feature_dim = static_cast<int>(vocab.size());
    for (int g = 0; g < num_graphs; ++g) {
      auto& sample = data.graphs[g];
      sample.edge_features.reserve(sample.topology.edges.size());
      for (auto edge : sample.topology.edges)
        sample.edge_features.push_back(one_hot(edge_label[g].at(edge), vocab));
    }
  }

  // Class labels remapped to 0-based contiguous ids.
  std::vector<int> raw(num_graphs);
  std::set<int> classes;
  for (int g = 0; g < num_graphs; ++g) {
    raw[g] = parse_single<int>(lab_lines[g], lab_file, g + 1);
    classes.insert(raw[g]);
  }
  data.raw_class_values.assign(classes.begin(), classes.end());
  data.num_classes = static_cast<int>(data.raw_class_values.size());
  for (int g = 0; g < num_graphs; ++g) {
    auto it = std::lower_bound(data.raw_class_values.begin(),
                               data.raw_class_values.end(), raw[g]);
    data.graphs[g].label =
        static_cast<int>(it - data.raw_class_values.begin());
  }
  return data;
}

void serialize_tud(const TudDataset& data, const std::string& dir) {
  fs::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    std::string path = (fs::path(dir) / (data.name + suffix)).string();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
  };

  auto a_out = open("_A.txt");
  auto ind_out = open("_graph_indicator.txt");
  auto lab_out = open("_graph_labels.txt");

  bool any_node_label = false;
  for (const auto& g : data.graphs)
    if (!g.node_features.empty()) any_node_label = true;

  std::ofstream nlab_out, elab_out;
  if (any_node_label) nlab_out = open("_node_labels.txt");
  if (data.edge_feature_dim > 0) elab_out = open("_edge_labels.txt");

  // Node features round-trip as labels only when every row is a one-hot
  // vector; that covers what this serializer is for (test fixtures and
  // the bundled label-only datasets).
  int base = 0;  // global 1-based node offset of the current graph
  for (size_t gi = 0; gi < data.graphs.size(); ++gi) {
    const auto& g = data.graphs[gi];
    lab_out << data.raw_class_values[g.label] << "\n";
    for (int v = 0; v < g.topology.num_vertices; ++v) {
      ind_out << gi + 1 << "\n";
      if (any_node_label) {
        const auto& row = g.node_features[v];
        auto it = std::max_element(row.begin(), row.end());
        nlab_out << (it - row.begin()) << "\n";
      }
    }
    for (size_t e = 0; e < g.topology.edges.size(); ++e) {
      auto [u, v] = g.topology.edges[e];
      a_out << base + u + 1 << ", " << base + v + 1 << "\n";
      a_out << base + v + 1 << ", " << base + u + 1 << "\n";
      if (data.edge_feature_dim > 0) {
        const auto& row = g.edge_features[e];
        auto it = std::max_element(row.begin(), row.end());
        elab_out << (it - row.begin()) << "\n";
        elab_out << (it - row.begin()) << "\n";
      }
    }
    base += g.topology.num_vertices;
  }
}

FoldPlan make_folds(int n, const std::vector<int>& labels, uint64_t seed,
                    int num_folds) {
  if (static_cast<size_t>(n) != labels.size())
    throw ContractViolation("make_folds: n does not match labels size");
  if (n < num_folds)
    throw ConfigError("cannot make " + std::to_string(num_folds) +
                      " folds from " + std::to_string(n) + " samples");

  FoldPlan plan;
  plan.seed = seed;

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  bool stratify = true;
  for (const auto& [cls, members] : by_class)
    if (static_cast<int>(members.size()) < num_folds) {
      plan.warnings.push_back(
          "class " + std::to_string(cls) + " has only " +
          std::to_string(members.size()) + " members for " +
          std::to_string(num_folds) + " folds; falling back to unstratified");
      stratify = false;
    }

  // Shuffle within each class (or the whole index set) and deal
  // round-robin into folds.
  Rng rng(seed);
  auto shuffle = [&rng](std::vector<int>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.below(i)]);
  };

  std::vector<std::vector<int>> fold_members(num_folds);
  auto deal = [&](std::vector<int>& pool, int start_fold) {
    shuffle(pool);
    for (size_t i = 0; i < pool.size(); ++i)
      fold_members[(start_fold + static_cast<int>(i)) % num_folds]
          .push_back(pool[i]);
    return (start_fold + static_cast<int>(pool.size())) % num_folds;
  };

  if (stratify) {
    // Carrying the dealing position across classes keeps the fold sizes
    // within one of each other even when class sizes are not multiples
    // of the fold count.
    int pos = 0;
    for (auto& [cls, members] : by_class) pos = deal(members, pos);
  } else {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    deal(all, 0);
  }

  plan.folds.resize(num_folds);
  for (int f = 0; f < num_folds; ++f) {
    std::sort(fold_members[f].begin(), fold_members[f].end());
    plan.folds[f].val_ids = fold_members[f];
    for (int g = 0; g < num_folds; ++g) {
      if (g == f) continue;
      plan.folds[f].train_ids.insert(plan.folds[f].train_ids.end(),
                                     fold_members[g].begin(),
                                     fold_members[g].end());
    }
    std::sort(plan.folds[f].train_ids.begin(), plan.folds[f].train_ids.end());
  }
  return plan;
}

}  // namespace canet
