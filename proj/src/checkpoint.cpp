#include "canet/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace canet {

namespace {

template <typename T>
void save_impl(CanModel<T>& model, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = nlohmann::json::parse(config_to_json_text(model.config()));
  j["node_dim"] = model.node_dim();
  j["edge_feat_dim"] = model.edge_feat_dim();
  j["num_classes"] = model.num_classes();
  nlohmann::json params = nlohmann::json::object();
  for (auto& np : model.named_parameters()) {
    nlohmann::json entry;
    entry["shape"] = {np.tensor.rows(), np.tensor.cols()};
    entry["values"] = np.tensor.values();
    params[np.name] = std::move(entry);
  }
  j["parameters"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::object();
  for (auto& [name, buf] : model.named_buffers()) buffers[name] = *buf;
  j["buffers"] = std::move(buffers);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
}

template <typename T>
CanModel<T> load_impl(const std::string& path) {
  auto j = read_json(path);
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kCheckpointVersion)
    throw DataError("checkpoint " + path + ": unsupported format version");

  RunConfig cfg = config_from_json_text(j.at("config").dump());
  CanModel<T> model(cfg, j.at("node_dim").get<int>(),
                    j.at("edge_feat_dim").get<int>(),
                    j.at("num_classes").get<int>());

  const auto& params = j.at("parameters");
  for (auto& np : model.named_parameters()) {
    if (!params.contains(np.name))
      throw DataError("checkpoint " + path + ": missing parameter '" +
                      np.name + "'");
    const auto& entry = params.at(np.name);
    auto shape = entry.at("shape").template get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != np.tensor.rows() ||
        shape[1] != np.tensor.cols())
      throw DataError("checkpoint " + path + ": parameter '" + np.name +
                      "' has shape mismatch against the stored config");
    auto values = entry.at("values").template get<std::vector<double>>();
    if (static_cast<int64_t>(values.size()) != np.tensor.size())
      throw DataError("checkpoint " + path + ": parameter '" + np.name +
                      "' value count mismatch");
    for (size_t i = 0; i < values.size(); ++i)
      np.tensor.values()[i] = static_cast<T>(values[i]);
  }
  const auto& buffers = j.at("buffers");
  for (auto& [name, buf] : model.named_buffers()) {
    if (!buffers.contains(name))
      throw DataError("checkpoint " + path + ": missing buffer '" + name +
                      "'");
    auto values = buffers.at(name).template get<std::vector<double>>();
    if (values.size() != buf->size())
      throw DataError("checkpoint " + path + ": buffer '" + name +
                      "' size mismatch");
    for (size_t i = 0; i < values.size(); ++i)
      (*buf)[i] = static_cast<T>(values[i]);
  }
  return model;
}

}  // namespace

void save_checkpoint(CanModel<double>& model, const std::string& path) {
  save_impl(model, path);
}
void save_checkpoint(CanModel<float>& model, const std::string& path) {
  save_impl(model, path);
}

CanModel<double> load_checkpoint_f64(const std::string& path) {
  return load_impl<double>(path);
}
CanModel<float> load_checkpoint_f32(const std::string& path) {
  return load_impl<float>(path);
}

std::string checkpoint_precision(const std::string& path) {
  auto j = read_json(path);
  if (!j.contains("config") || !j.at("config").contains("precision"))
    throw DataError("checkpoint " + path + ": missing precision field");
  return j.at("config").at("precision").get<std::string>();
}

}  // namespace canet
