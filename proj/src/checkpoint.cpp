#include "cgan/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgan/errors.hpp"

namespace cgan::ckpt {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "cgan-checkpoint";
constexpr int kVersion = 1;

json tensor_to_json(const ad::Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(flat)}};
}

ad::Matrix tensor_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw ParseError("checkpoint tensor '" + name + "' is malformed");
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 1 || cols < 1 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows * cols))
    throw ParseError("checkpoint tensor '" + name + "' has inconsistent shape");
  ad::Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = data[i++];
      if (!v.is_number()) throw ParseError("checkpoint tensor '" + name + "' has a non-number");
      m(r, c) = v.get<double>();
    }
  return m;
}

json dropout_to_json(const DropoutLayer& d) {
  return json{{"rate", d.rate()}, {"seed", d.seed()}, {"counter", d.step_counter()}};
}

DropoutLayer dropout_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("rate") || !j.contains("seed") || !j.contains("counter"))
    throw ParseError("checkpoint dropout state '" + name + "' is malformed");
  DropoutLayer layer(j.at("rate").get<double>(), j.at("seed").get<std::uint64_t>());
  layer.reset_counter(j.at("counter").get<std::uint64_t>());
  return layer;
}

void write_document(const json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

json read_document(const std::string& path, const char* expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat)
    throw ParseError("'" + path + "' is not a model checkpoint");
  if (doc.value("version", 0) != kVersion)
    throw ParseError("checkpoint '" + path + "' has unsupported version");
  if (doc.value("kind", "") != expected_kind)
    throw ParseError("checkpoint '" + path + "' holds a " + doc.value("kind", "?") + ", expected " +
                     expected_kind);
  return doc;
}

void assign_tensor(const json& tensors, const std::string& name, const ad::ValuePtr& target) {
  if (!tensors.contains(name)) throw ParseError("checkpoint is missing tensor '" + name + "'");
  ad::Matrix m = tensor_from_json(tensors.at(name), name);
  if (m.rows() != target->rows() || m.cols() != target->cols())
    throw ParseError("checkpoint tensor '" + name + "' is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(target->rows()) +
                     "x" + std::to_string(target->cols()));
  target->data = std::move(m);
}

Eigen::RowVectorXd stat_from_json(const json& tensors, const std::string& name,
                                  Eigen::Index features) {
  if (!tensors.contains(name)) throw ParseError("checkpoint is missing tensor '" + name + "'");
  ad::Matrix m = tensor_from_json(tensors.at(name), name);
  if (m.rows() != 1 || m.cols() != features)
    throw ParseError("checkpoint tensor '" + name + "' must be 1x" + std::to_string(features));
  return m.row(0);
}

}  // namespace

void save_generator(const gan::GeneratorModel& gen, const std::string& path) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["kind"] = "generator";
  doc["arch"] = {{"noise_dim", gen.noise_dim()},
                 {"hidden", gen.dense1.out_features()},
                 {"s", gen.s()},
                 {"constrained", gen.constrained()}};
  doc["polytope"] = {{"k1", gen.polytope.k1},
                     {"k2", gen.polytope.k2},
                     {"k3", gen.polytope.k3},
                     {"hist_min", gen.polytope.hist_min},
                     {"hist_max", gen.polytope.hist_max},
                     {"window_len", gen.polytope.window_len}};
  doc["dropout"] = {dropout_to_json(gen.drop1), dropout_to_json(gen.drop2)};

  json tensors;
  tensors["dense1.weight"] = tensor_to_json(gen.dense1.weight->data);
  tensors["dense1.bias"] = tensor_to_json(gen.dense1.bias->data);
  tensors["bn1.gamma"] = tensor_to_json(gen.bn1.gamma->data);
  tensors["bn1.beta"] = tensor_to_json(gen.bn1.beta->data);
  tensors["bn1.running_mean"] = tensor_to_json(gen.bn1.running_mean);
  tensors["bn1.running_var"] = tensor_to_json(gen.bn1.running_var);
  tensors["dense2.weight"] = tensor_to_json(gen.dense2.weight->data);
  tensors["dense2.bias"] = tensor_to_json(gen.dense2.bias->data);
  tensors["bn2.gamma"] = tensor_to_json(gen.bn2.gamma->data);
  tensors["bn2.beta"] = tensor_to_json(gen.bn2.beta->data);
  tensors["bn2.running_mean"] = tensor_to_json(gen.bn2.running_mean);
  tensors["bn2.running_var"] = tensor_to_json(gen.bn2.running_var);
  tensors["head.weight"] = tensor_to_json(gen.head.weight->data);
  tensors["head.bias"] = tensor_to_json(gen.head.bias->data);
  doc["tensors"] = std::move(tensors);
  write_document(doc, path);
}

gan::GeneratorModel load_generator(const std::string& path) {
  json doc = read_document(path, "generator");
  if (!doc.contains("arch") || !doc.contains("polytope") || !doc.contains("tensors") ||
      !doc.contains("dropout"))
    throw ParseError("checkpoint '" + path + "' is missing sections");
  const json& arch = doc.at("arch");
  const json& poly = doc.at("polytope");
  const json& tensors = doc.at("tensors");
  const json& dropout = doc.at("dropout");

  qp::RampBoxPolytope polytope;
  int noise_dim, hidden, s;
  bool constrained;
  try {
    polytope = qp::build_polytope(poly.at("k1").get<double>(), poly.at("k2").get<double>(),
                                  poly.at("k3").get<double>(), poly.at("hist_min").get<double>(),
                                  poly.at("hist_max").get<double>(),
                                  poly.at("window_len").get<int>());
    noise_dim = arch.at("noise_dim").get<int>();
    hidden = arch.at("hidden").get<int>();
    s = arch.at("s").get<int>();
    constrained = arch.at("constrained").get<bool>();
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }

  gan::GeneratorModel gen(polytope, noise_dim, s, hidden, 0, constrained, {});
  assign_tensor(tensors, "dense1.weight", gen.dense1.weight);
  assign_tensor(tensors, "dense1.bias", gen.dense1.bias);
  assign_tensor(tensors, "bn1.gamma", gen.bn1.gamma);
  assign_tensor(tensors, "bn1.beta", gen.bn1.beta);
  gen.bn1.running_mean = stat_from_json(tensors, "bn1.running_mean", hidden);
  gen.bn1.running_var = stat_from_json(tensors, "bn1.running_var", hidden);
  assign_tensor(tensors, "dense2.weight", gen.dense2.weight);
  assign_tensor(tensors, "dense2.bias", gen.dense2.bias);
  assign_tensor(tensors, "bn2.gamma", gen.bn2.gamma);
  assign_tensor(tensors, "bn2.beta", gen.bn2.beta);
  gen.bn2.running_mean = stat_from_json(tensors, "bn2.running_mean", hidden);
  gen.bn2.running_var = stat_from_json(tensors, "bn2.running_var", hidden);
  assign_tensor(tensors, "head.weight", gen.head.weight);
  assign_tensor(tensors, "head.bias", gen.head.bias);

  if (!dropout.is_array() || dropout.size() != 2)
    throw ParseError("checkpoint '" + path + "' must carry two dropout states");
  gen.drop1 = dropout_from_json(dropout[0], "drop1");
  gen.drop2 = dropout_from_json(dropout[1], "drop2");
  return gen;
}

void save_discriminator(const gan::DiscriminatorModel& disc, const std::string& path) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["kind"] = "discriminator";
  doc["arch"] = {{"s", disc.s()}, {"hidden", disc.dense1.out_features()}};
  doc["dropout"] = {dropout_to_json(disc.drop1), dropout_to_json(disc.drop2)};

  json tensors;
  tensors["dense1.weight"] = tensor_to_json(disc.dense1.weight->data);
  tensors["dense1.bias"] = tensor_to_json(disc.dense1.bias->data);
  tensors["bn1.gamma"] = tensor_to_json(disc.bn1.gamma->data);
  tensors["bn1.beta"] = tensor_to_json(disc.bn1.beta->data);
  tensors["bn1.running_mean"] = tensor_to_json(disc.bn1.running_mean);
  tensors["bn1.running_var"] = tensor_to_json(disc.bn1.running_var);
  tensors["dense2.weight"] = tensor_to_json(disc.dense2.weight->data);
  tensors["dense2.bias"] = tensor_to_json(disc.dense2.bias->data);
  tensors["bn2.gamma"] = tensor_to_json(disc.bn2.gamma->data);
  tensors["bn2.beta"] = tensor_to_json(disc.bn2.beta->data);
  tensors["bn2.running_mean"] = tensor_to_json(disc.bn2.running_mean);
  tensors["bn2.running_var"] = tensor_to_json(disc.bn2.running_var);
  tensors["output.weight"] = tensor_to_json(disc.output.weight->data);
  tensors["output.bias"] = tensor_to_json(disc.output.bias->data);
  doc["tensors"] = std::move(tensors);
  write_document(doc, path);
}

gan::DiscriminatorModel load_discriminator(const std::string& path) {
  json doc = read_document(path, "discriminator");
  if (!doc.contains("arch") || !doc.contains("tensors") || !doc.contains("dropout"))
    throw ParseError("checkpoint '" + path + "' is missing sections");
  const json& arch = doc.at("arch");
  const json& tensors = doc.at("tensors");
  const json& dropout = doc.at("dropout");

  int s, hidden;
  try {
    s = arch.at("s").get<int>();
    hidden = arch.at("hidden").get<int>();
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }

  gan::DiscriminatorModel disc(s, hidden, 0);
  assign_tensor(tensors, "dense1.weight", disc.dense1.weight);
  assign_tensor(tensors, "dense1.bias", disc.dense1.bias);
  assign_tensor(tensors, "bn1.gamma", disc.bn1.gamma);
  assign_tensor(tensors, "bn1.beta", disc.bn1.beta);
  disc.bn1.running_mean = stat_from_json(tensors, "bn1.running_mean", hidden);
  disc.bn1.running_var = stat_from_json(tensors, "bn1.running_var", hidden);
  assign_tensor(tensors, "dense2.weight", disc.dense2.weight);
  assign_tensor(tensors, "dense2.bias", disc.dense2.bias);
  assign_tensor(tensors, "bn2.gamma", disc.bn2.gamma);
  assign_tensor(tensors, "bn2.beta", disc.bn2.beta);
  disc.bn2.running_mean = stat_from_json(tensors, "bn2.running_mean", hidden);
  disc.bn2.running_var = stat_from_json(tensors, "bn2.running_var", hidden);
  assign_tensor(tensors, "output.weight", disc.output.weight);
  assign_tensor(tensors, "output.bias", disc.output.bias);

  if (!dropout.is_array() || dropout.size() != 2)
    throw ParseError("checkpoint '" + path + "' must carry two dropout states");
  disc.drop1 = dropout_from_json(dropout[0], "drop1");
  disc.drop2 = dropout_from_json(dropout[1], "drop2");
  return disc;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace cgan::ckpt
