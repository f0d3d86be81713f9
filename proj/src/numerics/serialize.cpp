#include "numerics/serialize.hpp"

#include "common/error.hpp"

namespace deflow {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) values.push_back(m.data()[i]);
  return json{{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& doc, const std::string& what) {
  if (!doc.is_object() || !doc.contains("shape") || !doc.contains("values")) {
    fail(ErrorCode::parse, what + ": tensor needs 'shape' and 'values'");
  }
  const json& shape = doc.at("shape");
  const json& values = doc.at("values");
  if (!shape.is_array() || shape.empty() || shape.size() > 2 || !values.is_array()) {
    fail(ErrorCode::parse, what + ": malformed tensor");
  }
  Eigen::Index rows = 1;
  Eigen::Index cols = 0;
  if (shape.size() == 1) {
    cols = shape[0].get<Eigen::Index>();
  } else {
    rows = shape[0].get<Eigen::Index>();
    cols = shape[1].get<Eigen::Index>();
  }
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != values.size()) {
    fail(ErrorCode::shape_mismatch, what + ": product(shape) != number of values");
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) fail(ErrorCode::parse, what + ": non-numeric value");
    m.data()[i] = values[i].get<double>();
  }
  require_finite(m, what);
  return m;
}

json mlp_to_json(const Mlp& net) {
  json tensors = json::object();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    tensors["w" + std::to_string(i)] = matrix_to_json(net.weights[i]);
    json bias = matrix_to_json(net.biases[i]);
    bias["shape"] = {net.biases[i].cols()};
    tensors["b" + std::to_string(i)] = std::move(bias);
  }
  return json{{"layer_sizes", net.layer_sizes}, {"activation", to_string(net.activation)}, {"tensors", tensors}};
}

Mlp mlp_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("layer_sizes") || !doc.contains("tensors")) {
    fail(ErrorCode::parse, "network checkpoint needs 'layer_sizes' and 'tensors'");
  }
  const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
  const Activation act = activation_from_string(doc.value("activation", std::string("relu")));
  Mlp net = make_zero_mlp(sizes, act);
  const json& tensors = doc.at("tensors");
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const std::string w = "w" + std::to_string(i);
    const std::string b = "b" + std::to_string(i);
    if (!tensors.contains(w) || !tensors.contains(b)) fail(ErrorCode::parse, "network checkpoint is missing " + w + "/" + b);
    net.weights[i] = matrix_from_json(tensors.at(w), w);
    net.biases[i] = matrix_from_json(tensors.at(b), b);
  }
  net.check();
  return net;
}

}  // namespace deflow
