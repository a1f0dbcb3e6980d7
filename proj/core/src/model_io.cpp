#include "relux/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "relux/errors.hpp"

namespace relux {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr) {
  if (!arr.is_array()) throw IoError("model: expected array of numbers");
  Vec v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string network_to_json(const Network& net) {
  json doc;
  doc["format"] = "relu-network";
  doc["version"] = 1;
  doc["dim"] = net.dim;
  json neurons = json::array();
  for (const Neuron& n : net.neurons) {
    json jn;
    jn["s"] = static_cast<int>(n.sign);
    jn["w"] = vec_to_json(n.w);
    jn["b"] = n.bias;
    if (n.coeff) jn["c"] = *n.coeff;
    neurons.push_back(jn);
  }
  doc["neurons"] = neurons;
  if (net.affine_w || net.affine_b) {
    json aff;
    if (net.affine_w) aff["w"] = vec_to_json(*net.affine_w);
    if (net.affine_b) aff["b"] = *net.affine_b;
    doc["affine"] = aff;
  }
  return doc.dump(2) + "\n";
}

Network network_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("model: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "relu-network")
    throw IoError("model: missing format tag \"relu-network\"");
  if (doc.value("version", 0) != 1) throw IoError("model: unsupported version");

  Network net;
  net.dim = doc.at("dim").get<int>();
  for (const json& jn : doc.value("neurons", json::array())) {
    Neuron n;
    n.sign = jn.at("s").get<double>();
    n.w = vec_from_json(jn.at("w"));
    n.bias = jn.at("b").get<double>();
    if (jn.contains("c")) n.coeff = jn["c"].get<double>();
    net.neurons.push_back(std::move(n));
  }
  if (doc.contains("affine")) {
    const json& aff = doc["affine"];
    if (aff.contains("w")) net.affine_w = vec_from_json(aff["w"]);
    if (aff.contains("b")) net.affine_b = aff["b"].get<double>();
  }
  net.validate();
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << network_to_json(net);
  if (!out) throw IoError("write failed: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return network_from_json(buf.str());
}

}  // namespace relux
