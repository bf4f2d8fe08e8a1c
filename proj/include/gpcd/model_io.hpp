#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "gpcd/error.hpp"
#include "gpcd/model.hpp"

namespace gpcd {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.vec()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json params = nlohmann::json::object();
  for (const Parameter* p : m.parameters()) params[p->name] = tensor_to_json(p->value);
  return {{"format", "gpcd-model"},
          {"version", kModelFormatVersion},
          {"dims",
           {{"feature_dim", m.dims.feature_dim},
            {"num_classes", m.dims.num_classes},
            {"encoder_hidden", m.dims.encoder_hidden},
            {"head_hidden", m.dims.head_hidden},
            {"classifier_hidden", m.dims.classifier_hidden}}},
          {"params", std::move(params)}};
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "gpcd-model") fail(Errc::FormatError, "not a gpcd model");
    if (j.at("version").get<int>() != kModelFormatVersion) fail(Errc::FormatError, "unsupported model version");
    const auto& d = j.at("dims");
    ModelDims dims;
    dims.feature_dim = d.at("feature_dim").get<std::size_t>();
    dims.num_classes = d.at("num_classes").get<int>();
    dims.encoder_hidden = d.at("encoder_hidden").get<std::vector<std::size_t>>();
    dims.head_hidden = d.at("head_hidden").get<std::size_t>();
    dims.classifier_hidden = d.at("classifier_hidden").get<std::size_t>();
    Model m = init_model(dims, 0);
    for (Parameter* p : m.parameters()) {
      Tensor v = tensor_from_json(j.at("params").at(p->name));
      if (!v.same_shape(p->value)) fail(Errc::FormatError, "shape mismatch for " + p->name);
      *p = Parameter(p->name, std::move(v));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::FormatError, e.what());
  }
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  out << model_to_json(m).dump() << '\n';
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "'");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::FormatError, e.what());
  }
}

}  // namespace gpcd
