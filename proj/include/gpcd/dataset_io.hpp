#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "gpcd/error.hpp"
#include "gpcd/graph.hpp"

namespace gpcd {

// Line-delimited JSON. Line 1 is a header
//   {"format":"gpcd-dataset","version":1,"split":...,"D":...,"K":...,"F":...,"count":...}
// followed by exactly `count` sample lines
//   {"x":[[...],...],"edges":[[u,v],...],"y":[classes],"gt":c,"causal":[0|1,...]}
// "causal" is omitted when the sample carries no planted mask. K = 0 means K varies per sample.
inline constexpr int kDatasetFormatVersion = 1;

inline nlohmann::json sample_to_json(const PLLSample& s) {
  nlohmann::json j;
  const Tensor& x = s.graph.node_features();
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < x.rows(); ++r) rows.push_back(std::vector<double>(x.row(r).begin(), x.row(r).end()));
  j["x"] = std::move(rows);
  auto edges = nlohmann::json::array();
  for (const auto& [u, v] : s.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["y"] = s.candidates.labels;
  j["gt"] = s.ground_truth;
  if (s.causal_mask) {
    std::vector<int> m(s.causal_mask->begin(), s.causal_mask->end());
    j["causal"] = m;
  }
  return j;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  nlohmann::json header{{"format", "gpcd-dataset"},
                        {"version", kDatasetFormatVersion},
                        {"split", split_name(ds.split)},
                        {"D", ds.num_classes},
                        {"K", ds.candidate_count},
                        {"F", ds.feature_dim},
                        {"count", ds.samples.size()}};
  out << header.dump() << '\n';
  for (const auto& s : ds.samples) out << sample_to_json(s).dump() << '\n';
  if (!out) fail(Errc::IoError, "write failed for '" + path + "'");
}

inline PLLSample sample_from_json(const nlohmann::json& j, int num_classes) {
  PLLSample s;
  const auto& rows = j.at("x");
  if (!rows.is_array() || rows.empty()) fail(Errc::FormatError, "sample without nodes");
  const std::size_t n = rows.size();
  const std::size_t f = rows.at(0).size();
  Tensor x(n, f);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != f) fail(Errc::FormatError, "ragged feature rows");
    for (std::size_t c = 0; c < f; ++c) x(r, c) = rows[r][c].get<double>();
  }
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (e.size() != 2) fail(Errc::FormatError, "edge must have two endpoints");
    edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  s.graph = make_graph(std::move(x), std::move(edges));
  s.candidates = CandidateLabelSet{j.at("y").get<std::vector<int>>(), num_classes};
  s.ground_truth = j.at("gt").get<int>();
  if (j.contains("causal")) {
    std::vector<bool> m;
    for (const auto& b : j.at("causal")) m.push_back(b.get<int>() != 0);
    s.causal_mask = std::move(m);
  }
  return s;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(Errc::FormatError, "missing header in '" + path + "'");
  Dataset ds;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("format") != "gpcd-dataset") fail(Errc::FormatError, "not a gpcd dataset");
    if (header.at("version").get<int>() != kDatasetFormatVersion)
      fail(Errc::FormatError, "unsupported format version " + header.at("version").dump());
    ds.split = parse_split(header.at("split").get<std::string>());
    ds.num_classes = header.at("D").get<int>();
    ds.candidate_count = header.at("K").get<int>();
    ds.feature_dim = header.at("F").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    ds.samples.reserve(count);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ds.samples.push_back(sample_from_json(nlohmann::json::parse(line), ds.num_classes));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::FormatError, "'" + path + "': " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::FormatError) throw;
    fail(Errc::FormatError, "'" + path + "': " + e.what());
  }
  if (ds.samples.size() != count)
    fail(Errc::FormatError, "expected " + std::to_string(count) + " samples, found " + std::to_string(ds.samples.size()));
  try {
    validate_dataset(ds);
  } catch (const Error& e) {
    if (e.code() == Errc::FormatError) throw;
    fail(Errc::FormatError, "'" + path + "': " + e.what());
  }
  return ds;
}

}  // namespace gpcd
