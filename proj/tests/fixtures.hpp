#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "latte/hetgraph.hpp"
#include "latte/sparse.hpp"

namespace latte::fixture {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("latte_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline SparseBiadj random_sparse(std::int64_t rows, std::int64_t cols, double p, std::mt19937_64& rng,
                                 double lo = 0.1, double hi = 3.0) {
  std::bernoulli_distribution keep(p);
  std::uniform_real_distribution<double> w(lo, hi);
  std::vector<Triple> t;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      if (keep(rng)) t.push_back({r, c, w(rng)});
    }
  }
  return SparseBiadj::from_triples(rows, cols, t);
}

inline std::vector<std::vector<double>> dense(const SparseBiadj& a) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(a.n_rows()),
                                     std::vector<double>(static_cast<std::size_t>(a.n_cols()), 0.0));
  for (const auto& t : a.triples()) d[t.row][t.col] = t.weight;
  return d;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

/// Node types with the given counts and feature widths (0 = unattributed),
/// random features, and the listed relations. The first type is the target.
struct GraphSpec {
  std::vector<std::string> names;
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> dims;
  std::vector<Relation> relations;
  int num_classes = 2;
};

inline HetGraph build_graph(const GraphSpec& s, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  HetGraph::Parts parts;
  for (std::size_t t = 0; t < s.names.size(); ++t) {
    if (s.dims[t] > 0) {
      parts.node_types.push_back({s.names[t], s.counts[t], s.dims[t]});
      parts.features.push_back(random_matrix(static_cast<std::size_t>(s.counts[t]),
                                             static_cast<std::size_t>(s.dims[t]), rng));
    } else {
      parts.node_types.push_back({s.names[t], s.counts[t], std::nullopt});
      parts.features.emplace_back();
    }
  }
  parts.relations = s.relations;
  parts.target_type = 0;
  parts.num_classes = s.num_classes;
  parts.labels.resize(static_cast<std::size_t>(s.counts[0]));
  for (std::size_t i = 0; i < parts.labels.size(); ++i) parts.labels[i] = static_cast<int>(i) % s.num_classes;
  return HetGraph(std::move(parts));
}

}  // namespace latte::fixture
