#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "latte/model.hpp"

namespace latte {

struct PearsonResult {
  double r = 0.0;
  bool zero_variance = false;
};

/// Sample Pearson correlation. Zero variance in either input gives r = 0 with
/// the flag set. Throws ValidationError on unequal lengths or fewer than two
/// points.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

/// One relation-weight choice of one node type at one layer. The self choice
/// is named after the type ("M" at layer 1, "M1" at layer 2, ...).
struct ChoiceSummary {
  int layer = 1;
  TypeId type = 0;
  std::string name;
  bool self = false;
  double mean_beta = 0.0;
  double std_beta = 0.0;
  std::size_t n_nodes = 0;
};

struct RelationWeightReport {
  std::vector<ChoiceSummary> entries;
};

struct CorrelationEntry {
  int layer = 1;
  TypeId type = 0;
  std::string name;
  bool self = false;
  double pearson_r = 0.0;
  bool zero_variance = false;
  std::size_t n_nodes = 0;
};

std::string self_choice_name(const std::string& type_name, int layer);

/// Per-node beta of every type and layer over the full graph, inference mode:
/// [layer-1][type] is count x (k+1), zero for excluded choices.
std::vector<std::vector<Matrix>> relation_weight_matrices(const LatteModel& model, const HetGraph& g,
                                                          const std::vector<RelationSet>& sets);

/// Mean and population std of beta across the nodes of each type.
RelationWeightReport relation_weight_summary(const LatteModel& model, const HetGraph& g,
                                             const std::vector<RelationSet>& sets);

/// Pearson r across nodes between beta_r and the node's out-degree in r
/// (weighted unless weighted = false); the self choice is correlated with the
/// node's total degree over the layer's relations.
std::vector<CorrelationEntry> weight_degree_correlation(const LatteModel& model, const HetGraph& g,
                                                        const std::vector<RelationSet>& sets,
                                                        bool weighted = true);

void write_attention_summary(const RelationWeightReport& report, const std::filesystem::path& file);
void write_correlation(const std::vector<CorrelationEntry>& entries, const std::filesystem::path& file);
/// Bar chart of mean beta with one-std whiskers.
void write_summary_svg(const RelationWeightReport& report, const std::filesystem::path& file);

}  // namespace latte
