#include "latte/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "latte/error.hpp"
#include "latte/sampler.hpp"

namespace latte {

namespace {

struct File {
  explicit File(const std::filesystem::path& p) : f(std::fopen(p.string().c_str(), "w")) {
    if (!f) throw ValidationError("cannot write " + p.string());
  }
  ~File() { std::fclose(f); }
  std::FILE* f;
};

std::vector<std::string> choice_names(const LatteModel& model, const HetGraph& g,
                                      const std::vector<RelationSet>& sets, int layer, TypeId m) {
  std::vector<std::string> names{self_choice_name(g.node_type(m).name, layer)};
  for (auto r : model.layer(layer).relations_from[m]) {
    names.push_back(sets[layer - 1][r].relation.name(g));
  }
  return names;
}

}  // namespace

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (x.size() < 2) throw ValidationError("pearson: need at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double tiny = 1e-24;
  if (sxx <= tiny * n || syy <= tiny * n) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

std::string self_choice_name(const std::string& type_name, int layer) {
  return layer == 1 ? type_name : type_name + std::to_string(layer - 1);
}

std::vector<std::vector<Matrix>> relation_weight_matrices(const LatteModel& model, const HetGraph& g,
                                                          const std::vector<RelationSet>& sets) {
  model.check_schema(sets);
  auto view = full_view(g, sets);
  Tape tape;
  auto fwd = model.forward(tape, g, view, {});
  std::vector<std::vector<Matrix>> out;
  for (const auto& st : fwd.layers) {
    out.emplace_back();
    for (const auto& b : st.beta) out.back().push_back(b.dense());
  }
  return out;
}

RelationWeightReport relation_weight_summary(const LatteModel& model, const HetGraph& g,
                                             const std::vector<RelationSet>& sets) {
  auto betas = relation_weight_matrices(model, g, sets);
  RelationWeightReport report;
  for (std::size_t l = 0; l < betas.size(); ++l) {
    const int layer = static_cast<int>(l + 1);
    for (std::size_t m = 0; m < betas[l].size(); ++m) {
      const auto& b = betas[l][m];
      const auto names = choice_names(model, g, sets, layer, static_cast<TypeId>(m));
      for (std::size_t c = 0; c < b.cols(); ++c) {
        ChoiceSummary s;
        s.layer = layer;
        s.type = static_cast<TypeId>(m);
        s.name = names[c];
        s.self = c == 0;
        s.n_nodes = b.rows();
        if (b.rows() > 0) {
          double sum = 0.0;
          for (std::size_t i = 0; i < b.rows(); ++i) sum += b(i, c);
          s.mean_beta = sum / static_cast<double>(b.rows());
          double var = 0.0;
          for (std::size_t i = 0; i < b.rows(); ++i) var += (b(i, c) - s.mean_beta) * (b(i, c) - s.mean_beta);
          s.std_beta = std::sqrt(var / static_cast<double>(b.rows()));
        }
        report.entries.push_back(std::move(s));
      }
    }
  }
  return report;
}

std::vector<CorrelationEntry> weight_degree_correlation(const LatteModel& model, const HetGraph& g,
                                                        const std::vector<RelationSet>& sets,
                                                        bool weighted) {
  auto betas = relation_weight_matrices(model, g, sets);
  std::vector<CorrelationEntry> out;
  for (std::size_t l = 0; l < betas.size(); ++l) {
    const int layer = static_cast<int>(l + 1);
    for (std::size_t m = 0; m < betas[l].size(); ++m) {
      const auto& b = betas[l][m];
      const auto n = b.rows();
      if (n < 2) continue;
      const auto names = choice_names(model, g, sets, layer, static_cast<TypeId>(m));
      const auto& rels = model.layer(layer).relations_from[m];
      std::vector<std::vector<double>> degree(rels.size() + 1, std::vector<double>(n, 0.0));
      for (std::size_t c = 0; c < rels.size(); ++c) {
        const auto& a = sets[l][rels[c]].matrix;
        for (std::size_t i = 0; i < n; ++i) {
          const auto row = static_cast<std::int64_t>(i);
          if (weighted) {
            for (auto v : a.row_values(row)) degree[c + 1][i] += v;
          } else {
            degree[c + 1][i] = static_cast<double>(a.degree(row));
          }
          degree[0][i] += degree[c + 1][i];
        }
      }
      for (std::size_t c = 0; c < b.cols(); ++c) {
        std::vector<double> beta(n);
        for (std::size_t i = 0; i < n; ++i) beta[i] = b(i, c);
        auto pr = pearson(beta, degree[c]);
        out.push_back({layer, static_cast<TypeId>(m), names[c], c == 0, pr.r, pr.zero_variance, n});
      }
    }
  }
  return out;
}

void write_attention_summary(const RelationWeightReport& report, const std::filesystem::path& file) {
  File out(file);
  std::fputs("layer,relation_path,mean_beta,std_beta\n", out.f);
  for (const auto& e : report.entries) {
    std::fprintf(out.f, "%d,%s,%.10g,%.10g\n", e.layer, e.name.c_str(), e.mean_beta, e.std_beta);
  }
}

void write_correlation(const std::vector<CorrelationEntry>& entries, const std::filesystem::path& file) {
  File out(file);
  std::fputs("relation_path,pearson_r,n_nodes\n", out.f);
  for (const auto& e : entries) {
    std::fprintf(out.f, "%s,%.10g,%zu\n", e.name.c_str(), e.pearson_r, e.n_nodes);
  }
}

void write_summary_svg(const RelationWeightReport& report, const std::filesystem::path& file) {
  const double bar = 28.0, gap = 12.0, left = 50.0, top = 20.0, height = 240.0;
  const auto n = report.entries.size();
  const double width = left + static_cast<double>(n) * (bar + gap) + gap;
  File out(file);
  std::fprintf(out.f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
               "font-family=\"sans-serif\" font-size=\"10\">\n",
               width, top + height + 70.0);
  const double base = top + height;
  std::fprintf(out.f, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
               top, left, base);
  std::fprintf(out.f, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
               base, width, base);
  for (double tick = 0.0; tick <= 1.0001; tick += 0.25) {
    const double y = base - tick * height;
    std::fprintf(out.f, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", left - 4, y + 3, tick);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& e = report.entries[k];
    const double x = left + gap + static_cast<double>(k) * (bar + gap);
    const double h = std::clamp(e.mean_beta, 0.0, 1.0) * height;
    std::fprintf(out.f, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\"/>\n", x,
                 base - h, bar, h, e.self ? "#999999" : (e.layer == 1 ? "#4c72b0" : "#dd8452"));
    const double lo = std::clamp(e.mean_beta - e.std_beta, 0.0, 1.0) * height;
    const double hi = std::clamp(e.mean_beta + e.std_beta, 0.0, 1.0) * height;
    const double cx = x + bar / 2;
    std::fprintf(out.f, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", cx,
                 base - lo, cx, base - hi);
    std::fprintf(out.f,
                 "<text x=\"%.1f\" y=\"%.1f\" transform=\"rotate(60 %.1f %.1f)\">%s</text>\n", cx,
                 base + 12, cx, base + 12, e.name.c_str());
  }
  std::fputs("</svg>\n", out.f);
}

}  // namespace latte
