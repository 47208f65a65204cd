#include "latte/hetgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "latte/error.hpp"

namespace latte {

namespace {

using json = nlohmann::json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ValidationError(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("missing file: " + p.string());
  std::vector<Line> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back({n, line});
  }
  return out;
}

class IdMap {
 public:
  IdMap(std::string type_name, std::int64_t count) : type_(std::move(type_name)), count_(count) {}

  void add(const std::string& id, const std::string& where) {
    if (!map_.emplace(id, static_cast<std::int64_t>(ids_.size())).second) {
      throw ValidationError(where + ": duplicate node id '" + id + "'");
    }
    ids_.push_back(id);
  }

  std::int64_t lookup(const std::string& id, const std::string& where) const {
    if (!ids_.empty()) {
      auto it = map_.find(id);
      if (it == map_.end()) {
        throw ValidationError(where + ": dangling node id '" + id + "' for type " + type_);
      }
      return it->second;
    }
    // No sidecar: ids are the dense integers themselves.
    char* end = nullptr;
    long long v = std::strtoll(id.c_str(), &end, 10);
    if (id.empty() || end != id.c_str() + id.size() || v < 0 || v >= count_) {
      throw ValidationError(where + ": dangling node id '" + id + "' for type " + type_ + " of " +
                            std::to_string(count_) + " nodes");
    }
    return v;
  }

  std::vector<std::string> external() const {
    if (!ids_.empty()) return ids_;
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (std::int64_t i = 0; i < count_; ++i) out.push_back(std::to_string(i));
    return out;
  }

  std::size_t size() const { return ids_.size(); }

 private:
  std::string type_;
  std::int64_t count_;
  std::unordered_map<std::string, std::int64_t> map_;
  std::vector<std::string> ids_;
};

std::string json_id(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ValidationError("splits.json: ids must be integers or strings");
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

template <class T>
void hash_value(std::uint64_t& h, const T& v) {
  hash_bytes(h, &v, sizeof(T));
}

void hash_string(std::uint64_t& h, const std::string& s) {
  hash_value(h, s.size());
  hash_bytes(h, s.data(), s.size());
}

}  // namespace

HetGraph::HetGraph(Parts parts) : parts_(std::move(parts)) {
  if (parts_.external_ids.empty()) {
    parts_.external_ids.resize(parts_.node_types.size());
  }
  for (std::size_t t = 0; t < parts_.node_types.size(); ++t) {
    auto& ids = parts_.external_ids[t];
    if (ids.empty()) {
      ids.reserve(static_cast<std::size_t>(parts_.node_types[t].count));
      for (std::int64_t i = 0; i < parts_.node_types[t].count; ++i) ids.push_back(std::to_string(i));
    }
  }
  if (parts_.features.empty()) parts_.features.resize(parts_.node_types.size());
  validate();
}

void HetGraph::validate() const {
  const auto n_types = parts_.node_types.size();
  if (n_types == 0) throw ValidationError("graph has no node types");
  if (parts_.features.size() != n_types || parts_.external_ids.size() != n_types) {
    throw ValidationError("per-type arrays do not match the number of node types");
  }
  std::set<std::string> names;
  for (std::size_t t = 0; t < n_types; ++t) {
    const auto& nt = parts_.node_types[t];
    if (!names.insert(nt.name).second) throw ValidationError("duplicate node type " + nt.name);
    if (nt.count < 0) throw ValidationError("negative node count for " + nt.name);
    if (static_cast<std::int64_t>(parts_.external_ids[t].size()) != nt.count) {
      throw ValidationError("external id map size mismatch for " + nt.name);
    }
    const auto& f = parts_.features[t];
    if (nt.feature_dim) {
      if (*nt.feature_dim <= 0) throw ValidationError("feature_dim must be positive for " + nt.name);
      if (static_cast<std::int64_t>(f.rows()) != nt.count ||
          static_cast<std::int64_t>(f.cols()) != *nt.feature_dim) {
        throw ValidationError("feature-dim mismatch for type " + nt.name);
      }
      for (double v : f.data()) {
        if (!std::isfinite(v)) throw ValidationError("non-finite feature in type " + nt.name);
      }
    } else if (!f.empty()) {
      throw ValidationError("unattributed type " + nt.name + " carries features");
    }
  }
  std::set<std::string> rel_names;
  for (const auto& r : parts_.relations) {
    if (!rel_names.insert(r.name).second) throw ValidationError("duplicate relation " + r.name);
    if (r.src < 0 || r.dst < 0 || static_cast<std::size_t>(r.src) >= n_types ||
        static_cast<std::size_t>(r.dst) >= n_types) {
      throw ValidationError("relation " + r.name + " references unknown node type");
    }
    if (r.matrix.n_rows() != count(r.src) || r.matrix.n_cols() != count(r.dst)) {
      throw ValidationError("relation " + r.name + " shape does not match node counts");
    }
    if (r.src == r.dst) {
      for (std::int64_t i = 0; i < r.matrix.n_rows(); ++i) {
        if (r.matrix.contains(i, i)) {
          throw ValidationError("self-loop on node " + std::to_string(i) + " in relation " + r.name);
        }
      }
    }
  }
  if (parts_.target_type < 0 || static_cast<std::size_t>(parts_.target_type) >= n_types) {
    throw ValidationError("target type out of range");
  }
  if (parts_.num_classes < 1) throw ValidationError("num_classes must be >= 1");
  const auto n_target = count(parts_.target_type);
  if (static_cast<std::int64_t>(parts_.labels.size()) != n_target) {
    throw ValidationError("labels must cover every target node");
  }
  for (int y : parts_.labels) {
    if (y != kNoLabel && (y < 0 || y >= parts_.num_classes)) {
      throw ValidationError("label id " + std::to_string(y) + " outside [0, num_classes)");
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(n_target), 0);
  auto check_split = [&](const std::vector<std::int64_t>& ids, const char* what) {
    for (auto i : ids) {
      if (i < 0 || i >= n_target) throw ValidationError(std::string(what) + " split id out of range");
      if (seen[i]) throw ValidationError(std::string(what) + " split overlaps another split");
      if (parts_.labels[i] == kNoLabel) {
        throw ValidationError(std::string(what) + " split contains unlabeled node");
      }
      seen[i] = 1;
    }
  };
  check_split(parts_.splits.train, "train");
  check_split(parts_.splits.valid, "valid");
  check_split(parts_.splits.test, "test");
}

std::optional<TypeId> HetGraph::find_type(std::string_view name) const {
  for (std::size_t t = 0; t < parts_.node_types.size(); ++t) {
    if (parts_.node_types[t].name == name) return static_cast<TypeId>(t);
  }
  return std::nullopt;
}

std::optional<std::size_t> HetGraph::find_relation(std::string_view name) const {
  for (std::size_t r = 0; r < parts_.relations.size(); ++r) {
    if (parts_.relations[r].name == name) return r;
  }
  return std::nullopt;
}

std::vector<std::pair<std::int64_t, double>> HetGraph::neighbors(std::size_t rel, NodeRef i) const {
  const auto& r = relation(rel);
  if (i.type != r.src) {
    throw ValidationError("node type " + node_type(i.type).name + " is not the source of " + r.name);
  }
  if (i.index < 0 || i.index >= count(i.type)) throw ValidationError("node index out of range");
  auto cols = r.matrix.row_indices(i.index);
  auto vals = r.matrix.row_values(i.index);
  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) out.emplace_back(cols[k], vals[k]);
  return out;
}

HetGraph HetGraph::with_relations(std::vector<Relation> relations) const {
  Parts p = parts_;
  p.relations = std::move(relations);
  return HetGraph(std::move(p));
}

HetGraph HetGraph::with_normalized_features() const {
  Parts p = parts_;
  for (auto& f : p.features) {
    for (std::size_t r = 0; r < f.rows(); ++r) {
      auto row = f.row(r);
      double norm = 0.0;
      for (double v : row) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& v : row) v /= norm;
      }
    }
  }
  return HetGraph(std::move(p));
}

HetGraph load_dataset(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ValidationError("missing file: " + meta_path.string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw ValidationError("meta.json: " + std::string(e.what()));
  }

  HetGraph::Parts parts;
  std::vector<IdMap> id_maps;
  try {
    for (const auto& jt : meta.at("node_types")) {
      NodeType nt;
      nt.name = jt.at("name").get<std::string>();
      nt.count = jt.at("count").get<std::int64_t>();
      if (jt.contains("feature_dim") && !jt.at("feature_dim").is_null()) {
        nt.feature_dim = jt.at("feature_dim").get<std::int64_t>();
      }
      parts.node_types.push_back(nt);
      id_maps.emplace_back(nt.name, nt.count);
    }
  } catch (const json::exception& e) {
    throw ValidationError("meta.json node_types: " + std::string(e.what()));
  }

  auto type_of = [&](const std::string& name) -> TypeId {
    for (std::size_t t = 0; t < parts.node_types.size(); ++t) {
      if (parts.node_types[t].name == name) return static_cast<TypeId>(t);
    }
    throw ValidationError("meta.json: unknown node type '" + name + "'");
  };

  // Node files: external ids and features.
  for (std::size_t t = 0; t < parts.node_types.size(); ++t) {
    const auto& nt = parts.node_types[t];
    const auto path = dir / ("nodes_" + nt.name + ".tsv");
    if (!std::filesystem::exists(path)) {
      if (nt.feature_dim) throw ValidationError("missing file: " + path.string());
      parts.features.emplace_back();
      continue;
    }
    auto lines = read_lines(path);
    if (static_cast<std::int64_t>(lines.size()) != nt.count) {
      throw ValidationError(path.filename().string() + ": expected " + std::to_string(nt.count) +
                            " nodes, found " + std::to_string(lines.size()));
    }
    Matrix feats = nt.feature_dim ? Matrix(static_cast<std::size_t>(nt.count),
                                           static_cast<std::size_t>(*nt.feature_dim))
                                  : Matrix();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto where = path.filename().string() + ":" + std::to_string(lines[i].number);
      auto cols = split(lines[i].text, '\t');
      id_maps[t].add(cols[0], where);
      if (!nt.feature_dim) continue;
      if (cols.size() < 2) throw ValidationError(where + ": feature-dim mismatch (no features)");
      auto vals = split(cols[1], ',');
      if (static_cast<std::int64_t>(vals.size()) != *nt.feature_dim) {
        throw ValidationError(where + ": feature-dim mismatch, expected " +
                              std::to_string(*nt.feature_dim) + " values, found " +
                              std::to_string(vals.size()));
      }
      for (std::size_t d = 0; d < vals.size(); ++d) feats(i, d) = parse_double(vals[d], where);
    }
    parts.features.push_back(std::move(feats));
  }

  try {
    for (const auto& jr : meta.at("relations")) {
      Relation rel;
      rel.name = jr.at("name").get<std::string>();
      rel.src = type_of(jr.at("src").get<std::string>());
      rel.dst = type_of(jr.at("dst").get<std::string>());
      rel.directed = jr.value("directed", true);
      const auto path = dir / ("edges_" + rel.name + ".tsv");
      std::vector<Triple> triples;
      for (const auto& line : read_lines(path)) {
        const auto where = path.filename().string() + ":" + std::to_string(line.number);
        auto cols = split(line.text, '\t');
        if (cols.size() < 2 || cols.size() > 3) throw ValidationError(where + ": expected 2 or 3 columns");
        Triple tr;
        tr.row = id_maps[rel.src].lookup(cols[0], where);
        tr.col = id_maps[rel.dst].lookup(cols[1], where);
        tr.weight = cols.size() == 3 ? parse_double(cols[2], where) : 1.0;
        if (tr.weight < 0.0) throw ValidationError(where + ": negative edge weight");
        if (rel.src == rel.dst && tr.row == tr.col) {
          throw ValidationError(where + ": self-loop in relation " + rel.name);
        }
        triples.push_back(tr);
      }
      rel.matrix = SparseBiadj::from_triples(parts.node_types[rel.src].count,
                                             parts.node_types[rel.dst].count, std::move(triples));
      parts.relations.push_back(std::move(rel));
    }
    parts.target_type = type_of(meta.at("target_type").get<std::string>());
    parts.num_classes = meta.at("num_classes").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError("meta.json: " + std::string(e.what()));
  }

  const auto target = parts.target_type;
  const auto& target_map = id_maps[target];
  parts.labels.assign(static_cast<std::size_t>(parts.node_types[target].count), kNoLabel);
  const auto label_path = dir / ("labels_" + parts.node_types[target].name + ".tsv");
  for (const auto& line : read_lines(label_path)) {
    const auto where = label_path.filename().string() + ":" + std::to_string(line.number);
    auto cols = split(line.text, '\t');
    if (cols.size() != 2) throw ValidationError(where + ": expected 2 columns");
    auto i = target_map.lookup(cols[0], where);
    char* end = nullptr;
    long y = std::strtol(cols[1].c_str(), &end, 10);
    if (cols[1].empty() || end != cols[1].c_str() + cols[1].size()) {
      throw ValidationError(where + ": bad class id '" + cols[1] + "'");
    }
    if (y < 0 || y >= parts.num_classes) {
      throw ValidationError(where + ": label id " + cols[1] + " outside [0, num_classes)");
    }
    parts.labels[i] = static_cast<int>(y);
  }

  const auto splits_path = dir / "splits.json";
  std::ifstream splits_in(splits_path);
  if (!splits_in) throw ValidationError("missing file: " + splits_path.string());
  try {
    auto js = json::parse(splits_in);
    auto read = [&](const char* key) {
      std::vector<std::int64_t> ids;
      if (!js.contains(key)) return ids;
      for (const auto& v : js.at(key)) ids.push_back(target_map.lookup(json_id(v), "splits.json"));
      return ids;
    };
    parts.splits.train = read("train");
    parts.splits.valid = read("valid");
    parts.splits.test = read("test");
  } catch (const json::exception& e) {
    throw ValidationError("splits.json: " + std::string(e.what()));
  }

  for (auto& m : id_maps) parts.external_ids.push_back(m.external());
  return HetGraph(std::move(parts));
}

void write_dataset(const HetGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["node_types"] = json::array();
  for (const auto& nt : g.node_types()) {
    json jt{{"name", nt.name}, {"count", nt.count}};
    jt["feature_dim"] = nt.feature_dim ? json(*nt.feature_dim) : json(nullptr);
    meta["node_types"].push_back(jt);
  }
  meta["relations"] = json::array();
  for (const auto& r : g.relations()) {
    meta["relations"].push_back({{"name", r.name},
                                 {"src", g.node_type(r.src).name},
                                 {"dst", g.node_type(r.dst).name},
                                 {"directed", r.directed}});
  }
  meta["target_type"] = g.node_type(g.target_type()).name;
  meta["num_classes"] = g.num_classes();
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";

  for (std::size_t t = 0; t < g.num_types(); ++t) {
    const auto tid = static_cast<TypeId>(t);
    if (!g.attributed(tid)) continue;
    std::ofstream out(dir / ("nodes_" + g.node_type(tid).name + ".tsv"));
    const auto& f = g.features(tid);
    const auto& ids = g.external_ids(tid);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      out << ids[i] << '\t';
      for (std::size_t d = 0; d < f.cols(); ++d) {
        if (d) out << ',';
        out << fmt_double(f(i, d));
      }
      out << '\n';
    }
  }
  for (const auto& r : g.relations()) {
    std::ofstream out(dir / ("edges_" + r.name + ".tsv"));
    const auto& src_ids = g.external_ids(r.src);
    const auto& dst_ids = g.external_ids(r.dst);
    for (const auto& tr : r.matrix.triples()) {
      out << src_ids[tr.row] << '\t' << dst_ids[tr.col];
      if (tr.weight != 1.0) out << '\t' << fmt_double(tr.weight);
      out << '\n';
    }
  }
  const auto target = g.target_type();
  const auto& tids = g.external_ids(target);
  {
    std::ofstream out(dir / ("labels_" + g.node_type(target).name + ".tsv"));
    for (std::size_t i = 0; i < g.labels().size(); ++i) {
      if (g.labels()[i] != kNoLabel) out << tids[i] << '\t' << g.labels()[i] << '\n';
    }
  }
  json js;
  auto dump_ids = [&](const std::vector<std::int64_t>& v) {
    json arr = json::array();
    for (auto i : v) arr.push_back(tids[i]);
    return arr;
  };
  js["train"] = dump_ids(g.splits().train);
  js["valid"] = dump_ids(g.splits().valid);
  js["test"] = dump_ids(g.splits().test);
  std::ofstream(dir / "splits.json") << js.dump() << "\n";
}

std::string reverse_relation_name(const HetGraph& g, const Relation& r) {
  const auto& s = g.node_type(r.src).name;
  const auto& d = g.node_type(r.dst).name;
  if (r.name == s + d) return d + s;
  return r.name + "_rev";
}

HetGraph add_reverse_relations(const HetGraph& g) {
  auto relations = g.relations();
  const auto n_original = relations.size();
  for (std::size_t i = 0; i < n_original; ++i) {
    const auto& r = relations[i];
    auto transposed = r.matrix.transpose();
    bool has_partner = false;
    for (const auto& other : relations) {
      if (other.src == r.dst && other.dst == r.src && other.matrix == transposed) {
        has_partner = true;
        break;
      }
    }
    if (has_partner) continue;
    Relation rev;
    rev.name = reverse_relation_name(g, r);
    while (std::any_of(relations.begin(), relations.end(),
                       [&](const Relation& x) { return x.name == rev.name; })) {
      rev.name += "_";
    }
    rev.src = r.dst;
    rev.dst = r.src;
    rev.matrix = std::move(transposed);
    rev.directed = r.directed;
    relations.push_back(std::move(rev));
  }
  return g.with_relations(std::move(relations));
}

std::uint64_t fingerprint(const HetGraph& g) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    const auto& nt = g.node_types()[t];
    hash_string(h, nt.name);
    hash_value(h, nt.count);
    hash_value(h, nt.feature_dim.value_or(-1));
    const auto& f = g.features(static_cast<TypeId>(t));
    if (!f.empty()) hash_bytes(h, f.data().data(), f.size() * sizeof(double));
    for (const auto& id : g.external_ids(static_cast<TypeId>(t))) hash_string(h, id);
  }
  for (const auto& r : g.relations()) {
    hash_string(h, r.name);
    hash_value(h, r.src);
    hash_value(h, r.dst);
    const auto& m = r.matrix;
    hash_bytes(h, m.indptr().data(), m.indptr().size() * sizeof(std::int64_t));
    hash_bytes(h, m.indices().data(), m.indices().size() * sizeof(std::int64_t));
    hash_bytes(h, m.values().data(), m.values().size() * sizeof(double));
  }
  hash_value(h, g.target_type());
  hash_value(h, g.num_classes());
  hash_bytes(h, g.labels().data(), g.labels().size() * sizeof(int));
  for (const auto* s : {&g.splits().train, &g.splits().valid, &g.splits().test}) {
    hash_value(h, s->size());
    hash_bytes(h, s->data(), s->size() * sizeof(std::int64_t));
  }
  return h;
}

}  // namespace latte
