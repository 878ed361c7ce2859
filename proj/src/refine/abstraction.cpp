#include "rct/abstraction.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rct/dataset.hpp"

namespace rct {

int EdgeFeature::index() const {
  return (static_cast<int>(type) * kNodeKindCount + static_cast<int>(src)) * kNodeKindCount + static_cast<int>(dst);
}

EdgeFeature EdgeFeature::from_index(int i) {
  if (i < 0 || i >= kEdgeFeatureCount) throw std::out_of_range("edge feature index " + std::to_string(i));
  EdgeFeature f;
  f.dst = static_cast<NodeKind>(i % kNodeKindCount);
  i /= kNodeKindCount;
  f.src = static_cast<NodeKind>(i % kNodeKindCount);
  f.type = static_cast<EdgeType>(i / kNodeKindCount);
  return f;
}

std::string EdgeFeature::str() const {
  return std::string(edge_type_name(type)) + " " + std::string(kind_name(src)) + " " + std::string(kind_name(dst));
}

EdgeFeature edge_feature(const Graph& g, const Edge& e) {
  return {e.type, g.kinds.at(static_cast<std::size_t>(e.src)), g.kinds.at(static_cast<std::size_t>(e.dst))};
}

Abstraction Abstraction::full() {
  std::set<EdgeFeature> all;
  for (int i = 0; i < kEdgeFeatureCount; ++i) all.insert(EdgeFeature::from_index(i));
  return Abstraction(std::move(all));
}

void Abstraction::save(std::ostream& out) const {
  for (const auto& f : features_) out << f.str() << '\n';
}

void Abstraction::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save(out);
}

Abstraction Abstraction::load(std::istream& in) {
  std::set<EdgeFeature> fs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string t, s, d, extra;
    ls >> t >> s >> d;
    auto et = edge_type_from_name(t);
    auto sk = kind_from_name(s);
    auto dk = kind_from_name(d);
    if (!et || !sk || !dk || (ls >> extra))
      throw DataError("abstraction line " + std::to_string(lineno) + ": expected `edgetype srckind dstkind`");
    fs.insert({*et, *sk, *dk});
  }
  return Abstraction(std::move(fs));
}

Abstraction Abstraction::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return load(in);
}

Graph apply_abstraction(const Abstraction& alpha, const Graph& g) {
  Graph out;
  out.kinds = g.kinds;
  out.words = g.words;
  out.values = g.values;
  for (const Edge& e : g.edges)
    if (alpha.contains(edge_feature(g, e))) out.edges.push_back(e);
  return out;
}

}  // namespace rct
