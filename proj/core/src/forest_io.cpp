#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hotrack/classification.hpp"
#include "hotrack/error.hpp"

namespace hotrack {

namespace {

constexpr char kMagic[8] = {'H', 'O', 'T', 'R', 'F', 'R', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t x) { out.push_back(x); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void i32(std::int32_t x) { u32(static_cast<std::uint32_t>(x)); }
  void f32(float x) { u32(std::bit_cast<std::uint32_t>(x)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return x;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos == bytes.size(); }
  std::size_t remaining() const { return bytes.size() - pos; }

 private:
  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw ParseError("forest file is truncated");
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_forest(const DecisionForest& forest) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(forest.class_count));
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  w.u32(static_cast<std::uint32_t>(forest.max_depth));
  w.i32(forest.layer);
  w.i32(forest.viewpoint);
  for (const DecisionTree& tree : forest.trees) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    w.u32(static_cast<std::uint32_t>(tree.leaf_count(forest.class_count)));
    for (const TreeNode& n : tree.nodes) {
      w.u8(static_cast<std::uint8_t>(n.feature.kind));
      w.u8(0);
      w.u8(0);
      w.u8(0);
      w.f32(n.feature.offset1.x());
      w.f32(n.feature.offset1.y());
      w.f32(n.feature.offset2.x());
      w.f32(n.feature.offset2.y());
      w.f32(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.i32(n.leaf);
    }
    for (float h : tree.histograms) w.f32(h);
  }
  return std::move(w.out);
}

DecisionForest deserialize_forest(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic)
    if (r.u8() != static_cast<std::uint8_t>(c)) throw ParseError("not a forest file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw ParseError("unsupported forest version " + std::to_string(version));
  DecisionForest f;
  f.class_count = static_cast<int>(r.u32());
  const std::uint32_t trees = r.u32();
  f.max_depth = static_cast<int>(r.u32());
  f.layer = r.i32();
  f.viewpoint = r.i32();
  if (f.class_count < 1 || f.class_count > 254) throw ParseError("forest class count out of range");
  if (trees > 1024) throw ParseError("implausible tree count");
  f.trees.resize(trees);
  for (DecisionTree& t : f.trees) {
    const std::uint32_t nodes = r.u32();
    const std::uint32_t leaves = r.u32();
    if (nodes == 0 || static_cast<std::uint64_t>(nodes) * 36 > r.remaining())
      throw ParseError("forest node table is truncated");
    t.nodes.resize(nodes);
    for (TreeNode& n : t.nodes) {
      const std::uint8_t kind = r.u8();
      if (kind > 1) throw ParseError("unknown feature kind");
      n.feature.kind = static_cast<FeatureKind>(kind);
      r.u8();
      r.u8();
      r.u8();
      n.feature.offset1 = {r.f32(), r.f32()};
      n.feature.offset2 = {r.f32(), r.f32()};
      n.threshold = r.f32();
      n.left = r.i32();
      n.right = r.i32();
      n.leaf = r.i32();
    }
    // Children must point forward so traversal always terminates.
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const TreeNode& n = t.nodes[i];
      if (n.leaf >= 0) {
        if (static_cast<std::uint32_t>(n.leaf) >= leaves) throw ParseError("leaf index out of range");
      } else if (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) ||
                 static_cast<std::uint32_t>(n.left) >= nodes || static_cast<std::uint32_t>(n.right) >= nodes) {
        throw ParseError("child index out of range");
      }
    }
    t.histograms.resize(static_cast<std::size_t>(leaves) * f.class_count);
    for (float& h : t.histograms) h = r.f32();
  }
  if (!r.done()) throw ParseError("trailing bytes after forest data");
  return f;
}

void save_forest(const DecisionForest& forest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize_forest(forest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DecisionForest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_forest(bytes);
}

}  // namespace hotrack

namespace hotrack {

namespace {
std::filesystem::path layer2_path(const std::filesystem::path& dir, int v) {
  return dir / ("layer2_" + std::string(viewpoint_name(static_cast<Viewpoint>(v))) + ".forest");
}
}  // namespace

void save_forest_set(const ForestSet& set, const std::filesystem::path& dir) {
  save_forest(set.layer1, dir / "layer1.forest");
  for (int v = 0; v < kViewpointCount; ++v) save_forest(set.layer2[v], layer2_path(dir, v));
}

ForestSet load_forest_set(const std::filesystem::path& dir) {
  ForestSet set;
  set.layer1 = load_forest(dir / "layer1.forest");
  if (set.layer1.class_count != kLayer1Classes) throw ParseError("layer1.forest has the wrong class count");
  for (int v = 0; v < kViewpointCount; ++v) {
    set.layer2[v] = load_forest(layer2_path(dir, v));
    if (set.layer2[v].class_count != kLayer2Classes)
      throw ParseError(layer2_path(dir, v).filename().string() + " has the wrong class count");
  }
  return set;
}

}  // namespace hotrack
