#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hotrack/classification.hpp"
#include "hotrack/error.hpp"
#include "hotrack/parallel.hpp"

namespace hotrack {

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes[i].leaf < 0) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

void DecisionForest::predict(const DepthView& depth, int u, int v, std::span<float> out) const {
  std::fill(out.begin(), out.end(), 0.0f);
  if (trees.empty()) return;
  const float d = depth.data[static_cast<std::size_t>(v) * depth.width + u];
  for (const DecisionTree& tree : trees) {
    int n = 0;
    while (tree.nodes[n].leaf < 0) {
      const TreeNode& node = tree.nodes[n];
      n = evaluate_feature(depth, u, v, d, node.feature) < node.threshold ? node.left : node.right;
    }
    const float* h = &tree.histograms[static_cast<std::size_t>(tree.nodes[n].leaf) * class_count];
    for (int c = 0; c < class_count; ++c) out[c] += h[c];
  }
  const float inv = 1.0f / static_cast<float>(trees.size());
  for (int c = 0; c < class_count; ++c) out[c] *= inv;
}

int DecisionForest::predict_class(const DepthView& depth, int u, int v) const {
  std::vector<float> p(class_count);
  predict(depth, u, v, p);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

struct Sample {
  std::uint32_t image;
  std::int16_t u, v;
  float depth;
  std::uint8_t label;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double entropy(const double* counts, int classes, double total) {
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (int c = 0; c < classes; ++c) {
    if (counts[c] > 0.0) {
      const double p = counts[c] / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

class TreeTrainer {
 public:
  TreeTrainer(std::span<const TrainingImage> data, const ForestParams& params, int classes,
              std::uint64_t seed)
      : data_(data), params_(params), classes_(classes), rng_(seed) {}

  DecisionTree train(std::vector<Sample> samples) {
    samples_ = std::move(samples);
    scratch_.resize(samples_.size());
    tree_ = {};
    tree_.nodes.emplace_back();
    build(0, 0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = -1.0;
    DepthFeature feature;
    float threshold = 0.0f;
  };

  DepthFeature random_feature() {
    std::uniform_real_distribution<float> off(-params_.offset_range, params_.offset_range);
    DepthFeature f;
    f.kind = std::bernoulli_distribution(0.5)(rng_) ? FeatureKind::Binary : FeatureKind::Unary;
    f.offset1 = {off(rng_), off(rng_)};
    if (f.kind == FeatureKind::Binary) f.offset2 = {off(rng_), off(rng_)};
    return f;
  }

  float feature_of(const Sample& s, const DepthFeature& f) const {
    return evaluate_feature(data_[s.image].view(), s.u, s.v, s.depth, f);
  }

  // Best threshold for one candidate feature. `values` is scratch space.
  Split score(std::size_t begin, std::size_t end, const DepthFeature& f,
              const std::vector<float>& thresholds_unit, double parent_entropy,
              std::vector<float>& values) const {
    const std::size_t n = end - begin;
    values.resize(n);
    float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = feature_of(samples_[begin + i], f);
      lo = std::min(lo, values[i]);
      hi = std::max(hi, values[i]);
    }
    Split best;
    if (!(hi > lo)) return best;
    const int T = static_cast<int>(thresholds_unit.size());
    std::vector<float> t(T);
    for (int k = 0; k < T; ++k) t[k] = lo + thresholds_unit[k] * (hi - lo);
    // bins[b] counts samples with exactly b thresholds <= value.
    std::vector<std::uint32_t> bins(static_cast<std::size_t>(T + 1) * classes_, 0u);
    for (std::size_t i = 0; i < n; ++i) {
      const int b = static_cast<int>(std::upper_bound(t.begin(), t.end(), values[i]) - t.begin());
      ++bins[static_cast<std::size_t>(b) * classes_ + samples_[begin + i].label];
    }
    std::vector<double> left(classes_, 0.0), right(classes_, 0.0);
    for (int b = 0; b <= T; ++b)
      for (int c = 0; c < classes_; ++c) right[c] += bins[static_cast<std::size_t>(b) * classes_ + c];
    double nl = 0.0, nr = static_cast<double>(n);
    // A sample goes left for threshold k iff value < t[k], i.e. its bin index <= k.
    for (int k = 0; k < T; ++k) {
      for (int c = 0; c < classes_; ++c) {
        const double m = bins[static_cast<std::size_t>(k) * classes_ + c];
        left[c] += m;
        right[c] -= m;
        nl += m;
        nr -= m;
      }
      if (nl <= 0.0 || nr <= 0.0) continue;
      const double gain = parent_entropy - (nl / n) * entropy(left.data(), classes_, nl) -
                          (nr / n) * entropy(right.data(), classes_, nr);
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = f;
        best.threshold = t[k];
      }
    }
    return best;
  }

  void make_leaf(int node, const std::vector<double>& counts, double total) {
    tree_.nodes[node].leaf = static_cast<std::int32_t>(tree_.histograms.size() / classes_);
    for (int c = 0; c < classes_; ++c)
      tree_.histograms.push_back(static_cast<float>(total > 0.0 ? counts[c] / total : 1.0 / classes_));
  }

  void build(int node, std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    std::vector<double> counts(classes_, 0.0);
    for (std::size_t i = begin; i < end; ++i) counts[samples_[i].label] += 1.0;
    const double total = static_cast<double>(n);
    const double h = entropy(counts.data(), classes_, total);
    if (depth >= params_.max_depth || n < static_cast<std::size_t>(std::max(2, params_.min_samples)) ||
        h <= 0.0) {
      make_leaf(node, counts, total);
      return;
    }

    // Draw all candidates up front so the result does not depend on threading.
    std::vector<DepthFeature> candidates(params_.candidate_offsets);
    std::vector<std::vector<float>> thresholds(params_.candidate_offsets);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (int c = 0; c < params_.candidate_offsets; ++c) {
      candidates[c] = random_feature();
      thresholds[c].resize(params_.thresholds);
      for (float& x : thresholds[c]) x = unit(rng_);
      std::sort(thresholds[c].begin(), thresholds[c].end());
    }
    std::vector<Split> results(candidates.size());
    const int workers = std::max(1, params_.threads);
    std::vector<std::vector<float>> values(static_cast<std::size_t>(workers));
    const std::size_t chunk = (candidates.size() + workers - 1) / workers;
    parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
      for (std::size_t c = w * chunk; c < std::min(candidates.size(), (w + 1) * chunk); ++c)
        results[c] = score(begin, end, candidates[c], thresholds[c], h, values[w]);
    });
    Split best;
    for (const Split& s : results)
      if (s.gain > best.gain) best = s;

    if (best.gain < params_.min_gain) {
      make_leaf(node, counts, total);
      return;
    }

    // Stable partition keeps samples grouped by image for cache locality.
    std::size_t nl = 0;
    for (std::size_t i = begin; i < end; ++i)
      if (feature_of(samples_[i], best.feature) < best.threshold) scratch_[begin + nl++] = samples_[i];
    std::size_t r = begin + nl;
    for (std::size_t i = begin; i < end; ++i)
      if (!(feature_of(samples_[i], best.feature) < best.threshold)) scratch_[r++] = samples_[i];
    std::copy(scratch_.begin() + begin, scratch_.begin() + end, samples_.begin() + begin);

    const int left = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = best.feature;
    tree_.nodes[node].threshold = best.threshold;
    tree_.nodes[node].left = left;
    tree_.nodes[node].right = left + 1;
    build(left, begin, begin + nl, depth + 1);
    build(left + 1, begin + nl, end, depth + 1);
  }

  std::span<const TrainingImage> data_;
  ForestParams params_;
  int classes_;
  std::mt19937_64 rng_;
  std::vector<Sample> samples_;
  std::vector<Sample> scratch_;
  DecisionTree tree_;
};

void check_dataset(std::span<const TrainingImage> dataset, int class_count) {
  if (dataset.empty()) throw InvalidInput("training dataset is empty");
  for (const TrainingImage& im : dataset) {
    if (im.width <= 0 || im.height <= 0 || im.width > 32767 || im.height > 32767)
      throw InvalidInput("training image has invalid dimensions");
    const std::size_t n = static_cast<std::size_t>(im.width) * im.height;
    if (im.depth.size() != n || im.labels.size() != n)
      throw InvalidInput("training image buffers do not match its dimensions");
    for (std::uint8_t l : im.labels)
      if (l != kIgnoreLabel && l >= class_count) throw InvalidInput("training label out of range");
  }
}

}  // namespace

DecisionForest train_forest(std::span<const TrainingImage> dataset, const ForestParams& params,
                            int class_count) {
  if (class_count < 1 || class_count > 254) throw InvalidInput("class count must be in [1, 254]");
  if (params.trees < 1 || params.pixels_per_image < 1 || params.candidate_offsets < 1 ||
      params.thresholds < 1 || params.max_depth < 0 || params.min_gain < 0.0 ||
      !(params.offset_range > 0.0f))
    throw InvalidInput("invalid forest training parameters");
  check_dataset(dataset, class_count);

  // Distinct image subsets per tree; with fewer images than trees they are shared.
  std::mt19937_64 rng(splitmix64(params.seed));
  std::vector<std::uint32_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::uint32_t>> subsets(params.trees);
  if (dataset.size() >= static_cast<std::size_t>(params.trees)) {
    for (std::size_t i = 0; i < order.size(); ++i) subsets[i % params.trees].push_back(order[i]);
  } else {
    for (auto& s : subsets) s = order;
  }

  // Pixel sampling per image, drawn sequentially for determinism.
  std::vector<std::vector<Sample>> samples(params.trees);
  for (int t = 0; t < params.trees; ++t) {
    std::sort(subsets[t].begin(), subsets[t].end());
    for (std::uint32_t id : subsets[t]) {
      const TrainingImage& im = dataset[id];
      std::vector<std::uint32_t> candidates;
      for (std::size_t p = 0; p < im.labels.size(); ++p)
        if (im.labels[p] != kIgnoreLabel && im.depth[p] > 0.0f) candidates.push_back(static_cast<std::uint32_t>(p));
      if (candidates.size() > static_cast<std::size_t>(params.pixels_per_image)) {
        for (int k = 0; k < params.pixels_per_image; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
          std::swap(candidates[k], candidates[pick(rng)]);
        }
        candidates.resize(params.pixels_per_image);
        std::sort(candidates.begin(), candidates.end());
      }
      for (std::uint32_t p : candidates) {
        Sample s;
        s.image = id;
        s.u = static_cast<std::int16_t>(p % im.width);
        s.v = static_cast<std::int16_t>(p / im.width);
        s.depth = im.depth[p];
        s.label = im.labels[p];
        samples[t].push_back(s);
      }
    }
  }

  DecisionForest forest;
  forest.class_count = class_count;
  forest.max_depth = params.max_depth;
  forest.trees.resize(params.trees);
  // Trees run in parallel when there are spare threads; otherwise each tree
  // uses them for candidate evaluation.
  const int tree_threads = std::min(params.threads, params.trees);
  ForestParams inner = params;
  inner.threads = std::max(1, params.threads / std::max(1, tree_threads));
  parallel_for(static_cast<std::size_t>(params.trees), tree_threads, [&](std::size_t t) {
    TreeTrainer trainer(dataset, inner, class_count, splitmix64(params.seed * 1000003ull + t + 1));
    forest.trees[t] = trainer.train(std::move(samples[t]));
  });
  return forest;
}

AccuracyReport evaluate_forest(const DecisionForest& forest, std::span<const TrainingImage> images) {
  AccuracyReport report;
  report.class_counts.assign(forest.class_count, 0);
  std::size_t correct = 0;
  for (const TrainingImage& im : images) {
    const DepthView view = im.view();
    for (int v = 0; v < im.height; ++v)
      for (int u = 0; u < im.width; ++u) {
        const std::size_t p = static_cast<std::size_t>(v) * im.width + u;
        if (im.labels[p] == kIgnoreLabel || im.depth[p] <= 0.0f) continue;
        if (im.labels[p] >= forest.class_count) throw InvalidInput("label out of range");
        ++report.pixels;
        ++report.class_counts[im.labels[p]];
        if (forest.predict_class(view, u, v) == im.labels[p]) ++correct;
      }
  }
  if (report.pixels > 0) {
    report.accuracy = static_cast<double>(correct) / report.pixels;
    report.majority_baseline =
        static_cast<double>(*std::max_element(report.class_counts.begin(), report.class_counts.end())) /
        report.pixels;
  }
  return report;
}

}  // namespace hotrack
