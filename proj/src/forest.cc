#include "bcfp/forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "bcfp/error.h"
#include "bcfp/random.h"

namespace bcfp {

using nn::Matrix;

std::string_view SplitCriterionName(SplitCriterion c) {
  return c == SplitCriterion::kEntropy ? "entropy" : "gini";
}

std::string_view MaxFeaturesName(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::kSqrt:
      return "sqrt";
    case MaxFeatures::kLog2:
      return "log2";
    case MaxFeatures::kAll:
      return "all";
  }
  return "sqrt";
}

void ForestConfig::Validate() const {
  if (n_trees < 1)
    Fail(ErrorCode::kInvalidArgument, "forest: n_trees must be >= 1");
  if (max_depth < 1)
    Fail(ErrorCode::kInvalidArgument, "forest: max_depth must be >= 1");
  if (min_samples_split < 2)
    Fail(ErrorCode::kInvalidArgument, "forest: min_samples_split must be >= 2");
}

nlohmann::json ForestConfig::ToJson() const {
  return {{"nTrees", n_trees},
          {"maxDepth", max_depth},
          {"criterion", SplitCriterionName(criterion)},
          {"maxFeatures", MaxFeaturesName(max_features)},
          {"minSamplesSplit", min_samples_split},
          {"bootstrap", bootstrap},
          {"seed", seed}};
}

ForestConfig ForestConfig::FromJson(const nlohmann::json& j) {
  ForestConfig c;
  try {
    c.n_trees = j.value("nTrees", c.n_trees);
    c.max_depth = j.value("maxDepth", c.max_depth);
    c.min_samples_split = j.value("minSamplesSplit", c.min_samples_split);
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    c.seed = j.value("seed", c.seed);
    const std::string crit =
        j.value("criterion", std::string(SplitCriterionName(c.criterion)));
    if (crit == "entropy")
      c.criterion = SplitCriterion::kEntropy;
    else if (crit == "gini")
      c.criterion = SplitCriterion::kGini;
    else
      Fail(ErrorCode::kConfigError, "forest: unknown criterion '" + crit + "'");
    const std::string mf =
        j.value("maxFeatures", std::string(MaxFeaturesName(c.max_features)));
    if (mf == "sqrt")
      c.max_features = MaxFeatures::kSqrt;
    else if (mf == "log2")
      c.max_features = MaxFeatures::kLog2;
    else if (mf == "all")
      c.max_features = MaxFeatures::kAll;
    else
      Fail(ErrorCode::kConfigError, "forest: unknown maxFeatures '" + mf + "'");
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfigError, std::string("forest config: ") + e.what());
  }
  c.Validate();
  return c;
}

double Impurity(SplitCriterion c, double n0, double n1) {
  const double n = n0 + n1;
  if (n <= 0 || n0 == 0 || n1 == 0)
    return 0.0;
  const double p0 = n0 / n;
  const double p1 = n1 / n;
  if (c == SplitCriterion::kGini)
    return 1.0 - p0 * p0 - p1 * p1;
  return -(p0 * std::log2(p0) + p1 * std::log2(p1));
}

int FeaturesPerSplit(MaxFeatures m, int d) {
  switch (m) {
    case MaxFeatures::kSqrt:
      return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
    case MaxFeatures::kLog2:
      return std::max(1, static_cast<int>(std::log2(static_cast<double>(d))));
    case MaxFeatures::kAll:
      return d;
  }
  return d;
}

namespace {

struct Split {
  int32_t feature = -1;
  double threshold = 0;
  double cost = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, const ForestConfig& cfg,
              uint64_t seed, std::vector<TreeNode>& nodes)
      : x_(x), y_(y), cfg_(cfg), rng_(seed), nodes_(nodes) {
    features_.resize(static_cast<size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
    per_split_ = FeaturesPerSplit(cfg.max_features,
                                  static_cast<int>(x.cols()));
  }

  int32_t Build(std::vector<size_t> samples, int depth) {
    double n1 = 0;
    for (size_t s : samples)
      n1 += y_[s];
    const double n = static_cast<double>(samples.size());
    const auto id = static_cast<int32_t>(nodes_.size());
    nodes_.push_back({});
    nodes_[static_cast<size_t>(id)].probability = n1 / n;
    if (depth >= cfg_.max_depth || n1 == 0 || n1 == n ||
        samples.size() < static_cast<size_t>(cfg_.min_samples_split))
      return id;
    const Split best = FindSplit(samples, n - n1, n1);
    if (best.feature < 0)
      return id;
    std::vector<size_t> left;
    std::vector<size_t> right;
    for (size_t s : samples) {
      if (x_(static_cast<Eigen::Index>(s), best.feature) <= best.threshold)
        left.push_back(s);
      else
        right.push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int32_t l = Build(std::move(left), depth + 1);
    const int32_t r = Build(std::move(right), depth + 1);
    TreeNode& node = nodes_[static_cast<size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

 private:
  std::vector<int32_t> CandidateFeatures() {
    const size_t d = features_.size();
    const auto k = static_cast<size_t>(per_split_);
    if (k < d) {
      for (size_t i = 0; i < k; ++i)
        std::swap(features_[i], features_[i + rng_.Below(d - i)]);
    }
    std::vector<int32_t> out(features_.begin(),
                             features_.begin() + static_cast<ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
  }

  Split FindSplit(const std::vector<size_t>& samples, double n0, double n1) {
    Split best;
    const double n = n0 + n1;
    std::vector<std::pair<double, int>> column(samples.size());
    for (int32_t f : CandidateFeatures()) {
      for (size_t i = 0; i < samples.size(); ++i) {
        column[i] = {x_(static_cast<Eigen::Index>(samples[i]), f),
                     y_[samples[i]]};
      }
      std::sort(column.begin(), column.end());
      double l0 = 0;
      double l1 = 0;
      for (size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].second ? l1 : l0) += 1;
        const double a = column[i].first;
        const double b = column[i + 1].first;
        if (!(a < b))
          continue;
        const double r0 = n0 - l0;
        const double r1 = n1 - l1;
        const double cost =
            ((l0 + l1) * Impurity(cfg_.criterion, l0, l1) +
             (r0 + r1) * Impurity(cfg_.criterion, r0, r1)) /
            n;
        if (best.feature < 0 || cost < best.cost) {
          double t = a + (b - a) / 2;
          if (!(t < b))
            t = a;
          best = {f, t, cost};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  Rng rng_;
  std::vector<TreeNode>& nodes_;
  std::vector<int32_t> features_;
  int per_split_ = 1;
};

TreeNode NodeFromJson(const nlohmann::json& a) {
  if (!a.is_array() || a.size() != 5)
    Fail(ErrorCode::kSchemaError, "forest: node must be a 5-element array");
  TreeNode n;
  n.feature = a[0].get<int32_t>();
  n.threshold = a[1].get<double>();
  n.left = a[2].get<int32_t>();
  n.right = a[3].get<int32_t>();
  n.probability = a[4].get<double>();
  return n;
}

}  // namespace

DecisionTree DecisionTree::Fit(const Matrix& x, std::span<const int> y,
                               std::span<const size_t> samples,
                               const ForestConfig& cfg, uint64_t seed) {
  cfg.Validate();
  if (samples.empty())
    Fail(ErrorCode::kEmptyDataset, "tree: no samples");
  DecisionTree tree;
  TreeBuilder builder(x, y, cfg, seed, tree.nodes_);
  builder.Build({samples.begin(), samples.end()}, 0);
  return tree;
}

double DecisionTree::PredictProba(std::span<const double> features) const {
  size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    i = static_cast<size_t>(
        features[static_cast<size_t>(n.feature)] <= n.threshold ? n.left
                                                                : n.right);
  }
  return nodes_[i].probability;
}

int DecisionTree::Depth() const {
  std::vector<std::pair<size_t, int>> stack = {{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[i].is_leaf()) {
      stack.push_back({static_cast<size_t>(nodes_[i].left), d + 1});
      stack.push_back({static_cast<size_t>(nodes_[i].right), d + 1});
    }
  }
  return deepest;
}

nlohmann::json DecisionTree::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const TreeNode& n : nodes_)
    arr.push_back({n.feature, n.threshold, n.left, n.right, n.probability});
  return arr;
}

DecisionTree DecisionTree::FromJson(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    Fail(ErrorCode::kSchemaError, "forest: tree must be a non-empty array");
  DecisionTree t;
  try {
    for (const auto& a : j)
      t.nodes_.push_back(NodeFromJson(a));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchemaError, std::string("forest node: ") + e.what());
  }
  const auto n = static_cast<int32_t>(t.nodes_.size());
  for (int32_t i = 0; i < n; ++i) {
    const TreeNode& node = t.nodes_[static_cast<size_t>(i)];
    if (node.is_leaf())
      continue;
    // Children always follow their parent, which also rules out cycles.
    if (node.left <= i || node.right <= i || node.left >= n || node.right >= n ||
        !std::isfinite(node.threshold))
      Fail(ErrorCode::kSchemaError, "forest: bad node " + std::to_string(i));
  }
  return t;
}

RandomForest RandomForest::Fit(const Matrix& x, std::span<const int> y,
                               const ForestConfig& cfg) {
  cfg.Validate();
  if (x.rows() == 0)
    Fail(ErrorCode::kEmptyDataset, "forest: no training rows");
  if (static_cast<size_t>(x.rows()) != y.size())
    Fail(ErrorCode::kLengthMismatch, "forest: rows and labels differ");
  if (x.cols() == 0)
    Fail(ErrorCode::kDimensionMismatch, "forest: no features");
  if (!x.allFinite())
    Fail(ErrorCode::kNonFiniteValue, "forest: non-finite feature");
  size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1)
      Fail(ErrorCode::kInvalidArgument, "forest: labels must be 0 or 1");
    pos += static_cast<size_t>(v);
  }
  if (pos == 0 || pos == y.size())
    Fail(ErrorCode::kSingleClass, "forest: training labels have one class");

  RandomForest forest;
  forest.num_features_ = static_cast<int>(x.cols());
  forest.trees_.resize(static_cast<size_t>(cfg.n_trees));
  const size_t n = y.size();
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < cfg.n_trees; ++t) {
    const uint64_t seed = DeriveSeed(cfg.seed, "tree-" + std::to_string(t));
    std::vector<size_t> samples(n);
    if (cfg.bootstrap) {
      Rng rng(Mix64(seed ^ 0x626f6f74ULL));
      for (size_t& s : samples)
        s = rng.Below(n);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    forest.trees_[static_cast<size_t>(t)] =
        DecisionTree::Fit(x, y, samples, cfg, seed);
  }
  return forest;
}

double RandomForest::PredictProba(std::span<const double> features) const {
  if (features.size() != static_cast<size_t>(num_features_))
    Fail(ErrorCode::kDimensionMismatch,
         "forest: expected " + std::to_string(num_features_) + " features, got " +
             std::to_string(features.size()));
  double sum = 0;
  for (const DecisionTree& t : trees_)
    sum += t.PredictProba(features);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::PredictProba(const Matrix& x) const {
  if (x.cols() != num_features_)
    Fail(ErrorCode::kDimensionMismatch, "forest: feature count differs");
  std::vector<double> out(static_cast<size_t>(x.rows()));
  const auto rows = static_cast<ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < rows; ++i) {
    out[static_cast<size_t>(i)] = PredictProba(
        std::span<const double>(x.row(i).data(), static_cast<size_t>(x.cols())));
  }
  return out;
}

nlohmann::json RandomForest::ToJson() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const DecisionTree& t : trees_)
    trees.push_back(t.ToJson());
  return {{"format", "bcfp-forest"},
          {"version", 1},
          {"numFeatures", num_features_},
          {"trees", std::move(trees)}};
}

RandomForest RandomForest::FromJson(const nlohmann::json& j) {
  RandomForest f;
  try {
    if (j.at("format") != "bcfp-forest" || j.at("version") != 1)
      Fail(ErrorCode::kSchemaError, "forest: unsupported format");
    f.num_features_ = j.at("numFeatures").get<int>();
    for (const auto& t : j.at("trees"))
      f.trees_.push_back(DecisionTree::FromJson(t));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchemaError, std::string("forest: ") + e.what());
  }
  if (f.trees_.empty() || f.num_features_ < 1)
    Fail(ErrorCode::kSchemaError, "forest: needs trees and features");
  for (const auto& t : f.trees_) {
    for (const TreeNode& n : t.nodes()) {
      if (!n.is_leaf() && n.feature >= f.num_features_)
        Fail(ErrorCode::kSchemaError, "forest: feature index out of range");
    }
  }
  return f;
}

RandomForest RandomForest::FromTrees(std::vector<DecisionTree> trees,
                                     int num_features) {
  if (trees.empty())
    Fail(ErrorCode::kInvalidArgument, "forest: no trees");
  RandomForest f;
  f.trees_ = std::move(trees);
  f.num_features_ = num_features;
  return f;
}

}  // namespace bcfp
