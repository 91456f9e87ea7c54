#ifndef BCFP_FOREST_H_
#define BCFP_FOREST_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcfp/nn/matrix.h"

namespace bcfp {

enum class SplitCriterion { kEntropy, kGini };
enum class MaxFeatures { kSqrt, kLog2, kAll };

std::string_view SplitCriterionName(SplitCriterion c);
std::string_view MaxFeaturesName(MaxFeatures m);

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 30;
  SplitCriterion criterion = SplitCriterion::kEntropy;
  MaxFeatures max_features = MaxFeatures::kSqrt;
  int min_samples_split = 5;
  bool bootstrap = true;
  uint64_t seed = 0;

  // Throws kInvalidArgument.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep their defaults. Throws kConfigError.
  static ForestConfig FromJson(const nlohmann::json& j);
};

// Impurity of a node holding |n0| negatives and |n1| positives (weights may
// be fractional multiplicities). Zero on pure nodes.
double Impurity(SplitCriterion c, double n0, double n1);

// Features tried per node for |d| input features.
int FeaturesPerSplit(MaxFeatures m, int d);

struct TreeNode {
  // -1 marks a leaf.
  int32_t feature = -1;
  double threshold = 0;  // go left when x[feature] <= threshold
  int32_t left = -1;
  int32_t right = -1;
  // Class-1 frequency of the training samples reaching this node.
  double probability = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  // |samples| lists row indices of |x|, repeats allowed (bootstrap).
  static DecisionTree Fit(const nn::Matrix& x, std::span<const int> y,
                          std::span<const size_t> samples,
                          const ForestConfig& cfg, uint64_t seed);

  double PredictProba(std::span<const double> features) const;
  // Longest root-to-leaf edge count.
  int Depth() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  nlohmann::json ToJson() const;
  static DecisionTree FromJson(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
};

class RandomForest {
 public:
  // Rows of |x| are samples. Throws kEmptyDataset, kSingleClass,
  // kLengthMismatch.
  static RandomForest Fit(const nn::Matrix& x, std::span<const int> y,
                          const ForestConfig& cfg);

  // Mean class-1 leaf frequency over trees. Throws kDimensionMismatch.
  double PredictProba(std::span<const double> features) const;
  std::vector<double> PredictProba(const nn::Matrix& x) const;

  int num_features() const { return num_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  nlohmann::json ToJson() const;
  // Throws kSchemaError.
  static RandomForest FromJson(const nlohmann::json& j);

  // Assembles a forest from already-built trees.
  static RandomForest FromTrees(std::vector<DecisionTree> trees,
                                int num_features);

 private:
  std::vector<DecisionTree> trees_;
  int num_features_ = 0;
};

}  // namespace bcfp

#endif  // BCFP_FOREST_H_
