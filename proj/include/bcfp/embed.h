#ifndef BCFP_EMBED_H_
#define BCFP_EMBED_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfp/bytelog.h"
#include "bcfp/nn/matrix.h"

namespace bcfp {

enum class EmbeddingMode { kSkipGram, kSubword };

std::string_view EmbeddingModeName(EmbeddingMode mode);
EmbeddingMode EmbeddingModeFromName(std::string_view name);

struct EmbedConfig {
  EmbeddingMode mode = EmbeddingMode::kSkipGram;
  int dim = 100;
  int window = 3;
  int epochs = 100;
  int negative_samples = 5;
  double learning_rate = 0.025;
  // Subword only.
  int min_n = 3;
  int max_n = 6;
  uint32_t bucket_count = 1u << 18;
  uint64_t seed = 0;

  static EmbedConfig SkipGramDefaults();
  static EmbedConfig SubwordDefaults();
  // Throws kInvalidArgument.
  void Validate() const;
};

// V x d, row i is the vector of vocabulary ID i; the PAD row is zero.
struct EmbeddingMatrix {
  EmbeddingMode mode = EmbeddingMode::kSkipGram;
  int dim = 0;
  int min_n = 0;
  int max_n = 0;
  nn::Matrix vectors;

  // Header "dim=<d> mode=<m>" (plus "min_n=.. max_n=.." for subword), then
  // "<mnemonic> <d values>" per ID.
  std::string ToText(const Vocabulary& vocab) const;
  // Throws kSchemaError on a malformed file or a vocabulary mismatch.
  static EmbeddingMatrix FromText(std::string_view text,
                                  const Vocabulary& vocab);
};

struct EmbedReport {
  // Mean negative-sampling loss per (center, context) pair.
  std::vector<double> epoch_loss;
  size_t pairs_per_epoch = 0;
};

// Skip-gram with negative sampling. PAD tokens are skipped. Throws
// kEmptyCorpus when no sequence has a non-PAD token.
EmbeddingMatrix TrainSkipGram(std::span<const std::vector<int32_t>> corpus,
                              int vocab_size, const EmbedConfig& cfg,
                              EmbedReport* report = nullptr);

// Subword variant: a token is the mean of its whole-token vector and its
// hashed character n-gram vectors over "<mnemonic>". Tokens never seen in
// |corpus| use their n-gram vectors only.
EmbeddingMatrix TrainSubword(std::span<const std::vector<int32_t>> corpus,
                             const Vocabulary& vocab, const EmbedConfig& cfg,
                             EmbedReport* report = nullptr);

// Dispatches on cfg.mode.
EmbeddingMatrix TrainEmbeddings(std::span<const std::vector<int32_t>> corpus,
                                const Vocabulary& vocab, const EmbedConfig& cfg,
                                EmbedReport* report = nullptr);

// Character n-grams of "<token>" with min_n <= n <= max_n, in order of n then
// position.
std::vector<std::string> CharNgrams(std::string_view token, int min_n,
                                    int max_n);

// FNV-1a 32 of |s|, reduced modulo |buckets|.
uint32_t NgramBucket(std::string_view s, uint32_t buckets);

// Mean over non-PAD tokens. Throws kEmptySequence when there are none and
// kUnknownTokenId for IDs outside the matrix.
std::vector<double> AverageVector(std::span<const int32_t> token_ids,
                                  const EmbeddingMatrix& emb);

double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// -log s(h . u_pos) - sum_k log s(-h . u_neg_k), with gradients.
struct NegativeSamplingResult {
  double loss = 0;
  std::vector<double> d_hidden;
  std::vector<double> d_positive;
  std::vector<std::vector<double>> d_negatives;
};
NegativeSamplingResult NegativeSamplingLoss(
    std::span<const double> hidden, std::span<const double> positive,
    std::span<const std::vector<double>> negatives);

}  // namespace bcfp

#endif  // BCFP_EMBED_H_
