#include "bcfp/embed.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "bcfp/error.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"

namespace bcfp {

using nn::Matrix;

namespace {

double LogSigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

// Noise distribution proportional to count^0.75, sampled by inverse CDF.
class NoiseSampler {
 public:
  explicit NoiseSampler(const std::vector<uint64_t>& counts) {
    double total = 0;
    cdf_.reserve(counts.size());
    for (uint64_t c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cdf_.push_back(total);
    }
    for (double& v : cdf_)
      v /= total;
  }

  int32_t Sample(Rng& rng) const {
    const double u = rng.Uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int32_t>(
        std::min<ptrdiff_t>(it - cdf_.begin(),
                            static_cast<ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  std::vector<double> cdf_;
};

// Input rows that compose each token's hidden vector, plus the tables.
struct Model {
  int dim = 0;
  Matrix input;   // rows referenced by |members|
  Matrix output;  // V x d
  std::vector<std::vector<int32_t>> members;
};

void InitRows(Matrix& m, const std::vector<uint64_t>& keys, uint64_t seed) {
  const double half = 0.5 / static_cast<double>(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const uint64_t key = keys[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double u =
          HashUniform(seed, key * static_cast<uint64_t>(m.cols()) +
                                static_cast<uint64_t>(c));
      m(r, c) = (2.0 * u - 1.0) * half;
    }
  }
}

std::vector<uint64_t> CountTokens(std::span<const std::vector<int32_t>> corpus,
                                  int vocab_size, uint64_t* total) {
  std::vector<uint64_t> counts(static_cast<size_t>(vocab_size), 0);
  *total = 0;
  for (const auto& seq : corpus) {
    for (int32_t t : seq) {
      if (t < 0 || t >= vocab_size)
        Fail(ErrorCode::kUnknownTokenId,
             "token id " + std::to_string(t) + " outside the vocabulary");
      if (t == Vocabulary::kPadId)
        continue;
      ++counts[static_cast<size_t>(t)];
      ++*total;
    }
  }
  if (*total == 0)
    Fail(ErrorCode::kEmptyCorpus, "embedding corpus has no tokens");
  return counts;
}

void Train(Model& model, std::span<const std::vector<int32_t>> corpus,
           const std::vector<uint64_t>& counts, uint64_t total_tokens,
           const EmbedConfig& cfg, std::string_view stream,
           EmbedReport* report) {
  const int d = model.dim;
  const NoiseSampler noise(counts);
  Rng rng(DeriveSeed(cfg.seed, stream));
  const double total_work =
      static_cast<double>(total_tokens) * static_cast<double>(cfg.epochs);
  double done = 0;
  Eigen::RowVectorXd hidden(d);
  Eigen::RowVectorXd grad(d);
  std::vector<int32_t> seq;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0;
    size_t pairs = 0;
    for (const auto& raw : corpus) {
      seq.clear();
      for (int32_t t : raw) {
        if (t != Vocabulary::kPadId)
          seq.push_back(t);
      }
      const auto n = static_cast<ptrdiff_t>(seq.size());
      for (ptrdiff_t i = 0; i < n; ++i) {
        const double lr =
            cfg.learning_rate * std::max(1e-4, 1.0 - done / total_work);
        done += 1;
        const ptrdiff_t reach =
            cfg.window - static_cast<ptrdiff_t>(
                             rng.Below(static_cast<uint64_t>(cfg.window)));
        const ptrdiff_t lo = std::max<ptrdiff_t>(0, i - reach);
        const ptrdiff_t hi = std::min<ptrdiff_t>(n - 1, i + reach);
        if (hi == lo)
          continue;
        const auto& mem = model.members[static_cast<size_t>(seq[i])];
        hidden.setZero();
        for (int32_t r : mem)
          hidden += model.input.row(r);
        hidden /= static_cast<double>(mem.size());
        grad.setZero();
        for (ptrdiff_t j = lo; j <= hi; ++j) {
          if (j == i)
            continue;
          const int32_t target = seq[j];
          for (int s = 0; s <= cfg.negative_samples; ++s) {
            int32_t t = target;
            double label = 1.0;
            if (s > 0) {
              t = noise.Sample(rng);
              if (t == target)
                continue;
              label = 0.0;
            }
            auto out = model.output.row(t);
            const double score = hidden.dot(out);
            loss -= label > 0 ? LogSigmoid(score) : LogSigmoid(-score);
            const double g = lr * (label - Sigmoid(score));
            grad += g * out;
            out += g * hidden;
          }
          ++pairs;
        }
        grad /= static_cast<double>(mem.size());
        for (int32_t r : mem)
          model.input.row(r) += grad;
      }
    }
    if (report) {
      report->epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs)
                                         : 0.0);
      report->pairs_per_epoch = pairs;
    }
  }
}

// Mean of member rows; PAD stays zero.
Matrix Compose(const Model& model, int vocab_size) {
  Matrix out = Matrix::Zero(vocab_size, model.dim);
  for (int t = Vocabulary::kUnkId; t < vocab_size; ++t) {
    const auto& mem = model.members[static_cast<size_t>(t)];
    for (int32_t r : mem)
      out.row(t) += model.input.row(r);
    out.row(t) /= static_cast<double>(mem.size());
  }
  return out;
}

}  // namespace

std::string_view EmbeddingModeName(EmbeddingMode mode) {
  return mode == EmbeddingMode::kSkipGram ? "skipgram" : "subword";
}

EmbeddingMode EmbeddingModeFromName(std::string_view name) {
  if (name == "skipgram")
    return EmbeddingMode::kSkipGram;
  if (name == "subword")
    return EmbeddingMode::kSubword;
  Fail(ErrorCode::kConfigError,
       "unknown embedding mode '" + std::string(name) + "'");
}

EmbedConfig EmbedConfig::SkipGramDefaults() {
  return EmbedConfig{};
}

EmbedConfig EmbedConfig::SubwordDefaults() {
  EmbedConfig c;
  c.mode = EmbeddingMode::kSubword;
  c.dim = 50;
  return c;
}

void EmbedConfig::Validate() const {
  auto bad = [](const std::string& what) {
    Fail(ErrorCode::kInvalidArgument, "embedding config: " + what);
  };
  if (dim < 1)
    bad("dim must be >= 1");
  if (window < 1)
    bad("window must be >= 1");
  if (epochs < 0)
    bad("epochs must be >= 0");
  if (negative_samples < 0)
    bad("negative_samples must be >= 0");
  if (!(learning_rate > 0))
    bad("learning_rate must be positive");
  if (mode == EmbeddingMode::kSubword) {
    if (min_n < 1 || min_n > max_n)
      bad("need 1 <= min_n <= max_n");
    if (bucket_count == 0)
      bad("bucket_count must be positive");
  }
}

std::vector<std::string> CharNgrams(std::string_view token, int min_n,
                                    int max_n) {
  const std::string word = "<" + std::string(token) + ">";
  std::vector<std::string> out;
  for (int n = min_n; n <= max_n; ++n) {
    const auto len = static_cast<size_t>(n);
    for (size_t i = 0; i + len <= word.size(); ++i)
      out.push_back(word.substr(i, len));
  }
  return out;
}

uint32_t NgramBucket(std::string_view s, uint32_t buckets) {
  uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h % buckets;
}

EmbeddingMatrix TrainSkipGram(std::span<const std::vector<int32_t>> corpus,
                              int vocab_size, const EmbedConfig& cfg,
                              EmbedReport* report) {
  cfg.Validate();
  if (vocab_size <= Vocabulary::kUnkId)
    Fail(ErrorCode::kInvalidArgument, "vocabulary too small");
  uint64_t total = 0;
  const auto counts = CountTokens(corpus, vocab_size, &total);
  Model model;
  model.dim = cfg.dim;
  model.input = Matrix::Zero(vocab_size, cfg.dim);
  model.output = Matrix::Zero(vocab_size, cfg.dim);
  std::vector<uint64_t> keys(static_cast<size_t>(vocab_size));
  for (int t = 0; t < vocab_size; ++t)
    keys[static_cast<size_t>(t)] = static_cast<uint64_t>(t);
  InitRows(model.input, keys, DeriveSeed(cfg.seed, "skipgram-init"));
  model.input.row(Vocabulary::kPadId).setZero();
  model.members.resize(static_cast<size_t>(vocab_size));
  for (int t = 0; t < vocab_size; ++t)
    model.members[static_cast<size_t>(t)] = {t};
  Train(model, corpus, counts, total, cfg, "skipgram", report);

  EmbeddingMatrix emb;
  emb.mode = EmbeddingMode::kSkipGram;
  emb.dim = cfg.dim;
  emb.vectors = std::move(model.input);
  emb.vectors.row(Vocabulary::kPadId).setZero();
  return emb;
}

EmbeddingMatrix TrainSubword(std::span<const std::vector<int32_t>> corpus,
                             const Vocabulary& vocab, const EmbedConfig& cfg,
                             EmbedReport* report) {
  cfg.Validate();
  const int v = vocab.size();
  uint64_t total = 0;
  const auto counts = CountTokens(corpus, v, &total);

  // Rows: whole-token vectors first, then only the buckets some token uses.
  // Bucket rows are seeded by bucket id, independent of the vocabulary.
  std::vector<uint64_t> keys;
  for (int t = 0; t < v; ++t)
    keys.push_back(static_cast<uint64_t>(t));
  std::unordered_map<uint32_t, int32_t> bucket_row;
  Model model;
  model.dim = cfg.dim;
  model.members.resize(static_cast<size_t>(v));
  for (int t = Vocabulary::kUnkId; t < v; ++t) {
    auto& mem = model.members[static_cast<size_t>(t)];
    if (counts[static_cast<size_t>(t)] > 0)
      mem.push_back(t);
    for (const auto& g : CharNgrams(vocab.MnemonicOf(t), cfg.min_n, cfg.max_n)) {
      const uint32_t b = NgramBucket(g, cfg.bucket_count);
      auto [it, inserted] =
          bucket_row.emplace(b, static_cast<int32_t>(keys.size()));
      if (inserted)
        keys.push_back((uint64_t{1} << 40) + b);
      mem.push_back(it->second);
    }
    if (mem.empty())
      mem.push_back(t);
  }
  model.input = Matrix::Zero(static_cast<Eigen::Index>(keys.size()), cfg.dim);
  InitRows(model.input, keys, DeriveSeed(cfg.seed, "subword-init"));
  model.output = Matrix::Zero(v, cfg.dim);
  Train(model, corpus, counts, total, cfg, "subword", report);

  EmbeddingMatrix emb;
  emb.mode = EmbeddingMode::kSubword;
  emb.dim = cfg.dim;
  emb.min_n = cfg.min_n;
  emb.max_n = cfg.max_n;
  emb.vectors = Compose(model, v);
  return emb;
}

EmbeddingMatrix TrainEmbeddings(std::span<const std::vector<int32_t>> corpus,
                                const Vocabulary& vocab, const EmbedConfig& cfg,
                                EmbedReport* report) {
  if (cfg.mode == EmbeddingMode::kSubword)
    return TrainSubword(corpus, vocab, cfg, report);
  return TrainSkipGram(corpus, vocab.size(), cfg, report);
}

std::vector<double> AverageVector(std::span<const int32_t> token_ids,
                                  const EmbeddingMatrix& emb) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(emb.dim);
  size_t n = 0;
  for (int32_t t : token_ids) {
    if (t == Vocabulary::kPadId)
      continue;
    if (t < 0 || t >= emb.vectors.rows())
      Fail(ErrorCode::kUnknownTokenId,
           "token id " + std::to_string(t) + " outside the embedding");
    sum += emb.vectors.row(t);
    ++n;
  }
  if (n == 0)
    Fail(ErrorCode::kEmptySequence, "no tokens to average");
  sum /= static_cast<double>(n);
  return {sum.data(), sum.data() + sum.size()};
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    Fail(ErrorCode::kDimensionMismatch, "cosine of unequal lengths");
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0)
    return 0;
  return ab / std::sqrt(aa * bb);
}

NegativeSamplingResult NegativeSamplingLoss(
    std::span<const double> hidden, std::span<const double> positive,
    std::span<const std::vector<double>> negatives) {
  const size_t d = hidden.size();
  if (positive.size() != d)
    Fail(ErrorCode::kDimensionMismatch, "positive vector length");
  NegativeSamplingResult r;
  r.d_hidden.assign(d, 0.0);
  auto term = [&](std::span<const double> u, double label,
                  std::vector<double>& du) {
    if (u.size() != d)
      Fail(ErrorCode::kDimensionMismatch, "negative vector length");
    double s = 0;
    for (size_t i = 0; i < d; ++i)
      s += hidden[i] * u[i];
    r.loss -= label > 0 ? LogSigmoid(s) : LogSigmoid(-s);
    const double g = Sigmoid(s) - label;  // dloss/ds
    du.assign(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
      r.d_hidden[i] += g * u[i];
      du[i] = g * hidden[i];
    }
  };
  term(positive, 1.0, r.d_positive);
  r.d_negatives.resize(negatives.size());
  for (size_t k = 0; k < negatives.size(); ++k)
    term(negatives[k], 0.0, r.d_negatives[k]);
  return r;
}

std::string EmbeddingMatrix::ToText(const Vocabulary& vocab) const {
  if (vectors.rows() != vocab.size())
    Fail(ErrorCode::kShapeMismatch, "embedding rows differ from vocabulary");
  std::string out = "dim=" + std::to_string(dim) +
                    " mode=" + std::string(EmbeddingModeName(mode));
  if (mode == EmbeddingMode::kSubword)
    out += " min_n=" + std::to_string(min_n) + " max_n=" + std::to_string(max_n);
  out += '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    out += vocab.MnemonicOf(static_cast<int32_t>(r));
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", vectors(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

EmbeddingMatrix EmbeddingMatrix::FromText(std::string_view text,
                                          const Vocabulary& vocab) {
  auto bad = [](const std::string& what) {
    Fail(ErrorCode::kSchemaError, "embedding file: " + what);
  };
  const auto lines = SplitLines(text);
  if (lines.empty())
    bad("missing header");
  EmbeddingMatrix emb;
  bool have_dim = false;
  bool have_mode = false;
  for (std::string_view field : SplitWhitespace(lines[0])) {
    const size_t eq = field.find('=');
    if (eq == std::string_view::npos)
      bad("header field without '='");
    const std::string_view key = field.substr(0, eq);
    const std::string_view value = field.substr(eq + 1);
    int n = 0;
    auto parse_int = [&] {
      const auto [p, ec] =
          std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || p != value.data() + value.size())
        bad("bad integer in header");
      return n;
    };
    if (key == "dim") {
      emb.dim = parse_int();
      have_dim = true;
    } else if (key == "mode") {
      try {
        emb.mode = EmbeddingModeFromName(value);
      } catch (const Error&) {
        bad("unknown mode");
      }
      have_mode = true;
    } else if (key == "min_n") {
      emb.min_n = parse_int();
    } else if (key == "max_n") {
      emb.max_n = parse_int();
    } else {
      bad("unknown header key");
    }
  }
  if (!have_dim || !have_mode || emb.dim < 1)
    bad("header needs dim>=1 and mode");
  emb.vectors.resize(vocab.size(), emb.dim);
  Eigen::Index row = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (TrimWhitespace(lines[i]).empty())
      continue;
    const auto fields = SplitWhitespace(lines[i]);
    if (row >= emb.vectors.rows())
      bad("more rows than vocabulary entries");
    if (fields.size() != static_cast<size_t>(emb.dim) + 1)
      bad("line " + std::to_string(i + 1) + ": expected " +
          std::to_string(emb.dim) + " values");
    if (fields[0] != vocab.MnemonicOf(static_cast<int32_t>(row)))
      bad("line " + std::to_string(i + 1) + ": mnemonic '" +
          std::string(fields[0]) + "' does not match the vocabulary");
    for (int c = 0; c < emb.dim; ++c) {
      const std::string_view f = fields[static_cast<size_t>(c) + 1];
      double x = 0;
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(x))
        bad("line " + std::to_string(i + 1) + ": bad value");
      emb.vectors(row, c) = x;
    }
    ++row;
  }
  if (row != emb.vectors.rows())
    bad("fewer rows than vocabulary entries");
  return emb;
}

}  // namespace bcfp
