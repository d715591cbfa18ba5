#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "deepck/error.hpp"
#include "deepck/lm/vocabulary.hpp"

namespace deepck::lm {

/// Log-probabilities over the whole vocabulary for the next position.
struct NextTokenDistribution {
  std::vector<double> logprobs;

  std::size_t size() const { return logprobs.size(); }

  double total_mass() const {
    double s = 0.0;
    for (double lp : logprobs) s += std::exp(lp);
    return s;
  }
};

/// 1-based rank of `token` in `dist`; ties are broken by ascending token id.
inline std::size_t token_rank(const NextTokenDistribution& dist, TokenId token) {
  const auto t = static_cast<std::size_t>(token);
  if (t >= dist.size()) throw InvalidArgument("token id outside distribution");
  const double target = dist.logprobs[t];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    const double lp = dist.logprobs[j];
    if (lp > target || (lp == target && j < t)) ++rank;
  }
  return rank;
}

/// How a backend may be shared across worker threads.
enum class Sharing { concurrent_reads, clone_per_worker };

struct BackendDescriptor {
  std::string name;
  std::size_t vocab_size = 0;
  bool supports_scoring = false;
  bool supports_encoding = false;
  bool supports_training = false;
  std::size_t context_window = 1024;
  std::size_t hidden_dim = 0;
  Sharing sharing = Sharing::concurrent_reads;
  // Sequence start is implicit (an empty prefix) for table backends, so it is optional.
  std::optional<TokenId> bos;
  std::optional<TokenId> cls;
  std::optional<TokenId> sep;
  std::optional<TokenId> unk;
  std::optional<TokenId> end_of_term;

  void validate() const {
    if (vocab_size == 0) throw InvalidArgument("backend vocabulary is empty");
    std::set<TokenId> seen;
    for (const auto& t : {bos, cls, sep, unk, end_of_term}) {
      if (!t) continue;
      if (*t < 0 || static_cast<std::size_t>(*t) >= vocab_size)
        throw InvalidArgument("special token id out of range in backend '" + name + "'");
      if (!seen.insert(*t).second)
        throw InvalidArgument("special token ids collide in backend '" + name + "'");
    }
  }
};

/// Common surface of autoregressive scorers and bidirectional encoders.
/// Capabilities a backend lacks raise CapabilityError.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;
  virtual TokenSequence tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  /// Distribution of the token following `prefix`; an empty prefix conditions on sequence start.
  virtual NextTokenDistribution next_token_logprobs(const TokenSequence& prefix) const {
    (void)prefix;
    throw CapabilityError("backend '" + descriptor().name + "' does not support scoring");
  }

  /// One row per token, descriptor().hidden_dim columns.
  virtual Eigen::MatrixXd encode(const TokenSequence& sequence) const {
    (void)sequence;
    throw CapabilityError("backend '" + descriptor().name + "' does not support encoding");
  }

 protected:
  void check_window(std::size_t length) const {
    if (length > descriptor().context_window)
      throw ContextOverflow("sequence of " + std::to_string(length) +
                            " tokens exceeds context window of " +
                            std::to_string(descriptor().context_window));
  }
};

/// Scorer that can be fine-tuned with a position-masked next-token NLL.
class TrainableScorer : public Backend {
 public:
  /// Adds gradients of -sum log P(x_l | x_<l) over positions with target_mask[l] set.
  /// Position 0 is conditioned on sequence start. Returns the summed NLL.
  virtual double accumulate_masked_nll(const TokenSequence& sequence,
                                       std::span<const bool> target_mask) = 0;
  /// Applies accumulated gradients scaled by `learning_rate`, then clears them.
  virtual void apply_gradients(double learning_rate) = 0;
};

inline void require_scoring(const Backend& b) {
  if (!b.descriptor().supports_scoring)
    throw CapabilityError("backend '" + b.descriptor().name + "' does not support scoring");
}

inline void require_encoding(const Backend& b) {
  if (!b.descriptor().supports_encoding)
    throw CapabilityError("backend '" + b.descriptor().name + "' does not support encoding");
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  if (!std::isfinite(mx)) throw InvalidArgument("distribution row has no finite logit");
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace deepck::lm
