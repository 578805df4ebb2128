#pragma once

#include "presstok/textenc.hpp"
#include "presstok/transformer.hpp"

namespace presstok::p2t {

struct LmConfig {
  int dim = 96;
  int layers = 3;
  int heads = 4;
  int max_seq = 96;
};

// Small decoder-only language model trained on corpus text plus the
// classification-prompt templates, then frozen. All inference is
// deterministic (greedy) and never mutates weights.
class FrozenLM {
 public:
  const text::Vocab& vocab() const { return vocab_; }
  const nn::Transformer& transformer() const { return tf_; }
  int dim() const { return tf_.config().dim; }
  int max_seq() const { return tf_.config().max_seq; }
  uint64_t weight_hash() const { return tf_.weight_hash(); }

  // Logits for a mixed id/external-embedding sequence.
  MatrixXf forward(const std::vector<int>& ids, const MatrixXf* ext,
                   nn::Transformer::Cache* cache) const {
    return tf_.forward(ids, ext, cache);
  }
  // Input-gradient pass; parameters are never updated through this.
  void backward_inputs(const std::vector<int>& ids, const MatrixXf* ext,
                       const nn::Transformer::Cache& cache, const MatrixXf& dlogits,
                       MatrixXf* d_ext) const {
    const_cast<nn::Transformer&>(tf_).backward(ids, ext, cache, dlogits, false, d_ext);
  }

  // Sum of log p(continuation | prefix) under teacher forcing.
  double continuation_logprob(const std::vector<int>& prefix,
                              const std::vector<int>& continuation) const;

  // Greedy continuation until <eos> or max_new tokens.
  std::vector<int> greedy_continue(const std::vector<int>& prefix, int max_new) const;

  // Mean token perplexity of "<bos> text <eos>" sequences.
  double perplexity(const std::vector<std::string>& texts) const;

  void save(const std::string& path, const std::string& config_hash, uint64_t seed) const;
  static FrozenLM load_file(const std::string& path);

 private:
  friend FrozenLM pretrain_lm(const std::vector<std::string>&, const std::vector<std::string>&,
                              const std::vector<std::string>&, const LmConfig&,
                              const nn::TrainSchedule&, uint64_t);
  text::Vocab vocab_;
  nn::Transformer tf_;
};

// Builds the vocabulary over all given text, trains next-token prediction
// on train_texts + aux_texts (prompt instances), early-stops on val_texts
// perplexity, then freezes.
FrozenLM pretrain_lm(const std::vector<std::string>& train_texts,
                     const std::vector<std::string>& aux_texts,
                     const std::vector<std::string>& val_texts, const LmConfig& cfg,
                     const nn::TrainSchedule& sched, uint64_t seed);

// The prompt-engineered classification format.
std::string classification_prompt(const std::string& description,
                                  const std::vector<std::string>& labels);

}  // namespace presstok::p2t
