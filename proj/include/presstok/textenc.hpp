#pragma once

#include "presstok/nn.hpp"
#include "presstok/tensorio.hpp"

#include <string>
#include <vector>

namespace presstok::text {

// Word-level vocabulary shared by the text encoder and the language model.
// Tokenization lowercases, splits on whitespace/hyphens, and keeps
// . , : ( ) as single tokens. Digits 0-9 are always present.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  static std::vector<std::string> tokenize(const std::string& txt);

  void build(const std::vector<std::string>& texts);
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::string& txt) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(io::Checkpoint& ck, const std::string& key) const;
  void load(const io::Checkpoint& ck, const std::string& key);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

struct TextEncoderConfig {
  int embed_dim = 64;
  int out_dim = 64;
  float temperature = 0.07f;
};

// CLIP-style stand-in: a word-embedding mean-pool text tower and a linear
// pressure tower, trained contrastively on corpus pairs and frozen
// afterwards. Both towers emit unit-normalized vectors.
class TextEncoder {
 public:
  void init(const Vocab& vocab, int pressure_dim, const TextEncoderConfig& cfg, Rng& rng);

  const Vocab& vocab() const { return vocab_; }
  int out_dim() const { return cfg_.out_dim; }

  // Unit-normalized embedding; errors on an empty prompt.
  VectorXf encode_text(const std::string& prompt) const;
  VectorXf embed_pressure(const VectorXf& feature) const;

  // Symmetric InfoNCE over (text, pressure-feature) pairs. Returns the
  // per-epoch validation loss curve.
  std::vector<double> train_contrastive(const std::vector<std::string>& texts,
                                        const MatrixXf& features,
                                        const std::vector<int>& val_indices,
                                        const nn::TrainSchedule& sched, uint64_t seed);

  void save(io::Checkpoint& ck, const std::string& prefix) const;
  void load(const io::Checkpoint& ck, const std::string& prefix);

 private:
  VectorXf pool_text(const std::vector<int>& ids) const;

  Vocab vocab_;
  TextEncoderConfig cfg_;
  int pressure_dim_ = 0;
  nn::Param emb_;        // vocab x embed_dim
  nn::Linear text_proj_;  // embed_dim -> out_dim
  nn::Linear press_proj_; // pressure_dim -> out_dim
};

}  // namespace presstok::text
