#pragma once

#include "presstok/codec.hpp"
#include "presstok/textenc.hpp"
#include "presstok/transformer.hpp"

namespace presstok::t2p {

enum class Sampling : int { kGreedy = 0, kTopK = 1, kTemperature = 2 };

struct GeneratorConfig {
  int codebook_size = 128;  // K; AR vocabulary is K + 1 (level-0 plus V_x)
  int dim = 96;
  int layers = 2;
  int heads = 4;
  int max_len = 32;          // generation cap in content tokens
  float masking_tau = 0.1f;
  Sampling sampling = Sampling::kGreedy;
  int top_k = 5;
  float temperature = 1.0f;
  int text_dim = 64;  // condition embedding width
};

// Replaces exactly round(tau * len) positions (uniform, no replacement)
// with uniform random indices in [0, codebook_size). The end token is
// never part of `tokens` here, so it cannot be corrupted.
std::vector<int> apply_random_masking(const std::vector<int>& tokens, float tau,
                                      int codebook_size, uint64_t seed);

// Mean next-index NLL, one logit row per target (end token included).
double ar_nll(const MatrixXf& logits, const std::vector<int>& targets);

// Text-conditioned causal generator over level-0 pressure tokens.
class Generator {
 public:
  void init(const GeneratorConfig& cfg, Rng& rng);
  const GeneratorConfig& config() const { return cfg_; }
  int end_token() const { return cfg_.codebook_size; }

  struct GenerateResult {
    std::vector<int> tokens;  // content tokens, end token excluded
    bool truncated = false;
  };
  GenerateResult generate(const VectorXf& condition, uint64_t seed) const;
  GenerateResult generate(const VectorXf& condition, uint64_t seed, Sampling sampling,
                          int top_k, float temperature) const;

  codec::TokenSequence to_token_sequence(const GenerateResult& g) const;

  // Teacher-forced NLL of one (condition, token) pair, no masking.
  double sequence_nll(const VectorXf& condition, const std::vector<int>& tokens) const;

  // One teacher-forced training step over a batch of pairs; returns mean loss.
  double train_step(const std::vector<VectorXf>& conditions,
                    const std::vector<std::vector<int>>& tokens, float tau, nn::Adam& opt,
                    Rng& rng);

  std::vector<nn::Param*> params();
  void save(io::Checkpoint& ck) const;
  void load(const io::Checkpoint& ck);

 private:
  MatrixXf forward_ids(const std::vector<int>& content, const VectorXf& condition,
                       nn::Transformer::Cache* cache) const;

  GeneratorConfig cfg_;
  nn::Transformer tf_;
  nn::Linear cond_proj_;  // text_dim -> dim
};

// Per-sample training views assembled from corpus + codec.
struct TokenizedSample {
  std::vector<int> level0;   // content tokens
  VectorXf pressure_embed;   // mean quantized sum, codec latent dim
  std::string text;
  int label = 0;
  corpus::Split split = corpus::Split::kTrain;
};

std::vector<TokenizedSample> tokenize_corpus(const std::vector<corpus::PairedSample>& samples,
                                             const std::string& corpus_dir,
                                             const codec::PressureCodec& codec);

// Contrastively pretrains the text encoder on train-split pairs, freezes
// it, then AR-trains the generator with random masking. Deterministic for
// a fixed seed.
struct TrainedT2P {
  text::TextEncoder textenc;
  Generator generator;
  std::vector<double> contrastive_curve;
  std::vector<double> ar_curve;  // validation NLL per epoch
};

TrainedT2P train_generator(const std::vector<TokenizedSample>& samples,
                           const GeneratorConfig& cfg, const text::TextEncoderConfig& tcfg,
                           const nn::TrainSchedule& sched, uint64_t seed);

// encode_text -> generate -> decode (levels above 0 contribute zero).
PressureDynamics text_to_pressure(const std::string& prompt, const text::TextEncoder& textenc,
                                  const Generator& generator, const codec::PressureCodec& codec,
                                  uint64_t seed);

void save_t2p(const std::string& path, const text::TextEncoder& textenc, const Generator& gen,
              const std::string& config_hash, uint64_t seed);
void load_t2p(const std::string& path, text::TextEncoder* textenc, Generator* gen);

}  // namespace presstok::t2p
