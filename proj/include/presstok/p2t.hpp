#pragma once

#include "presstok/codec.hpp"
#include "presstok/lm.hpp"

namespace presstok::p2t {

struct ProjectionConfig {
  int hidden = 128;
  int max_text_tokens = 64;
};

// Trainable bridge from summed codebook embeddings into the frozen LM's
// input space, plus the learned Z_begin / Z_end boundary vectors.
class ProjectionHead {
 public:
  void init(int codec_dim, int lm_dim, const ProjectionConfig& cfg, Rng& rng);
  std::vector<nn::Param*> params();

  int lm_dim() const { return lm_dim_; }
  const ProjectionConfig& config() const { return cfg_; }

  // rows of zq (one per content token) -> rows in LM space
  MatrixXf project(const MatrixXf& zq_rows) const;
  // [Z_begin, projected rows..., Z_end]
  MatrixXf aligned(const MatrixXf& zq_rows) const;

  // Backward through aligned(): d_aligned has content rows + 2. Returns
  // nothing; gradients land in the head's params.
  void aligned_backward(const MatrixXf& zq_rows, const MatrixXf& d_aligned);

  void save(io::Checkpoint& ck) const;
  void load(const io::Checkpoint& ck);

 private:
  ProjectionConfig cfg_;
  int codec_dim_ = 0, lm_dim_ = 0;
  nn::Linear l1_, l2_;
  nn::Param z_begin_, z_end_;
};

// Summed codebook embeddings of the content tokens (V_x consumed), wrapped
// with Z_begin / Z_end via the projection head.
MatrixXf project_tokens(const codec::TokenSequence& tokens, const codec::PressureCodec& codec,
                        const ProjectionHead& head);

// Mean next-token NLL over text positions only (targets < 0 are ignored,
// which is how pressure positions are excluded).
double p2t_nll(const MatrixXf& lm_logits, const std::vector<int>& targets);

struct P2TSample {
  std::vector<int> desc_ids;  // ground-truth description tokens (LM vocab)
  MatrixXf zq_rows;           // one row per content token, codec latent dim
};

struct ProjectionTrainResult {
  ProjectionHead head;
  std::vector<double> val_curve;
  uint64_t lm_hash_before = 0;
  uint64_t lm_hash_after = 0;
};

// Minimizes description NLL through the frozen LM; only the projection
// head and the boundary vectors receive gradients.
ProjectionTrainResult train_projection(const std::vector<P2TSample>& train_set,
                                       const std::vector<P2TSample>& val_set,
                                       const FrozenLM& lm, const std::string& query,
                                       int codec_dim, const ProjectionConfig& cfg,
                                       const nn::TrainSchedule& sched, uint64_t seed);

constexpr const char* kDefaultQuery = "Describe the activity.";

// encode -> project -> greedy decode after the query prefix.
std::string describe(const PressureDynamics& dynamics, const std::string& query,
                     const codec::PressureCodec& codec, const ProjectionHead& head,
                     const FrozenLM& lm);

// Scores each candidate label continuation under the classification prompt
// and returns the argmax index (lowest index on ties). When generative is
// set, first tries to parse an integer from a greedy generation and falls
// back to scoring.
int classify_description(const std::string& description, const std::vector<std::string>& labels,
                         const FrozenLM& lm, bool generative = false);

void save_projection(const std::string& path, const ProjectionHead& head,
                     const std::string& config_hash, uint64_t seed, uint64_t lm_hash);
ProjectionHead load_projection(const std::string& path, uint64_t* lm_hash = nullptr);

}  // namespace presstok::p2t
