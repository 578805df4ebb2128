#pragma once

#include "presstok/nn.hpp"

namespace presstok::evalkit {

struct ClassifierConfig {
  int rows = 80;
  int cols = 28;
  int frames = 60;
  int classes = 2;
  int hidden = 32;
  int chunks = 3;  // temporal mean-pool segments
};

// Small convolutional window classifier standing in for the 3D-CNN
// baseline: fixed 4x2 spatial pool, per-frame projection, temporal
// chunk means, linear head.
class WindowClassifier {
 public:
  void init(const ClassifierConfig& cfg, Rng& rng);
  const ClassifierConfig& config() const { return cfg_; }

  // windows: each (frames x rows*cols); labels in [0, classes).
  std::vector<double> train(const std::vector<MatrixXf>& windows,
                            const std::vector<int>& labels, const nn::TrainSchedule& sched,
                            uint64_t seed);

  int predict(const MatrixXf& window) const;

 private:
  MatrixXf features(const MatrixXf& window) const;  // 1 x chunks*hidden before head
  MatrixXf pool_frames(const MatrixXf& window) const;

  ClassifierConfig cfg_;
  int pooled_cells_ = 0;
  nn::Linear frame_fc_, head_;
};

}  // namespace presstok::evalkit
