#pragma once

#include "presstok/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace presstok::nn {

// A trainable matrix with its gradient and Adam state.
struct Param {
  std::string name;
  MatrixXf w, g, m, v;

  void init(const std::string& n, int rows, int cols, Rng& rng, float stddev);
  void init_zero(const std::string& n, int rows, int cols);
  void zero_grad() { g.setZero(); }
};

// Plain Adam over a set of registered parameters.
class Adam {
 public:
  explicit Adam(float lr = 1e-4f, float beta1 = 0.9f, float beta2 = 0.999f,
                float eps = 1e-8f)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void add(Param* p) { params_.push_back(p); }
  void add_all(const std::vector<Param*>& ps) {
    for (auto* p : ps) params_.push_back(p);
  }
  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  void step();

 private:
  std::vector<Param*> params_;
  float lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// y = x W^T + b, x is (batch x in), W is (out x in).
struct Linear {
  Param W, b;

  void init(const std::string& name, int in, int out, Rng& rng, float stddev = -1.0f);
  std::vector<Param*> params() { return {&W, &b}; }

  MatrixXf forward(const MatrixXf& x) const { return (x * W.w.transpose()).rowwise() + b.w.row(0); }
  // dy is (batch x out); accumulates into W.g / b.g and returns dx.
  MatrixXf backward(const MatrixXf& x, const MatrixXf& dy);
};

inline MatrixXf relu(const MatrixXf& x) { return x.cwiseMax(0.0f); }
inline MatrixXf relu_backward(const MatrixXf& x, const MatrixXf& dy) {
  return (x.array() > 0.0f).cast<float>() * dy.array();
}

// Concatenates each group of `group` consecutive rows into one row.
MatrixXf group_rows(const MatrixXf& x, int group);
// Inverse of group_rows.
MatrixXf ungroup_rows(const MatrixXf& x, int group);

// Row-wise softmax cross-entropy. targets[i] < 0 means "ignore row i".
// Returns mean NLL over counted rows; fills dlogits (scaled by 1/count).
double softmax_cross_entropy(const MatrixXf& logits, const std::vector<int>& targets,
                             MatrixXf* dlogits);

// Row-wise log-softmax of one row, returned densely.
VectorXf log_softmax_row(const Eigen::RowVectorXf& logits);

// The shared plateau/early-stop schedule (defaults from the run config).
struct TrainSchedule {
  int batch_size = 32;
  float learning_rate = 1e-4f;
  int max_epochs = 500;
  int plateau_epochs = 15;   // halve lr after this many stagnant epochs
  int early_stop_epochs = 30;
  bool verbose = false;
};

// Drives epochs with plateau-halving and early stopping. run_epoch must
// return the epoch's validation loss. Returns the per-epoch loss curve.
std::vector<double> run_training(const TrainSchedule& sched, Adam& opt,
                                 const std::function<double(int epoch)>& run_epoch);

}  // namespace presstok::nn
