#include "presstok/nn.hpp"

#include <cmath>
#include <limits>

namespace presstok::nn {

void Param::init(const std::string& n, int rows, int cols, Rng& rng, float stddev) {
  name = n;
  w.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) w(r, c) = rng.gaussian(stddev);
  }
  g.setZero(rows, cols);
  m.setZero(rows, cols);
  v.setZero(rows, cols);
}

void Param::init_zero(const std::string& n, int rows, int cols) {
  name = n;
  w.setZero(rows, cols);
  g.setZero(rows, cols);
  m.setZero(rows, cols);
  v.setZero(rows, cols);
}

void Adam::step() {
  ++t_;
  const float correct1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float correct2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (auto* p : params_) {
    p->m = beta1_ * p->m + (1.0f - beta1_) * p->g;
    p->v = beta2_ * p->v + (1.0f - beta2_) * p->g.cwiseProduct(p->g);
    p->w.array() -= lr_ * (p->m.array() / correct1) /
                    ((p->v.array() / correct2).sqrt() + eps_);
  }
}

void Linear::init(const std::string& name, int in, int out, Rng& rng, float stddev) {
  if (stddev <= 0.0f) stddev = 1.0f / std::sqrt(static_cast<float>(in));
  W.init(name + ".W", out, in, rng, stddev);
  b.init_zero(name + ".b", 1, out);
}

MatrixXf Linear::backward(const MatrixXf& x, const MatrixXf& dy) {
  W.g.noalias() += dy.transpose() * x;
  b.g.row(0) += dy.colwise().sum();
  return dy * W.w;
}

MatrixXf group_rows(const MatrixXf& x, int group) {
  const int rows = static_cast<int>(x.rows());
  const int cols = static_cast<int>(x.cols());
  if (rows % group != 0) throw std::runtime_error("group_rows: rows not divisible");
  MatrixXf out(rows / group, cols * group);
  for (int r = 0; r < rows / group; ++r) {
    for (int k = 0; k < group; ++k) {
      out.block(r, k * cols, 1, cols) = x.row(r * group + k);
    }
  }
  return out;
}

MatrixXf ungroup_rows(const MatrixXf& x, int group) {
  const int rows = static_cast<int>(x.rows());
  const int cols = static_cast<int>(x.cols());
  if (cols % group != 0) throw std::runtime_error("ungroup_rows: cols not divisible");
  const int out_cols = cols / group;
  MatrixXf out(rows * group, out_cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < group; ++k) {
      out.row(r * group + k) = x.block(r, k * out_cols, 1, out_cols);
    }
  }
  return out;
}

double softmax_cross_entropy(const MatrixXf& logits, const std::vector<int>& targets,
                             MatrixXf* dlogits) {
  if (static_cast<int>(targets.size()) != logits.rows()) {
    throw std::runtime_error("cross entropy: one logit row per target required");
  }
  int count = 0;
  for (int t : targets) {
    if (t >= 0) ++count;
  }
  if (count == 0) throw std::runtime_error("cross entropy: no valid targets");

  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<size_t>(r)];
    if (t < 0) continue;
    if (t >= logits.cols()) throw std::runtime_error("cross entropy: target out of range");
    const float mx = logits.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      z += std::exp(static_cast<double>(logits(r, c) - mx));
    }
    const double log_z = std::log(z) + mx;
    total += log_z - logits(r, t);
    if (dlogits) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        double p = std::exp(logits(r, c) - log_z);
        (*dlogits)(r, c) = static_cast<float>(p / count);
      }
      (*dlogits)(r, t) -= 1.0f / count;
    }
  }
  return total / count;
}

VectorXf log_softmax_row(const Eigen::RowVectorXf& logits) {
  const float mx = logits.maxCoeff();
  double z = 0.0;
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    z += std::exp(static_cast<double>(logits(c) - mx));
  }
  const float log_z = static_cast<float>(std::log(z)) + mx;
  VectorXf out(logits.size());
  for (Eigen::Index c = 0; c < logits.size(); ++c) out(c) = logits(c) - log_z;
  return out;
}

std::vector<double> run_training(const TrainSchedule& sched, Adam& opt,
                                 const std::function<double(int epoch)>& run_epoch) {
  std::vector<double> curve;
  double best = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int epoch = 0; epoch < sched.max_epochs; ++epoch) {
    const double val = run_epoch(epoch);
    if (!std::isfinite(val)) {
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    }
    curve.push_back(val);
    if (val < best - 1e-7) {
      best = val;
      stagnant = 0;
    } else {
      ++stagnant;
      if (stagnant > 0 && stagnant % sched.plateau_epochs == 0) {
        opt.set_lr(opt.lr() * 0.5f);
      }
      if (stagnant >= sched.early_stop_epochs) break;
    }
  }
  return curve;
}

}  // namespace presstok::nn
