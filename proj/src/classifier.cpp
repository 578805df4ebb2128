#include "presstok/classifier.hpp"

#include <algorithm>
#include <set>

namespace presstok::evalkit {

void WindowClassifier::init(const ClassifierConfig& cfg, Rng& rng) {
  cfg_ = cfg;
  const int pr = (cfg.rows + 3) / 4;
  const int pc = (cfg.cols + 1) / 2;
  pooled_cells_ = pr * pc;
  frame_fc_.init("clf.frame", pooled_cells_, cfg.hidden, rng);
  head_.init("clf.head", cfg.chunks * cfg.hidden, cfg.classes, rng);
}

MatrixXf WindowClassifier::pool_frames(const MatrixXf& window) const {
  const int pr = (cfg_.rows + 3) / 4;
  const int pc = (cfg_.cols + 1) / 2;
  MatrixXf out = MatrixXf::Zero(window.rows(), pr * pc);
  for (int i = 0; i < cfg_.rows; ++i) {
    for (int j = 0; j < cfg_.cols; ++j) {
      out.col((i / 4) * pc + (j / 2)) += window.col(i * cfg_.cols + j);
    }
  }
  return out / 8.0f;
}

MatrixXf WindowClassifier::features(const MatrixXf& window) const {
  MatrixXf h = nn::relu(frame_fc_.forward(pool_frames(window)));  // frames x hidden
  MatrixXf out(1, cfg_.chunks * cfg_.hidden);
  const int f = static_cast<int>(h.rows());
  for (int c = 0; c < cfg_.chunks; ++c) {
    const int a = c * f / cfg_.chunks;
    const int b = std::max(a + 1, (c + 1) * f / cfg_.chunks);
    out.block(0, c * cfg_.hidden, 1, cfg_.hidden) =
        h.middleRows(a, b - a).colwise().mean();
  }
  return out;
}

std::vector<double> WindowClassifier::train(const std::vector<MatrixXf>& windows,
                                            const std::vector<int>& labels,
                                            const nn::TrainSchedule& sched, uint64_t seed) {
  if (windows.empty() || windows.size() != labels.size()) {
    throw std::runtime_error("classifier: bad training set");
  }
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw std::runtime_error("classifier: single-class training set");
  }

  Rng rng(seed);
  nn::Adam opt(sched.learning_rate);
  opt.add_all(frame_fc_.params());
  opt.add_all(head_.params());

  std::vector<int> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  auto epoch_fn = [&](int) -> double {
    rng.shuffle(order);
    double total = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sched.batch_size)) {
      const size_t b = std::min<size_t>(sched.batch_size, order.size() - start);
      opt.zero_grad();
      double loss = 0.0;
      for (size_t i = start; i < start + b; ++i) {
        const int idx = order[i];
        const MatrixXf& win = windows[static_cast<size_t>(idx)];
        // forward with caches for backprop
        MatrixXf pooled = pool_frames(win);
        MatrixXf pre = frame_fc_.forward(pooled);
        MatrixXf h = nn::relu(pre);
        const int f = static_cast<int>(h.rows());
        MatrixXf feat(1, cfg_.chunks * cfg_.hidden);
        for (int c = 0; c < cfg_.chunks; ++c) {
          const int a = c * f / cfg_.chunks;
          const int e = std::max(a + 1, (c + 1) * f / cfg_.chunks);
          feat.block(0, c * cfg_.hidden, 1, cfg_.hidden) = h.middleRows(a, e - a).colwise().mean();
        }
        MatrixXf logits = head_.forward(feat);
        MatrixXf dlogits;
        loss += nn::softmax_cross_entropy(logits, {labels[static_cast<size_t>(idx)]}, &dlogits);
        dlogits /= static_cast<float>(b);
        MatrixXf dfeat = head_.backward(feat, dlogits);
        MatrixXf dh = MatrixXf::Zero(f, cfg_.hidden);
        for (int c = 0; c < cfg_.chunks; ++c) {
          const int a = c * f / cfg_.chunks;
          const int e = std::max(a + 1, (c + 1) * f / cfg_.chunks);
          for (int r = a; r < e; ++r) {
            dh.row(r) += dfeat.block(0, c * cfg_.hidden, 1, cfg_.hidden) /
                         static_cast<float>(e - a);
          }
        }
        frame_fc_.backward(pooled, nn::relu_backward(pre, dh));
      }
      opt.step();
      total += loss / static_cast<double>(b);
      ++batches;
    }
    return total / std::max(batches, 1);
  };

  return nn::run_training(sched, opt, epoch_fn);
}

int WindowClassifier::predict(const MatrixXf& window) const {
  MatrixXf logits = head_.forward(features(window));
  int best = 0;
  for (int i = 1; i < logits.cols(); ++i) {
    if (logits(0, i) > logits(0, best)) best = i;
  }
  return best;
}

}  // namespace presstok::evalkit
