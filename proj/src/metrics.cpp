#include "presstok/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace presstok::evalkit {

namespace {

void append_metric(std::ostringstream& out, const char* name, const std::optional<double>& v) {
  if (v) out << name << " = " << *v << "\n";
}

// Symmetric PSD square root with a small negative-eigenvalue clamp.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev(i) = ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out.precision(10);
  for (const auto& [k, v] : metadata) out << "# " << k << " = " << v << "\n";
  append_metric(out, "fid", fid);
  append_metric(out, "r_precision_1", r_precision_1);
  append_metric(out, "r_precision_5", r_precision_5);
  append_metric(out, "r_squared", r_squared);
  append_metric(out, "binarized_r_squared", binarized_r_squared);
  append_metric(out, "cosine_similarity", cosine_similarity);
  append_metric(out, "macro_f1", macro_f1);
  return out.str();
}

double fid(const FeatureSet& real, const FeatureSet& gen) {
  if (real.dim() != gen.dim()) throw std::runtime_error("fid: feature dimension mismatch");
  if (real.count() < 2 || gen.count() < 2) {
    throw std::runtime_error("fid: need at least 2 vectors per set");
  }

  const Eigen::MatrixXd xr = real.vectors.cast<double>();
  const Eigen::MatrixXd xg = gen.vectors.cast<double>();
  const Eigen::VectorXd mu_r = xr.colwise().mean();
  const Eigen::VectorXd mu_g = xg.colwise().mean();

  const Eigen::MatrixXd cr = xr.rowwise() - mu_r.transpose();
  const Eigen::MatrixXd cg = xg.rowwise() - mu_g.transpose();
  const Eigen::MatrixXd sig_r = cr.transpose() * cr / static_cast<double>(xr.rows() - 1);
  const Eigen::MatrixXd sig_g = cg.transpose() * cg / static_cast<double>(xg.rows() - 1);
  if (!sig_r.allFinite() || !sig_g.allFinite()) {
    throw std::runtime_error("fid: non-finite covariance");
  }

  // Tr((S_r S_g)^{1/2}) via the symmetric product S_r^{1/2} S_g S_r^{1/2},
  // which shares its spectrum with S_r S_g but is symmetric PSD.
  const Eigen::MatrixXd sr_half = psd_sqrt(sig_r);
  const Eigen::MatrixXd inner = sr_half * sig_g * sr_half;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()(i);
    if (ev > 0) tr_sqrt += std::sqrt(ev);  // negatives from round-off clamp to 0
  }

  double d2 = (mu_r - mu_g).squaredNorm() + sig_r.trace() + sig_g.trace() - 2.0 * tr_sqrt;
  return std::max(d2, 0.0);
}

double r_precision(const FeatureSet& queries, const FeatureSet& positives,
                   int pool_size, int k, uint64_t seed) {
  const int n = queries.count();
  if (n != positives.count()) throw std::runtime_error("r_precision: sets not aligned");
  if (queries.dim() != positives.dim()) throw std::runtime_error("r_precision: dim mismatch");
  if (n < pool_size) {
    throw std::runtime_error("r_precision: pool larger than available candidates");
  }
  if (k < 1) throw std::runtime_error("r_precision: k must be >= 1");

  Rng rng(seed);
  auto cosine = [&](int qi, int pi) {
    VectorXf a = queries.vectors.row(qi);
    VectorXf b = positives.vectors.row(pi);
    double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return -2.0;  // rank zero vectors last
    return static_cast<double>(a.dot(b)) / (na * nb);
  };

  int hits = 0;
  for (int q = 0; q < n; ++q) {
    double pos_score = cosine(q, q);
    // pool = the true positive plus pool_size-1 distinct distractors.
    int better = 0;
    int picked = 0;
    std::vector<int> order = rng.sample_without_replacement(n, n);
    for (int idx : order) {
      if (idx == q) continue;
      if (picked >= pool_size - 1) break;
      ++picked;
      if (cosine(q, idx) > pos_score) ++better;
    }
    if (better + 1 <= k) ++hits;
  }
  return static_cast<double>(hits) / n;
}

double r_squared_flat(const MatrixXf& pred, const MatrixXf& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::runtime_error("r_squared: shape mismatch");
  }
  const double mean = target.cast<double>().mean();
  double ss_res = 0.0, ss_tot = 0.0;
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      double d = static_cast<double>(pred(r, c)) - target(r, c);
      double t = static_cast<double>(target(r, c)) - mean;
      ss_res += d * d;
      ss_tot += t * t;
    }
  }
  if (ss_tot == 0.0) throw std::runtime_error("degenerate target (zero variance)");
  return 1.0 - ss_res / ss_tot;
}

double r_squared(const PressureDynamics& pred, const PressureDynamics& target) {
  if (pred.rows != target.rows || pred.cols != target.cols) {
    throw std::runtime_error("r_squared: grid mismatch");
  }
  return r_squared_flat(pred.frames, target.frames);
}

double binarized_r_squared(const PressureDynamics& pred, const PressureDynamics& target,
                           double threshold) {
  auto binarize = [&](const PressureDynamics& d) {
    MatrixXf b(d.frames.rows(), d.frames.cols());
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.cols(); ++c) {
        b(r, c) = d.frames(r, c) > threshold ? 1.0f : 0.0f;
      }
    }
    return b;
  };
  if (pred.rows != target.rows || pred.cols != target.cols) {
    throw std::runtime_error("binarized_r_squared: grid mismatch");
  }
  return r_squared_flat(binarize(pred), binarize(target));
}

double cosine_similarity(const VectorXf& a, const VectorXf& b) {
  if (a.size() != b.size()) throw std::runtime_error("cosine_similarity: dim mismatch");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw std::runtime_error("cosine_similarity: zero vector");
  return static_cast<double>(a.dot(b)) / (na * nb);
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truths,
                const std::vector<int>& classes) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw std::runtime_error("macro_f1: empty or mismatched inputs");
  }
  double sum = 0.0;
  int counted = 0;
  for (int cls : classes) {
    int tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
      const bool p = predictions[i] == cls;
      const bool t = truths[i] == cls;
      if (p && t) ++tp;
      else if (p) ++fp;
      else if (t) ++fn;
    }
    if (tp + fp + fn == 0) continue;  // class absent from both sides
    ++counted;
    if (tp > 0) {
      double prec = static_cast<double>(tp) / (tp + fp);
      double rec = static_cast<double>(tp) / (tp + fn);
      sum += 2.0 * prec * rec / (prec + rec);
    }
    // tp == 0 with fp or fn present contributes 0.
  }
  if (counted == 0) throw std::runtime_error("macro_f1: no declared class present");
  return sum / counted;
}

}  // namespace presstok::evalkit
