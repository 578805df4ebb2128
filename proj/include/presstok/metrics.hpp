#pragma once

#include "presstok/common.hpp"

#include <map>
#include <optional>
#include <string>

namespace presstok::evalkit {

// N x d feature matrix with a source tag.
struct FeatureSet {
  MatrixXf vectors;  // one feature per row
  std::string source;  // "real" or "generated"

  int count() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

struct EvalReport {
  std::optional<double> fid;
  std::optional<double> r_precision_1;
  std::optional<double> r_precision_5;
  std::optional<double> r_squared;
  std::optional<double> binarized_r_squared;
  std::optional<double> cosine_similarity;
  std::optional<double> macro_f1;
  std::map<std::string, std::string> metadata;  // seeds, config hash, ...

  std::string to_text() const;
};

// Frechet distance between Gaussian fits of the two feature sets:
//   |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2})
// The matrix square root goes through a symmetric eigen-decomposition of
// S_r^{1/2} S_g S_r^{1/2}; small negative eigenvalues are clamped to 0.
double fid(const FeatureSet& real, const FeatureSet& gen);

// For each query i, rank positives.row(i) among {itself + pool-1 distractors
// drawn from other rows of positives} by cosine similarity against
// queries.row(i); returns the fraction ranked in the top k.
double r_precision(const FeatureSet& queries, const FeatureSet& positives,
                   int pool_size, int k, uint64_t seed);

// Pooled over all cells, SS_tot about the target mean.
double r_squared(const PressureDynamics& pred, const PressureDynamics& target);
double r_squared_flat(const MatrixXf& pred, const MatrixXf& target);

// Binarize both maps at `threshold` (strictly greater), then r_squared.
double binarized_r_squared(const PressureDynamics& pred, const PressureDynamics& target,
                           double threshold);

double cosine_similarity(const VectorXf& a, const VectorXf& b);

// Unweighted mean of per-class F1 over the declared classes that occur in
// truths or predictions; classes with undefined precision or recall score 0.
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truths,
                const std::vector<int>& classes);

}  // namespace presstok::evalkit
