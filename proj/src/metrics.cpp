#include "peanut/metrics.hpp"

#include <cmath>
#include <string>

namespace peanut {

namespace {

template <typename T>
void require_paired(std::span<const T> pred, std::span<const T> truth) {
  require(!pred.empty() && !truth.empty(), ErrorCode::EmptyInput, "metric on empty input");
  require(pred.size() == truth.size(), ErrorCode::Shape,
          "prediction/target length mismatch: " + std::to_string(pred.size()) + " vs " +
              std::to_string(truth.size()));
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  require_paired(pred, truth);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  require_paired(pred, truth);
  require(num_classes >= 1, ErrorCode::InvalidArgument, "num_classes must be positive");
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i];
    const int t = truth[i];
    require(p >= 0 && p < num_classes && t >= 0 && t < num_classes, ErrorCode::InvalidArgument,
            "label outside [0, num_classes)");
    if (p == t) {
      tp[p] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    if (tp[c] > 0.0) sum += 2.0 * tp[c] / denom;
  }
  return 100.0 * sum / static_cast<double>(num_classes);
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) abs_sum += std::abs(pred[i] - truth[i]);
  return abs_sum / static_cast<double>(pred.size());
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

}  // namespace peanut
