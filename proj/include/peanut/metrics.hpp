#pragma once

#include "peanut/types.hpp"

#include <span>
#include <vector>

namespace peanut {

/// Percent of matching entries.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Unweighted mean of per-class F1 over all `num_classes` classes, in percent.
/// A class with no true positives contributes an F1 of zero.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes);

double rmse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

/// Row-wise argmax; ties go to the lowest column.
std::vector<int> argmax_rows(const Matrix& scores);

/// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace peanut
