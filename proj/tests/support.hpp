#pragma once

#include "dac/features.hpp"

#include <string>
#include <vector>

namespace dac::testing {

/// Labeled matrix with synthetic tract ids 53001000001, 53001000002, ...
inline features::FeatureMatrix make_matrix(const Matrix& X, const std::vector<int>& y) {
  features::FeatureMatrix m;
  m.values = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) m.names.push_back("x" + std::to_string(j));
  std::vector<bool> labels;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    m.tracts.push_back(TractId::parse(std::to_string(53001000001LL + i)));
    if (!y.empty()) labels.push_back(y[static_cast<std::size_t>(i)] != 0);
  }
  if (!y.empty()) m.labels = labels;
  m.weights = Vector::Ones(X.rows());
  return m;
}

inline Vector as_vector(const std::vector<int>& y) {
  Vector v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

}  // namespace dac::testing
