#pragma once

#include <Eigen/Dense>

#include "radiomap/mpnet.hpp"

namespace radiomap::mpnet::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

struct Layer {
  const Tensor* W = nullptr;
  const Tensor* b = nullptr;
};

/// Tensors in declaration order: tables, attenuation layers, radiance layers.
struct Layout {
  const Tensor* tx_table = nullptr;
  const Tensor* rx_table = nullptr;
  std::vector<Layer> att;
  std::vector<Layer> rad;
};

Layout layout_of(const MultipathNet& net);

inline Eigen::Map<const RowMat> weights(const std::vector<double>& p, const Tensor& t) {
  return {p.data() + t.offset, t.rows, t.cols};
}
inline Eigen::Map<const Eigen::VectorXd> bias(const std::vector<double>& p, const Tensor& t) {
  return {p.data() + t.offset, t.rows};
}
inline Eigen::Map<RowMat> weights(std::vector<double>& p, const Tensor& t) { return {p.data() + t.offset, t.rows, t.cols}; }
inline Eigen::Map<Eigen::VectorXd> bias(std::vector<double>& p, const Tensor& t) { return {p.data() + t.offset, t.rows}; }

/// Rounds to float precision; NaN and Inf pass through.
inline double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace radiomap::mpnet::detail
