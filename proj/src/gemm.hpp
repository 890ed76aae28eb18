#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace azarnet::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// C[m,n] (+)= op(A) * op(B) over contiguous row-major buffers. op(A) is
// [m,k]; A is stored [k,m] when trans_a. Same for B.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MatMap<T> cm(c, M, N);
  if (!accumulate) cm.setZero();
  if (!trans_a && !trans_b) {
    cm.noalias() += ConstMatMap<T>(a, M, K) * ConstMatMap<T>(b, K, N);
  } else if (trans_a && !trans_b) {
    cm.noalias() += ConstMatMap<T>(a, K, M).transpose() * ConstMatMap<T>(b, K, N);
  } else if (!trans_a && trans_b) {
    cm.noalias() += ConstMatMap<T>(a, M, K) * ConstMatMap<T>(b, N, K).transpose();
  } else {
    cm.noalias() +=
        ConstMatMap<T>(a, K, M).transpose() * ConstMatMap<T>(b, N, K).transpose();
  }
}

}  // namespace azarnet::detail
