#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>

namespace copho {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Unordered node pairs (u < v) are stored once, in row-major upper-triangle
/// order: (0,1), (0,2), ..., (0,n-1), (1,2), ...
inline int pair_count(int n) { return n * (n - 1) / 2; }

inline int pair_index(int n, int u, int v) {
  if (u == v || u < 0 || v < 0 || u >= n || v >= n)
    throw std::out_of_range("pair_index: invalid node pair");
  if (u > v) std::swap(u, v);
  return u * n - u * (u + 1) / 2 + (v - u - 1);
}

inline std::pair<int, int> pair_nodes(int n, int idx) {
  if (idx < 0 || idx >= pair_count(n))
    throw std::out_of_range("pair_nodes: index out of range");
  int u = 0;
  int row = n - 1;  // pairs in row u
  while (idx >= row) {
    idx -= row;
    ++u;
    --row;
  }
  return {u, u + 1 + idx};
}

}  // namespace copho
