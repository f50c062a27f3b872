#pragma once

#include "rigidgraph/types.hpp"

#include <functional>
#include <vector>

namespace rigidgraph {

// Reverse-mode autodiff over dense matrices. Values are computed
// eagerly; each op records a closure that scatters the output adjoint
// to its parents. Node ids are indices into the tape.
class Tape {
 public:
  int leaf(MatX value);
  const MatX& val(int id) const { return nodes_.at(id).value; }
  const MatX& grad(int id) const { return nodes_.at(id).grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  int add(int a, int b);
  int sub(int a, int b);
  int scale(int a, double s);
  int matmul(int a, int b);
  int transpose(int a);
  int relu(int a);
  int concat_cols(const std::vector<int>& ids);
  int concat_rows(const std::vector<int>& ids);
  int gather_rows(int a, std::vector<int> idx);
  // out[idx[k]] += a.row(k); duplicate indices accumulate.
  int scatter_rows(int a, std::vector<int> idx, int out_rows);
  int add_row(int a, int row);        // broadcast-add a 1 x C row
  int mul_row(int a, int row);        // broadcast-multiply by a 1 x C row
  int mul_col(int a, int col);        // broadcast-multiply by an N x 1 column
  int div_col(int a, int col);        // broadcast-divide by an N x 1 column
  int layer_norm(int a);              // per-row standardization, eps 1e-8
  int row_norm(int a);                // N x C -> N x 1 Euclidean norms
  int sum_all(int a);                 // -> 1 x 1
  int mean_sq(int a);                 // mean of squared entries -> 1 x 1
  int flatten(int a);                 // row-major -> 1 x (r*c)

  // Custom op: the backward closure reads grad(self) and accumulates
  // into parents via add_grad.
  int custom(MatX value, std::function<void(Tape&, int self)> backward);
  void add_grad(int id, const MatX& g);

  // Seeds d(id)/d(id) = 1 (id must be 1 x 1) and sweeps the tape in
  // reverse; afterwards grad(k) holds d val(id) / d val(k).
  void backward(int id);

 private:
  struct Node {
    MatX value;
    MatX grad;
    bool touched = false;
    std::function<void(Tape&, int)> backward;
  };
  std::vector<Node> nodes_;
  int push(MatX value, std::function<void(Tape&, int)> backward);
};

}  // namespace rigidgraph
