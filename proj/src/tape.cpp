#include "rigidgraph/tape.hpp"

#include <cmath>

namespace rigidgraph {

int Tape::push(MatX value, std::function<void(Tape&, int)> backward) {
  Node node;
  node.grad = MatX::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::add_grad(int id, const MatX& g) {
  Node& node = nodes_.at(id);
  if (g.rows() != node.grad.rows() || g.cols() != node.grad.cols()) {
    throw InvalidInput("Tape::add_grad: shape mismatch");
  }
  node.grad += g;
  node.touched = true;
}

int Tape::leaf(MatX value) { return push(std::move(value), nullptr); }

int Tape::add(int a, int b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
    throw InvalidInput("Tape::add: shape mismatch");
  }
  return push(val(a) + val(b), [a, b](Tape& t, int self) {
    t.add_grad(a, t.grad(self));
    t.add_grad(b, t.grad(self));
  });
}

int Tape::sub(int a, int b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
    throw InvalidInput("Tape::sub: shape mismatch");
  }
  return push(val(a) - val(b), [a, b](Tape& t, int self) {
    t.add_grad(a, t.grad(self));
    t.add_grad(b, -t.grad(self));
  });
}

int Tape::scale(int a, double s) {
  return push(s * val(a), [a, s](Tape& t, int self) { t.add_grad(a, s * t.grad(self)); });
}

int Tape::matmul(int a, int b) {
  if (val(a).cols() != val(b).rows()) throw InvalidInput("Tape::matmul: shape mismatch");
  return push(val(a) * val(b), [a, b](Tape& t, int self) {
    t.add_grad(a, t.grad(self) * t.val(b).transpose());
    t.add_grad(b, t.val(a).transpose() * t.grad(self));
  });
}

int Tape::transpose(int a) {
  return push(val(a).transpose(),
              [a](Tape& t, int self) { t.add_grad(a, t.grad(self).transpose()); });
}

int Tape::relu(int a) {
  return push(val(a).cwiseMax(0.0), [a](Tape& t, int self) {
    t.add_grad(a, (t.val(a).array() > 0).cast<double>().matrix().cwiseProduct(t.grad(self)));
  });
}

int Tape::concat_cols(const std::vector<int>& ids) {
  if (ids.empty()) throw InvalidInput("Tape::concat_cols: empty");
  const Eigen::Index rows = val(ids[0]).rows();
  Eigen::Index cols = 0;
  for (int id : ids) {
    if (val(id).rows() != rows) throw InvalidInput("Tape::concat_cols: row mismatch");
    cols += val(id).cols();
  }
  MatX out(rows, cols);
  Eigen::Index at = 0;
  for (int id : ids) {
    out.middleCols(at, val(id).cols()) = val(id);
    at += val(id).cols();
  }
  return push(std::move(out), [ids](Tape& t, int self) {
    Eigen::Index at = 0;
    for (int id : ids) {
      t.add_grad(id, t.grad(self).middleCols(at, t.val(id).cols()));
      at += t.val(id).cols();
    }
  });
}

int Tape::concat_rows(const std::vector<int>& ids) {
  if (ids.empty()) throw InvalidInput("Tape::concat_rows: empty");
  const Eigen::Index cols = val(ids[0]).cols();
  Eigen::Index rows = 0;
  for (int id : ids) {
    if (val(id).cols() != cols) throw InvalidInput("Tape::concat_rows: column mismatch");
    rows += val(id).rows();
  }
  MatX out(rows, cols);
  Eigen::Index at = 0;
  for (int id : ids) {
    out.middleRows(at, val(id).rows()) = val(id);
    at += val(id).rows();
  }
  return push(std::move(out), [ids](Tape& t, int self) {
    Eigen::Index at = 0;
    for (int id : ids) {
      t.add_grad(id, t.grad(self).middleRows(at, t.val(id).rows()));
      at += t.val(id).rows();
    }
  });
}

int Tape::gather_rows(int a, std::vector<int> idx) {
  MatX out(static_cast<Eigen::Index>(idx.size()), val(a).cols());
  for (size_t k = 0; k < idx.size(); ++k) out.row(k) = val(a).row(idx[k]);
  return push(std::move(out), [a, idx = std::move(idx)](Tape& t, int self) {
    MatX g = MatX::Zero(t.val(a).rows(), t.val(a).cols());
    for (size_t k = 0; k < idx.size(); ++k) g.row(idx[k]) += t.grad(self).row(k);
    t.add_grad(a, g);
  });
}

int Tape::scatter_rows(int a, std::vector<int> idx, int out_rows) {
  if (static_cast<Eigen::Index>(idx.size()) != val(a).rows()) {
    throw InvalidInput("Tape::scatter_rows: index count must match rows");
  }
  MatX out = MatX::Zero(out_rows, val(a).cols());
  for (size_t k = 0; k < idx.size(); ++k) out.row(idx[k]) += val(a).row(k);
  return push(std::move(out), [a, idx = std::move(idx)](Tape& t, int self) {
    MatX g(t.val(a).rows(), t.val(a).cols());
    for (size_t k = 0; k < idx.size(); ++k) g.row(k) = t.grad(self).row(idx[k]);
    t.add_grad(a, g);
  });
}

int Tape::add_row(int a, int row) {
  if (val(row).rows() != 1 || val(row).cols() != val(a).cols()) {
    throw InvalidInput("Tape::add_row: need a matching 1 x C row");
  }
  return push(val(a).rowwise() + val(row).row(0), [a, row](Tape& t, int self) {
    t.add_grad(a, t.grad(self));
    t.add_grad(row, t.grad(self).colwise().sum());
  });
}

int Tape::mul_row(int a, int row) {
  if (val(row).rows() != 1 || val(row).cols() != val(a).cols()) {
    throw InvalidInput("Tape::mul_row: need a matching 1 x C row");
  }
  return push(val(a).array().rowwise() * val(row).row(0).array(), [a, row](Tape& t, int self) {
    t.add_grad(a, t.grad(self).array().rowwise() * t.val(row).row(0).array());
    t.add_grad(row, t.grad(self).cwiseProduct(t.val(a)).colwise().sum());
  });
}

int Tape::mul_col(int a, int col) {
  if (val(col).cols() != 1 || val(col).rows() != val(a).rows()) {
    throw InvalidInput("Tape::mul_col: need a matching N x 1 column");
  }
  return push(val(a).array().colwise() * val(col).col(0).array(), [a, col](Tape& t, int self) {
    t.add_grad(a, t.grad(self).array().colwise() * t.val(col).col(0).array());
    t.add_grad(col, t.grad(self).cwiseProduct(t.val(a)).rowwise().sum());
  });
}

int Tape::div_col(int a, int col) {
  if (val(col).cols() != 1 || val(col).rows() != val(a).rows()) {
    throw InvalidInput("Tape::div_col: need a matching N x 1 column");
  }
  return push(val(a).array().colwise() / val(col).col(0).array(), [a, col](Tape& t, int self) {
    const auto inv = t.val(col).col(0).array().inverse();
    t.add_grad(a, t.grad(self).array().colwise() * inv);
    t.add_grad(col, -(t.grad(self).cwiseProduct(t.val(self)).rowwise().sum().array() * inv).matrix());
  });
}

int Tape::layer_norm(int a) {
  const MatX& x = val(a);
  constexpr double eps = 1e-8;
  MatX out(x.rows(), x.cols());
  VecX inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    out.row(r) = (x.row(r).array() - mean) * inv_std[r];
  }
  return push(std::move(out), [a, inv_std = std::move(inv_std)](Tape& t, int self) {
    const MatX& y = t.val(self);
    const MatX& gy = t.grad(self);
    MatX gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gmean = gy.row(r).mean();
      const double gymean = gy.row(r).cwiseProduct(y.row(r)).mean();
      gx.row(r) = inv_std[r] * (gy.row(r).array() - gmean - y.row(r).array() * gymean);
    }
    t.add_grad(a, gx);
  });
}

int Tape::row_norm(int a) {
  MatX out = val(a).rowwise().norm();
  return push(std::move(out), [a](Tape& t, int self) {
    MatX g(t.val(a).rows(), t.val(a).cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double n = std::max(t.val(self)(r, 0), 1e-12);
      g.row(r) = (t.grad(self)(r, 0) / n) * t.val(a).row(r);
    }
    t.add_grad(a, g);
  });
}

int Tape::sum_all(int a) {
  MatX out(1, 1);
  out(0, 0) = val(a).sum();
  return push(std::move(out), [a](Tape& t, int self) {
    t.add_grad(a, MatX::Constant(t.val(a).rows(), t.val(a).cols(), t.grad(self)(0, 0)));
  });
}

int Tape::mean_sq(int a) {
  const double n = static_cast<double>(val(a).size());
  MatX out(1, 1);
  out(0, 0) = val(a).squaredNorm() / n;
  return push(std::move(out), [a, n](Tape& t, int self) {
    t.add_grad(a, (2.0 / n) * t.grad(self)(0, 0) * t.val(a));
  });
}

int Tape::flatten(int a) {
  const MatX& x = val(a);
  MatX out(1, x.size());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.middleCols(r * x.cols(), x.cols()) = x.row(r);
  return push(std::move(out), [a](Tape& t, int self) {
    const MatX& gy = t.grad(self);
    MatX g(t.val(a).rows(), t.val(a).cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) = gy.middleCols(r * g.cols(), g.cols());
    t.add_grad(a, g);
  });
}

int Tape::custom(MatX value, std::function<void(Tape&, int)> backward) {
  return push(std::move(value), std::move(backward));
}

void Tape::backward(int id) {
  Node& out = nodes_.at(id);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw InvalidInput("Tape::backward: seed must be a scalar node");
  }
  out.grad(0, 0) = 1.0;
  out.touched = true;
  for (int k = id; k >= 0; --k) {
    Node& node = nodes_[k];
    if (node.touched && node.backward) node.backward(*this, k);
  }
}

}  // namespace rigidgraph
