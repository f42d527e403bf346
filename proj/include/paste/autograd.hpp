#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace paste::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// A learnable tensor and its accumulated gradient.
template <typename T>
struct Parameter {
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node of a Graph.
struct Expr {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Define-by-run reverse-mode graph. Every op evaluates eagerly; backward()
/// walks the tape in reverse and accumulates into parameter gradients.
/// Column vectors are r x 1 matrices; a "row" of per-token scores is 1 x n.
template <typename T>
class Graph {
 public:
  using Mat = Matrix<T>;
  using Index = Eigen::Index;

  Expr constant(Mat value);
  Expr zeros(Index rows, Index cols) { return constant(Mat::Zero(rows, cols)); }
  /// Reads the parameter's current value; backward adds into p.grad.
  /// Repeated calls for the same parameter return the same node.
  Expr parameter(Parameter<T>& p);
  /// Row `row` of an embedding table, returned as a column vector.
  Expr lookup(Parameter<T>& table, Index row);

  Expr matmul(Expr a, Expr b);
  /// Elementwise sum. `b` may also be a column broadcast over a's columns or
  /// a 1 x 1 scalar broadcast over all of a.
  Expr add(Expr a, Expr b);
  Expr cwise_mul(Expr a, Expr b);
  Expr scale(Expr a, T s);
  Expr tanh(Expr a);
  Expr sigmoid(Expr a);

  Expr rows(Expr a, Index start, Index count);
  Expr col(Expr a, Index j);
  Expr hcat(std::span<const Expr> parts);
  Expr vcat(std::span<const Expr> parts);
  Expr hcat(std::initializer_list<Expr> parts) { return hcat(std::span<const Expr>(parts.begin(), parts.size())); }
  Expr vcat(std::initializer_list<Expr> parts) { return vcat(std::span<const Expr>(parts.begin(), parts.size())); }
  Expr repeat_cols(Expr column, Index n);
  Expr transpose(Expr a);

  /// Softmax over every entry of `a`.
  Expr softmax(Expr a);
  /// -log(max(a[i], floor)) as a 1 x 1 node; zero gradient when clamped.
  Expr neg_log(Expr a, Index i, T floor);
  /// Sum of same-shaped nodes.
  Expr sum(std::span<const Expr> parts);

  const Mat& value(Expr e) const { return nodes_[e.id].value; }
  const Mat& grad(Expr e) const { return nodes_[e.id].grad; }
  T scalar(Expr e) const { return nodes_[e.id].value(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1. Root must be 1 x 1.
  void backward(Expr root);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Graph&, const Mat&)> back;
  };

  Expr push(Mat value, std::function<void(Graph&, const Mat&)> back = {});
  Mat& g(Expr e) { return nodes_[e.id].grad; }
  const Node& node(Expr e) const { return nodes_[e.id]; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, Expr> bound_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace paste::ad
