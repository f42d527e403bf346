#include "paste/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace paste::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("graph: ") + what);
}

}  // namespace

template <typename T>
Expr Graph<T>::push(Mat value, std::function<void(Graph&, const Mat&)> back) {
  nodes_.push_back({std::move(value), Mat(), std::move(back)});
  return {nodes_.size() - 1};
}

template <typename T>
Expr Graph<T>::constant(Mat value) {
  return push(std::move(value));
}

template <typename T>
Expr Graph<T>::parameter(Parameter<T>& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  Parameter<T>* ptr = &p;
  return bound_[&p] = push(p.value, [ptr](Graph&, const Mat& dy) {
    if (ptr->grad.size() == 0) ptr->zero_grad();
    ptr->grad += dy;
  });
}

template <typename T>
Expr Graph<T>::lookup(Parameter<T>& table, Index row) {
  require(row >= 0 && row < table.value.rows(), "lookup row out of range");
  Parameter<T>* ptr = &table;
  return push(table.value.row(row).transpose(), [ptr, row](Graph&, const Mat& dy) {
    if (ptr->grad.size() == 0) ptr->zero_grad();
    ptr->grad.row(row) += dy.transpose();
  });
}

template <typename T>
Expr Graph<T>::matmul(Expr a, Expr b) {
  require(value(a).cols() == value(b).rows(), "matmul shape mismatch");
  Mat v = value(a) * value(b);
  return push(std::move(v), [a, b](Graph& gr, const Mat& dy) {
    gr.g(a).noalias() += dy * gr.value(b).transpose();
    gr.g(b).noalias() += gr.value(a).transpose() * dy;
  });
}

template <typename T>
Expr Graph<T>::add(Expr a, Expr b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.rows() == vb.rows() && va.cols() == vb.cols()) {
    return push(va + vb, [a, b](Graph& gr, const Mat& dy) {
      gr.g(a) += dy;
      gr.g(b) += dy;
    });
  }
  if (vb.rows() == 1 && vb.cols() == 1) {
    return push(va.array() + vb(0, 0), [a, b](Graph& gr, const Mat& dy) {
      gr.g(a) += dy;
      gr.g(b)(0, 0) += dy.sum();
    });
  }
  require(vb.cols() == 1 && vb.rows() == va.rows(), "add shape mismatch");
  Mat v = va.colwise() + vb.col(0);
  return push(std::move(v), [a, b](Graph& gr, const Mat& dy) {
    gr.g(a) += dy;
    gr.g(b) += dy.rowwise().sum();
  });
}

template <typename T>
Expr Graph<T>::cwise_mul(Expr a, Expr b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "cwise_mul shape mismatch");
  return push(value(a).cwiseProduct(value(b)), [a, b](Graph& gr, const Mat& dy) {
    gr.g(a) += dy.cwiseProduct(gr.value(b));
    gr.g(b) += dy.cwiseProduct(gr.value(a));
  });
}

template <typename T>
Expr Graph<T>::scale(Expr a, T s) {
  return push(value(a) * s, [a, s](Graph& gr, const Mat& dy) { gr.g(a) += dy * s; });
}

template <typename T>
Expr Graph<T>::tanh(Expr a) {
  Mat v = value(a).array().tanh();
  const std::size_t self = nodes_.size();
  return push(std::move(v), [a, self](Graph& gr, const Mat& dy) {
    const Mat& y = gr.nodes_[self].value;
    gr.g(a).array() += dy.array() * (T(1) - y.array().square());
  });
}

template <typename T>
Expr Graph<T>::sigmoid(Expr a) {
  Mat v = (T(1) / (T(1) + (-value(a).array()).exp())).matrix();
  const std::size_t self = nodes_.size();
  return push(std::move(v), [a, self](Graph& gr, const Mat& dy) {
    const Mat& y = gr.nodes_[self].value;
    gr.g(a).array() += dy.array() * y.array() * (T(1) - y.array());
  });
}

template <typename T>
Expr Graph<T>::rows(Expr a, Index start, Index count) {
  require(start >= 0 && start + count <= value(a).rows(), "rows out of range");
  return push(value(a).middleRows(start, count),
              [a, start, count](Graph& gr, const Mat& dy) { gr.g(a).middleRows(start, count) += dy; });
}

template <typename T>
Expr Graph<T>::col(Expr a, Index j) {
  require(j >= 0 && j < value(a).cols(), "col out of range");
  return push(value(a).col(j), [a, j](Graph& gr, const Mat& dy) { gr.g(a).col(j) += dy; });
}

template <typename T>
Expr Graph<T>::hcat(std::span<const Expr> parts) {
  require(!parts.empty(), "hcat of nothing");
  const Index r = value(parts[0]).rows();
  Index c = 0;
  for (Expr p : parts) {
    require(value(p).rows() == r, "hcat row mismatch");
    c += value(p).cols();
  }
  Mat v(r, c);
  Index at = 0;
  for (Expr p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Expr> ins(parts.begin(), parts.end());
  return push(std::move(v), [ins](Graph& gr, const Mat& dy) {
    Index at = 0;
    for (Expr p : ins) {
      const Index w = gr.value(p).cols();
      gr.g(p) += dy.middleCols(at, w);
      at += w;
    }
  });
}

template <typename T>
Expr Graph<T>::vcat(std::span<const Expr> parts) {
  require(!parts.empty(), "vcat of nothing");
  const Index c = value(parts[0]).cols();
  Index r = 0;
  for (Expr p : parts) {
    require(value(p).cols() == c, "vcat column mismatch");
    r += value(p).rows();
  }
  Mat v(r, c);
  Index at = 0;
  for (Expr p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  std::vector<Expr> ins(parts.begin(), parts.end());
  return push(std::move(v), [ins](Graph& gr, const Mat& dy) {
    Index at = 0;
    for (Expr p : ins) {
      const Index h = gr.value(p).rows();
      gr.g(p) += dy.middleRows(at, h);
      at += h;
    }
  });
}

template <typename T>
Expr Graph<T>::repeat_cols(Expr column, Index n) {
  require(value(column).cols() == 1, "repeat_cols expects a column");
  return push(value(column).replicate(1, n),
              [column](Graph& gr, const Mat& dy) { gr.g(column) += dy.rowwise().sum(); });
}

template <typename T>
Expr Graph<T>::transpose(Expr a) {
  return push(value(a).transpose(), [a](Graph& gr, const Mat& dy) { gr.g(a) += dy.transpose(); });
}

template <typename T>
Expr Graph<T>::softmax(Expr a) {
  const Mat& x = value(a);
  require(x.size() > 0, "softmax of empty input");
  Mat e = (x.array() - x.maxCoeff()).exp();
  e /= e.sum();
  const std::size_t self = nodes_.size();
  return push(std::move(e), [a, self](Graph& gr, const Mat& dy) {
    const Mat& y = gr.nodes_[self].value;
    const T dot = (dy.array() * y.array()).sum();
    gr.g(a).array() += y.array() * (dy.array() - dot);
  });
}

template <typename T>
Expr Graph<T>::neg_log(Expr a, Index i, T floor) {
  require(i >= 0 && i < value(a).size(), "neg_log index out of range");
  const T p = value(a)(i);
  const bool clamped = p < floor;
  Mat v(1, 1);
  v(0, 0) = -std::log(clamped ? floor : p);
  return push(std::move(v), [a, i, p, clamped](Graph& gr, const Mat& dy) {
    if (!clamped) gr.g(a)(i) -= dy(0, 0) / p;
  });
}

template <typename T>
Expr Graph<T>::sum(std::span<const Expr> parts) {
  require(!parts.empty(), "sum of nothing");
  Mat v = value(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require(value(parts[k]).rows() == v.rows() && value(parts[k]).cols() == v.cols(), "sum shape mismatch");
    v += value(parts[k]);
  }
  std::vector<Expr> ins(parts.begin(), parts.end());
  return push(std::move(v), [ins](Graph& gr, const Mat& dy) {
    for (Expr p : ins) gr.g(p) += dy;
  });
}

template <typename T>
void Graph<T>::backward(Expr root) {
  require(value(root).size() == 1, "backward root must be a scalar");
  for (std::size_t i = 0; i <= root.id; ++i) nodes_[i].grad.setZero(nodes_[i].value.rows(), nodes_[i].value.cols());
  nodes_[root.id].grad(0, 0) = T(1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& nd = nodes_[i];
    if (nd.back && !nd.grad.isZero(0)) nd.back(*this, nd.grad);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace paste::ad
