#include "isolab/tape.hpp"

#include <cmath>
#include <utility>

#include "isolab/errors.hpp"

namespace isolab {

namespace {
void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}
}  // namespace

Var Tape::push(Matrix value, std::function<void(Tape&, const Matrix&)> back) {
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Matrix value) { return push(std::move(value), nullptr); }

Matrix& Tape::grad_storage(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Matrix& dst = grad_storage(v);
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += g.data()[i];
}

void Tape::accumulate_scaled(Var v, const Matrix& g, double k) {
  Matrix& dst = grad_storage(v);
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += k * g.data()[i];
}

double Tape::scalar(Var v) const {
  const Matrix& m = nodes_[v.id].value;
  require(m.rows() == 1 && m.cols() == 1, "Tape::scalar: node is not 1x1");
  return m(0, 0);
}

void Tape::backward(Var loss) {
  require(loss.id < nodes_.size(), "Tape::backward: invalid node");
  const Matrix& lv = nodes_[loss.id].value;
  require(lv.rows() == 1 && lv.cols() == 1, "Tape::backward: loss must be scalar");
  grad_storage(loss)(0, 0) = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, n.grad);
  }
  backward_done_ = true;
}

const Matrix& Tape::grad(Var v) const {
  if (!backward_done_) {
    throw ContractViolation("Tape::grad: backward() has not run on this tape");
  }
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) {
    // Node did not participate in the loss; its gradient is zero.
    static thread_local Matrix zero;
    zero = Matrix(n.value.rows(), n.value.cols());
    return zero;
  }
  return n.grad;
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

Var Tape::add(Var a, Var b) {
  require(value(a).same_shape(value(b)), "tape add: shape mismatch");
  return push(isolab::add(value(a), value(b)),
              [a, b](Tape& t, const Matrix& g) {
                t.accumulate(a, g);
                t.accumulate(b, g);
              });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).same_shape(value(b)), "tape sub: shape mismatch");
  return push(isolab::sub(value(a), value(b)),
              [a, b](Tape& t, const Matrix& g) {
                t.accumulate(a, g);
                t.accumulate_scaled(b, g, -1.0);
              });
}

Var Tape::scale(Var a, double k) {
  return push(scaled(value(a), k),
              [a, k](Tape& t, const Matrix& g) { t.accumulate_scaled(a, g, k); });
}

Var Tape::add_scalar(Var a, double k) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += k;
  return push(std::move(out),
              [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var Tape::add_const(Var a, const Matrix& k) {
  require(value(a).same_shape(k), "tape add_const: shape mismatch");
  return push(isolab::add(value(a), k),
              [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var Tape::mul(Var a, Var b) {
  require(value(a).same_shape(value(b)), "tape mul: shape mismatch");
  return push(hadamard(value(a), value(b)), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, hadamard(g, t.value(b)));
    t.accumulate(b, hadamard(g, t.value(a)));
  });
}

Var Tape::mul_const(Var a, const Matrix& k) {
  require(value(a).same_shape(k), "tape mul_const: shape mismatch");
  return push(hadamard(value(a), k), [a, k](Tape& t, const Matrix& g) {
    t.accumulate(a, hadamard(g, k));
  });
}

Var Tape::matmul(Var a, Var b) {
  return push(isolab::matmul(value(a), value(b)),
              [a, b](Tape& t, const Matrix& g) {
                t.accumulate(a, isolab::matmul_nt(g, t.value(b)));
                t.accumulate(b, isolab::matmul_tn(t.value(a), g));
              });
}

Var Tape::matmul_nt(Var a, Var b) {
  return push(isolab::matmul_nt(value(a), value(b)),
              [a, b](Tape& t, const Matrix& g) {
                t.accumulate(a, isolab::matmul(g, t.value(b)));
                t.accumulate(b, isolab::matmul_tn(g, t.value(a)));
              });
}

Var Tape::matmul_tn(Var a, Var b) {
  return push(isolab::matmul_tn(value(a), value(b)),
              [a, b](Tape& t, const Matrix& g) {
                t.accumulate(a, isolab::matmul_nt(t.value(b), g));
                t.accumulate(b, isolab::matmul(t.value(a), g));
              });
}

Var Tape::add_row(Var a, Var r) {
  const Matrix& av = value(a);
  const Matrix& rv = value(r);
  require(rv.rows() == 1 && rv.cols() == av.cols(), "tape add_row: bad row shape");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  return push(std::move(out), [a, r](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    Matrix gr(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
    t.accumulate(r, gr);
  });
}

Var Tape::mul_row(Var a, Var r) {
  const Matrix& av = value(a);
  const Matrix& rv = value(r);
  require(rv.rows() == 1 && rv.cols() == av.cols(), "tape mul_row: bad row shape");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= rv(0, j);
  return push(std::move(out), [a, r](Tape& t, const Matrix& g) {
    const Matrix& av2 = t.value(a);
    const Matrix& rv2 = t.value(r);
    Matrix ga(g.rows(), g.cols());
    Matrix gr(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        ga(i, j) = g(i, j) * rv2(0, j);
        gr(0, j) += g(i, j) * av2(i, j);
      }
    }
    t.accumulate(a, ga);
    t.accumulate(r, gr);
  });
}

Var Tape::mul_col(Var a, Var c) {
  const Matrix& av = value(a);
  const Matrix& cv = value(c);
  require(cv.cols() == 1 && cv.rows() == av.rows(), "tape mul_col: bad col shape");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= cv(i, 0);
  return push(std::move(out), [a, c](Tape& t, const Matrix& g) {
    const Matrix& av2 = t.value(a);
    const Matrix& cv2 = t.value(c);
    Matrix ga(g.rows(), g.cols());
    Matrix gc(g.rows(), 1);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) {
        ga(i, j) = g(i, j) * cv2(i, 0);
        acc += g(i, j) * av2(i, j);
      }
      gc(i, 0) = acc;
    }
    t.accumulate(a, ga);
    t.accumulate(c, gc);
  });
}

Var Tape::tanh_act(Var a) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  return push(std::move(out), [a](Tape& t, const Matrix& g) {
    // d tanh = 1 - y^2; reuse the forward value stored on this node's parent
    // chain is not available here, so recompute from the input.
    const Matrix& av = t.value(a);
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = std::tanh(av.data()[i]);
      ga.data()[i] = g.data()[i] * (1.0 - y * y);
    }
    t.accumulate(a, ga);
  });
}

Var Tape::sqrt_eps(Var a, double eps) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::sqrt(out.data()[i] + eps);
  Matrix saved = out;
  return push(std::move(out), [a, saved](Tape& t, const Matrix& g) {
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i)
      ga.data()[i] = g.data()[i] / (2.0 * saved.data()[i]);
    t.accumulate(a, ga);
  });
}

Var Tape::rsqrt_eps(Var a, double eps) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = 1.0 / std::sqrt(out.data()[i] + eps);
  Matrix saved = out;
  return push(std::move(out), [a, saved](Tape& t, const Matrix& g) {
    // d/dx (x+e)^(-1/2) = -1/2 (x+e)^(-3/2) = -y^3 / 2
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = saved.data()[i];
      ga.data()[i] = -0.5 * g.data()[i] * y * y * y;
    }
    t.accumulate(a, ga);
  });
}

Var Tape::recip(Var a) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = 1.0 / out.data()[i];
  Matrix saved = out;
  return push(std::move(out), [a, saved](Tape& t, const Matrix& g) {
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = saved.data()[i];
      ga.data()[i] = -g.data()[i] * y * y;
    }
    t.accumulate(a, ga);
  });
}

Var Tape::col_center(Var a) {
  const Matrix& av = value(a);
  const std::size_t n = av.rows(), d = av.cols();
  require(n >= 1, "tape col_center: empty input");
  Matrix out = av;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += av(i, j);
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) -= mean[j];
  return push(std::move(out), [a](Tape& t, const Matrix& g) {
    // Centering is linear: dA = G - rowwise broadcast of colmean(G).
    const std::size_t n2 = g.rows(), d2 = g.cols();
    std::vector<double> gm(d2, 0.0);
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j) gm[j] += g(i, j);
    for (std::size_t j = 0; j < d2; ++j) gm[j] /= static_cast<double>(n2);
    Matrix ga = g;
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < d2; ++j) ga(i, j) -= gm[j];
    t.accumulate(a, ga);
  });
}

Var Tape::col_mean(Var a) {
  const Matrix& av = value(a);
  const std::size_t n = av.rows(), d = av.cols();
  require(n >= 1, "tape col_mean: empty input");
  Matrix out(1, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(0, j) += av(i, j);
  for (std::size_t j = 0; j < d; ++j) out(0, j) /= static_cast<double>(n);
  return push(std::move(out), [a, n](Tape& t, const Matrix& g) {
    Matrix ga(n, g.cols());
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) = g(0, j) * inv;
    t.accumulate(a, ga);
  });
}

Var Tape::row_sum(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) acc += av(i, j);
    out(i, 0) = acc;
  }
  const std::size_t d = av.cols();
  return push(std::move(out), [a, d](Tape& t, const Matrix& g) {
    Matrix ga(g.rows(), d);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) ga(i, j) = g(i, 0);
    t.accumulate(a, ga);
  });
}

Var Tape::diag_part(Var a) {
  const Matrix& av = value(a);
  require(av.rows() == av.cols(), "tape diag_part: input not square");
  const std::size_t d = av.rows();
  Matrix out(1, d);
  for (std::size_t i = 0; i < d; ++i) out(0, i) = av(i, i);
  return push(std::move(out), [a, d](Tape& t, const Matrix& g) {
    Matrix ga(d, d);
    for (std::size_t i = 0; i < d; ++i) ga(i, i) = g(0, i);
    t.accumulate(a, ga);
  });
}

Var Tape::sum(Var a) {
  const Matrix& av = value(a);
  double acc = 0.0;
  for (double v : av.values()) acc += v;
  return push(Matrix{{acc}}, [a](Tape& t, const Matrix& g) {
    const Matrix& av2 = t.value(a);
    Matrix ga(av2.rows(), av2.cols(), g(0, 0));
    t.accumulate(a, ga);
  });
}

Var Tape::fro_norm_eps(Var a, double eps) {
  const Matrix& av = value(a);
  double s = 0.0;
  for (double v : av.values()) s += v * v;
  const double norm = std::sqrt(s + eps);
  return push(Matrix{{norm}}, [a, norm](Tape& t, const Matrix& g) {
    const Matrix& av2 = t.value(a);
    const double k = g(0, 0) / norm;
    t.accumulate_scaled(a, av2, k);
  });
}

Var Tape::embed_mean(Var table, std::vector<std::vector<int>> seqs) {
  const Matrix& tv = value(table);
  const std::size_t d = tv.cols();
  const std::size_t n = seqs.size();
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    require(!seqs[i].empty(), "tape embed_mean: empty token sequence");
    const double inv = 1.0 / static_cast<double>(seqs[i].size());
    for (int tok : seqs[i]) {
      require(tok >= 0 && static_cast<std::size_t>(tok) < tv.rows(),
              "tape embed_mean: token id out of range");
      const double* row = tv.data() + static_cast<std::size_t>(tok) * d;
      double* orow = out.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) orow[j] += inv * row[j];
    }
  }
  auto shared = std::make_shared<std::vector<std::vector<int>>>(std::move(seqs));
  return push(std::move(out), [table, shared, d](Tape& t, const Matrix& g) {
    Matrix& gt = t.grad_storage(table);
    for (std::size_t i = 0; i < shared->size(); ++i) {
      const double inv = 1.0 / static_cast<double>((*shared)[i].size());
      const double* grow = g.data() + i * d;
      for (int tok : (*shared)[i]) {
        double* trow = gt.data() + static_cast<std::size_t>(tok) * d;
        for (std::size_t j = 0; j < d; ++j) trow[j] += inv * grow[j];
      }
    }
  });
}

Var Tape::softmax_xent(Var logits, std::vector<int> labels) {
  const Matrix& z = value(logits);
  const std::size_t n = z.rows(), L = z.cols();
  require(labels.size() == n, "tape softmax_xent: label count mismatch");
  Matrix probs(n, L);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < L,
            "tape softmax_xent: label out of range");
    double mx = z(i, 0);
    for (std::size_t j = 1; j < L; ++j) mx = std::max(mx, z(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < L; ++j) denom += std::exp(z(i, j) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < L; ++j) probs(i, j) = std::exp(z(i, j) - lse);
    loss += lse - z(i, static_cast<std::size_t>(labels[i]));
  }
  loss /= static_cast<double>(n);
  auto shared = std::make_shared<std::pair<Matrix, std::vector<int>>>(
      std::move(probs), std::move(labels));
  return push(Matrix{{loss}}, [logits, shared, n](Tape& t, const Matrix& g) {
    const Matrix& p = shared->first;
    const std::vector<int>& y = shared->second;
    const double k = g(0, 0) / static_cast<double>(n);
    Matrix gz = p;
    for (std::size_t i = 0; i < n; ++i)
      gz(i, static_cast<std::size_t>(y[i])) -= 1.0;
    for (std::size_t i = 0; i < gz.size(); ++i) gz.data()[i] *= k;
    t.accumulate(logits, gz);
  });
}

Var Tape::row_lse_minus_diag_mean(Var s) {
  const Matrix& sv = value(s);
  require(sv.rows() == sv.cols(), "tape row_lse_minus_diag_mean: input not square");
  const std::size_t n = sv.rows();
  require(n >= 1, "tape row_lse_minus_diag_mean: empty input");
  Matrix probs(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = sv(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, sv(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) denom += std::exp(sv(i, j) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < n; ++j) probs(i, j) = std::exp(sv(i, j) - lse);
    loss += lse - sv(i, i);
  }
  loss /= static_cast<double>(n);
  auto shared = std::make_shared<Matrix>(std::move(probs));
  return push(Matrix{{loss}}, [s, shared, n](Tape& t, const Matrix& g) {
    const double k = g(0, 0) / static_cast<double>(n);
    Matrix gs = *shared;
    for (std::size_t i = 0; i < n; ++i) gs(i, i) -= 1.0;
    for (std::size_t i = 0; i < gs.size(); ++i) gs.data()[i] *= k;
    t.accumulate(s, gs);
  });
}

}  // namespace isolab
