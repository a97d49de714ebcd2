#include "trm/ops.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace trm {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

template <class T>
void require_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite()) throw std::domain_error(std::string(what) + ": non-finite input");
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::int64_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

double stable_s(double u) { return u >= 0.0 ? u + 1.0 : 1.0 / (1.0 - u); }
double stable_ds(double u) { return u >= 0.0 ? 1.0 : 1.0 / ((1.0 - u) * (1.0 - u)); }

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------- rotary

template <class T>
RotaryTable<T>::RotaryTable(std::int64_t seq_len, std::int64_t head_dim, double base)
    : seq_len_(seq_len), head_dim_(head_dim) {
  if (head_dim % 2 != 0) throw std::invalid_argument("rotary embedding needs an even head dimension");
  const std::int64_t half = head_dim / 2;
  cos_.resize(static_cast<std::size_t>(seq_len * half));
  sin_.resize(cos_.size());
  for (std::int64_t p = 0; p < seq_len; ++p) {
    for (std::int64_t i = 0; i < half; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(p) * freq;
      cos_[static_cast<std::size_t>(p * half + i)] = static_cast<T>(std::cos(angle));
      sin_[static_cast<std::size_t>(p * half + i)] = static_cast<T>(std::sin(angle));
    }
  }
}

template <class T>
void RotaryTable<T>::rotate(T* row, std::int64_t position, int sign) const {
  const std::int64_t half = head_dim_ / 2;
  const T* c = cos_.data() + position * half;
  const T* s = sin_.data() + position * half;
  for (std::int64_t i = 0; i < half; ++i) {
    const T a = row[2 * i];
    const T b = row[2 * i + 1];
    const T sn = sign > 0 ? s[i] : -s[i];
    row[2 * i] = a * c[i] - b * sn;
    row[2 * i + 1] = a * sn + b * c[i];
  }
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> rotary_apply(const Tensor<T>& q, const Tensor<T>& k, double base) {
  if (q.rank() != 2 || q.shape() != k.shape()) throw std::invalid_argument("rotary_apply expects matching [L, d_head] arrays");
  const RotaryTable<T> table(q.dim(0), q.dim(1), base);
  Tensor<T> qo = q;
  Tensor<T> ko = k;
  for (std::int64_t p = 0; p < q.dim(0); ++p) {
    table.rotate(qo.data() + p * q.dim(1), p);
    table.rotate(ko.data() + p * k.dim(1), p);
  }
  return {std::move(qo), std::move(ko)};
}

template <class T>
std::vector<T> rmsnorm(std::span<const T> v, std::span<const T> weight, double eps) {
  if (v.size() != weight.size()) throw std::invalid_argument("rmsnorm: weight size mismatch");
  double ms = 0.0;
  for (T x : v) {
    if (!std::isfinite(x)) throw std::domain_error("rmsnorm: non-finite input");
    ms += static_cast<double>(x) * static_cast<double>(x);
  }
  ms /= static_cast<double>(v.size());
  const double denom = std::sqrt(ms + eps);
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    // 0/0 only when the input is all zeros with eps = 0
    out[i] = denom == 0.0 ? T(0) : static_cast<T>(static_cast<double>(weight[i]) * static_cast<double>(v[i]) / denom);
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

template <class T>
Var<T> add(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("add: no inputs");
  Tensor<T> out = xs.front().value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i].shape() != out.shape()) {
      throw std::invalid_argument("add: shape mismatch " + shape_to_string(out.shape()) + " vs " +
                                  shape_to_string(xs[i].shape()));
    }
    accumulate(out, xs[i].value());
  }
  return make_result<T>(std::move(out), xs, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) accumulate(p->grad, self.grad);
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v *= factor;
  return make_result<T>(std::move(out), {x}, [factor](Node<T>& self) {
    auto& g = self.parents[0]->grad;
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <class T>
Var<T> swiglu(const Var<T>& gate, const Var<T>& up) {
  if (gate.shape() != up.shape()) throw std::invalid_argument("swiglu: shape mismatch");
  const auto& g = gate.value();
  const auto& u = up.value();
  Tensor<T> out(g.shape());
  for (std::int64_t i = 0; i < g.size(); ++i) {
    const T sig = T(1) / (T(1) + std::exp(-g[i]));
    out[i] = g[i] * sig * u[i];
  }
  return make_result<T>(std::move(out), {gate, up}, [](Node<T>& self) {
    const auto& g = self.parents[0]->value;
    const auto& u = self.parents[1]->value;
    const bool need_g = self.parents[0]->requires_grad;
    const bool need_u = self.parents[1]->requires_grad;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const T sig = T(1) / (T(1) + std::exp(-g[i]));
      const T silu = g[i] * sig;
      if (need_g) self.parents[0]->grad[i] += self.grad[i] * u[i] * sig * (T(1) + g[i] * (T(1) - sig));
      if (need_u) self.parents[1]->grad[i] += self.grad[i] * silu;
    }
  });
}

// ---------------------------------------------------------------- linear maps

template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
  if (w.value().rank() != 2 || x.value().dim(-1) != w.value().dim(0)) {
    throw std::invalid_argument("linear: cannot apply " + shape_to_string(w.shape()) + " to " +
                                shape_to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = w.value().dim(1);
  Tensor<T> out(out_shape);
  as_matrix(out).noalias() = as_matrix(x.value()) * as_matrix(w.value());
  return make_result<T>(std::move(out), {x, w}, [](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    const auto g = as_matrix(static_cast<const Tensor<T>&>(self.grad));
    if (xn.requires_grad) as_matrix(xn.grad).noalias() += g * as_matrix(static_cast<const Tensor<T>&>(wn.value)).transpose();
    if (wn.requires_grad) as_matrix(wn.grad).noalias() += as_matrix(static_cast<const Tensor<T>&>(xn.value)).transpose() * g;
  });
}

template <class T>
Var<T> sequence_mix(const Var<T>& x, const Var<T>& w) {
  const auto& xv = x.value();
  if (xv.rank() != 3 || w.value().rank() != 2 || w.value().dim(0) != xv.dim(1) || w.value().dim(1) != xv.dim(1)) {
    throw std::invalid_argument("sequence_mix: expected x [B,L,D] and w [L,L], got " + shape_to_string(xv.shape()) +
                                " and " + shape_to_string(w.shape()));
  }
  const std::int64_t B = xv.dim(0), L = xv.dim(1), D = xv.dim(2);
  Tensor<T> out(xv.shape());
  const ConstMatMap<T> wm(w.value().data(), L, L);
  for (std::int64_t b = 0; b < B; ++b) {
    MatMap<T>(out.data() + b * L * D, L, D).noalias() = wm * ConstMatMap<T>(xv.data() + b * L * D, L, D);
  }
  return make_result<T>(std::move(out), {x, w}, [B, L, D](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    const ConstMatMap<T> wm(wn.value.data(), L, L);
    for (std::int64_t b = 0; b < B; ++b) {
      const ConstMatMap<T> g(self.grad.data() + b * L * D, L, D);
      if (xn.requires_grad) MatMap<T>(xn.grad.data() + b * L * D, L, D).noalias() += wm.transpose() * g;
      if (wn.requires_grad) {
        MatMap<T>(wn.grad.data(), L, L).noalias() += g * ConstMatMap<T>(xn.value.data() + b * L * D, L, D).transpose();
      }
    }
  });
}

template <class T>
Var<T> rmsnorm(const Var<T>& x, const Var<T>& weight, double eps) {
  const auto& xv = x.value();
  const std::int64_t D = xv.dim(-1);
  if (weight.value().size() != D) throw std::invalid_argument("rmsnorm: weight size mismatch");
  require_finite(xv, "rmsnorm");
  const std::int64_t rows = xv.size() / D;
  Tensor<T> out(xv.shape());
  std::vector<T> inv(static_cast<std::size_t>(rows));
  const T* w = weight.value().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * D;
    double ms = 0.0;
    for (std::int64_t i = 0; i < D; ++i) ms += static_cast<double>(in[i]) * static_cast<double>(in[i]);
    const T rinv = static_cast<T>(1.0 / std::sqrt(ms / static_cast<double>(D) + eps));
    inv[static_cast<std::size_t>(r)] = rinv;
    T* o = out.data() + r * D;
    for (std::int64_t i = 0; i < D; ++i) o[i] = w[i] * in[i] * rinv;
  }
  return make_result<T>(std::move(out), {x, weight}, [inv = std::move(inv), D, rows](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    const T* w = wn.value.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* in = xn.value.data() + r * D;
      const T* g = self.grad.data() + r * D;
      const T rinv = inv[static_cast<std::size_t>(r)];
      if (wn.requires_grad) {
        T* gw = wn.grad.data();
        for (std::int64_t i = 0; i < D; ++i) gw[i] += g[i] * in[i] * rinv;
      }
      if (xn.requires_grad) {
        T dot = 0;
        for (std::int64_t i = 0; i < D; ++i) dot += g[i] * w[i] * in[i];
        const T coef = dot * rinv * rinv * rinv / static_cast<T>(D);
        T* gx = xn.grad.data() + r * D;
        for (std::int64_t i = 0; i < D; ++i) gx[i] += rinv * w[i] * g[i] - coef * in[i];
      }
    }
  });
}

// ---------------------------------------------------------------- attention

template <class T>
Var<T> self_attention(const Var<T>& qkv, int n_heads, std::shared_ptr<const RotaryTable<T>> rope_ptr) {
  const RotaryTable<T>& rope = *rope_ptr;
  const auto& in = qkv.value();
  if (in.rank() != 3 || in.dim(2) % 3 != 0) throw std::invalid_argument("self_attention: expected [B,L,3D]");
  const std::int64_t B = in.dim(0), L = in.dim(1), D = in.dim(2) / 3;
  if (D % n_heads != 0) throw std::invalid_argument("self_attention: hidden size not divisible by heads");
  const std::int64_t dh = D / n_heads;
  if (rope.head_dim() != dh || rope.seq_len() < L) throw std::invalid_argument("self_attention: rotary table mismatch");
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  using Stride = Eigen::OuterStride<>;
  using CStrided = Eigen::Map<const RowMatrix<T>, 0, Stride>;
  using Strided = Eigen::Map<RowMatrix<T>, 0, Stride>;

  struct Saved {
    RowMatrix<T> q, k, p;
  };
  std::vector<Saved> saved(static_cast<std::size_t>(B * n_heads));
  Tensor<T> out(Shape{B, L, D});
  for (std::int64_t b = 0; b < B; ++b) {
    const T* base = in.data() + b * L * 3 * D;
    for (std::int64_t h = 0; h < n_heads; ++h) {
      auto& s = saved[static_cast<std::size_t>(b * n_heads + h)];
      s.q = CStrided(base + h * dh, L, dh, Stride(3 * D));
      s.k = CStrided(base + D + h * dh, L, dh, Stride(3 * D));
      for (std::int64_t p = 0; p < L; ++p) {
        rope.rotate(s.q.data() + p * dh, p);
        rope.rotate(s.k.data() + p * dh, p);
      }
      s.p.noalias() = (s.q * s.k.transpose()) * scale;
      for (std::int64_t r = 0; r < L; ++r) {
        auto row = s.p.row(r);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      Strided(out.data() + b * L * D + h * dh, L, dh, Stride(D)).noalias() =
          s.p * CStrided(base + 2 * D + h * dh, L, dh, Stride(3 * D));
    }
  }
  return make_result<T>(std::move(out), {qkv}, [saved = std::move(saved), B, L, D, dh, n_heads, scale, rope_ptr](Node<T>& self) {
    const RotaryTable<T>& rope = *rope_ptr;
    auto& xn = *self.parents[0];
    for (std::int64_t b = 0; b < B; ++b) {
      const T* base = xn.value.data() + b * L * 3 * D;
      T* gbase = xn.grad.data() + b * L * 3 * D;
      for (std::int64_t h = 0; h < n_heads; ++h) {
        const auto& s = saved[static_cast<std::size_t>(b * n_heads + h)];
        const CStrided gout(self.grad.data() + b * L * D + h * dh, L, dh, Stride(D));
        const CStrided v(base + 2 * D + h * dh, L, dh, Stride(3 * D));
        Strided(gbase + 2 * D + h * dh, L, dh, Stride(3 * D)).noalias() += s.p.transpose() * gout;
        RowMatrix<T> dp = gout * v.transpose();
        for (std::int64_t r = 0; r < L; ++r) {
          const T dot = dp.row(r).dot(s.p.row(r));
          dp.row(r) = s.p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix()) * scale;
        }
        RowMatrix<T> dq = dp * s.k;
        RowMatrix<T> dk = dp.transpose() * s.q;
        for (std::int64_t p = 0; p < L; ++p) {
          rope.rotate(dq.data() + p * dh, p, -1);
          rope.rotate(dk.data() + p * dh, p, -1);
        }
        Strided(gbase + h * dh, L, dh, Stride(3 * D)) += dq;
        Strided(gbase + D + h * dh, L, dh, Stride(3 * D)) += dk;
      }
    }
  });
}

// ---------------------------------------------------------------- gathers and pools

template <class T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, Shape out_shape, T factor) {
  const auto& tv = table.value();
  const std::int64_t V = tv.dim(0), D = tv.dim(1);
  if (out_shape.back() != D || shape_size(out_shape) != static_cast<std::int64_t>(ids.size()) * D) {
    throw std::invalid_argument("embedding: output shape does not match ids");
  }
  Tensor<T> out(std::move(out_shape));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= V) throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " out of range");
    const T* src = tv.data() + ids[i] * D;
    T* dst = out.data() + static_cast<std::int64_t>(i) * D;
    for (std::int64_t j = 0; j < D; ++j) dst[j] = src[j] * factor;
  }
  std::vector<std::int32_t> id_copy(ids.begin(), ids.end());
  return make_result<T>(std::move(out), {table}, [id_copy = std::move(id_copy), D, factor](Node<T>& self) {
    auto& gt = self.parents[0]->grad;
    for (std::size_t i = 0; i < id_copy.size(); ++i) {
      const T* g = self.grad.data() + static_cast<std::int64_t>(i) * D;
      T* dst = gt.data() + id_copy[i] * D;
      for (std::int64_t j = 0; j < D; ++j) dst[j] += g[j] * factor;
    }
  });
}

template <class T>
Var<T> broadcast_rows(const Var<T>& table, std::span<const std::int32_t> ids, std::int64_t seq_len) {
  const auto& tv = table.value();
  const std::int64_t V = tv.dim(0), D = tv.dim(1);
  const auto B = static_cast<std::int64_t>(ids.size());
  Tensor<T> out(Shape{B, seq_len, D});
  for (std::int64_t b = 0; b < B; ++b) {
    if (ids[static_cast<std::size_t>(b)] < 0 || ids[static_cast<std::size_t>(b)] >= V) {
      throw std::out_of_range("broadcast_rows: id out of range");
    }
    const T* src = tv.data() + ids[static_cast<std::size_t>(b)] * D;
    for (std::int64_t l = 0; l < seq_len; ++l) std::copy(src, src + D, out.data() + (b * seq_len + l) * D);
  }
  std::vector<std::int32_t> id_copy(ids.begin(), ids.end());
  return make_result<T>(std::move(out), {table}, [id_copy = std::move(id_copy), seq_len, D](Node<T>& self) {
    auto& gt = self.parents[0]->grad;
    for (std::size_t b = 0; b < id_copy.size(); ++b) {
      T* dst = gt.data() + id_copy[b] * D;
      for (std::int64_t l = 0; l < seq_len; ++l) {
        const T* g = self.grad.data() + (static_cast<std::int64_t>(b) * seq_len + l) * D;
        for (std::int64_t j = 0; j < D; ++j) dst[j] += g[j];
      }
    }
  });
}

template <class T>
Var<T> mean_over_sequence(const Var<T>& x) {
  const auto& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("mean_over_sequence: expected [B,L,D]");
  const std::int64_t B = xv.dim(0), L = xv.dim(1), D = xv.dim(2);
  Tensor<T> out(Shape{B, D});
  const T inv = T(1) / static_cast<T>(L);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t l = 0; l < L; ++l) {
      const T* src = xv.data() + (b * L + l) * D;
      for (std::int64_t j = 0; j < D; ++j) out[b * D + j] += src[j];
    }
    for (std::int64_t j = 0; j < D; ++j) out[b * D + j] *= inv;
  }
  return make_result<T>(std::move(out), {x}, [B, L, D, inv](Node<T>& self) {
    auto& gx = self.parents[0]->grad;
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t l = 0; l < L; ++l) {
        for (std::int64_t j = 0; j < D; ++j) gx[(b * L + l) * D + j] += self.grad[b * D + j] * inv;
      }
    }
  });
}

// ---------------------------------------------------------------- losses

std::vector<double> stablemax(std::span<const double> logits) {
  std::vector<double> s(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    s[i] = stable_s(logits[i]);
    total += s[i];
  }
  for (auto& v : s) v /= total;
  return s;
}

template <class T>
Var<T> stablemax_cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets,
                               std::span<const std::uint8_t> mask) {
  const auto& lv = logits.value();
  const std::int64_t V = lv.dim(-1);
  const std::int64_t positions = lv.size() / V;
  if (static_cast<std::int64_t>(targets.size()) != positions || static_cast<std::int64_t>(mask.size()) != positions) {
    throw std::invalid_argument("stablemax_cross_entropy: targets/mask size mismatch");
  }
  std::int64_t counted = 0;
  for (auto m : mask) counted += m != 0;
  if (counted == 0) throw std::invalid_argument("stablemax_cross_entropy: every position is masked");
  const double inv_count = 1.0 / static_cast<double>(counted);

  double loss = 0.0;
  for (std::int64_t p = 0; p < positions; ++p) {
    if (!mask[static_cast<std::size_t>(p)]) continue;
    const auto t = targets[static_cast<std::size_t>(p)];
    if (t < 0 || t >= V) throw std::out_of_range("stablemax_cross_entropy: target out of range");
    const T* row = lv.data() + p * V;
    double total = 0.0;
    for (std::int64_t j = 0; j < V; ++j) total += stable_s(static_cast<double>(row[j]));
    loss += std::log(total) - std::log(stable_s(static_cast<double>(row[t])));
  }
  Tensor<T> out(Shape{}, static_cast<T>(loss * inv_count));
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return make_result<T>(std::move(out), {logits},
                        [tgt = std::move(tgt), msk = std::move(msk), V, positions, inv_count](Node<T>& self) {
                          auto& ln = *self.parents[0];
                          const double g = static_cast<double>(self.grad[0]) * inv_count;
                          for (std::int64_t p = 0; p < positions; ++p) {
                            if (!msk[static_cast<std::size_t>(p)]) continue;
                            const T* row = ln.value.data() + p * V;
                            T* grow = ln.grad.data() + p * V;
                            double total = 0.0;
                            for (std::int64_t j = 0; j < V; ++j) total += stable_s(static_cast<double>(row[j]));
                            for (std::int64_t j = 0; j < V; ++j) {
                              grow[j] += static_cast<T>(g * stable_ds(static_cast<double>(row[j])) / total);
                            }
                            const auto t = tgt[static_cast<std::size_t>(p)];
                            const double ut = static_cast<double>(row[t]);
                            grow[t] -= static_cast<T>(g * stable_ds(ut) / stable_s(ut));
                          }
                        });
}

template <class T>
Var<T> bce_with_logits(const Var<T>& logits, int column, std::span<const double> targets) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || column < 0 || column >= lv.dim(1)) throw std::invalid_argument("bce_with_logits: bad column");
  const std::int64_t B = lv.dim(0), C = lv.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != B) throw std::invalid_argument("bce_with_logits: target size mismatch");
  double loss = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    const double x = static_cast<double>(lv[b * C + column]);
    const double t = targets[static_cast<std::size_t>(b)];
    // max(x,0) - x t + log(1 + exp(-|x|))
    loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor<T> out(Shape{}, static_cast<T>(loss / static_cast<double>(B)));
  std::vector<double> tgt(targets.begin(), targets.end());
  return make_result<T>(std::move(out), {logits}, [tgt = std::move(tgt), B, C, column](Node<T>& self) {
    auto& ln = *self.parents[0];
    const double g = static_cast<double>(self.grad[0]) / static_cast<double>(B);
    for (std::int64_t b = 0; b < B; ++b) {
      const double x = static_cast<double>(ln.value[b * C + column]);
      const double sig = 1.0 / (1.0 + std::exp(-x));
      ln.grad[b * C + column] += static_cast<T>(g * (sig - tgt[static_cast<std::size_t>(b)]));
    }
  });
}

#define TRM_INSTANTIATE_OPS(T)                                                                                    \
  template class RotaryTable<T>;                                                                                  \
  template std::pair<Tensor<T>, Tensor<T>> rotary_apply(const Tensor<T>&, const Tensor<T>&, double);             \
  template std::vector<T> rmsnorm(std::span<const T>, std::span<const T>, double);                               \
  template Var<T> add(const std::vector<Var<T>>&);                                                                \
  template Var<T> scale(const Var<T>&, T);                                                                        \
  template Var<T> linear(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> rmsnorm(const Var<T>&, const Var<T>&, double);                                                  \
  template Var<T> swiglu(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> sequence_mix(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> self_attention(const Var<T>&, int, std::shared_ptr<const RotaryTable<T>>);                                     \
  template Var<T> embedding(const Var<T>&, std::span<const std::int32_t>, Shape, T);                             \
  template Var<T> broadcast_rows(const Var<T>&, std::span<const std::int32_t>, std::int64_t);                    \
  template Var<T> mean_over_sequence(const Var<T>&);                                                              \
  template Var<T> stablemax_cross_entropy(const Var<T>&, std::span<const std::int32_t>,                          \
                                          std::span<const std::uint8_t>);                                         \
  template Var<T> bce_with_logits(const Var<T>&, int, std::span<const double>);

TRM_INSTANTIATE_OPS(float)
TRM_INSTANTIATE_OPS(double)

}  // namespace trm
