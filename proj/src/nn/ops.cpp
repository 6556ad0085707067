// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "camnoise/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>

#include "camnoise/parallel.hpp"

namespace camnoise::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, T* cols) {
  const int p = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
        const T* plane = x + static_cast<std::size_t>(ci) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          T* out = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, T(0));
            continue;
          }
          const T* in = plane + static_cast<std::size_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - p;
            out[xx] = (sx < 0 || sx >= w) ? T(0) : in[sx];
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, T* dx) {
  const int p = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
        T* plane = dx + static_cast<std::size_t>(ci) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - p;
          if (sy < 0 || sy >= h) continue;
          const T* in = row + static_cast<std::size_t>(y) * w;
          T* out = plane + static_cast<std::size_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - p;
            if (sx >= 0 && sx < w) out[sx] += in[xx];
          }
        }
      }
}

}  // namespace

template <typename T>
typename Graph<T>::Var conv2d(Graph<T>& g, typename Graph<T>::Var x, typename Graph<T>::Var w,
                              typename Graph<T>::Var b) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(w).shape();
  const auto& bs = g.value(b).shape();
  if (xs.size() != 4) throw ShapeError("conv2d: input must be rank 4, got " + shape_string(xs));
  if (ws.size() != 4 || ws[2] != ws[3] || ws[2] % 2 == 0)
    throw ShapeError("conv2d: weights must be (O, C, k, k) with odd k, got " + shape_string(ws));
  if (ws[1] != xs[1]) throw ShapeError("conv2d: channel mismatch, input " + shape_string(xs) + " vs weights " + shape_string(ws));
  if (bs != Shape{ws[0]}) throw ShapeError("conv2d: bias " + shape_string(bs) + " does not match weights " + shape_string(ws));

  const int n = xs[0], c = xs[1], h = xs[2], wd = xs[3], o = ws[0], k = ws[2];
  const int ckk = c * k * k;
  const std::size_t hw = static_cast<std::size_t>(h) * wd;
  Tensor<T> out({n, o, h, wd});
  {
    const T* xd = g.value(x).data();
    CMapM<T> wm(g.value(w).data(), o, ckk);
    const T* bd = g.value(b).data();
    T* od = out.data();
    parallel_for(static_cast<std::size_t>(n), g.threads(), [&](std::size_t s) {
      const T* xn = xd + s * static_cast<std::size_t>(c) * hw;
      MapM<T> on(od + s * static_cast<std::size_t>(o) * hw, o, static_cast<Eigen::Index>(hw));
      if (k == 1) {
        on.noalias() = wm * CMapM<T>(xn, c, static_cast<Eigen::Index>(hw));
      } else {
        Mat<T> cols(ckk, static_cast<Eigen::Index>(hw));
        im2col(xn, c, h, wd, k, cols.data());
        on.noalias() = wm * cols;
      }
      for (int oc = 0; oc < o; ++oc) on.row(oc).array() += bd[oc];
    });
  }

  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    const T* xd = gr.value(x).data();
    CMapM<T> wm(gr.value(w).data(), o, ckk);
    const T* dyd = gr.grad(self).data();
    T* dxd = gr.grad(x).data();
    // Per-sample weight partials, reduced below in sample order.
    std::vector<Mat<T>> dw_part(static_cast<std::size_t>(n));
    std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> db_part(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), gr.threads(), [&](std::size_t s) {
      const T* xn = xd + s * static_cast<std::size_t>(c) * hw;
      CMapM<T> dy(dyd + s * static_cast<std::size_t>(o) * hw, o, static_cast<Eigen::Index>(hw));
      T* dxn = dxd + s * static_cast<std::size_t>(c) * hw;
      db_part[s] = dy.rowwise().sum();
      if (k == 1) {
        CMapM<T> xm(xn, c, static_cast<Eigen::Index>(hw));
        dw_part[s].noalias() = dy * xm.transpose();
        MapM<T>(dxn, c, static_cast<Eigen::Index>(hw)).noalias() += wm.transpose() * dy;
      } else {
        Mat<T> cols(ckk, static_cast<Eigen::Index>(hw));
        im2col(xn, c, h, wd, k, cols.data());
        dw_part[s].noalias() = dy * cols.transpose();
        cols.noalias() = wm.transpose() * dy;
        col2im_add(cols.data(), c, h, wd, k, dxn);
      }
    });
    MapM<T> dw(gr.grad(w).data(), o, ckk);
    T* dbd = gr.grad(b).data();
    for (int s = 0; s < n; ++s) {
      dw += dw_part[static_cast<std::size_t>(s)];
      for (int oc = 0; oc < o; ++oc) dbd[oc] += db_part[static_cast<std::size_t>(s)][oc];
    }
  });
}

template <typename T>
typename Graph<T>::Var relu(Graph<T>& g, typename Graph<T>::Var x) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    const auto xv = gr.value(x).values();
    const auto dy = gr.grad(self).values();
    auto dx = gr.grad(x).values();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xv[i] > T(0)) dx[i] += dy[i];
  });
}

template <typename T>
typename Graph<T>::Var add(Graph<T>& g, typename Graph<T>::Var a, typename Graph<T>::Var b) {
  require_same_shape(g.value(a).shape(), g.value(b).shape(), "add");
  Tensor<T> out = g.value(a);
  const auto bv = g.value(b).values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    const auto dy = gr.grad(self).values();
    for (auto v : {a, b}) {
      auto d = gr.grad(v).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
typename Graph<T>::Var global_max_pool(Graph<T>& g, typename Graph<T>::Var x) {
  const auto& xs = g.value(x).shape();
  if (xs.size() != 4) throw ShapeError("global_max_pool: input must be rank 4, got " + shape_string(xs));
  const int n = xs[0], c = xs[1];
  const std::size_t hw = static_cast<std::size_t>(xs[2]) * xs[3];
  if (hw == 0) throw ShapeError("global_max_pool: empty spatial extent " + shape_string(xs));
  Tensor<T> out({n, c});
  std::vector<std::size_t> argmax(static_cast<std::size_t>(n) * c);
  const T* xd = g.value(x).data();
  for (std::size_t nc = 0; nc < argmax.size(); ++nc) {
    const T* plane = xd + nc * hw;
    std::size_t best = 0;
    for (std::size_t i = 1; i < hw; ++i)
      if (plane[i] > plane[best]) best = i;
    argmax[nc] = nc * hw + best;
    out[nc] = plane[best];
  }
  return g.push(std::move(out), [=, argmax = std::move(argmax)](Graph<T>& gr, typename Graph<T>::Var self) {
    const auto dy = gr.grad(self).values();
    auto dx = gr.grad(x).values();
    for (std::size_t nc = 0; nc < argmax.size(); ++nc) dx[argmax[nc]] += dy[nc];
  });
}

template <typename T>
typename Graph<T>::Var concat(Graph<T>& g, const std::vector<typename Graph<T>::Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int n = g.value(parts.front()).dim(0);
  std::vector<int> widths;
  int total = 0;
  for (auto p : parts) {
    const auto& s = g.value(p).shape();
    if (s.size() != 2 || s[0] != n)
      throw ShapeError("concat: expected (" + std::to_string(n) + ", k), got " + shape_string(s));
    widths.push_back(s[1]);
    total += s[1];
  }
  Tensor<T> out({n, total});
  int offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const T* src = g.value(parts[i]).data();
    for (int r = 0; r < n; ++r)
      std::copy_n(src + static_cast<std::size_t>(r) * widths[i], widths[i],
                  out.data() + static_cast<std::size_t>(r) * total + offset);
    offset += widths[i];
  }
  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    const T* dy = gr.grad(self).data();
    int off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      T* dx = gr.grad(parts[i]).data();
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < widths[i]; ++j)
          dx[static_cast<std::size_t>(r) * widths[i] + j] += dy[static_cast<std::size_t>(r) * total + off + j];
      off += widths[i];
    }
  });
}

template <typename T>
typename Graph<T>::Var dense(Graph<T>& g, typename Graph<T>::Var x, typename Graph<T>::Var w,
                             typename Graph<T>::Var b) {
  const auto& xs = g.value(x).shape();
  const auto& ws = g.value(w).shape();
  const auto& bs = g.value(b).shape();
  if (xs.size() != 2) throw ShapeError("dense: input must be rank 2, got " + shape_string(xs));
  if (ws.size() != 2 || ws[1] != xs[1])
    throw ShapeError("dense: input " + shape_string(xs) + " does not match weights " + shape_string(ws));
  if (bs != Shape{ws[0]}) throw ShapeError("dense: bias " + shape_string(bs) + " does not match weights " + shape_string(ws));
  const int n = xs[0], in = xs[1], o = ws[0];
  Tensor<T> out({n, o});
  {
    MapM<T> om(out.data(), n, o);
    om.noalias() = CMapM<T>(g.value(x).data(), n, in) * CMapM<T>(g.value(w).data(), o, in).transpose();
    const T* bd = g.value(b).data();
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < o; ++j) om(r, j) += bd[j];
  }
  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    CMapM<T> dy(gr.grad(self).data(), n, o);
    CMapM<T> xm(gr.value(x).data(), n, in);
    CMapM<T> wm(gr.value(w).data(), o, in);
    MapM<T>(gr.grad(x).data(), n, in).noalias() += dy * wm;
    MapM<T>(gr.grad(w).data(), o, in).noalias() += dy.transpose() * xm;
    T* db = gr.grad(b).data();
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < o; ++j) db[j] += dy(r, j);
  });
}

template <typename T>
typename Graph<T>::Var mse_loss(Graph<T>& g, typename Graph<T>::Var pred, const Tensor<T>& target) {
  require_same_shape(g.value(pred).shape(), target.shape(), "mse_loss");
  const auto p = g.value(pred).values();
  const auto t = target.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    sum += d * d;
  }
  Tensor<T> out({1}, static_cast<T>(sum / static_cast<double>(p.size())));
  return g.push(std::move(out), [=](Graph<T>& gr, typename Graph<T>::Var self) {
    const double scale = 2.0 * static_cast<double>(gr.grad(self)[0]) / static_cast<double>(target.size());
    const auto pv = gr.value(pred).values();
    const auto tv = target.values();
    auto dp = gr.grad(pred).values();
    for (std::size_t i = 0; i < dp.size(); ++i)
      dp[i] += static_cast<T>(scale * (static_cast<double>(pv[i]) - static_cast<double>(tv[i])));
  });
}

#define CAMNOISE_INSTANTIATE_OPS(T)                                                                            \
  template Graph<T>::Var conv2d<T>(Graph<T>&, Graph<T>::Var, Graph<T>::Var, Graph<T>::Var);                   \
  template Graph<T>::Var relu<T>(Graph<T>&, Graph<T>::Var);                                                   \
  template Graph<T>::Var add<T>(Graph<T>&, Graph<T>::Var, Graph<T>::Var);                                     \
  template Graph<T>::Var global_max_pool<T>(Graph<T>&, Graph<T>::Var);                                        \
  template Graph<T>::Var concat<T>(Graph<T>&, const std::vector<Graph<T>::Var>&);                             \
  template Graph<T>::Var dense<T>(Graph<T>&, Graph<T>::Var, Graph<T>::Var, Graph<T>::Var);                    \
  template Graph<T>::Var mse_loss<T>(Graph<T>&, Graph<T>::Var, const Tensor<T>&);

CAMNOISE_INSTANTIATE_OPS(float)
CAMNOISE_INSTANTIATE_OPS(double)

}  // namespace camnoise::nn
