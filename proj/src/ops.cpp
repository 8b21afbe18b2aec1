#include "tsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsr/gemm.hpp"

namespace tsr::ops {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw dimension_error(msg);
}

thread_local std::vector<double> g_col;
thread_local std::vector<double> g_dcol;

// im2col for [c,h,w] inputs; col is [c*k*k, oh*ow].
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            double* col) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col + (static_cast<std::int64_t>(ch) * k * k + ki * k + kj) *
                                (static_cast<std::int64_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ki - pad;
          double* dst = row + static_cast<std::int64_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::int64_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kj - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int c, int h, int w, int k, int stride, int pad, int oh,
                int ow, double* dx) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col + (static_cast<std::int64_t>(ch) * k * k + ki * k + kj) *
                                      (static_cast<std::int64_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ki - pad;
          if (iy < 0 || iy >= h) continue;
          double* dst = dx + (static_cast<std::int64_t>(ch) * h + iy) * w;
          const double* src = row + static_cast<std::int64_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kj - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  gemm_nn(a.ptr(), b.ptr(), out.ptr(), m, k, n, false);

  const int an = track_input(tape, a);
  const int bn = track_input(tape, b);
  if (an >= 0 || bn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    Tensor av = a.detached(), bv = b.detached();
    tape->set_backward(id, [id, an, bn, av, bv, m, k, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (an >= 0) gemm_nt(g, bv.ptr(), tp.grad(an).data(), m, n, k, true);
      if (bn >= 0) gemm_tn(av.ptr(), g, tp.grad(bn).data(), k, m, n, true);
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
          "matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = Tensor::zeros({m, n});
  gemm_nt(a.ptr(), b.ptr(), out.ptr(), m, k, n, false);

  const int an = track_input(tape, a);
  const int bn = track_input(tape, b);
  if (an >= 0 || bn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    Tensor av = a.detached(), bv = b.detached();
    tape->set_backward(id, [id, an, bn, av, bv, m, k, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (an >= 0) gemm_nn(g, bv.ptr(), tp.grad(an).data(), m, n, k, true);
      if (bn >= 0) gemm_tn(g, av.ptr(), tp.grad(bn).data(), n, m, k, true);
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  const std::int64_t n = a.numel();
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];

  const int an = track_input(tape, a);
  const int bn = track_input(tape, b);
  if (an >= 0 || bn >= 0) {
    const int id = tape->add(n, nullptr);
    tape->set_backward(id, [id, an, bn, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (an >= 0) {
        double* da = tp.grad(an).data();
        for (std::int64_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (bn >= 0) {
        double* db = tp.grad(bn).data();
        for (std::int64_t i = 0; i < n; ++i) db[i] += g[i];
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  const std::int64_t n = a.numel();
  const double* pa = a.ptr();
  const double* pb = b.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];

  const int an = track_input(tape, a);
  const int bn = track_input(tape, b);
  if (an >= 0 || bn >= 0) {
    const int id = tape->add(n, nullptr);
    Tensor av = a.detached(), bv = b.detached();
    tape->set_backward(id, [id, an, bn, av, bv, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (an >= 0) {
        double* da = tp.grad(an).data();
        const double* pb2 = bv.ptr();
        for (std::int64_t i = 0; i < n; ++i) da[i] += g[i] * pb2[i];
      }
      if (bn >= 0) {
        double* db = tp.grad(bn).data();
        const double* pa2 = av.ptr();
        for (std::int64_t i = 0; i < n; ++i) db[i] += g[i] * pa2[i];
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& bias) {
  require(x.ndim() == 2, "add_rowvec: x must be 2-d, got " + shape_str(x.shape()));
  require(bias.numel() == x.dim(1), "add_rowvec: bias length " + shape_str(bias.shape()) +
                                        " does not match row width of " + shape_str(x.shape()));
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = Tensor::zeros({n, d});
  const double* px = x.ptr();
  const double* pb = bias.ptr();
  double* po = out.ptr();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) po[i * d + j] = px[i * d + j] + pb[j];
  }

  const int xn = track_input(tape, x);
  const int bn = track_input(tape, bias);
  if (xn >= 0 || bn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    tape->set_backward(id, [id, xn, bn, n, d](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (xn >= 0) {
        double* dx = tp.grad(xn).data();
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n) * d; ++i) dx[i] += g[i];
      }
      if (bn >= 0) {
        double* db = tp.grad(bn).data();
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < d; ++j) db[j] += g[i * d + j];
        }
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor add_channel_bias(Tape* tape, const Tensor& x, const Tensor& bias) {
  require(x.ndim() >= 1 && bias.numel() == x.dim(0),
          "add_channel_bias: bias " + shape_str(bias.shape()) + " vs channels of " +
              shape_str(x.shape()));
  const int c = x.dim(0);
  const std::int64_t s = x.numel() / c;
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.ptr();
  const double* pb = bias.ptr();
  double* po = out.ptr();
  for (int ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < s; ++i) po[ch * s + i] = px[ch * s + i] + pb[ch];
  }

  const int xn = track_input(tape, x);
  const int bn = track_input(tape, bias);
  if (xn >= 0 || bn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    tape->set_backward(id, [id, xn, bn, c, s](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (xn >= 0) {
        double* dx = tp.grad(xn).data();
        for (std::int64_t i = 0; i < c * s; ++i) dx[i] += g[i];
      }
      if (bn >= 0) {
        double* db = tp.grad(bn).data();
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < s; ++i) acc += g[ch * s + i];
          db[ch] += acc;
        }
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  const std::int64_t n = x.numel();
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) po[i] = c * px[i];

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(n, nullptr);
    tape->set_backward(id, [id, xn, c, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      double* dx = tp.grad(xn).data();
      for (std::int64_t i = 0; i < n; ++i) dx[i] += c * g[i];
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::int64_t n = x.numel();
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(n, nullptr);
    Tensor xv = x.detached();
    // Gradient at exactly 0 is defined as 0.
    tape->set_backward(id, [id, xn, xv, n](Tape& tp) {
      const double* g = tp.grad(id).data();
      const double* px2 = xv.ptr();
      double* dx = tp.grad(xn).data();
      for (std::int64_t i = 0; i < n; ++i) {
        if (px2[i] > 0.0) dx[i] += g[i];
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor transpose(Tape* tape, const Tensor& x) {
  require(x.ndim() == 2, "transpose: x must be 2-d, got " + shape_str(x.shape()));
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = Tensor::zeros({d, n});
  const double* px = x.ptr();
  double* po = out.ptr();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) po[j * n + i] = px[i * d + j];
  }

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    tape->set_backward(id, [id, xn, n, d](Tape& tp) {
      const double* g = tp.grad(id).data();
      double* dx = tp.grad(xn).data();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) dx[i * d + j] += g[j * n + i];
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor stack_rows(Tape* tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw dimension_error("stack_rows: no rows");
  const std::int64_t d = rows.front().numel();
  for (const auto& r : rows) {
    require(r.numel() == d, "stack_rows: row width mismatch");
  }
  const int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, static_cast<int>(d)});
  double* po = out.ptr();
  for (int i = 0; i < n; ++i) {
    std::copy(rows[static_cast<std::size_t>(i)].ptr(),
              rows[static_cast<std::size_t>(i)].ptr() + d, po + i * d);
  }

  if (tape) {
    std::vector<int> ids(rows.size(), -1);
    bool tracked = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ids[i] = track_input(tape, rows[i]);
      tracked = tracked || ids[i] >= 0;
    }
    if (tracked) {
      const int id = tape->add(out.numel(), nullptr);
      tape->set_backward(id, [id, ids, d](Tape& tp) {
        const double* g = tp.grad(id).data();
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (ids[i] < 0) continue;
          double* dr = tp.grad(ids[i]).data();
          const double* gs = g + static_cast<std::int64_t>(i) * d;
          for (std::int64_t j = 0; j < d; ++j) dr[j] += gs[j];
        }
      });
      out.set_node(id, tape);
    }
  }
  return out;
}

Tensor mean_rows(Tape* tape, const Tensor& x) {
  require(x.ndim() == 2, "mean_rows: x must be 2-d, got " + shape_str(x.shape()));
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = Tensor::zeros({1, d});
  const double* px = x.ptr();
  double* po = out.ptr();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) po[j] += px[i * d + j];
  }
  const double inv = 1.0 / n;
  for (int j = 0; j < d; ++j) po[j] *= inv;

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(d, nullptr);
    tape->set_backward(id, [id, xn, n, d, inv](Tape& tp) {
      const double* g = tp.grad(id).data();
      double* dx = tp.grad(xn).data();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) dx[i * d + j] += g[j] * inv;
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor slice_row(Tape* tape, const Tensor& x, int row) {
  require(x.ndim() == 2 && row >= 0 && row < x.dim(0),
          "slice_row: row " + std::to_string(row) + " out of " + shape_str(x.shape()));
  const int d = x.dim(1);
  Tensor out = Tensor::zeros({1, d});
  std::copy(x.ptr() + static_cast<std::int64_t>(row) * d,
            x.ptr() + static_cast<std::int64_t>(row + 1) * d, out.ptr());

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(d, nullptr);
    tape->set_backward(id, [id, xn, row, d](Tape& tp) {
      const double* g = tp.grad(id).data();
      double* dx = tp.grad(xn).data();
      for (int j = 0; j < d; ++j) dx[static_cast<std::int64_t>(row) * d + j] += g[j];
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor channel_mean(Tape* tape, const Tensor& x) {
  require(x.ndim() >= 1, "channel_mean: undefined tensor");
  const int c = x.dim(0);
  const std::int64_t s = x.numel() / c;
  Tensor out = Tensor::zeros({1, c});
  const double* px = x.ptr();
  double* po = out.ptr();
  const double inv = 1.0 / static_cast<double>(s);
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < s; ++i) acc += px[ch * s + i];
    po[ch] = acc * inv;
  }

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(c, nullptr);
    tape->set_backward(id, [id, xn, c, s, inv](Tape& tp) {
      const double* g = tp.grad(id).data();
      double* dx = tp.grad(xn).data();
      for (int ch = 0; ch < c; ++ch) {
        const double gv = g[ch] * inv;
        for (std::int64_t i = 0; i < s; ++i) dx[ch * s + i] += gv;
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor softmax_rows(Tape* tape, const Tensor& x) {
  require(x.ndim() == 2, "softmax_rows: x must be 2-d, got " + shape_str(x.shape()));
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = Tensor::zeros({n, d});
  const double* px = x.ptr();
  double* po = out.ptr();
  for (int i = 0; i < n; ++i) {
    const double* row = px + i * d;
    double mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      po[i * d + j] = std::exp(row[j] - mx);
      sum += po[i * d + j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < d; ++j) po[i * d + j] *= inv;
  }

  const int xn = track_input(tape, x);
  if (xn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    Tensor yv = out.detached();
    tape->set_backward(id, [id, xn, yv, n, d](Tape& tp) {
      const double* g = tp.grad(id).data();
      const double* y = yv.ptr();
      double* dx = tp.grad(xn).data();
      for (int i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += g[i * d + j] * y[i * d + j];
        for (int j = 0; j < d; ++j) dx[i * d + j] += y[i * d + j] * (g[i * d + j] - dot);
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, int stride, int padding) {
  require(input.ndim() == 3, "conv2d: input must be [c,h,w], got " + shape_str(input.shape()));
  require(kernel.ndim() == 4 && kernel.dim(2) == kernel.dim(3),
          "conv2d: kernel must be [co,ci,k,k], got " + shape_str(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be positive");
  require(padding >= 0, "conv2d: padding must be non-negative");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = kernel.dim(0), ci = kernel.dim(1), k = kernel.dim(2);
  require(ci == c, "conv2d: input channels " + shape_str(input.shape()) +
                       " do not match kernel " + shape_str(kernel.shape()));
  require(k <= h + 2 * padding && k <= w + 2 * padding,
          "conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
              shape_str(input.shape()));
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  const std::int64_t ckk = static_cast<std::int64_t>(c) * k * k;
  const std::int64_t os = static_cast<std::int64_t>(oh) * ow;

  if (g_col.size() < static_cast<std::size_t>(ckk * os)) {
    g_col.resize(static_cast<std::size_t>(ckk * os));
  }
  im2col(input.ptr(), c, h, w, k, stride, padding, oh, ow, g_col.data());

  Tensor out = Tensor::zeros({co, oh, ow});
  gemm_nn(kernel.ptr(), g_col.data(), out.ptr(), co, ckk, os, false);

  const int xn = track_input(tape, input);
  const int kn = track_input(tape, kernel);
  if (xn >= 0 || kn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    Tensor xv = input.detached(), kv = kernel.detached();
    tape->set_backward(id, [id, xn, kn, xv, kv, c, h, w, k, co, stride, padding, oh, ow, ckk,
                            os](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (g_col.size() < static_cast<std::size_t>(ckk * os)) {
        g_col.resize(static_cast<std::size_t>(ckk * os));
      }
      if (kn >= 0) {
        im2col(xv.ptr(), c, h, w, k, stride, padding, oh, ow, g_col.data());
        gemm_nt(g, g_col.data(), tp.grad(kn).data(), co, os, ckk, true);
      }
      if (xn >= 0) {
        if (g_dcol.size() < static_cast<std::size_t>(ckk * os)) {
          g_dcol.resize(static_cast<std::size_t>(ckk * os));
        }
        gemm_tn(kv.ptr(), g, g_dcol.data(), ckk, co, os, false);
        col2im_add(g_dcol.data(), c, h, w, k, stride, padding, oh, ow, tp.grad(xn).data());
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor conv1d(Tape* tape, const Tensor& input, const Tensor& kernel, int padding) {
  require(input.ndim() == 2, "conv1d: input must be [c,l], got " + shape_str(input.shape()));
  require(kernel.ndim() == 3, "conv1d: kernel must be [co,ci,k], got " + shape_str(kernel.shape()));
  require(padding >= 0, "conv1d: padding must be non-negative");
  const int c = input.dim(0), l = input.dim(1);
  const int co = kernel.dim(0), ci = kernel.dim(1), k = kernel.dim(2);
  require(ci == c, "conv1d: channel mismatch " + shape_str(input.shape()) + " vs " +
                       shape_str(kernel.shape()));
  require(k <= l + 2 * padding, "conv1d: kernel larger than padded input");
  const int ol = l + 2 * padding - k + 1;
  const std::int64_t ck = static_cast<std::int64_t>(c) * k;

  std::vector<double> col(static_cast<std::size_t>(ck * ol));
  const double* px = input.ptr();
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      double* row = col.data() + (static_cast<std::int64_t>(ch) * k + ki) * ol;
      for (int o = 0; o < ol; ++o) {
        const int ix = o + ki - padding;
        row[o] = (ix >= 0 && ix < l) ? px[ch * l + ix] : 0.0;
      }
    }
  }

  Tensor out = Tensor::zeros({co, ol});
  gemm_nn(kernel.ptr(), col.data(), out.ptr(), co, ck, ol, false);

  const int xn = track_input(tape, input);
  const int kn = track_input(tape, kernel);
  if (xn >= 0 || kn >= 0) {
    const int id = tape->add(out.numel(), nullptr);
    Tensor kv = kernel.detached();
    auto col_keep = std::make_shared<std::vector<double>>(std::move(col));
    tape->set_backward(id, [id, xn, kn, kv, col_keep, c, l, k, co, padding, ol, ck](Tape& tp) {
      const double* g = tp.grad(id).data();
      if (kn >= 0) gemm_nt(g, col_keep->data(), tp.grad(kn).data(), co, ol, ck, true);
      if (xn >= 0) {
        std::vector<double> dcol(static_cast<std::size_t>(ck * ol));
        gemm_tn(kv.ptr(), g, dcol.data(), ck, co, ol, false);
        double* dx = tp.grad(xn).data();
        for (int ch = 0; ch < c; ++ch) {
          for (int ki = 0; ki < k; ++ki) {
            const double* row = dcol.data() + (static_cast<std::int64_t>(ch) * k + ki) * ol;
            for (int o = 0; o < ol; ++o) {
              const int ix = o + ki - padding;
              if (ix >= 0 && ix < l) dx[ch * l + ix] += row[o];
            }
          }
        }
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             const std::vector<std::int64_t>& labels) {
  require(logits.ndim() == 2, "softmax_cross_entropy: logits must be [b,k], got " +
                                  shape_str(logits.shape()));
  const int b = logits.dim(0), k = logits.dim(1);
  require(static_cast<int>(labels.size()) == b,
          "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
              std::to_string(b));
  for (int i = 0; i < b; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= k) {
      throw label_error("label " + std::to_string(labels[static_cast<std::size_t>(i)]) +
                        " out of range [0," + std::to_string(k) + ") at batch index " +
                        std::to_string(i));
    }
  }
  const double* z = logits.ptr();
  std::vector<double> probs(static_cast<std::size_t>(b) * k);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = z + i * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      probs[static_cast<std::size_t>(i * k + j)] = std::exp(row[j] - mx);
      sum += probs[static_cast<std::size_t>(i * k + j)];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < k; ++j) probs[static_cast<std::size_t>(i * k + j)] *= inv;
    loss += mx + std::log(sum) - row[labels[static_cast<std::size_t>(i)]];
  }
  loss /= b;
  Tensor out = Tensor::scalar(loss);

  const int zn = track_input(tape, logits);
  if (zn >= 0) {
    const int id = tape->add(1, nullptr);
    auto probs_keep = std::make_shared<std::vector<double>>(std::move(probs));
    auto labels_keep = std::make_shared<std::vector<std::int64_t>>(labels);
    tape->set_backward(id, [id, zn, probs_keep, labels_keep, b, k](Tape& tp) {
      const double gs = tp.grad(id)[0];
      double* dz = tp.grad(zn).data();
      const double invb = 1.0 / b;
      for (int i = 0; i < b; ++i) {
        for (int j = 0; j < k; ++j) {
          double v = (*probs_keep)[static_cast<std::size_t>(i * k + j)];
          if (j == (*labels_keep)[static_cast<std::size_t>(i)]) v -= 1.0;
          dz[i * k + j] += gs * v * invb;
        }
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor bce_with_logits(Tape* tape, const Tensor& logits, const std::vector<double>& targets) {
  const std::int64_t n = logits.numel();
  require(static_cast<std::int64_t>(targets.size()) == n,
          "bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
              std::to_string(n) + " logits");
  const double* z = logits.ptr();
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double zi = z[i];
    loss += std::max(zi, 0.0) - zi * targets[static_cast<std::size_t>(i)] +
            std::log1p(std::exp(-std::abs(zi)));
  }
  loss /= static_cast<double>(n);
  Tensor out = Tensor::scalar(loss);

  const int zn = track_input(tape, logits);
  if (zn >= 0) {
    const int id = tape->add(1, nullptr);
    Tensor zv = logits.detached();
    auto t_keep = std::make_shared<std::vector<double>>(targets);
    tape->set_backward(id, [id, zn, zv, t_keep, n](Tape& tp) {
      const double gs = tp.grad(id)[0];
      const double* z2 = zv.ptr();
      double* dz = tp.grad(zn).data();
      const double invn = 1.0 / static_cast<double>(n);
      for (std::int64_t i = 0; i < n; ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-z2[i]));
        dz[i] += gs * (sig - (*t_keep)[static_cast<std::size_t>(i)]) * invn;
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor mse_loss(Tape* tape, const Tensor& pred, const Tensor& target) {
  require(pred.shape() == target.shape(), "mse_loss: shape mismatch " + shape_str(pred.shape()) +
                                              " vs " + shape_str(target.shape()));
  const std::int64_t n = pred.numel();
  const double* pp = pred.ptr();
  const double* pt = target.ptr();
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = pp[i] - pt[i];
    loss += d * d;
  }
  loss /= static_cast<double>(n);
  Tensor out = Tensor::scalar(loss);

  const int pn = track_input(tape, pred);
  const int tn = track_input(tape, target);
  if (pn >= 0 || tn >= 0) {
    const int id = tape->add(1, nullptr);
    Tensor pv = pred.detached(), tv = target.detached();
    tape->set_backward(id, [id, pn, tn, pv, tv, n](Tape& tp) {
      const double gs = tp.grad(id)[0];
      const double* p2 = pv.ptr();
      const double* t2 = tv.ptr();
      const double c = 2.0 / static_cast<double>(n);
      if (pn >= 0) {
        double* dp = tp.grad(pn).data();
        for (std::int64_t i = 0; i < n; ++i) dp[i] += gs * c * (p2[i] - t2[i]);
      }
      if (tn >= 0) {
        double* dt = tp.grad(tn).data();
        for (std::int64_t i = 0; i < n; ++i) dt[i] -= gs * c * (p2[i] - t2[i]);
      }
    });
    out.set_node(id, tape);
  }
  return out;
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h) {
  if (!(h > 0.0)) throw contract_error("finite_difference_grad: h must be positive");
  Tensor grad = Tensor::zeros(x.shape());
  Tensor probe = x.clone();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.data()[static_cast<std::size_t>(i)];
    probe.data()[static_cast<std::size_t>(i)] = orig + h;
    const double fp = f(probe);
    probe.data()[static_cast<std::size_t>(i)] = orig - h;
    const double fm = f(probe);
    probe.data()[static_cast<std::size_t>(i)] = orig;
    grad.data()[static_cast<std::size_t>(i)] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace tsr::ops
