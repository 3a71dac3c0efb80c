#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"
#include "ddrppg/net/network.hpp"
#include "ddrppg/signal/correlation.hpp"
#include "ddrppg/signal/spectrum.hpp"
#include "ddrppg/signal/trace.hpp"

namespace ddrppg {

using TraceSet = std::vector<std::vector<double>>;
using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

/// A scalar loss and its gradient with respect to each input trace.
struct Graded {
  double value = 0.0;
  TraceSet grad;
};

inline TraceSet zeros_like(const TraceSet& x) {
  TraceSet g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i].assign(x[i].size(), 0.0);
  return g;
}

inline TraceSet samples_of(const std::vector<SignalTrace>& traces) {
  TraceSet out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(t.vec());
  return out;
}

namespace loss_detail {

inline std::vector<double> centered(const std::vector<double>& a) {
  const double m = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - m;
  return out;
}

/// NP(a, b) = 1 - pearson(a, b); adds k * dNP/da and k * dNP/db.
inline double np_with_grad(const std::vector<double>& a, const std::vector<double>& b, double k, std::vector<double>* ga,
                           std::vector<double>* gb) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch, "traces differ in length");
  const double r = pearson(a, b);
  if (k == 0.0 || (!ga && !gb)) return 1.0 - r;
  const auto ca = centered(a), cb = centered(b);
  double ea = 0.0, eb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ea += ca[t] * ca[t];
    eb += cb[t] * cb[t];
  }
  const double inv = 1.0 / std::sqrt(ea * eb);
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (ga) (*ga)[t] -= k * (cb[t] * inv - r * ca[t] / ea);
    if (gb) (*gb)[t] -= k * (ca[t] * inv - r * cb[t] / eb);
  }
  return 1.0 - r;
}

inline double euclidean(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  return std::sqrt(s);
}

/// Adds k * d|p - q| / dp to gp and the opposite to gq (zero at p == q).
inline void euclidean_grad(const std::vector<double>& p, const std::vector<double>& q, double d, double k,
                           std::vector<double>& gp, std::vector<double>& gq) {
  if (d == 0.0 || k == 0.0) return;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = k * (p[i] - q[i]) / d;
    gp[i] += v;
    gq[i] -= v;
  }
}

/// s(i, h) for one anchor i over the terms of its denominator.
struct ContrastRow {
  std::vector<double> s;
};

/// log(exp(s_j) / sum_h exp(s_h) + 1); adds scale * d/ds_h into gs.
inline double pair_term(const ContrastRow& row, std::size_t j_pos, double scale, std::vector<double>* gs) {
  double D = 0.0;
  for (double v : row.s) D += std::exp(v);
  const double q = std::exp(row.s[j_pos]) / D;
  if (gs) {
    const double c = scale * q / (1.0 + q);
    for (std::size_t h = 0; h < row.s.size(); ++h) (*gs)[h] -= c * std::exp(row.s[h]) / D;
    (*gs)[j_pos] += c;
  }
  return std::log(q + 1.0);
}

}  // namespace loss_detail

/// Mean over (n_fg[l], n_bg[l]) of NP.
inline Graded loss_nc(const TraceSet& n_fg, const TraceSet& n_bg, TraceSet* grad_bg = nullptr) {
  require(n_fg.size() == n_bg.size(), ErrorCode::shape_mismatch, "fg and bg interference sets differ in size");
  require(!n_fg.empty(), ErrorCode::undefined_loss, "no interference pairs");
  Graded out;
  out.grad = zeros_like(n_fg);
  if (grad_bg) *grad_bg = zeros_like(n_bg);
  const double k = 1.0 / static_cast<double>(n_fg.size());
  for (std::size_t l = 0; l < n_fg.size(); ++l)
    out.value += k * loss_detail::np_with_grad(n_fg[l], n_bg[l], k, &out.grad[l], grad_bg ? &(*grad_bg)[l] : nullptr);
  return out;
}

struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t K = 0;
  TraceSet centroids;
};

inline constexpr std::size_t kKmeansIterations = 100;

inline std::vector<double> z_normalized(const std::vector<double>& x) {
  auto c = loss_detail::centered(x);
  double e = 0.0;
  for (double v : c) e += v * v;
  const double sd = std::sqrt(e / static_cast<double>(c.size()));
  if (!(sd > 0.0)) return std::vector<double>(c.size(), 0.0);
  for (auto& v : c) v /= sd;
  return c;
}

/// K-Means on z-normalised traces. Points are processed in lexicographic
/// order, so the result does not depend on the input order.
inline ClusterAssignment cluster_interference(const TraceSet& traces, std::size_t K, std::uint64_t seed) {
  const std::size_t n = traces.size();
  require(K >= 1, ErrorCode::invalid_argument, "K must be at least 1");
  require(K <= n, ErrorCode::invalid_argument,
          "K = " + std::to_string(K) + " exceeds the number of traces (" + std::to_string(n) + ")");
  for (const auto& t : traces)
    require(t.size() == traces[0].size() && t.size() >= 2, ErrorCode::shape_mismatch, "traces differ in length");

  TraceSet z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = z_normalized(traces[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  auto dist2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };

  ClusterAssignment out;
  out.K = K;
  out.labels.assign(n, 0);
  if (K == n) {
    for (std::size_t i = 0; i < n; ++i) out.labels[order[i]] = i;
    for (std::size_t i = 0; i < n; ++i) out.centroids.push_back(z[order[i]]);
    return out;
  }

  // k-means++ seeding over the sorted points
  Rng rng(derive_seed(seed, {0xc1, n, K}));
  std::vector<std::size_t> centres{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> d2(n);
  while (centres.size() < K) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : centres) best = std::min(best, dist2(z[order[p]], z[order[c]]));
      d2[p] = best;
      total += best;
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t p = 0; p < n && pick == n; ++p) {
        if (d2[p] > 0.0 && u < d2[p]) pick = p;
        u -= d2[p];
      }
      if (pick == n)
        for (std::size_t p = n; p-- > 0 && pick == n;)
          if (d2[p] > 0.0) pick = p;
    } else {
      for (std::size_t p = 0; p < n && pick == n; ++p)
        if (std::find(centres.begin(), centres.end(), p) == centres.end()) pick = p;
    }
    centres.push_back(pick);
  }
  TraceSet cent;
  for (std::size_t c : centres) cent.push_back(z[order[c]]);

  std::vector<std::size_t> lab(n, K);
  for (std::size_t iter = 0; iter < kKmeansIterations; ++iter) {
    bool changed = false;
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double bd = dist2(z[order[p]], cent[0]);
      for (std::size_t c = 1; c < K; ++c) {
        const double d = dist2(z[order[p]], cent[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (lab[p] != best) changed = true;
      lab[p] = best;
    }
    // empty clusters take the point farthest from its own centroid
    for (std::size_t c = 0; c < K; ++c) {
      if (std::find(lab.begin(), lab.end(), c) != lab.end()) continue;
      std::vector<std::size_t> size(K, 0);
      for (auto l : lab) ++size[l];
      std::size_t far = n;
      double fd = -1.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (size[lab[p]] < 2) continue;
        const double d = dist2(z[order[p]], cent[lab[p]]);
        if (d > fd) {
          fd = d;
          far = p;
        }
      }
      lab[far] = c;
      changed = true;
    }
    for (std::size_t c = 0; c < K; ++c) {
      std::vector<double> m(z[0].size(), 0.0);
      std::size_t cnt = 0;
      for (std::size_t p = 0; p < n; ++p)
        if (lab[p] == c) {
          for (std::size_t t = 0; t < m.size(); ++t) m[t] += z[order[p]][t];
          ++cnt;
        }
      for (auto& v : m) v /= static_cast<double>(cnt);
      cent[c] = std::move(m);
    }
    if (!changed) break;
  }
  for (std::size_t p = 0; p < n; ++p) out.labels[order[p]] = lab[p];
  out.centroids = std::move(cent);
  return out;
}

/// Mean over ordered same-cluster pairs (i, j), i != j, of
/// log(exp(NP(n_i, n_j)) / sum_h exp(NP(n_i, n_h)) + 1), h over every trace.
inline Graded loss_kcn(const TraceSet& traces, const ClusterAssignment& a) {
  const std::size_t H = traces.size();
  require(a.labels.size() == H, ErrorCode::shape_mismatch, "assignment does not cover the traces");
  PairList pairs;
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < H; ++j)
      if (i != j && a.labels[i] == a.labels[j]) pairs.emplace_back(i, j);
  require(!pairs.empty(), ErrorCode::undefined_loss, "no cluster has two members");

  std::vector<double> np(H * H, 0.0);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t h = i + 1; h < H; ++h) np[i * H + h] = np[h * H + i] = loss_detail::np_with_grad(traces[i], traces[h], 0.0, nullptr, nullptr);

  std::vector<double> gnp(H * H, 0.0);
  Graded out;
  const double k = 1.0 / static_cast<double>(pairs.size());
  loss_detail::ContrastRow row;
  row.s.resize(H);
  for (auto [i, j] : pairs) {
    for (std::size_t h = 0; h < H; ++h) row.s[h] = np[i * H + h];
    std::vector<double> gs(H, 0.0);
    out.value += k * loss_detail::pair_term(row, j, k, &gs);
    for (std::size_t h = 0; h < H; ++h) gnp[i * H + h] += gs[h];
  }
  out.grad = zeros_like(traces);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t h = 0; h < H; ++h) {
      if (h == i) continue;  // NP(n_i, n_i) = 0 is constant
      const double g = gnp[i * H + h];
      if (g != 0.0) loss_detail::np_with_grad(traces[i], traces[h], g, &out.grad[i], &out.grad[h]);
    }
  return out;
}

struct PsdFeatureOptions {
  Band band = kHrBand;
  std::size_t pad_factor = 1;
};

/// In-band periodogram of the mean-removed trace, L1-normalised.
class PsdFeature {
 public:
  PsdFeature(std::size_t n, double fs, const PsdFeatureOptions& o = {}) : dft_(n, fs, o.band, o.pad_factor) {
    require(dft_.bins() >= 1, ErrorCode::invalid_band, "no DFT bins inside the band");
  }

  std::vector<double> operator()(const std::vector<double>& x) const {
    auto p = dft_.power(loss_detail::centered(x));
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    require(s > 0.0 && std::isfinite(s), ErrorCode::zero_energy, "trace has no energy inside the band");
    for (auto& v : p) v /= s;
    return p;
  }

  /// dL/dx given dL/dP.
  std::vector<double> vjp(const std::vector<double>& x, const std::vector<double>& g) const {
    const auto xc = loss_detail::centered(x);
    const auto p = dft_.power(xc);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    double gp = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) gp += g[k] * p[k] / s;
    std::vector<double> gpow(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) gpow[k] = (g[k] - gp) / s;
    return loss_detail::centered(dft_.power_vjp(xc, gpow));
  }

  std::size_t bins() const { return dft_.bins(); }

 private:
  BandDft dft_;
};

/// Mean over ordered positive pairs (i, j) of
/// log(exp(d_ij) / (sum_{h != i} exp(d_ih) + sum_m exp(d(P_i, Q_m))) + 1),
/// d the Euclidean distance between PSD features of r (P) and n (Q).
inline Graded contrastive_psd_loss(const TraceSet& r, const PairList& positives, const TraceSet& n, double fs,
                                   const PsdFeatureOptions& opts, TraceSet* grad_n = nullptr) {
  require(r.size() >= 2, ErrorCode::undefined_loss, "contrastive loss needs at least two traces");
  require(!positives.empty(), ErrorCode::undefined_loss, "no positive pairs");
  const std::size_t H = r.size(), M = n.size();
  for (const auto& t : r) require(t.size() == r[0].size(), ErrorCode::shape_mismatch, "traces differ in length");
  for (const auto& t : n) require(t.size() == r[0].size(), ErrorCode::shape_mismatch, "traces differ in length");
  for (auto [i, j] : positives)
    require(i < H && j < H && i != j, ErrorCode::invalid_argument, "invalid positive pair");

  const PsdFeature feat(r[0].size(), fs, opts);
  TraceSet P(H), Q(M);
  for (std::size_t i = 0; i < H; ++i) P[i] = feat(r[i]);
  for (std::size_t m = 0; m < M; ++m) Q[m] = feat(n[m]);
  std::vector<double> d(H * H, 0.0), dq(H * M, 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t h = i + 1; h < H; ++h) d[i * H + h] = d[h * H + i] = loss_detail::euclidean(P[i], P[h]);
    for (std::size_t m = 0; m < M; ++m) dq[i * M + m] = loss_detail::euclidean(P[i], Q[m]);
  }

  Graded out;
  std::vector<double> gd(H * H, 0.0), gdq(H * M, 0.0);
  const double k = 1.0 / static_cast<double>(positives.size());
  for (auto [i, j] : positives) {
    loss_detail::ContrastRow row;
    std::size_t jpos = 0;
    for (std::size_t h = 0; h < H; ++h) {
      if (h == i) continue;
      if (h == j) jpos = row.s.size();
      row.s.push_back(d[i * H + h]);
    }
    for (std::size_t m = 0; m < M; ++m) row.s.push_back(dq[i * M + m]);
    std::vector<double> gs(row.s.size(), 0.0);
    out.value += k * loss_detail::pair_term(row, jpos, k, &gs);
    std::size_t c = 0;
    for (std::size_t h = 0; h < H; ++h)
      if (h != i) gd[i * H + h] += gs[c++];
    for (std::size_t m = 0; m < M; ++m) gdq[i * M + m] += gs[c++];
  }

  TraceSet gP = zeros_like(P), gQ = zeros_like(Q);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t h = 0; h < H; ++h)
      if (h != i) loss_detail::euclidean_grad(P[i], P[h], d[i * H + h], gd[i * H + h], gP[i], gP[h]);
    for (std::size_t m = 0; m < M; ++m)
      loss_detail::euclidean_grad(P[i], Q[m], dq[i * M + m], gdq[i * M + m], gP[i], gQ[m]);
  }
  out.grad.resize(H);
  for (std::size_t i = 0; i < H; ++i) out.grad[i] = feat.vjp(r[i], gP[i]);
  if (grad_n) {
    grad_n->resize(M);
    for (std::size_t m = 0; m < M; ++m) (*grad_n)[m] = feat.vjp(n[m], gQ[m]);
  }
  return out;
}

inline Graded loss_cr_hat(const TraceSet& r_hat, const PairList& positives, double fs,
                          const PsdFeatureOptions& opts = {}) {
  return contrastive_psd_loss(r_hat, positives, {}, fs, opts);
}

inline Graded loss_dcr(const TraceSet& r, const PairList& positives, const TraceSet& n_fg, double fs,
                       const PsdFeatureOptions& opts = {}, TraceSet* grad_n = nullptr) {
  return contrastive_psd_loss(r, positives, n_fg, fs, opts, grad_n);
}

/// Positive pairs for a batch laid out video by video, each as L fg traces
/// followed by their L augmented counterparts: every (fg, aug) pair of the
/// same video, in both orders.
inline PairList video_positive_pairs(std::size_t videos, std::size_t L) {
  PairList out;
  for (std::size_t v = 0; v < videos; ++v) {
    const std::size_t o = v * 2 * L;
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b) {
        out.emplace_back(o + a, o + L + b);
        out.emplace_back(o + L + b, o + a);
      }
  }
  return out;
}

struct LossWeights {
  double nc = 1.0, kcn = 1.0, cr_hat = 1.0, dcr = 1.0;
};

struct LossOptions {
  std::size_t clusters = 4;
  std::uint64_t seed = 0;
  PsdFeatureOptions psd;
};

struct LossReport {
  double l_nc = 0.0, l_kcn = 0.0, l_cr_hat = 0.0, l_dcr = 0.0, total = 0.0;
  int stage = 1;
};

/// Traces of a whole batch. r_hat and r are laid out as video_positive_pairs
/// expects; n_fg[l] pairs with n_bg[l].
struct BatchTraces {
  TraceSet n_fg, n_bg, r_hat, r;
  std::size_t videos = 0, clips_per_video = 0;
  double fs = 30.0;
};

struct BatchGrads {
  TraceSet n_fg, n_bg, r_hat, r;
};

struct LossResult {
  LossReport report;
  BatchGrads grads;
};

/// Stage 1 for the first round(fraction * epochs) epochs (at least one),
/// stage 2 afterwards.
inline int stage_for_epoch(std::size_t epoch, std::size_t epochs, double stage1_fraction = 0.2) {
  const auto s1 = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(stage1_fraction * static_cast<double>(epochs))));
  return epoch < s1 ? 1 : 2;
}

inline LossResult total_loss(const BatchTraces& b, int stage, const LossWeights& w = {}, const LossOptions& o = {}) {
  require(stage == 1 || stage == 2, ErrorCode::invalid_argument, "stage must be 1 or 2");
  require(b.r_hat.size() == 2 * b.videos * b.clips_per_video && b.r.size() == b.r_hat.size(),
          ErrorCode::shape_mismatch, "batch layout does not match its video count");
  LossResult out;
  out.report.stage = stage;
  auto& g = out.grads;
  g.n_fg = zeros_like(b.n_fg);
  g.n_bg = zeros_like(b.n_bg);
  g.r_hat = zeros_like(b.r_hat);
  g.r = zeros_like(b.r);
  auto axpy = [](TraceSet& dst, const TraceSet& src, double k) {
    if (k == 0.0) return;
    for (std::size_t i = 0; i < dst.size(); ++i)
      for (std::size_t t = 0; t < dst[i].size(); ++t) dst[i][t] += k * src[i][t];
  };

  TraceSet g_bg;
  const Graded nc = loss_nc(b.n_fg, b.n_bg, &g_bg);
  out.report.l_nc = nc.value;
  axpy(g.n_fg, nc.grad, w.nc);
  axpy(g.n_bg, g_bg, w.nc);

  TraceSet all = b.n_fg;
  all.insert(all.end(), b.n_bg.begin(), b.n_bg.end());
  const auto assignment = cluster_interference(all, std::min(o.clusters, all.size()), o.seed);
  const Graded kcn = loss_kcn(all, assignment);
  out.report.l_kcn = kcn.value;
  TraceSet kf(kcn.grad.begin(), kcn.grad.begin() + static_cast<long>(b.n_fg.size()));
  TraceSet kb(kcn.grad.begin() + static_cast<long>(b.n_fg.size()), kcn.grad.end());
  axpy(g.n_fg, kf, w.kcn);
  axpy(g.n_bg, kb, w.kcn);

  const auto pos = video_positive_pairs(b.videos, b.clips_per_video);
  const Graded cr = loss_cr_hat(b.r_hat, pos, b.fs, o.psd);
  out.report.l_cr_hat = cr.value;
  axpy(g.r_hat, cr.grad, w.cr_hat);

  TraceSet g_dn;
  const Graded dcr = loss_dcr(b.r, pos, b.n_fg, b.fs, o.psd, &g_dn);
  out.report.l_dcr = dcr.value;

  out.report.total = w.nc * nc.value + w.kcn * kcn.value + w.cr_hat * cr.value;
  if (stage == 2) {
    out.report.total += w.dcr * dcr.value;
    axpy(g.r, dcr.grad, w.dcr);
    axpy(g.n_fg, g_dn, w.dcr);
  }
  return out;
}

template <class T>
BatchTraces batch_traces(const std::vector<ForwardBundle<T>>& bundles) {
  require(!bundles.empty(), ErrorCode::undefined_loss, "empty batch");
  BatchTraces b;
  b.videos = bundles.size();
  b.clips_per_video = bundles[0].n_fg.size();
  b.fs = bundles[0].r[0].fs();
  for (const auto& x : bundles) {
    require(x.n_fg.size() == b.clips_per_video, ErrorCode::shape_mismatch, "videos differ in clip count");
    for (const auto& t : x.n_fg) b.n_fg.push_back(t.vec());
    for (const auto& t : x.n_bg) b.n_bg.push_back(t.vec());
    for (const auto& t : x.r_hat) b.r_hat.push_back(t.vec());
    for (const auto& t : x.r) b.r.push_back(t.vec());
  }
  return b;
}

template <class T>
LossResult total_loss(const ForwardBundle<T>& bundle, int stage, const LossWeights& w = {}, const LossOptions& o = {}) {
  return total_loss(batch_traces(std::vector<ForwardBundle<T>>{bundle}), stage, w, o);
}

}  // namespace ddrppg
