#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "ddrppg/clip/augment.hpp"
#include "ddrppg/conv/conv3d.hpp"
#include "ddrppg/conv/descriptive.hpp"
#include "ddrppg/core/rng.hpp"
#include "ddrppg/loss/losses.hpp"
#include "ddrppg/signal/classical.hpp"
#include "ddrppg/signal/correlation.hpp"
#include "ddrppg/signal/spectrum.hpp"
#include "ddrppg/synth/synth.hpp"

namespace ddrppg {

namespace selftest_detail {

inline std::vector<double> noise(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

template <class T>
Volume<T> random_volume(Rng& rng, std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
  Volume<T> v(c, t, h, w);
  for (auto& x : v.storage()) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
Kernel<T> random_kernel(Rng& rng, std::size_t o, std::size_t i, std::size_t kt) {
  Kernel<T> k(o, i, kt, 3, 3);
  for (auto& x : k.storage()) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return k;
}

/// Zero-padded direct sum.
inline Volume<double> direct_conv(const Volume<double>& f, const Kernel<double>& w) {
  const long pt = static_cast<long>(w.kt() / 2);
  Volume<double> out(w.out_channels(), f.frames(), f.height(), f.width());
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t t = 0; t < f.frames(); ++t)
      for (std::size_t y = 0; y < f.height(); ++y)
        for (std::size_t x = 0; x < f.width(); ++x) {
          double s = 0.0;
          for (std::size_t i = 0; i < w.in_channels(); ++i)
            for (std::size_t a = 0; a < w.kt(); ++a)
              for (std::size_t b = 0; b < 3; ++b)
                for (std::size_t d = 0; d < 3; ++d) {
                  const long tt = static_cast<long>(t + a) - pt, yy = static_cast<long>(y + b) - 1,
                             xx = static_cast<long>(x + d) - 1;
                  if (tt < 0 || yy < 0 || xx < 0 || tt >= static_cast<long>(f.frames()) ||
                      yy >= static_cast<long>(f.height()) || xx >= static_cast<long>(f.width()))
                    continue;
                  s += w(o, i, a, b, d) * f(i, static_cast<std::size_t>(tt), static_cast<std::size_t>(yy),
                                            static_cast<std::size_t>(xx));
                }
          out(o, t, y, x) = s;
        }
  return out;
}

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

inline double max_abs_diff(const Volume<double>& a, const Volume<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace selftest_detail

struct SelftestItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Quick built-in property checks; a few seconds on one core.
inline std::vector<SelftestItem> run_selftest() {
  using namespace selftest_detail;
  std::vector<SelftestItem> out;
  auto record = [&](const std::string& name, const std::function<std::string(bool&)>& body) {
    SelftestItem it{name, true, {}};
    try {
      it.detail = body(it.pass);
    } catch (const std::exception& e) {
      it.pass = false;
      it.detail = e.what();
    }
    out.push_back(it);
  };

  record("correlation decomposition identity", [](bool& ok) {
    Rng rng(1);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto r = noise(rng, 64), n = noise(rng, 64), b = noise(rng, 64);
      const auto d = decompose_correlation(r, n, b, static_cast<long>(rng.below(21)) - 10);
      worst = std::max(worst, std::abs(d.reconstructed - d.direct));
    }
    ok = worst < 1e-10;
    return "max |diff| " + sci(worst);
  });

  record("3DLDC with the TDC descriptor equals TDC", [](bool& ok) {
    Rng rng(2);
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      const auto f = random_volume<double>(rng, 2, 5, 4, 4);
      const auto w = random_kernel<double>(rng, 3, 2, 3);
      const double eps = rng.uniform();
      worst = std::max(worst, max_abs_diff(ldc3d_forward(f, w, tdc_descriptor(w), eps), tdc_forward(f, w, eps)));
    }
    ok = worst < 1e-6;
    return "max |diff| " + sci(worst);
  });

  record("convolution matches the direct sum; eps = 0 and m = 1 are vanilla", [](bool& ok) {
    Rng rng(3);
    const auto f = random_volume<double>(rng, 2, 4, 5, 5);
    const auto w = random_kernel<double>(rng, 3, 2, 3);
    auto m = random_kernel<double>(rng, 3, 1, 3);
    const auto van = conv3d_vanilla(f, w);
    const double e1 = max_abs_diff(van, direct_conv(f, w));
    const double e2 = max_abs_diff(ldc3d_forward(f, w, m, 0.0), van);
    const double e3 = max_abs_diff(ldc3d_forward(f, w, ones_descriptor(w), 0.7), van);
    ok = e1 < 1e-9 && e2 < 1e-12 && e3 < 1e-12;
    return "direct " + sci(e1) + ", eps=0 " + sci(e2) + ", m=1 " + sci(e3);
  });

  record("closed-form loss values", [](bool& ok) {
    std::vector<double> t(90);
    for (std::size_t k = 0; k < t.size(); ++k)
      t[k] = std::sin(2.0 * std::numbers::pi * 1.5 * static_cast<double>(k) / 30.0);
    const double kcn = loss_kcn(TraceSet(4, t), ClusterAssignment{{0, 0, 0, 0}, 1, {}}).value;
    const double cr = loss_cr_hat(TraceSet(2, t), {{0, 1}}, 30.0).value;
    const double dcr = loss_dcr(TraceSet(2, t), {{0, 1}}, TraceSet(1, t), 30.0).value;
    ok = std::abs(kcn - std::log(1.25)) < 1e-9 && std::abs(cr - std::log(2.0)) < 1e-12 &&
         std::abs(dcr - std::log(1.5)) < 1e-12;
    return "kcn " + sci(kcn) + ", cr_hat " + sci(cr) + ", dcr " + sci(dcr);
  });

  record("weak augmentation keeps the classical HR", [](bool& ok) {
    std::size_t bad = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      SceneSpec sc;
      sc.seed = s;
      sc.duration_s = 6.0;
      sc.pulse.hr_bpm = 60.0 + 3.0 * static_cast<double>(s);
      const auto r = render_video(sc);
      const Clip c = r.video.crop(0, r.video.frames(), r.layout.fg);
      for (auto op : kAugmentOps)
        if (estimate_hr(classical_extract(c, ClassicalMethod::pos)) !=
            estimate_hr(classical_extract(apply_augment(c, op), ClassicalMethod::pos)))
          ++bad;
    }
    ok = bad == 0;
    return std::to_string(bad) + " mismatches over 50 clips";
  });

  record("HR estimate stays inside 0.66-4.16 Hz", [](bool& ok) {
    std::vector<double> x(300);
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double s = static_cast<double>(t) / 30.0;
      x[t] = 5.0 * std::sin(2.0 * std::numbers::pi * 0.3 * s) + std::sin(2.0 * std::numbers::pi * 1.5 * s);
    }
    const double hr = estimate_hr(SignalTrace(x, 30.0));
    ok = std::abs(hr - 90.0) < 1.0;
    return "estimate " + sci(hr) + " bpm for a 1.5 Hz tone under a 0.3 Hz peak";
  });
  return out;
}

inline bool print_selftest(std::ostream& os) {
  bool all = true;
  for (const auto& it : run_selftest()) {
    os << (it.pass ? "PASS " : "FAIL ") << it.name << " (" << it.detail << ")\n";
    all = all && it.pass;
  }
  return all;
}

}  // namespace ddrppg
