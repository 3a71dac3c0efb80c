#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/net/network.hpp"

namespace ddrppg {

/// AdamW with decoupled weight decay. Moments follow the network's visit()
/// order.
template <class T>
struct AdamW {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  std::size_t t = 0;
  std::vector<std::vector<T>> m, v;

  void init(DdNetwork<T>& net) {
    m.clear();
    v.clear();
    net.visit([&](const std::string&, std::vector<T>& p, const std::vector<std::size_t>&) {
      m.emplace_back(p.size(), T(0));
      v.emplace_back(p.size(), T(0));
    });
    t = 0;
  }

  /// Returns false, leaving everything untouched, when every gradient is zero.
  bool step(DdNetwork<T>& net, DdNetwork<T>& grads, double lr) {
    std::vector<std::vector<T>*> g;
    grads.visit([&](const std::string&, std::vector<T>& x, const std::vector<std::size_t>&) { g.push_back(&x); });
    if (m.empty()) init(net);
    require(g.size() == m.size(), ErrorCode::shape_mismatch, "optimizer state does not match the network");
    bool any = false;
    for (const auto* x : g)
      for (T e : *x) any = any || e != T(0);
    if (!any) return false;
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::size_t k = 0;
    net.visit([&](const std::string& name, std::vector<T>& p, const std::vector<std::size_t>&) {
      auto& gk = *g[k];
      auto& mk = m[k];
      auto& vk = v[k];
      require(gk.size() == p.size(), ErrorCode::shape_mismatch, "gradient size differs for " + name);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = gk[i];
        const double mi = beta1 * mk[i] + (1.0 - beta1) * gi;
        const double vi = beta2 * vk[i] + (1.0 - beta2) * gi * gi;
        mk[i] = static_cast<T>(mi);
        vk[i] = static_cast<T>(vi);
        const double upd = (mi / c1) / (std::sqrt(vi / c2) + eps) + weight_decay * static_cast<double>(p[i]);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * upd);
      }
      ++k;
    });
    return true;
  }
};

}  // namespace ddrppg
