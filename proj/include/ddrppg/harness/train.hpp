#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ddrppg/clip/sampling.hpp"
#include "ddrppg/core/error.hpp"
#include "ddrppg/core/rng.hpp"
#include "ddrppg/harness/checkpoint.hpp"
#include "ddrppg/harness/config.hpp"
#include "ddrppg/harness/dataset.hpp"
#include "ddrppg/harness/metrics.hpp"
#include "ddrppg/harness/optim.hpp"
#include "ddrppg/loss/losses.hpp"
#include "ddrppg/net/network.hpp"

namespace ddrppg {

struct TrainHooks {
  /// Called after every epoch with the updated network.
  std::function<void(const MetricsRow&, const DdNetwork<float>&)> on_epoch;
  std::ostream* log = nullptr;
};

struct TrainResult {
  Checkpoint final;
  std::filesystem::path checkpoint;
};

namespace train_detail {

inline ClipGeometry geometry(const TrainConfig& c) { return {c.clips, c.clip_frames, c.clip_height, c.clip_width}; }

inline std::vector<float> as_float(const std::vector<double>& g) {
  for (double x : g)
    if (x != 0.0) return std::vector<float>(g.begin(), g.end());
  return {};
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0xe90c, epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

inline std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.ckpt", epoch);
  return buf;
}

}  // namespace train_detail

/// One optimizer step's worth of gradients. Clips are forwarded once without
/// tapes to get every trace, the batch loss is computed, and each clip is
/// then re-run with tapes and back-propagated on its own, so only one clip's
/// activations are alive at a time.
inline LossReport accumulate_batch_gradients(const DdNetwork<float>& net, const std::vector<ClipSet>& sets, int stage,
                                             const LossWeights& w, const LossOptions& o, DdNetwork<float>& grads) {
  using train_detail::as_float;
  std::vector<ForwardBundle<float>> bundles;
  bundles.reserve(sets.size());
  for (const auto& s : sets) bundles.push_back(net.forward_all(s));
  const BatchTraces traces = batch_traces(bundles);
  bundles.clear();
  const LossResult res = total_loss(traces, stage, w, o);
  require(std::isfinite(res.report.total), ErrorCode::divergence, "non-finite loss");

  const std::size_t L = traces.clips_per_video;
  for (std::size_t v = 0; v < sets.size(); ++v) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t ni = v * L + l, fi = v * 2 * L + l, ai = fi + L;
      {
        const auto u = net.fg_unit(sets[v].fg_clips[l], true, true);
        net.fg_unit_backward(u, as_float(res.grads.n_fg[ni]), as_float(res.grads.r_hat[fi]), as_float(res.grads.r[fi]),
                             grads);
      }
      {
        const auto gr_hat = as_float(res.grads.r_hat[ai]), gr = as_float(res.grads.r[ai]);
        if (!gr_hat.empty() || !gr.empty()) {
          const auto u = net.fg_unit(sets[v].aug_fg_clips[l], true, false);
          net.fg_unit_backward(u, {}, gr_hat, gr, grads);
        }
      }
      if (const auto gb = as_float(res.grads.n_bg[ni]); !gb.empty()) {
        ExtractorTape<float> tf;
        EstimatorTape<float> te;
        net.bg_unit(sets[v].bg_clips[l], &tf, &te);
        net.bg_unit_backward(tf, te, gb, grads);
      }
    }
  }
  return res.report;
}

inline TrainResult train(const TrainConfig& cfg, const Dataset& ds, const TrainHooks& hooks = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  require(ds.videos.size() >= cfg.batch_size, ErrorCode::config,
          "dataset has " + std::to_string(ds.videos.size()) + " videos, fewer than batch_size " +
              std::to_string(cfg.batch_size));
  Checkpoint ck;
  if (!cfg.resume.empty()) {
    ck = load_checkpoint(cfg.resume);
    require(ck.net.config == cfg.branch(), ErrorCode::config, "resume checkpoint architecture differs from the config");
  } else {
    ck.net = make_network<float>(cfg.branch(), cfg.seed);
    ck.optim.init(ck.net);
  }
  ck.config = cfg;
  ck.config.resume.clear();
  ck.optim.weight_decay = cfg.weight_decay;

  const fs::path dir = cfg.checkpoint_dir;
  fs::create_directories(dir);
  const auto g = train_detail::geometry(cfg);
  const std::size_t n = ds.videos.size();
  const std::size_t steps = cfg.steps_per_epoch ? cfg.steps_per_epoch : (n + cfg.batch_size - 1) / cfg.batch_size;
  LossOptions lo;
  lo.clusters = cfg.clusters;
  lo.psd.pad_factor = cfg.psd_pad;

  TrainResult out;
  std::string last_good = cfg.resume.empty() ? std::string("none") : cfg.resume;
  for (std::size_t epoch = ck.epoch; epoch < cfg.epochs; ++epoch) {
    const int stage = stage_for_epoch(epoch, cfg.epochs, cfg.stage1_fraction);
    const auto order = train_detail::epoch_order(n, cfg.seed, epoch);
    MetricsRow row;
    row.epoch = epoch;
    row.stage = stage;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<ClipSet> sets;
      for (std::size_t j = 0; j < cfg.batch_size; ++j) {
        const auto& v = ds.videos[order[(s * cfg.batch_size + j) % n]];
        sets.push_back(sample_clips(v.video, v.layout, g, derive_seed(cfg.seed, {0x57e9, epoch, s, j}), v.name));
      }
      lo.seed = derive_seed(cfg.seed, {0xc1c, epoch, s});
      DdNetwork<float> grads = ck.net.zeros_like();
      LossReport rep;
      try {
        rep = accumulate_batch_gradients(ck.net, sets, stage, cfg.weights(), lo, grads);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::divergence) throw;
        fail(ErrorCode::divergence, std::string(e.what()) + " at epoch " + std::to_string(epoch) + " step " +
                                        std::to_string(s) + "; last finite checkpoint: " + last_good);
      }
      ck.optim.step(ck.net, grads, cfg.lr);
      bool finite = true;
      ck.net.visit([&](const std::string&, std::vector<float>& p, const std::vector<std::size_t>&) {
        for (float x : p) finite = finite && std::isfinite(x);
      });
      require(finite, ErrorCode::divergence,
              "non-finite parameters after epoch " + std::to_string(epoch) + " step " + std::to_string(s) +
                  "; last finite checkpoint: " + last_good);
      ++ck.step;
      row.l_nc += rep.l_nc;
      row.l_kcn += rep.l_kcn;
      row.l_cr_hat += rep.l_cr_hat;
      row.l_dcr += rep.l_dcr;
      row.total += rep.total;
    }
    const auto k = static_cast<double>(steps);
    row.l_nc /= k;
    row.l_kcn /= k;
    row.l_cr_hat /= k;
    row.l_dcr /= k;
    row.total /= k;
    row.step = ck.step;
    ck.metrics.push_back(row);
    ck.epoch = epoch + 1;
    out.checkpoint = dir / train_detail::checkpoint_name(ck.epoch);
    save_checkpoint(out.checkpoint, ck);
    write_metrics_csv(dir / "metrics.csv", ck.metrics);
    last_good = out.checkpoint.string();
    if (hooks.log)
      *hooks.log << "epoch " << epoch << " stage " << stage << " total " << row.total << " (nc " << row.l_nc
                 << ", kcn " << row.l_kcn << ", cr_hat " << row.l_cr_hat << ", dcr " << row.l_dcr << ")\n";
    if (hooks.on_epoch) hooks.on_epoch(row, ck.net);
  }
  out.final = std::move(ck);
  return out;
}

inline TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  require(!cfg.dataset.empty(), ErrorCode::config, "dataset path is not set");
  cfg.validate();
  return train(cfg, load_dataset(cfg.dataset), hooks);
}

}  // namespace ddrppg
