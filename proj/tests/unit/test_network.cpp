#include <set>

#include <catch_amalgamated.hpp>

#include "ddrppg/clip/sampling.hpp"
#include "ddrppg/net/network.hpp"
#include "support.hpp"

using namespace ddrppg;
using testing::code_of;
using Net = DdNetwork<double>;

namespace {

BranchConfig tiny_config() {
  BranchConfig c;
  c.widths = {2, 2, 3, 3, 2};
  return c;
}

Clip noisy_clip(std::uint64_t seed, std::size_t frames, std::size_t size) {
  Clip clip = testing::pulse_clip(seed, frames, size, 72.0);
  Rng rng(seed + 77);
  for (auto& v : clip.storage()) v += static_cast<float>(rng.uniform(-0.02, 0.02));
  return clip;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::vector<double>*> params(Net& n) {
  std::vector<std::vector<double>*> out;
  n.visit([&](const std::string&, std::vector<double>& v, const std::vector<std::size_t>&) { out.push_back(&v); });
  return out;
}

std::vector<std::string> param_names(Net& n) {
  std::vector<std::string> out;
  n.visit([&](const std::string& s, std::vector<double>&, const std::vector<std::size_t>&) { out.push_back(s); });
  return out;
}

}  // namespace

TEST_CASE("feature and trace shapes follow the clip", "[network]") {
  const Net net = make_network<double>(tiny_config(), 1);
  for (std::size_t frames : {30u, 150u, 300u}) {
    const Clip clip = noisy_clip(frames, frames, 8);
    const auto f = net.extract_features(clip, Branch::rppg);
    CHECK(f.channels() == 2);
    CHECK(f.frames() == frames);
    CHECK(f.height() == 2);
    CHECK(f.width() == 2);
    CHECK(net.estimate(f, Branch::rppg).size() == frames);
    CHECK(net.estimate(net.extract_features(clip, Branch::interference), Branch::interference).size() == frames);
  }
  const Clip odd = noisy_clip(3, 12, 10);
  CHECK(net.extract_features(odd, Branch::rppg).height() == 2);
}

TEST_CASE("default widths and parameter naming", "[network]") {
  Net net = make_network<double>(BranchConfig{}, 2);
  CHECK(net.f_n.blocks.size() == 9);
  CHECK(net.e_n.blocks.size() == 2);
  CHECK(net.f_n.blocks[0].w.in_channels() == 3);
  CHECK(net.f_n.blocks[8].w.out_channels() == 48);
  CHECK(net.e_r.blocks[1].w.out_channels() == 1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(net.f_r.blocks[i].kind == BlockKind::vanilla);
  for (std::size_t i = 5; i < 9; ++i) CHECK(net.f_r.blocks[i].kind == BlockKind::ldc3d);
  CHECK(net.e_r.blocks[1].kind == BlockKind::ldc3d);
  CHECK_FALSE(net.e_r.blocks[1].normalize);
  const auto names = param_names(net);
  CHECK(names.front() == "F_n.0.w");
  CHECK(names.back() == "E_r.1.bias");
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  CHECK(net.parameter_count() > 100000);
}

TEST_CASE("a static clip produces zero features and zero traces", "[network]") {
  const Net net = make_network<double>(tiny_config(), 3);
  const Clip flat(20, 8, 8, 3, 30.0, 0.4f);
  const auto u = net.fg_unit(flat, false);
  for (double v : u.f_n.storage()) CHECK(v == 0.0);
  for (double v : u.f_hat_r.storage()) CHECK(v == 0.0);
  for (double v : u.r) CHECK(v == 0.0);
  for (double v : u.n) CHECK(v == 0.0);
}

TEST_CASE("input preparation removes the temporal mean only", "[network]") {
  Clip clip(4, 4, 4, 3, 30.0);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t c = 0; c < 3; ++c) clip.at(t, y, x, c) = static_cast<float>(0.1 * y + 0.01 * c + 0.5 * t);
  const auto v = prepare_input<double>(clip);
  CHECK(v.channels() == 3);
  for (std::size_t t = 0; t < 4; ++t)
    CHECK(v(2, t, 3, 1) == Catch::Approx(0.5 * (static_cast<double>(t) - 1.5)).margin(1e-6));
  CHECK(code_of([] { prepare_input<double>(Clip(4, 4, 4, 1, 30.0)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("spatial mean and pooling of constants", "[network]") {
  Volume<double> x(1, 3, 4, 6, 2.5);
  for (double v : spatial_mean(x)) CHECK(v == 2.5);
  const auto p = avg_pool2(Volume<double>(2, 3, 5, 5, -1.0));
  CHECK(p.height() == 2);
  for (double v : p.storage()) CHECK(v == -1.0);
  CHECK(code_of([] { spatial_mean(Volume<double>(2, 3, 4, 4)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("deinterfere subtracts and checks shapes", "[network]") {
  const auto a = testing::random_volume<double>(1, 2, 5, 2, 2);
  const auto b = testing::random_volume<double>(2, 2, 5, 2, 2);
  const auto d = deinterfere(a, b);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == a[i] - b[i]);
  CHECK(code_of([&] { deinterfere(a, testing::random_volume<double>(2, 2, 4, 2, 2)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("with zero interference features r equals r_hat", "[network]") {
  Net net = make_network<double>(tiny_config(), 4);
  auto& last = net.f_n.blocks.back();
  last.gamma.fill(0.0);
  last.beta.fill(0.0);
  const auto u = net.fg_unit(noisy_clip(5, 24, 8), false);
  for (double v : u.f_n.storage()) CHECK(v == 0.0);
  CHECK(u.r == u.r_hat);
}

TEST_CASE("descriptors of ones reduce the network to vanilla convolutions", "[network]") {
  BranchConfig van = tiny_config();
  van.descriptive = false;
  const Net a = make_network<double>(tiny_config(), 6);
  const Net b = make_network<double>(van, 6);
  const Clip clip = noisy_clip(6, 24, 8);
  const auto ua = a.fg_unit(clip, false), ub = b.fg_unit(clip, false);
  for (std::size_t t = 0; t < ua.r.size(); ++t) {
    CHECK(ua.r[t] == Catch::Approx(ub.r[t]).margin(1e-12));
    CHECK(ua.n[t] == Catch::Approx(ub.n[t]).margin(1e-12));
  }
}

TEST_CASE("construction and forward are deterministic", "[network]") {
  const Clip clip = noisy_clip(7, 20, 8);
  const auto r1 = make_network<double>(tiny_config(), 9).fg_unit(clip, false).r;
  const auto r2 = make_network<double>(tiny_config(), 9).fg_unit(clip, false).r;
  const auto r3 = make_network<double>(tiny_config(), 10).fg_unit(clip, false).r;
  CHECK(r1 == r2);
  CHECK(r1 != r3);
}

TEST_CASE("forward bundle has one entry per clip", "[network]") {
  const Net net = make_network<double>(tiny_config(), 11);
  Video video(60, 24, 48, 3, 30.0);
  Rng rng(5);
  for (auto& v : video.storage()) v = static_cast<float>(0.5 + rng.uniform(-0.05, 0.05));
  const RegionLayout layout{{4, 4, 12, 12}, {{24, 4, 12, 12}}};
  ClipGeometry g;
  g.count = 4;
  g.frames = 20;
  g.height = 8;
  g.width = 8;
  const auto set = sample_clips(video, layout, g, 3, "v0");
  const auto b = net.forward_all(set);
  CHECK(b.n_fg.size() == 4);
  CHECK(b.n_bg.size() == 4);
  CHECK(b.r_hat.size() == 8);
  CHECK(b.r.size() == 8);
  CHECK(b.f_n_fg.size() == 8);
  CHECK(b.f_hat_r.size() == 8);
  CHECK(b.f_r.size() == 8);
  CHECK(b.r[0].fs() == 30.0);
  CHECK(b.n_fg[0].kind() == TraceKind::interference);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto d = deinterfere(b.f_hat_r[i], b.f_n_fg[i]);
    CHECK(max_abs_diff(d, b.f_r[i]) == 0.0);
  }
}

TEST_CASE("float and double networks agree", "[network]") {
  const Net d = make_network<double>(tiny_config(), 12);
  const auto f = cast_network<float>(d);
  const Clip clip = noisy_clip(8, 24, 8);
  const auto ud = d.fg_unit(clip, false);
  const auto uf = f.fg_unit(clip, false);
  for (std::size_t t = 0; t < ud.r.size(); ++t) CHECK(uf.r[t] == Catch::Approx(ud.r[t]).margin(1e-4));
}

TEST_CASE("fg unit gradients match central differences", "[network]") {
  Net net = make_network<double>(tiny_config(), 13);
  const Clip clip = noisy_clip(9, 12, 8);
  const auto cn = testing::gaussian(1, 12), ch = testing::gaussian(2, 12), cr = testing::gaussian(3, 12);
  auto loss = [&] {
    const auto u = net.fg_unit(clip, false);
    return dot(cn, u.n) + dot(ch, u.r_hat) + dot(cr, u.r);
  };
  Net grads = net.zeros_like();
  net.fg_unit_backward(net.fg_unit(clip, true), cn, ch, cr, grads);
  auto p = params(net);
  auto g = params(grads);
  const auto names = param_names(net);
  Rng pick(4);
  std::size_t checked = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (int rep = 0; rep < 2; ++rep) {
      const std::size_t i = pick.below(p[k]->size());
      const double fd = testing::central_diff(loss, (*p[k])[i], 1e-6);
      INFO(names[k] << "[" << i << "] analytic " << (*g[k])[i] << " numeric " << fd);
      CHECK(testing::rel_err((*g[k])[i], fd, 1e-5) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked == 2 * p.size());
}

TEST_CASE("augmented units without n still route r back into F_n", "[network]") {
  Net net = make_network<double>(tiny_config(), 14);
  const Clip clip = noisy_clip(10, 12, 8);
  const auto cr = testing::gaussian(5, 12);
  Net grads = net.zeros_like();
  net.fg_unit_backward(net.fg_unit(clip, true, false), {}, {}, cr, grads);
  auto g = params(grads);
  auto p = params(net);
  auto loss = [&] { return dot(cr, net.fg_unit(clip, false, false).r); };
  // first F_n weight and last E_n bias
  const double fd = testing::central_diff(loss, (*p[0])[3], 1e-6);
  CHECK(testing::rel_err((*g[0])[3], fd, 1e-5) < 1e-4);
  double en = 0.0;
  for (auto& b : grads.e_n.blocks) b.visit("", [&](const std::string&, std::vector<double>& v, const auto&) {
      for (double x : v) en += std::abs(x);
    });
  CHECK(en == 0.0);
}

TEST_CASE("bg unit gradients match central differences", "[network]") {
  Net net = make_network<double>(tiny_config(), 15);
  const Clip clip = noisy_clip(11, 12, 8);
  const auto cn = testing::gaussian(6, 12);
  ExtractorTape<double> tf;
  EstimatorTape<double> te;
  net.bg_unit(clip, &tf, &te);
  Net grads = net.zeros_like();
  net.bg_unit_backward(tf, te, cn, grads);
  auto p = params(net);
  auto g = params(grads);
  auto loss = [&] { return dot(cn, net.bg_unit(clip)); };
  Rng pick(8);
  const auto names = param_names(net);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const std::size_t i = pick.below(p[k]->size());
    const double fd = testing::central_diff(loss, (*p[k])[i], 1e-6);
    CHECK(testing::rel_err((*g[k])[i], fd, 1e-5) < 1e-4);
    if (names[k][0] == 'F' && names[k][2] == 'r') CHECK((*g[k])[i] == 0.0);
    if (names[k][0] == 'E' && names[k][2] == 'r') CHECK((*g[k])[i] == 0.0);
  }
}

TEST_CASE("every parameter array receives gradient", "[network]") {
  Net net = make_network<double>(tiny_config(), 16);
  const Clip clip = noisy_clip(12, 16, 8);
  Net grads = net.zeros_like();
  const auto c = testing::gaussian(9, 16);
  net.fg_unit_backward(net.fg_unit(clip, true), c, c, c, grads);
  const auto names = param_names(grads);
  auto g = params(grads);
  for (std::size_t k = 0; k < g.size(); ++k) {
    double s = 0.0;
    for (double v : *g[k]) s += std::abs(v);
    INFO(names[k]);
    CHECK(s > 0.0);
    CHECK(std::isfinite(s));
  }
}

TEST_CASE("extractor input gradient matches central differences", "[network]") {
  const Net net = make_network<double>(tiny_config(), 17);
  auto x = testing::random_volume<double>(2, 3, 16, 8, 8, 0.1);
  ExtractorTape<double> tape;
  const auto y = extractor_forward(net.f_r, x, &tape);
  const auto gy = testing::random_volume<double>(3, y.channels(), y.frames(), y.height(), y.width());
  Extractor<double> grads = net.zeros_like().f_r;
  const auto gx = extractor_backward(net.f_r, tape, gy, grads, true);
  auto loss = [&] {
    const auto out = extractor_forward(net.f_r, x);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * gy[i];
    return s;
  };
  Rng pick(10);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t i = pick.below(x.size());
    const double fd = testing::central_diff(loss, x[i], 1e-6);
    CHECK(testing::rel_err(gx[i], fd, 1e-5) < 1e-4);
  }
}

TEST_CASE("network configuration is validated", "[network]") {
  BranchConfig bad = tiny_config();
  bad.epsilon = 1.5;
  CHECK(code_of([&] { make_network<double>(bad, 0); }) == ErrorCode::config);
  bad = tiny_config();
  bad.widths[2] = 0;
  CHECK(code_of([&] { make_network<double>(bad, 0); }) == ErrorCode::config);
  const auto j = tiny_config().to_json();
  CHECK(BranchConfig::from_json(j) == tiny_config());
}
