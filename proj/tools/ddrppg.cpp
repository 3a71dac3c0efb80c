// ddrppg: synthetic data, training, evaluation and analysis from the shell.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ddrppg/core/error.hpp"
#include "ddrppg/harness/analyze.hpp"
#include "ddrppg/harness/checkpoint.hpp"
#include "ddrppg/harness/config.hpp"
#include "ddrppg/harness/dataset.hpp"
#include "ddrppg/harness/evaluate.hpp"
#include "ddrppg/harness/selftest.hpp"
#include "ddrppg/harness/train.hpp"
#include "ddrppg/synth/synth.hpp"

namespace {

using namespace ddrppg;

const std::map<std::string, ClassicalMethod> kMethods{
    {"pos", ClassicalMethod::pos}, {"chrom", ClassicalMethod::chrom}, {"green", ClassicalMethod::green}};

struct SynthArgs {
  std::string protocol = "P5", out;
  std::size_t videos = 8;
  std::uint64_t seed = 0;
  ProtocolOptions opts;
};

int run_synth(const SynthArgs& a) {
  std::vector<std::string> warnings;
  const auto manifest = make_protocol(parse_protocol(a.protocol), a.videos, a.seed, a.out, a.opts, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << manifest["videos"].size() << " videos to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, dataset, checkpoint_dir, resume;
  std::vector<std::string> sets;
  bool dry_run = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_config(a.config);
  apply_env_overrides(c);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::config, "--set expects key=value, got '" + kv + "'");
    set_config_value(c, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
  }
  if (!a.dataset.empty()) c.dataset = a.dataset;
  if (!a.checkpoint_dir.empty()) c.checkpoint_dir = a.checkpoint_dir;
  if (!a.resume.empty()) c.resume = a.resume;
  c.validate();
  if (a.dry_run) {
    std::cout << format_config(c);
    return 0;
  }
  TrainHooks hooks;
  hooks.log = &std::cout;
  const auto res = train(c, hooks);
  std::cout << "final checkpoint " << res.checkpoint.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, method, out;
  EvalOptions opts;
};

int run_eval(const EvalArgs& a) {
  require(a.checkpoint.empty() != a.method.empty(), ErrorCode::invalid_argument,
          "give exactly one of --checkpoint and --method");
  const Dataset ds = load_dataset(a.dataset);
  const EvalReport rep = a.method.empty() ? evaluate(load_checkpoint(a.checkpoint).net, ds, a.opts)
                                          : evaluate_classical(kMethods.at(a.method), ds, a.opts);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  const auto j = to_json(rep);
  if (!a.out.empty()) {
    std::ofstream os(a.out, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::io, "cannot write " + a.out);
    os << j.dump(2) << '\n';
  }
  std::cout << "windows " << rep.windows.size() << "  MAE " << rep.metrics.mae << "  RMSE " << rep.metrics.rmse
            << "  R " << rep.metrics.r << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string dataset, out, method = "green";
  double max_lag_s = 2.0;
};

int run_analyze(const AnalyzeArgs& a) {
  AnalyzeOptions o;
  o.method = kMethods.at(a.method);
  o.max_lag_s = a.max_lag_s;
  const auto all = analyze_dataset(load_dataset(a.dataset), o);
  write_analysis(a.out, all);
  for (const auto& v : all)
    std::cout << v.name << "  peak NC(r_hat, n_bg) " << v.rhat_bg.peak() << "  peak NC(n_bg1, n_bg2) "
              << v.bg_bg.peak() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised rPPG with interference de-interfering"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic protocol dataset");
  synth->add_option("--protocol", sa.protocol, "P1..P5")->capture_default_str();
  synth->add_option("--videos", sa.videos)->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--duration", sa.opts.duration_s, "seconds")->capture_default_str();
  synth->add_option("--hr-lo", sa.opts.hr_lo)->capture_default_str();
  synth->add_option("--hr-hi", sa.opts.hr_hi)->capture_default_str();
  synth->add_option("--flicker-hz", sa.opts.flicker_hz)->capture_default_str();
  synth->add_option("--flicker-amplitude", sa.opts.flicker_amplitude)->capture_default_str();
  synth->add_option("--pulse-amplitude", sa.opts.pulse_amplitude)->capture_default_str();
  synth->add_option("--sensor-noise", sa.opts.sensor_noise)->capture_default_str();
  synth->add_option("--height", sa.opts.height)->capture_default_str();
  synth->add_option("--width", sa.opts.width)->capture_default_str();
  synth->add_option("--fg-size", sa.opts.fg_size)->capture_default_str();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train on a dataset; DDRPPG_<KEY> variables override the config file");
  tr->add_option("--config", ta.config, "key = value file")->check(CLI::ExistingFile);
  tr->add_option("--set", ta.sets, "key=value override, applied last");
  tr->add_option("--dataset", ta.dataset);
  tr->add_option("--checkpoint-dir", ta.checkpoint_dir);
  tr->add_option("--resume", ta.resume, "checkpoint to continue from");
  tr->add_flag("--dry-run", ta.dry_run, "print the resolved config and exit");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score HR on non-overlapping windows");
  ev->add_option("--checkpoint", ea.checkpoint)->check(CLI::ExistingFile);
  ev->add_option("--method", ea.method, "classical baseline instead of a checkpoint")
      ->check(CLI::IsMember({"pos", "chrom", "green"}));
  ev->add_option("--dataset", ea.dataset)->required();
  ev->add_option("--window", ea.opts.window_s, "seconds")->capture_default_str();
  std::size_t crop = 64;
  ev->add_option("--crop", crop, "side of the square crop taken from the fg box centre; 0 keeps the whole box")->capture_default_str();
  ev->add_flag("--r-hat", ea.opts.use_r_hat, "score r_hat instead of r");
  ev->add_option("--out", ea.out, "JSON report");

  AnalyzeArgs aa;
  auto* an = app.add_subcommand("analyze", "running-correlation profiles of fg and bg regions");
  an->add_option("--dataset", aa.dataset)->required();
  an->add_option("--out", aa.out)->required();
  an->add_option("--method", aa.method)->check(CLI::IsMember({"pos", "chrom", "green"}))->capture_default_str();
  an->add_option("--max-lag", aa.max_lag_s, "seconds")->capture_default_str();

  app.add_subcommand("selftest", "quick oracle checks");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return run_synth(sa);
    if (*tr) return run_train(ta);
    if (*ev) {
      ea.opts.crop_height = ea.opts.crop_width = crop;
      return run_eval(ea);
    }
    if (*an) return run_analyze(aa);
    return print_selftest(std::cout) ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
