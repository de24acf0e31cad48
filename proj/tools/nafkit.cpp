/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// nafkit command-line tool. Every run directory gets a config.json holding
// the resolved flags; `--config run/config.json` replays it, and flags given
// explicitly override the file.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nafkit/nafkit.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nafkit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Keys of the option structs use underscores; flags use hyphens.
json flag_options(json j) {
  json out = json::object();
  for (auto& [k, v] : j.items()) {
    if (k == "stack_resolved") continue;
    std::string flag = k;
    std::replace(flag.begin(), flag.end(), '_', '-');
    out[flag] = v;
  }
  return out;
}

void write_config(const fs::path& dir, const std::string& command, json options, const std::string& out) {
  options["out"] = out;
  json cfg = {{"command", command}, {"options", flag_options(std::move(options))}};
  write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
}

std::string json_scalar_arg(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

/// Expands `--config FILE` into explicit flags for every option the command
/// line does not already set.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!cfg.contains("command") || !cfg.contains("options")) throw DataError(path + ": not a run config");
  if (kept.size() < 2 || kept[1] != cfg["command"].get<std::string>())
    throw DomainError("--config " + path + " belongs to command '" + cfg["command"].get<std::string>() + "'");
  std::set<std::string> given;
  for (const auto& a : kept)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
  for (auto& [k, v] : cfg["options"].items()) {
    const std::string flag = "--" + k;
    if (given.count(flag)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) kept.push_back(flag);
      continue;
    }
    if (v.is_string() && v.get<std::string>().empty()) continue;
    kept.push_back(flag);
    kept.push_back(json_scalar_arg(v));
  }
  return kept;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (auto f : split_commas(s)) {
    try {
      out.push_back(parse_number(f, 0));
    } catch (const DataError&) {
      throw DomainError(std::string(what) + ": not a number list: " + s);
    }
  }
  return out;
}

void add_model_flags(CLI::App* c, ModelOptions& m) {
  c->add_option("--model", m.model, "affine-exp | affine (= affine-exp) | affine-gate | dsf | ddsf")->capture_default_str();
  c->add_option("--d", m.d, "sigmoid units per transformer layer")->capture_default_str();
  c->add_option("--L", m.L, "DDSF depth")->capture_default_str();
  c->add_option("--stack", m.stack, "flow layers (0: 6 for affine, 1 otherwise)")->capture_default_str();
  c->add_option("--hidden", m.hidden, "conditioner hidden width")->capture_default_str();
  c->add_option("--base", m.base, "normal | uniform")->capture_default_str();
  c->add_option("--init", m.init, "identity | staircase (dsf energy fits on a bounded support)")->capture_default_str();
}

void add_train_flags(CLI::App* c, TrainOptions& t) {
  c->add_option("--steps", t.steps)->capture_default_str();
  c->add_option("--batch", t.batch)->capture_default_str();
  c->add_option("--lr", t.lr)->capture_default_str();
  c->add_option("--beta1", t.beta1)->capture_default_str();
  c->add_option("--beta2", t.beta2)->capture_default_str();
  c->add_option("--adam-eps", t.adam_eps)->capture_default_str();
  c->add_option("--grad-clip", t.grad_clip, "global gradient norm clip; 0 disables")->capture_default_str();
  c->add_option("--polyak", t.polyak, "parameter EMA decay; 0 disables")->capture_default_str();
  c->add_option("--seed", t.seed)->capture_default_str();
}

std::string trace_csv(const TrainTrace& tr) {
  std::string s = "step,loss\n";
  for (std::size_t i = 0; i < tr.loss.size(); ++i) s += std::to_string(i) + "," + format_double(tr.loss[i]) + "\n";
  return s;
}

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"nafkit: neural autoregressive flows"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);
  app.allow_windows_style_options(false);

  FitDensityOptions fd;
  std::string fd_out, fd_window;
  std::size_t fd_points = 101;
  auto* c_fd = app.add_subcommand("fit-density", "maximum-likelihood fit to data or a named target");
  c_fd->add_option("--target", fd.target, "named target: " + target_registry_listing());
  c_fd->add_option("--data", fd.data, "CSV with one point per row");
  c_fd->add_flag("--header", fd.header, "CSV has a header row");
  add_model_flags(c_fd, fd.model);
  add_train_flags(c_fd, fd.train);
  c_fd->add_option("--samples", fd.samples, "training draws from the target")->capture_default_str();
  c_fd->add_option("--val-samples", fd.val_samples, "validation draws from the target")->capture_default_str();
  c_fd->add_option("--val-fraction", fd.val_fraction, "held-out tail of the CSV")->capture_default_str();
  c_fd->add_option("--coverage-samples", fd.coverage_samples)->capture_default_str();
  c_fd->add_option("--radius", fd.radius, "mode-coverage radius")->capture_default_str();
  c_fd->add_option("--grid-window", fd_window, "x0,x1,y0,y1 for density_grid.csv");
  c_fd->add_option("--grid-points", fd_points)->capture_default_str();
  c_fd->add_option("--out", fd_out, "run directory")->required();

  FitEnergyOptions fe;
  std::string fe_out;
  auto* c_fe = app.add_subcommand("fit-energy", "exclusive-KL fit to a named target energy");
  c_fe->add_option("--target", fe.target, "named target: " + target_registry_listing())->required();
  add_model_flags(c_fe, fe.model);
  add_train_flags(c_fe, fe.train);
  c_fe->add_option("--n-samples", fe.n_samples, "samples written after training")->capture_default_str();
  c_fe->add_option("--radius", fe.radius, "mode-coverage radius; 0 picks 1.0 (2-D) or 0.1 (1-D)")->capture_default_str();
  c_fe->add_option("--hist-bins", fe.hist_bins)->capture_default_str();
  c_fe->add_option("--hist-lo", fe.hist_lo)->capture_default_str();
  c_fe->add_option("--hist-hi", fe.hist_hi)->capture_default_str();
  c_fe->add_option("--out", fe_out, "run directory")->required();

  std::string s_ckpt, s_out;
  std::size_t s_n = 1000;
  std::uint64_t s_seed = 0;
  bool s_header = false;
  auto* c_s = app.add_subcommand("sample", "draw samples from a checkpoint");
  c_s->add_option("--checkpoint", s_ckpt)->required();
  c_s->add_option("--n", s_n)->capture_default_str();
  c_s->add_option("--seed", s_seed)->capture_default_str();
  c_s->add_flag("--header", s_header, "write a header row");
  c_s->add_option("--out", s_out, "output CSV")->required();

  std::string l_ckpt, l_in, l_out;
  bool l_header = false;
  auto* c_l = app.add_subcommand("logpdf", "append a logp column to a points CSV");
  c_l->add_option("--checkpoint", l_ckpt)->required();
  c_l->add_option("--input", l_in)->required();
  c_l->add_flag("--header", l_header, "input has a header row");
  c_l->add_option("--out", l_out, "output CSV")->required();

  std::string g_ckpt, g_target, g_window, g_out;
  std::size_t g_points = 101;
  auto* c_g = app.add_subcommand("grid-export", "log-density on a regular grid (x,y,logp)");
  c_g->add_option("--checkpoint", g_ckpt);
  c_g->add_option("--target", g_target, "export a named target instead of a model");
  c_g->add_option("--window", g_window, "x0,x1[,y0,y1]")->required();
  c_g->add_option("--points", g_points, "points per axis")->capture_default_str();
  c_g->add_option("--out", g_out, "output CSV")->required();

  std::string u_target = "identity", u_out;
  std::size_t u_n = 6, u_grid = 10000, u_ks = 10000;
  double u_eps0 = 0.0;
  std::uint64_t u_seed = 0;
  auto* c_u = app.add_subcommand("certify-universal", "step and sigmoid approximations of a monotone map");
  c_u->add_option("--target", u_target, "identity | normal-cdf | random")->capture_default_str();
  c_u->add_option("--n", u_n)->capture_default_str();
  c_u->add_option("--eps0", u_eps0, "0 picks 1/(2(n+1))")->capture_default_str();
  c_u->add_option("--grid", u_grid)->capture_default_str();
  c_u->add_option("--ks-samples", u_ks, "samples for the Gaussian KS demo; 0 skips")->capture_default_str();
  c_u->add_option("--seed", u_seed, "seed of the random target and the KS demo")->capture_default_str();
  c_u->add_option("--out", u_out, "output directory")->required();

  std::string t_suite = "all";
  std::uint64_t t_seed = 12345;
  auto* c_t = app.add_subcommand("selftest", "fast property suites");
  c_t->add_option("--suite", t_suite, "all | " + selftest_suite_listing())->capture_default_str();
  c_t->add_option("--seed", t_seed)->capture_default_str();

  try {
    args = expand_config(std::move(args));
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : kExitUsage;
    }

    if (c_fd->parsed()) {
      const fs::path dir = fd_out;
      prepare_dir(dir);
      json opts = to_json(fd);
      opts["grid_window"] = fd_window;
      opts["grid_points"] = fd_points;
      write_config(dir, "fit-density", opts, fd_out);
      std::vector<double> window;
      if (!fd_window.empty()) window = parse_list(fd_window, "--grid-window");
      auto r = run_fit_density(fd);
      save_checkpoint(r.stack, dir / "checkpoint.json", Direction::kDensity);
      write_file_atomic(dir / "trace.csv", trace_csv(r.trace));
      write_json(dir / "metrics.json", r.metrics);
      if (!window.empty()) {
        const FlowStack& st = r.stack;
        write_file_atomic(dir / "density_grid.csv",
                          density_grid_csv([&](const Tensor& p) { return st.log_density(p); }, st.dim(), window,
                                           fd_points));
      }
      std::printf("fit-density: final loss %.6f", r.metrics["final_loss"].get<double>());
      if (r.metrics.contains("validation_nll"))
        std::printf(", validation NLL %.6f", r.metrics["validation_nll"].get<double>());
      std::printf("\n");
      return 0;
    }

    if (c_fe->parsed()) {
      const fs::path dir = fe_out;
      prepare_dir(dir);
      write_config(dir, "fit-energy", to_json(fe), fe_out);
      auto r = run_fit_energy(fe);
      save_checkpoint(r.stack, dir / "checkpoint.json", Direction::kEnergy);
      write_file_atomic(dir / "trace.csv", trace_csv(r.trace));
      std::vector<std::string> header;
      for (std::size_t j = 0; j < r.samples.shape[1]; ++j) header.push_back("x" + std::to_string(j + 1));
      write_file_atomic(dir / "samples.csv", format_csv(r.samples, header));
      write_json(dir / "mode_coverage.json", r.coverage);
      write_json(dir / "metrics.json", r.metrics);
      if (!r.hist.empty()) {
        std::string h = "bin_lo,bin_hi,count\n";
        const double w = (fe.hist_hi - fe.hist_lo) / static_cast<double>(fe.hist_bins);
        for (std::size_t i = 0; i < r.hist.size(); ++i)
          h += format_double(fe.hist_lo + w * static_cast<double>(i)) + "," +
               format_double(fe.hist_lo + w * static_cast<double>(i + 1)) + "," + std::to_string(r.hist[i]) + "\n";
        write_file_atomic(dir / "histogram.csv", h);
      }
      std::printf("fit-energy: final loss %.6f\n", r.metrics["final_loss"].get<double>());
      return 0;
    }

    if (c_s->parsed()) {
      const Model model = load_model(s_ckpt);
      const Tensor x = model.sample(s_n, s_seed);
      std::vector<std::string> header;
      if (s_header)
        for (std::size_t j = 0; j < x.shape[1]; ++j) header.push_back("x" + std::to_string(j + 1));
      write_file_atomic(s_out, format_csv(x, header));
      return 0;
    }

    if (c_l->parsed()) {
      const Model model = load_model(l_ckpt);
      const CsvTable t = read_csv(l_in, l_header);
      if (t.rows.shape[1] != model.stack.dim())
        throw DataError("dimension mismatch: " + l_in + " has " + std::to_string(t.rows.shape[1]) +
                        " columns, checkpoint expects " + std::to_string(model.stack.dim()));
      std::vector<std::string> header = t.header;
      if (!header.empty()) header.push_back("logp");
      write_file_atomic(l_out, format_csv(t.rows, header, model.log_prob(t.rows)));
      return 0;
    }

    if (c_g->parsed()) {
      if (g_ckpt.empty() == g_target.empty()) throw DomainError("grid-export: give exactly one of --checkpoint or --target");
      const auto window = parse_list(g_window, "--window");
      std::string csv;
      if (!g_target.empty()) {
        const TargetSpec t = make_target(g_target);
        csv = density_grid_csv([&](const Tensor& p) { return t.log_prob(p); }, t.dim, window, g_points);
      } else {
        const Model model = load_model(g_ckpt);
        csv = density_grid_csv([&](const Tensor& p) { return model.log_prob(p); }, model.stack.dim(), window,
                               g_points);
      }
      write_file_atomic(g_out, csv);
      return 0;
    }

    if (c_u->parsed()) {
      MonotoneTarget target;
      if (u_target == "identity") target = identity_target();
      else if (u_target == "normal-cdf") target = truncated_normal_target();
      else if (u_target == "random") target = random_sigmoid_target(u_seed);
      else throw DomainError("unknown monotone target '" + u_target + "' (identity, normal-cdf, random)");
      target.validate();
      const fs::path dir = u_out;
      prepare_dir(dir);
      const double eps0 = u_eps0 > 0.0 ? u_eps0 : 1.0 / (2.0 * static_cast<double>(u_n + 1));
      const StepApprox steps = build_step_approx(target, u_n);
      json cert = {{"target", target.name}, {"n", u_n}, {"grid", u_grid}, {"bound", step_bound(u_n)},
                   {"achieved", certify(target, steps, u_grid)}, {"weights", steps.w}, {"biases", steps.b}};
      cert["holds"] = cert["achieved"].get<double>() <= step_bound(u_n) + 1e-9;
      std::optional<DsfParams> sig;
      if (u_n >= 2) {
        sig = build_sigmoid_approx(target, u_n, eps0);
        const double a = certify(target, *sig, u_grid);
        cert["sigmoid"] = {{"eps0", eps0}, {"bound", sigmoid_bound(u_n)}, {"achieved", a},
                           {"holds", a <= sigmoid_bound(u_n)}, {"softness", sig->a[0]}};
      }
      if (u_ks > 0 && u_n >= 2) {
        const KsResult ks = ks_demo(u_n, u_ks, u_seed);
        cert["ks_demo"] = {{"n", ks.n_sigmoids}, {"samples", ks.samples}, {"statistic", ks.statistic}};
      }
      write_json(dir / "certificate.json", cert);
      std::string csv = "x,S,S_star,S_n\n";
      for (double x : certify_grid(target, u_grid)) {
        csv += format_double(x) + "," + format_double(target.eval(x)) + "," + format_double(steps(x)) + ",";
        csv += sig ? format_double(dsf_prelogit(x, *sig)) : std::string("nan");
        csv += "\n";
      }
      write_file_atomic(dir / "curve.csv", csv);
      std::printf("certify-universal: step error %.6g (bound %.6g)\n", cert["achieved"].get<double>(),
                  step_bound(u_n));
      return 0;
    }

    if (c_t->parsed()) return run_selftest(t_suite, t_seed, std::cout);
  } catch (const DataError& e) {
    std::fprintf(stderr, "nafkit: data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericDomainError& e) {
    std::fprintf(stderr, "nafkit: numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const InconsistencyError& e) {
    std::fprintf(stderr, "nafkit: numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "nafkit: usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "nafkit: data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nafkit: error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;
}
