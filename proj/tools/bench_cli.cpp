// bench_cli: certify | quad | logreg | tune | simulate.
//
// Every subcommand resolves its configuration as defaults, then --config
// JSON, then explicit flags, and writes the result to <out>/config.json
// before running.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hbreset/experiments.hpp"
#include "hbreset/format.hpp"
#include "hbreset/hybrid_ct.hpp"
#include "hbreset/svg.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hbreset;

namespace {

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  json defaults;
  std::vector<std::function<void(json&)>> overrides;  // applied for flags given on the command line
  bool randomized = true;
  std::function<void(const json&, const fs::path&)> run;

  template <class T>
  void flag(const std::string& names, const std::string& key, const std::string& help) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = app->add_option(names, *storage, help);
    overrides.push_back([opt, storage, key](json& j) {
      if (opt->count() > 0) j[key] = *storage;
    });
  }
  void toggle(const std::string& names, const std::string& key, const std::string& help) {
    auto storage = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(names, *storage, help);
    overrides.push_back([opt, storage, key](json& j) {
      if (opt->count() > 0) j[key] = *storage;
    });
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <class F>
void write_stream(const fs::path& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
}

std::string tag(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

void require_nonempty(const json& cfg, const char* key) {
  if (!cfg.at(key).is_array() || cfg.at(key).empty()) throw std::invalid_argument(std::string(key) + " must be a non-empty list");
}

// ---------------------------------------------------------------------------

void run_certify(const json& cfg, const fs::path& out) {
  require_nonempty(cfg, "grid_L");
  require_nonempty(cfg, "methods");
  const auto rule = exp::tuning_rule_from_string(cfg.at("rule").get<std::string>());
  const auto grid = cfg.at("grid_L").get<std::vector<double>>();
  const auto methods = cfg.at("methods").get<std::vector<std::string>>();
  const double mu = cfg.at("mu").get<double>();

  lmi::CertOptions options;
  std::unique_ptr<std::ofstream> dump;
  if (cfg.at("dump_sdp").get<bool>()) {
    dump = std::make_unique<std::ofstream>(out / "sdp_dump.jsonl", std::ios::binary);
    options.on_solve = [&dump](const sdp::FeasProblem& p, const sdp::FeasResult& r) {
      *dump << json{{"problem", sdp::to_json(p)}, {"result", sdp::to_json(r)}}.dump() << '\n';
    };
  }
  const auto rows = exp::certify_sweep(grid, methods, rule, mu, options);

  write_stream(out / "sweep.csv", [&](std::ostream& s) { exp::write_sweep_csv(rows, s); });
  write_text(out / "sweep.svg", exp::sweep_svg(rows, std::string("certified rate, ") + exp::to_string(rule) + " tuning"));
  json certs = json::array();
  for (const auto& r : rows) {
    certs.push_back({{"method", r.method},
                     {"L", r.L},
                     {"request", lmi::to_json(r.request)},
                     {"monotone_scan", r.monotone},
                     {"certificate", r.certificate ? lmi::to_json(*r.certificate) : json(nullptr)}});
  }
  write_json(out / "certificates.json", certs);
  for (const auto& r : rows) {
    std::printf("L=%-8s %-9s %s%s\n", tag(r.L).c_str(), r.method.c_str(),
                r.rho ? fmt17(*r.rho).c_str() : "uncertified", r.monotone ? "" : " (non-monotone scan)");
  }
}

void run_quad(const json& cfg, const fs::path& out) {
  require_nonempty(cfg, "K");
  require_nonempty(cfg, "methods");
  exp::QuadConfig c;
  c.n = cfg.at("n").get<int>();
  c.L = cfg.at("L").get<double>();
  c.h = cfg.at("h").get<double>();
  c.iters = cfg.at("iters").get<long>();
  c.K = cfg.at("K").get<std::vector<double>>();
  c.hihb_K_hi = cfg.at("hihb_K_hi").get<double>();
  c.methods = cfg.at("methods").get<std::vector<std::string>>();
  c.seed = cfg.at("seed").get<std::uint64_t>();
  const exp::QuadExperiment e = exp::run_quad(c);

  json summary = json::array();
  for (const auto& r : e.runs) {
    write_stream(out / ("quad_" + r.method + "_K" + tag(r.K) + ".csv"), [&](std::ostream& s) { dopt::write_csv(r.traj, s); });
    summary.push_back({{"method", r.method},
                       {"K", r.K},
                       {"params", dopt::to_json(r.params)},
                       {"status", dopt::to_string(r.traj.status)},
                       {"final_gap", r.final_gap},
                       {"nonmonotone", r.nonmonotone},
                       {"tail_slope", r.tail_slope}});
    std::printf("K=%-5s %-9s %-9s gap %s nonmonotone %ld slope %s\n", tag(r.K).c_str(), r.method.c_str(),
                dopt::to_string(r.traj.status), fmt17(r.final_gap).c_str(), r.nonmonotone,
                fmt17(r.tail_slope).c_str());
  }
  for (double K : c.K) {
    std::vector<std::pair<std::string, const dopt::Trajectory*>> series;
    for (const auto& r : e.runs)
      if (r.K == K) series.emplace_back(r.method, &r.traj);
    write_text(out / ("quad_K" + tag(K) + ".svg"), exp::trajectories_svg(series, "random quadratic, K = " + tag(K)));
  }
  write_json(out / "summary.json", summary);
}

void run_logreg(const json& cfg, const fs::path& out) {
  require_nonempty(cfg, "methods");
  exp::LogregConfig c;
  c.n = cfg.at("n").get<int>();
  c.m = cfg.at("m").get<int>();
  c.seed = cfg.at("seed").get<std::uint64_t>();
  c.max_iter = cfg.at("max_iter").get<long>();
  c.target = cfg.at("target").get<double>();
  c.tune.budget = cfg.at("budget").get<long>();
  c.methods = cfg.at("methods").get<std::vector<std::string>>();
  const exp::LogregExperiment e = exp::run_logreg(c);

  json runs = json::array();
  std::vector<std::pair<std::string, const dopt::Trajectory*>> series;
  for (const auto& r : e.runs) {
    write_stream(out / ("logreg_" + r.tuned.method + ".csv"), [&](std::ostream& s) { dopt::write_csv(r.traj, s); });
    series.emplace_back(r.tuned.method, &r.traj);
    runs.push_back({{"tuned", exp::to_json(r.tuned)},
                    {"status", dopt::to_string(r.traj.status)},
                    {"iterations_to_target", r.iters_to_target ? json(*r.iters_to_target) : json(nullptr)}});
    std::printf("%-9s h %s beta_lo %s beta_hi %s iterations to target %s\n", r.tuned.method.c_str(),
                fmt17(r.tuned.params.h).c_str(), fmt17(r.tuned.params.beta_lo).c_str(),
                fmt17(r.tuned.params.beta_hi).c_str(),
                r.iters_to_target ? std::to_string(*r.iters_to_target).c_str() : "never");
  }
  write_text(out / "logreg.svg", exp::trajectories_svg(series, "logistic regression"));
  write_json(out / "summary.json", {{"budget", e.budget}, {"reference_grad_norm", e.reference_grad_norm}, {"runs", runs}});
}

void run_tune(const json& cfg, const fs::path& out) {
  const std::string objective = cfg.at("objective").get<std::string>();
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const int n = cfg.at("n").get<int>();
  std::shared_ptr<ObjectiveModel> model;
  Vector q0;
  if (objective == "logreg") {
    auto m = std::make_shared<LogisticModel>(gen_logistic_dataset(n, cfg.at("m").get<int>(), seed));
    q0 = Vector::Zero(n);
    const double g = attach_gd_reference(*m, q0);
    if (!(g <= 1e-10)) throw std::runtime_error("gradient-descent reference did not converge (gradient norm " + fmt17(g) + ")");
    model = m;
  } else if (objective == "quad") {
    model = gen_random_quadratic(n, cfg.at("L").get<double>(), seed);
    q0 = exp::quad_initial_point(n, seed);
  } else {
    throw std::invalid_argument("objective must be logreg or quad");
  }
  exp::TuneConfig tc;
  tc.budget = cfg.at("budget").get<long>();
  if (tc.budget < 1) tc.budget = exp::gd_reference_budget(*model, q0, cfg.at("target").get<double>());
  json results = json::array();
  for (const auto& method : cfg.at("methods").get<std::vector<std::string>>()) {
    const exp::TuneResult r = exp::tune(*model, q0, method, tc);
    results.push_back(exp::to_json(r));
    std::printf("%-9s h %s gap %s\n", method.c_str(), fmt17(r.params.h).c_str(), fmt17(r.gap).c_str());
  }
  write_json(out / "tuned.json", {{"tune", exp::to_json(tc)}, {"results", results}});
}

void run_simulate(const json& cfg, const fs::path& out) {
  const std::string objective = cfg.at("objective").get<std::string>();
  std::shared_ptr<QuadraticModel> model;
  hct::HybridState z0;
  if (objective == "scalar") {
    model = std::make_shared<QuadraticModel>(QuadraticSpec{Matrix::Identity(1, 1), Vector::Zero(1)});
    z0 = {Vector::Constant(1, cfg.at("q0").get<double>()), Vector::Zero(1), 0.0};
  } else if (objective == "quad") {
    const int n = cfg.at("n").get<int>();
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    model = gen_random_quadratic(n, cfg.at("L").get<double>(), seed);
    z0 = {exp::quad_initial_point(n, seed), Vector::Zero(n), 0.0};
  } else {
    throw std::invalid_argument("objective must be scalar or quad");
  }
  hct::HybridParams p;
  p.K = cfg.at("K").get<double>();
  p.K_lo = cfg.at("K_lo").get<double>();
  p.K_hi = cfg.at("K_hi").get<double>();
  p.T_min = cfg.at("T_min").is_null() ? hct::default_dwell_time(model->lipschitz()) : cfg.at("T_min").get<double>();
  p.step = cfg.at("step").get<double>();
  const double t_end = cfg.at("t_end").get<double>();
  const std::string mode = cfg.at("mode").get<std::string>();
  hct::HybridArc arc;
  if (mode == "hb") {
    arc = hct::integrate_hb(*model, p, z0, t_end);
  } else if (mode == "hhb") {
    arc = hct::integrate_hhb(*model, p, z0, t_end);
  } else if (mode == "hihb") {
    arc = hct::integrate_hihb(*model, p, z0, t_end);
  } else {
    throw std::invalid_argument("mode must be hb, hhb or hihb");
  }
  write_stream(out / "arc.csv", [&](std::ostream& s) { hct::write_csv(arc, s); });
  write_json(out / "jumps.json", hct::jumps_to_json(arc));
  const double fstar = model->min_value().value_or(0.0);
  svg::Series s{mode, {}, {}};
  for (const auto& a : arc.samples) {
    s.x.push_back(a.t);
    s.y.push_back(a.energy - fstar);
  }
  write_text(out / "arc.svg", svg::line_chart({s}, {"energy along the arc", "t", "E - phi*", true}));
  std::printf("%zu samples, %zu jumps, final energy gap %s\n", arc.samples.size(), arc.jumps.size(),
              fmt17(arc.samples.back().energy - fstar).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Momentum-reset benchmark harness"};
  app.require_subcommand(1);
  std::string out_dir = "out";
  std::string config_path;
  std::vector<Command> commands(5);

  auto setup = [&](Command& c, const std::string& name, const std::string& help, json defaults, bool randomized) {
    c.name = name;
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--out", out_dir, "output directory")->capture_default_str();
    c.app->add_option("--config", config_path, "JSON file with configuration overrides");
    c.defaults = std::move(defaults);
    c.randomized = randomized;
  };

  Command& certify = commands[0];
  setup(certify, "certify", "certified rates over a grid of L",
        {{"rule", "mistuned"},
         {"mu", 1.0},
         {"grid_L", {1, 10, 25, 50, 75, 100}},
         {"methods", exp::certify_methods()},
         {"dump_sdp", false}},
        false);
  certify.flag<std::vector<double>>("--grid-L", "grid_L", "L values");
  certify.flag<std::vector<std::string>>("--methods", "methods", "methods to certify");
  certify.flag<std::string>("--rule", "rule", "mistuned or optimal");
  certify.flag<double>("--mu", "mu", "strong convexity constant");
  certify.toggle("--dump-sdp", "dump_sdp", "write every posed SDP and its result to sdp_dump.jsonl");
  certify.run = run_certify;

  Command& quad = commands[1];
  const exp::QuadConfig qd;
  setup(quad, "quad", "momentum methods on a random quadratic",
        {{"seed", nullptr}, {"n", qd.n}, {"L", qd.L}, {"h", qd.h}, {"iters", qd.iters}, {"K", qd.K},
         {"hihb_K_hi", qd.hihb_K_hi}, {"methods", qd.methods}},
        true);
  quad.flag<std::uint64_t>("--seed", "seed", "random seed");
  quad.flag<std::vector<std::string>>("--methods", "methods", "methods to run");
  quad.flag<int>("--n", "n", "dimension");
  quad.flag<double>("--L", "L", "condition number (mu = 1)");
  quad.flag<double>("--stepsize", "h", "stepsize h");
  quad.flag<long>("--iters", "iters", "iterations");
  quad.flag<std::vector<double>>("--K", "K", "damping values");
  quad.flag<double>("--K-hi", "hihb_K_hi", "reset-side damping floor for hihb");
  quad.run = run_quad;

  Command& logreg = commands[2];
  const exp::LogregConfig ld;
  setup(logreg, "logreg", "tuned methods on a logistic regression problem",
        {{"seed", nullptr}, {"n", ld.n}, {"m", ld.m}, {"max_iter", ld.max_iter}, {"target", ld.target},
         {"budget", ld.tune.budget}, {"methods", ld.methods}},
        true);
  logreg.flag<std::uint64_t>("--seed", "seed", "random seed");
  logreg.flag<std::vector<std::string>>("--methods", "methods", "methods to run");
  logreg.flag<int>("--n", "n", "features");
  logreg.flag<int>("--m", "m", "observations");
  logreg.flag<long>("--max-iter", "max_iter", "iterations after tuning");
  logreg.flag<double>("--target", "target", "gap target");
  logreg.flag<long>("--budget", "budget", "tuning budget in iterations (0: gradient-descent reference)");
  logreg.run = run_logreg;

  Command& tune = commands[3];
  setup(tune, "tune", "tune stepsize and momentum at a fixed iteration budget",
        {{"seed", nullptr}, {"objective", "logreg"}, {"n", 20}, {"m", 1000}, {"L", 1e3}, {"budget", 0},
         {"target", 1e-6}, {"methods", exp::tune_methods()}},
        true);
  tune.flag<std::uint64_t>("--seed", "seed", "random seed");
  tune.flag<std::vector<std::string>>("--methods", "methods", "methods to tune");
  tune.flag<std::string>("--objective", "objective", "logreg or quad");
  tune.flag<int>("--n", "n", "dimension");
  tune.flag<int>("--m", "m", "observations (logreg)");
  tune.flag<double>("--L", "L", "condition number (quad)");
  tune.flag<long>("--budget", "budget", "iterations (0: gradient-descent reference)");
  tune.run = run_tune;

  Command& simulate = commands[4];
  setup(simulate, "simulate", "integrate the continuous-time flows",
        {{"seed", nullptr}, {"objective", "scalar"}, {"mode", "hhb"}, {"q0", 1.0}, {"n", 10}, {"L", 10.0},
         {"K", 0.0}, {"K_lo", 0.0}, {"K_hi", 2.0}, {"T_min", nullptr}, {"step", 1e-3}, {"t_end", 10.0}},
        false);
  simulate.flag<std::uint64_t>("--seed", "seed", "random seed (quad objective)");
  simulate.flag<std::string>("--objective", "objective", "scalar or quad");
  simulate.flag<std::string>("--mode", "mode", "hb, hhb or hihb");
  simulate.flag<double>("--q0", "q0", "initial position (scalar)");
  simulate.flag<int>("--n", "n", "dimension (quad)");
  simulate.flag<double>("--L", "L", "condition number (quad)");
  simulate.flag<double>("--K", "K", "damping for hb and hhb");
  simulate.flag<double>("--K-lo", "K_lo", "hihb damping while descending");
  simulate.flag<double>("--K-hi", "K_hi", "hihb damping otherwise");
  simulate.flag<double>("--T-min", "T_min", "dwell time");
  simulate.flag<double>("--step", "step", "integrator step");
  simulate.flag<double>("--t-end", "t_end", "final time");
  simulate.run = run_simulate;

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      json cfg = c.defaults;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot read " + config_path);
        const json file = json::parse(in);
        for (const auto& [key, value] : file.items()) {
          if (key == "subcommand") {
            if (value != c.name) throw std::invalid_argument("config is for subcommand " + value.dump());
            continue;
          }
          if (!cfg.contains(key)) throw std::invalid_argument("unknown config key " + key);
          cfg[key] = value;
        }
      }
      for (const auto& apply : c.overrides) apply(cfg);
      const bool needs_seed = c.randomized || (c.name == "simulate" && cfg.at("objective") == "quad");
      if (needs_seed && cfg.at("seed").is_null()) throw std::invalid_argument(c.name + " needs --seed");

      const fs::path out = out_dir;
      fs::create_directories(out);
      json resolved = cfg;
      resolved["subcommand"] = c.name;
      write_json(out / "config.json", resolved);
      c.run(cfg, out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
