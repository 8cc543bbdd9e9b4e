#include "cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "cdi/errors.hpp"
#include "cdi/large_deviations.hpp"
#include "cdi/limit_laws.hpp"
#include "cdi/numerics.hpp"
#include "cdi/simulation.hpp"
#include "cdi/tail_analysis.hpp"
#include "cdi/version.hpp"
#include "json_io.hpp"
#include "manifest.hpp"

namespace cdi::cli {

namespace {

class UsageError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct Options {
  std::string command;
  std::string test_id;
  std::string manifest;
  // model
  std::string preset;
  std::string model_file;
  std::optional<double> beta, a, rho, c;
  // indices and arguments
  std::string n, t, x;
  std::optional<std::int64_t> v;
  std::optional<double> theta, alpha, threshold, tol;
  int k_max = 2;
  std::string side = "T";
  std::int64_t horizon = 1'000'000;
  int points = 40;
  // simulation
  std::int64_t reps = 10'000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<std::int64_t> max_index;
  std::string out;
};

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // no "-0" in tables
  return fmt::format("{:.17g}", v);
}

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json parameters(const Options& o) {
  Json p;
  p["command"] = o.command;
  if (!o.test_id.empty()) p["test_id"] = o.test_id;
  p["preset"] = o.preset;
  p["model_file"] = o.model_file;
  p["beta"] = opt(o.beta);
  p["a"] = opt(o.a);
  p["rho"] = opt(o.rho);
  p["c"] = opt(o.c);
  p["n"] = o.n;
  p["t"] = o.t;
  p["x"] = o.x;
  p["v"] = opt(o.v);
  p["theta"] = opt(o.theta);
  p["alpha"] = opt(o.alpha);
  p["threshold"] = opt(o.threshold);
  p["tol"] = opt(o.tol);
  p["k"] = o.k_max;
  p["side"] = o.side;
  p["horizon"] = o.horizon;
  p["points"] = o.points;
  p["reps"] = o.reps;
  p["seed"] = o.seed;
  p["threads"] = o.threads;
  p["max_index"] = o.max_index.value_or(max_index_from_env());
  return p;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    // Accept integral reals such as 1e6.
    const double d = std::strtod(s.c_str(), nullptr);
    if (!s.empty() && std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9e15) return static_cast<std::int64_t>(d);
    throw UsageError(fmt::format("not an integer: '{}'", s));
  }
  return v;
}

double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw UsageError(fmt::format("not a number: '{}'", s));
  return v;
}

// "a:b" (inclusive), "a,b,c", or a mix.
std::vector<std::int64_t> parse_int_list(const std::string& s, const char* flag) {
  if (s.empty()) throw UsageError(fmt::format("{} is required", flag));
  std::vector<std::int64_t> out;
  for (const std::string& part : split(s, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      out.push_back(parse_int(part));
      continue;
    }
    const std::int64_t lo = parse_int(part.substr(0, colon));
    const std::int64_t hi = parse_int(part.substr(colon + 1));
    if (hi < lo) throw UsageError(fmt::format("empty range '{}'", part));
    if (hi - lo > 10'000'000) throw UsageError(fmt::format("range '{}' is too long", part));
    for (std::int64_t k = lo; k <= hi; ++k) out.push_back(k);
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& s, const char* flag) {
  if (s.empty()) throw UsageError(fmt::format("{} is required", flag));
  std::vector<double> out;
  for (const std::string& part : split(s, ',')) out.push_back(parse_real(part));
  return out;
}

std::int64_t single_int(const std::string& s, const char* flag) {
  const auto v = parse_int_list(s, flag);
  if (v.size() != 1) throw UsageError(fmt::format("{} takes a single value", flag));
  return v.front();
}

double single_real(const std::string& s, const char* flag) {
  const auto v = parse_real_list(s, flag);
  if (v.size() != 1) throw UsageError(fmt::format("{} takes a single value", flag));
  return v.front();
}

RateModel resolve_model(const Options& o) {
  if (!o.model_file.empty()) {
    if (!o.preset.empty()) throw UsageError("--preset and --model-file are exclusive");
    return model_from_json(Json::parse(read_file(o.model_file)));
  }
  const ModelParams p{o.a, o.rho, o.c, o.beta};
  if (!o.preset.empty()) return preset(o.preset, p);
  if (o.beta) return preset("regvarying", p);
  throw UsageError("a model is required: --preset, --beta or --model-file");
}

SimConfig sim_config(const Options& o) {
  SimConfig cfg;
  cfg.seed = o.seed;
  cfg.replicates = o.reps;
  cfg.trunc_tol = o.tol.value_or(1e-2);
  cfg.max_index = o.max_index.value_or(max_index_from_env());
  cfg.threads = o.threads;
  return cfg;
}

std::int64_t state_for(const Options& o, const RateModel& model, const char* flag) {
  if (o.v) return *o.v;
  if (!o.t.empty()) return speed(model, single_real(o.t, "--t"), o.max_index.value_or(max_index_from_env()));
  throw UsageError(fmt::format("{} or --t is required", flag));
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Commands. Each returns the payload.

std::string cmd_rates(const Options& o) {
  const RateModel model = resolve_model(o);
  std::string s = "n,lambda\n";
  for (std::int64_t n : parse_int_list(o.n, "--n")) s += fmt::format("{},{}\n", n, num(lambda(model, n)));
  return s;
}

std::string cmd_tails(const Options& o) {
  const RateModel model = resolve_model(o);
  const double tol = o.tol.value_or(1e-10);
  std::string s = "n,A,B,C,err_bound\n";
  for (std::int64_t n : parse_int_list(o.n, "--n")) {
    const TailStats t = tail_moments(model, n, tol);
    s += fmt::format("{},{},{},{},{}\n", n, num(t.A), num(t.B), num(t.C), num(t.err_bound));
  }
  return s;
}

std::string cmd_speed(const Options& o) {
  const RateModel model = resolve_model(o);
  std::string s = "t,v\n";
  for (double t : parse_real_list(o.t, "--t")) {
    s += fmt::format("{},{}\n", num(t), speed(model, t, o.max_index.value_or(max_index_from_env())));
  }
  return s;
}

std::string cmd_diagnose(const Options& o) {
  return dump(to_json(condition_diagnostics(resolve_model(o), o.horizon, o.points)));
}

std::string cmd_simulate(const Options& o) {
  const RateModel model = resolve_model(o);
  const SimConfig cfg = sim_config(o);
  Json j;
  j["model"] = model.name();
  if (!o.t.empty()) {
    const double t = single_real(o.t, "--t");
    const std::vector<std::int64_t> z = sample_Z_many(model, t, cfg);
    const EstimateCI e = summarize(std::vector<double>(z.begin(), z.end()), cfg.seed);
    j["t"] = t;
    j["estimate"] = e.point;
    j["std_error"] = e.std_error;
  } else {
    const std::int64_t n = single_int(o.n, "--n");
    j["n"] = n;
    if (!o.x.empty()) {
      const double x = single_real(o.x, "--x");
      const TiltedEstimate e = tilted_estimate(model, n, x, o.theta.value_or(0.0), cfg);
      j["x"] = x;
      j["theta"] = e.theta;
      j["estimate"] = e.estimate.point;
      j["std_error"] = e.estimate.std_error;
      j["log_estimate"] = e.log_point;
      j["hits"] = e.hits;
      j["degenerate"] = e.degenerate;
    } else {
      const EstimateCI e = summarize(sample_hitting_times(model, n, cfg), cfg.seed);
      j["estimate"] = e.point;
      j["std_error"] = e.std_error;
    }
  }
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["trunc_tol"] = cfg.trunc_tol;
  return dump(j);
}

std::string cmd_verify(const Options& o) {
  const RateModel model = resolve_model(o);
  const SimConfig cfg = sim_config(o);
  const std::int64_t n = o.n.empty() ? 100 : single_int(o.n, "--n");
  GofReport r;
  if (o.test_id == "thm1-limit") {
    r = verify_thm1_limit(model, n, cfg, o.alpha, o.threshold.value_or(0.03));
  } else if (o.test_id == "thm2iii") {
    r = verify_thm2iii(model, n, cfg, o.alpha, o.k_max, o.threshold.value_or(0.03));
  } else if (o.test_id == "clt") {
    r = verify_clt(model, n, cfg, o.threshold.value_or(0.03));
  } else if (o.test_id == "lln") {
    r = verify_lln(model, o.v || !o.t.empty() ? state_for(o, model, "--v") : 500, cfg, o.threshold.value_or(0.02));
  } else if (o.test_id == "corollary") {
    r = verify_corollary(model, o.v || !o.t.empty() ? state_for(o, model, "--v") : 500, cfg, o.beta,
                         o.threshold.value_or(0.1));
  } else {
    throw UsageError(fmt::format("unknown test id '{}'", o.test_id));
  }
  return dump(to_json(r));
}

double require_beta(const Options& o) {
  if (!o.beta) throw UsageError("--beta is required");
  return *o.beta;
}

std::string ld_rows(const LdContext& ctx, const std::vector<double>& xs, bool with_beta) {
  std::string s;
  for (double x : xs) {
    const RateEval r = evaluate(ctx, x);
    if (with_beta) s += num(ctx.beta()) + ",";
    s += fmt::format("{},{},{},{}\n", num(x), num(r.tau), num(r.I), num(r.J));
  }
  return s;
}

std::string cmd_ld_table(const Options& o) {
  const LdContext ctx(require_beta(o));
  return "x,tau,I,J\n" + ld_rows(ctx, parse_real_list(o.x, "--x"), false);
}

std::string cmd_ld_figure(const Options& o) {
  std::vector<double> xs;
  if (o.x.empty()) {
    for (int k = 1; k <= 100; ++k) xs.push_back(k / 20.0);
  } else {
    xs = parse_real_list(o.x, "--x");
  }
  std::string s = "beta,x,tau,I,J\n";
  for (double beta : {1.3, 2.0, 3.0}) s += ld_rows(LdContext(beta), xs, true);
  return s;
}

std::string cmd_ld_estimate(const Options& o) {
  const RateModel model = o.preset.empty() && o.model_file.empty() ? preset("regvarying", {{}, {}, {}, o.beta})
                                                                   : resolve_model(o);
  const std::optional<double> beta = o.beta ? o.beta : model.info().beta;
  if (!beta) throw UsageError("--beta is required for a model without a regular-variation index");
  if (o.side != "T" && o.side != "Z") throw UsageError("--side must be T or Z");
  const LdReport r = verify_thm3(LdContext(*beta), model, single_real(o.x, "--x"), parse_int_list(o.n, "--n"),
                                 sim_config(o), o.side == "T" ? LdSide::HittingTime : LdSide::Population);
  return dump(to_json(r));
}

std::string cmd_replay(const Options& o, std::ostream& err) {
  const RunManifest m = manifest_from_json(Json::parse(read_file(o.manifest)));
  if (m.outputs.empty()) throw UsageError("manifest lists no outputs");
  std::vector<std::string> args = m.args;
  const std::string original = m.outputs.front().path;
  const std::string replay_path = original + ".replay";
  bool found = false;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--out" && k + 1 < args.size()) {
      args[k + 1] = replay_path;
      found = true;
    } else if (args[k].rfind("--out=", 0) == 0) {
      args[k] = "--out=" + replay_path;
      found = true;
    }
  }
  if (!found) throw UsageError("manifest arguments carry no --out");
  const bool has_cap = std::any_of(args.begin(), args.end(), [](const std::string& a) {
    return a == "--max-index" || a.rfind("--max-index=", 0) == 0;
  });
  if (!has_cap && m.parameters.contains("max_index")) {
    args.push_back("--max-index");
    args.push_back(std::to_string(m.parameters["max_index"].get<std::int64_t>()));
  }
  std::ostringstream sink;
  const int code = run(args, sink, err);
  Json j;
  j["manifest"] = o.manifest;
  j["command"] = m.command;
  j["exit_code"] = code;
  bool identical = code == kExitOk;
  Json outs = Json::array();
  for (const OutputDigest& d : m.outputs) {
    const std::string path = d.path + ".replay";
    const std::string actual = code == kExitOk ? sha256_hex(read_file(path)) : "";
    identical = identical && actual == d.sha256;
    outs.push_back({{"path", d.path}, {"replay_path", path}, {"expected", d.sha256}, {"actual", actual},
                    {"match", actual == d.sha256}});
  }
  j["outputs"] = outs;
  j["identical"] = identical;
  return dump(j);
}

void add_model_options(CLI::App* app, Options& o) {
  app->add_option("--preset", o.preset, "Preset model name");
  app->add_option("--model-file", o.model_file, "JSON model file {kind, beta?, a?, rho?, c?}");
  app->add_option("--beta", o.beta, "Regular variation index");
  app->add_option("--a", o.a, "logpow exponent");
  app->add_option("--rho", o.rho, "stretched exponent");
  app->add_option("--c", o.c, "polytail constant");
  app->add_option("--max-index", o.max_index, "Largest admissible state index");
}

void add_sim_options(CLI::App* app, Options& o) {
  app->add_option("--reps", o.reps, "Replicates")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "Seed");
  app->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  app->add_option("--tol", o.tol, "Truncation tolerance B_K/B_n")->check(CLI::PositiveNumber);
}

void add_out(CLI::App* app, Options& o) { app->add_option("--out", o.out, "Write the payload here with a run manifest"); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Pure death processes coming down from infinity"};
  app.name("cdi");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CLI::App* rates = app.add_subcommand("rates", "Death rates lambda_n");
  add_model_options(rates, o);
  rates->add_option("--n", o.n, "States: a:b or a,b,c")->required();
  add_out(rates, o);

  CLI::App* tails = app.add_subcommand("tails", "Tail sums A_n, B_n, C_n");
  add_model_options(tails, o);
  tails->add_option("--n", o.n, "States: a:b or a,b,c")->required();
  tails->add_option("--tol", o.tol, "Absolute tolerance on each tail sum")->check(CLI::PositiveNumber);
  add_out(tails, o);

  CLI::App* spd = app.add_subcommand("speed", "Speed function v(t)");
  add_model_options(spd, o);
  spd->add_option("--t", o.t, "Times, comma separated")->required();
  add_out(spd, o);

  CLI::App* diag = app.add_subcommand("diagnose", "Finite-horizon condition diagnostics");
  add_model_options(diag, o);
  diag->add_option("--horizon", o.horizon, "Largest n")->check(CLI::PositiveNumber);
  diag->add_option("--points", o.points, "Grid points")->check(CLI::PositiveNumber);
  add_out(diag, o);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo estimate of E T_n, E Z(t) or a tilted tail probability");
  add_model_options(sim, o);
  add_sim_options(sim, o);
  sim->add_option("--n", o.n, "State n");
  sim->add_option("--t", o.t, "Time t");
  sim->add_option("--x", o.x, "Event T_n > x A_n (x >= 1) or T_n < x A_n");
  sim->add_option("--theta", o.theta, "Tilt");
  add_out(sim, o);

  CLI::App* ver = app.add_subcommand("verify", "Goodness-of-fit checks of the limit theorems");
  ver->add_option("test", o.test_id, "Test id")
      ->required()
      ->check(CLI::IsMember({"lln", "clt", "thm1-limit", "thm2iii", "corollary"}));
  add_model_options(ver, o);
  add_sim_options(ver, o);
  ver->add_option("--n", o.n, "State n (default 100)");
  ver->add_option("--v", o.v, "Speed level v(t) (default 500)")->check(CLI::PositiveNumber);
  ver->add_option("--t", o.t, "Time t; sets v = v(t)");
  ver->add_option("--alpha", o.alpha, "Limit ratio alpha for F_alpha");
  ver->add_option("--k", o.k_max, "Largest shift k")->check(CLI::NonNegativeNumber);
  ver->add_option("--threshold", o.threshold, "Pass threshold");
  add_out(ver, o);

  CLI::App* ld = app.add_subcommand("ld", "Large-deviation rate functions");
  ld->require_subcommand(1);
  CLI::App* table = ld->add_subcommand("table", "x, tau, I, J for one beta");
  table->add_option("--beta", o.beta, "Index beta > 1")->required();
  table->add_option("--x", o.x, "Points, comma separated")->required();
  table->add_option("--max-index", o.max_index, "Largest admissible state index (recorded only)");
  add_out(table, o);
  CLI::App* figure = ld->add_subcommand("figure", "I and J for beta in {1.3, 2, 3} on x in [0.05, 5]");
  figure->add_option("--x", o.x, "Override the x grid");
  figure->add_option("--max-index", o.max_index, "Largest admissible state index (recorded only)");
  add_out(figure, o);
  CLI::App* est = ld->add_subcommand("estimate", "Importance-sampling rates against I or J");
  add_model_options(est, o);
  add_sim_options(est, o);
  est->add_option("--x", o.x, "x")->required();
  est->add_option("--n", o.n, "States: a,b,c")->required();
  est->add_option("--side", o.side, "T (hitting time) or Z (population)");
  add_out(est, o);

  CLI::App* rep = app.add_subcommand("replay", "Rerun a manifest and compare output digests");
  rep->add_option("manifest", o.manifest, "Manifest path")->required();
  add_out(rep, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    std::string payload;
    if (rates->parsed()) {
      o.command = "rates";
      payload = cmd_rates(o);
    } else if (tails->parsed()) {
      o.command = "tails";
      payload = cmd_tails(o);
    } else if (spd->parsed()) {
      o.command = "speed";
      payload = cmd_speed(o);
    } else if (diag->parsed()) {
      o.command = "diagnose";
      payload = cmd_diagnose(o);
    } else if (sim->parsed()) {
      o.command = "simulate";
      payload = cmd_simulate(o);
    } else if (ver->parsed()) {
      o.command = "verify";
      payload = cmd_verify(o);
    } else if (table->parsed()) {
      o.command = "ld table";
      payload = cmd_ld_table(o);
    } else if (figure->parsed()) {
      o.command = "ld figure";
      payload = cmd_ld_figure(o);
    } else if (est->parsed()) {
      o.command = "ld estimate";
      payload = cmd_ld_estimate(o);
    } else {
      o.command = "replay";
      payload = cmd_replay(o, err);
    }

    if (o.out.empty()) {
      out << payload;
      return kExitOk;
    }
    write_file(o.out, payload);
    RunManifest m;
    m.command = o.command;
    m.args = args;
    m.parameters = parameters(o);
    m.seed = o.seed;
    m.library_version = kVersion;
    m.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    m.outputs.push_back({std::filesystem::absolute(o.out).string(), sha256_hex(payload)});
    write_file(manifest_path(o.out), to_json(m).dump(2) + "\n");
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace cdi::cli
