#pragma once

// JSON configuration for the problem, scheduler, and run settings, with
// exact round-tripping (parse(serialize(c)) == c). eta0 = 0 or eta_max = 0
// in a file mean "resolve from compute_eta_max at run time" (eta0 defaults
// to eta_max/2). Unknown keys are rejected; missing keys keep defaults.

#include "ogd/problem.hpp"
#include "ogd/scheduler.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ogd {

inline const char* to_string(InitScheme v) {
  switch (v) {
    case InitScheme::std_normal: return "std_normal";
    case InitScheme::scaled_normal: return "scaled_normal";
  }
  throw std::logic_error("to_string: bad InitScheme");
}

inline InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "std_normal") return InitScheme::std_normal;
  if (s == "scaled_normal") return InitScheme::scaled_normal;
  throw std::invalid_argument("unknown init scheme: " + s);
}

inline const char* to_string(DataScheme v) {
  switch (v) {
    case DataScheme::orthogonal_teacher: return "orthogonal_teacher";
    case DataScheme::orthogonal_theta: return "orthogonal_theta";
    case DataScheme::spectrum_band: return "spectrum_band";
  }
  throw std::logic_error("to_string: bad DataScheme");
}

inline DataScheme data_scheme_from_string(const std::string& s) {
  if (s == "orthogonal_teacher") return DataScheme::orthogonal_teacher;
  if (s == "orthogonal_theta") return DataScheme::orthogonal_theta;
  if (s == "spectrum_band") return DataScheme::spectrum_band;
  throw std::invalid_argument("unknown data scheme: " + s);
}

inline StepPolicy step_policy_from_string(const std::string& s) {
  if (s == "constant") return StepPolicy::constant;
  if (s == "adaptive_rho") return StepPolicy::adaptive_rho;
  if (s == "adaptive_rho_bar") return StepPolicy::adaptive_rho_bar;
  if (s == "backtracking") return StepPolicy::backtracking;
  throw std::invalid_argument("unknown step policy: " + s);
}

struct RunSettings {
  long iters = 300;
  int seeds = 30;
  int thin_telemetry = 1;
  bool wallclock = false;
  bool paper_scale = false;
  std::string out_dir = ".";
  bool operator==(const RunSettings&) const = default;
};

struct ExperimentConfig {
  ProblemSpec problem;
  SchedulerConfig sched;
  RunSettings run;
};

inline bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
  return a.n == b.n && a.m == b.m && a.s == b.s && a.h == b.h &&
         a.init == b.init && a.p == b.p && a.data == b.data &&
         a.sigma == b.sigma && a.noise == b.noise && a.band_lo == b.band_lo &&
         a.band_hi == b.band_hi && a.seed == b.seed;
}

inline bool operator==(const SchedulerConfig& a, const SchedulerConfig& b) {
  return a.c == b.c && a.d == b.d && a.eta0 == b.eta0 &&
         a.eta_max == b.eta_max && a.policy == b.policy;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.problem == b.problem && a.sched == b.sched && a.run == b.run;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) {
      throw std::invalid_argument(std::string("config: unknown key '") +
                                  item.key() + "' in " + where);
    }
  }
}

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

} // namespace detail

inline nlohmann::json serialize(const ProblemSpec& p) {
  nlohmann::json j;
  j["n"] = p.n;
  j["m"] = p.m;
  j["s"] = p.s;
  j["h"] = p.h;
  j["init"] = to_string(p.init);
  j["p"] = p.p;
  j["data"] = to_string(p.data);
  j["sigma"] = p.sigma;
  j["noise"] = p.noise;
  j["band_lo"] = p.band_lo;
  j["band_hi"] = p.band_hi;
  j["seed"] = p.seed;
  return j;
}

inline ProblemSpec parse_problem_spec(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"n", "m", "s", "h", "init", "p", "data", "sigma",
                               "noise", "band_lo", "band_hi", "seed"},
                              "problem");
  ProblemSpec p;
  detail::maybe_get(j, "n", p.n);
  detail::maybe_get(j, "m", p.m);
  detail::maybe_get(j, "s", p.s);
  detail::maybe_get(j, "h", p.h);
  if (j.contains("init")) p.init = init_scheme_from_string(j.at("init"));
  detail::maybe_get(j, "p", p.p);
  if (j.contains("data")) p.data = data_scheme_from_string(j.at("data"));
  detail::maybe_get(j, "sigma", p.sigma);
  detail::maybe_get(j, "noise", p.noise);
  detail::maybe_get(j, "band_lo", p.band_lo);
  detail::maybe_get(j, "band_hi", p.band_hi);
  detail::maybe_get(j, "seed", p.seed);
  return p;
}

inline nlohmann::json serialize(const SchedulerConfig& c) {
  nlohmann::json j;
  j["c"] = c.c;
  j["d"] = c.d;
  j["eta0"] = c.eta0;
  j["eta_max"] = c.eta_max;
  j["policy"] = to_string(c.policy);
  return j;
}

inline SchedulerConfig parse_scheduler_config(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, {"c", "d", "eta0", "eta_max", "policy"},
                              "scheduler");
  SchedulerConfig c;
  detail::maybe_get(j, "c", c.c);
  detail::maybe_get(j, "d", c.d);
  detail::maybe_get(j, "eta0", c.eta0);
  detail::maybe_get(j, "eta_max", c.eta_max);
  if (j.contains("policy")) c.policy = step_policy_from_string(j.at("policy"));
  return c;
}

inline nlohmann::json serialize(const RunSettings& r) {
  nlohmann::json j;
  j["iters"] = r.iters;
  j["seeds"] = r.seeds;
  j["thin_telemetry"] = r.thin_telemetry;
  j["wallclock"] = r.wallclock;
  j["paper_scale"] = r.paper_scale;
  j["out_dir"] = r.out_dir;
  return j;
}

inline RunSettings parse_run_settings(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"iters", "seeds", "thin_telemetry", "wallclock",
                               "paper_scale", "out_dir"},
                              "run");
  RunSettings r;
  detail::maybe_get(j, "iters", r.iters);
  detail::maybe_get(j, "seeds", r.seeds);
  detail::maybe_get(j, "thin_telemetry", r.thin_telemetry);
  detail::maybe_get(j, "wallclock", r.wallclock);
  detail::maybe_get(j, "paper_scale", r.paper_scale);
  detail::maybe_get(j, "out_dir", r.out_dir);
  return r;
}

inline nlohmann::json serialize(const ExperimentConfig& c) {
  nlohmann::json j;
  j["problem"] = serialize(c.problem);
  j["scheduler"] = serialize(c.sched);
  j["run"] = serialize(c.run);
  return j;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  detail::reject_unknown_keys(j, {"problem", "scheduler", "run"}, "config");
  ExperimentConfig c;
  if (j.contains("problem")) c.problem = parse_problem_spec(j.at("problem"));
  if (j.contains("scheduler")) c.sched = parse_scheduler_config(j.at("scheduler"));
  if (j.contains("run")) c.run = parse_run_settings(j.at("run"));
  return c;
}

// Doubles destined for meta.json; JSON has no literal for infinities.
inline nlohmann::json json_double(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

} // namespace ogd
