#include "json_io.hpp"

#include <fmt/format.h>

#include "cdi/errors.hpp"

namespace cdi::cli {

Json to_json(const GofReport& r) {
  Json j;
  j["test_id"] = r.test_id;
  j["model"] = r.model;
  j[r.index_name] = r.index;
  j["ks"] = r.statistic;
  j["statistic"] = r.statistic_kind;
  j["threshold"] = r.threshold;
  j["pass"] = r.pass;
  j["seed"] = r.seed;
  j["sample_size"] = r.sample_size;
  j["reference"] = std::string(to_string(r.reference));
  Json d = Json::object();
  for (const auto& [k, v] : r.details) d[k] = v;
  j["details"] = d;
  return j;
}

Json to_json(const ConditionReport& r) {
  Json j;
  j["model"] = r.model;
  j["horizon"] = r.horizon;
  Json list = Json::array();
  for (const ConditionTrajectory& c : r.conditions) {
    Json cj;
    cj["condition_id"] = c.condition_id;
    Json samples = Json::array();
    for (const TrajectoryPoint& p : c.samples) samples.push_back({{"n", p.n}, {"value", p.value}});
    cj["samples"] = samples;
    cj["verdict"] = std::string(to_string(c.verdict));
    cj["horizon"] = c.samples.empty() ? 0 : c.samples.back().n;
    if (c.target) cj["target"] = *c.target;
    list.push_back(cj);
  }
  j["conditions"] = list;
  return j;
}

Json to_json(const LdReport& r) {
  Json j;
  j["side"] = std::string(to_string(r.side));
  j["model"] = r.model;
  j["beta"] = r.beta;
  j["x"] = r.x;
  j["target"] = r.target;
  j["seed"] = r.seed;
  j["replicates"] = r.replicates;
  Json pts = Json::array();
  for (const LdPoint& p : r.points) {
    pts.push_back({{"n", p.n},
                   {"index", p.index},
                   {"x_eff", p.x_eff},
                   {"theta", p.theta},
                   {"log_estimate", p.log_estimate},
                   {"relative_se", p.relative_se},
                   {"naive_relative_se", p.naive_relative_se},
                   {"hits", p.hits},
                   {"degenerate", p.degenerate},
                   {"rate", p.rate},
                   {"gap", p.gap}});
  }
  j["points"] = pts;
  j["gap_non_increasing"] = r.gap_non_increasing;
  j["final_gap"] = r.final_gap;
  return j;
}

RateModel model_from_json(const Json& j) {
  if (!j.is_object()) throw DomainError("model file must hold a JSON object");
  ModelParams p;
  std::string kind;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      kind = value.get<std::string>();
    } else if (key == "beta") {
      p.beta = value.get<double>();
    } else if (key == "a") {
      p.a = value.get<double>();
    } else if (key == "rho") {
      p.rho = value.get<double>();
    } else if (key == "c") {
      p.c = value.get<double>();
    } else if (key != "range_hint") {
      throw DomainError(fmt::format("unknown model field '{}'", key));
    }
  }
  if (kind.empty()) throw DomainError("model file needs a 'kind'");
  return preset(kind, p);
}

}  // namespace cdi::cli
