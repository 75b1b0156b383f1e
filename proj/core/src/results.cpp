#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "xhaul/sim.hpp"

namespace xhaul {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // no platform newline surprises
  if (!out) throw std::runtime_error("cannot write: " + path);
  return out;
}

}  // namespace

void write_slot_csv(const std::string& path, const std::vector<EpisodeLog>& logs) {
  auto out = open_out(path);
  out << "episode,slot,action,delta_r,delta_u,delta,delta_front,delta_back,"
         "uncached,age,cache_hash,reward\n";
  for (const auto& log : logs)
    for (const auto& r : log.slots) {
      char hash[20];
      std::snprintf(hash, sizeof(hash), "%016" PRIx64, r.cache_hash);
      out << r.episode << ',' << r.slot << ',' << r.action << ',' << fmt(r.delta_r) << ','
          << fmt(r.delta_u) << ',' << fmt(r.delta) << ',' << fmt(r.delta_front) << ','
          << fmt(r.delta_back) << ',' << r.uncached_count << ',' << r.age << ',' << hash
          << ',' << fmt(r.reward) << '\n';
    }
}

void write_learning_curve_csv(const std::string& path,
                              const std::vector<double>& episode_means) {
  auto out = open_out(path);
  out << "episode,mean_latency\n";
  for (size_t i = 0; i < episode_means.size(); ++i)
    out << (i + 1) << ',' << fmt(episode_means[i]) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "scheme,cache_capacity,mean_latency,ci_lo,ci_hi\n";
  for (const auto& r : rows)
    out << r.scheme << ',' << r.cache_capacity << ',' << fmt(r.mean) << ',' << fmt(r.ci_lo)
        << ',' << fmt(r.ci_hi) << '\n';
}

void write_summary_json(const std::string& path, const SystemConfig& cfg,
                        const std::string& run_kind, const EvalResult* eval,
                        const std::vector<SweepRow>* sweep) {
  nlohmann::json j;
  j["run"] = run_kind;
  j["seed"] = cfg.seed;
  j["config"] = nlohmann::json::parse(config_to_json_text(cfg));
  if (eval) {
    j["metrics"] = {{"mean_latency", eval->mean},
                    {"ci_lo", eval->ci_lo},
                    {"ci_hi", eval->ci_hi},
                    {"episodes", eval->episode_means.size()}};
    j["per_episode_mean_latency"] = eval->episode_means;
  }
  if (sweep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : *sweep)
      rows.push_back({{"scheme", r.scheme},
                      {"cache_capacity", r.cache_capacity},
                      {"mean_latency", r.mean},
                      {"ci_lo", r.ci_lo},
                      {"ci_hi", r.ci_hi}});
    j["sweep"] = rows;
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_weights_json(const std::string& path, const AgentState& agent) {
  nlohmann::json j;
  j["dim"] = agent.w.size();
  j["episode"] = agent.episode;
  std::vector<double> w(agent.w.data(), agent.w.data() + agent.w.size());
  j["w"] = w;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

AgentState load_weights_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weights file: " + path);
  nlohmann::json j;
  in >> j;
  const int dim = j.at("dim").get<int>();
  AgentState agent(dim);
  agent.episode = j.value("episode", 0);
  const auto w = j.at("w").get<std::vector<double>>();
  if (static_cast<int>(w.size()) != dim)
    throw std::runtime_error("weights file: dim mismatch");
  for (int i = 0; i < dim; ++i) agent.w(i) = w[i];
  return agent;
}

}  // namespace xhaul
