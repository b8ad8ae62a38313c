#include "quadnav/runner.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <deque>
#include <map>

#include "json.hpp"
#include "quadnav/rng.hpp"
#include "quadnav/serial.hpp"

namespace quadnav::runner {
namespace {

using json = nlohmann::json;
using clock = std::chrono::steady_clock;

json job_to_json(const EvalJob& job) {
  return json{{"job_id", job.job_id},     {"direction_id", job.direction_id},
              {"sign", job.sign},         {"iteration", job.iteration},
              {"episodes", job.episodes}, {"seed_base", job.seed_base},
              {"params_id", job.params_id}};
}

EvalJob job_from_json(const json& j) {
  EvalJob job;
  job.job_id = j.at("job_id").get<std::uint64_t>();
  job.direction_id = j.at("direction_id").get<int>();
  job.sign = j.at("sign").get<int>();
  job.iteration = j.at("iteration").get<std::uint64_t>();
  job.episodes = j.at("episodes").get<int>();
  job.seed_base = j.at("seed_base").get<std::uint64_t>();
  job.params_id = j.at("params_id").get<std::uint64_t>();
  return job;
}

json result_to_json(const EvalResult& r) {
  return json{{"job_id", r.job_id},
              {"mean_return", r.mean_return},
              {"episode_returns", r.episode_returns},
              {"total_steps", r.total_steps}};
}

EvalResult result_from_json(const json& j) {
  EvalResult r;
  r.job_id = j.at("job_id").get<std::uint64_t>();
  r.mean_return = j.at("mean_return").get<double>();
  r.episode_returns = j.at("episode_returns").get<std::vector<double>>();
  r.total_steps = j.at("total_steps").get<long long>();
  return r;
}

json context_to_json(const BatchContext& ctx) {
  return json{{"kind", "set_base_params"},
              {"id", ctx.params_id},
              {"values", ctx.base_params},
              {"spec", serial::spec_to_json(ctx.spec)},
              {"freeze_ll", ctx.freeze_ll},
              {"frozen", ctx.frozen},
              {"noise_std", ctx.noise_std},
              {"ars_seed", ctx.ars_seed}};
}

BatchContext context_from_json(const json& j) {
  BatchContext ctx;
  ctx.params_id = j.at("id").get<std::uint64_t>();
  ctx.base_params = j.at("values").get<std::vector<float>>();
  ctx.spec = serial::spec_from_json(j.at("spec"));
  ctx.freeze_ll = j.at("freeze_ll").get<bool>();
  ctx.frozen = j.at("frozen").get<std::vector<std::uint8_t>>();
  ctx.noise_std = j.at("noise_std").get<double>();
  ctx.ars_seed = j.at("ars_seed").get<std::uint64_t>();
  return ctx;
}

void send_json(int fd, const json& j) { wire::send_frame(fd, j.dump()); }

json parse_frame(const std::string& payload) {
  json j = json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("kind"))
    throw wire::ProtocolError("malformed frame: " + payload.substr(0, 256));
  return j;
}

EvalResult run_job_with_retry(const BatchContext& ctx, const EvalJob& job,
                              const JobHook& pre_job) {
  for (int attempt = 0; ; ++attempt) {
    try {
      if (pre_job) pre_job(job);
      return run_job(ctx, job);
    } catch (const std::exception& e) {
      if (attempt >= 1)
        throw ars::IterationError("job " + std::to_string(job.job_id) +
                                  " failed twice: " + e.what());
    }
  }
}

// one accepted connection on the worker side
void serve_connection(int fd) {
  const auto hello = wire::recv_frame(fd, 10000);
  if (!hello) return;
  json h = parse_frame(*hello);
  if (h.at("kind") != "hello" || h.at("protocol_version").get<int>() != wire::kProtocolVersion) {
    send_json(fd, json{{"kind", "error"},
                       {"message", "protocol version mismatch, want " +
                                       std::to_string(wire::kProtocolVersion)}});
    return;
  }
  send_json(fd, json{{"kind", "hello"},
                     {"protocol_version", wire::kProtocolVersion},
                     {"worker_caps", json{{"threads", 1}}}});

  std::map<std::uint64_t, BatchContext> contexts;
  for (;;) {
    const auto frame = wire::recv_frame(fd, 600000);
    if (!frame) return;  // idle too long; drop the session
    const json msg = parse_frame(*frame);
    const std::string kind = msg.at("kind").get<std::string>();
    if (kind == "bye") return;
    if (kind == "set_base_params") {
      BatchContext ctx = context_from_json(msg);
      contexts[ctx.params_id] = std::move(ctx);
      continue;
    }
    if (kind == "eval") {
      const EvalJob job = job_from_json(msg.at("job"));
      const auto it = contexts.find(job.params_id);
      if (it == contexts.end()) {
        send_json(fd, json{{"kind", "error"},
                           {"message", "unknown params_id " + std::to_string(job.params_id)}});
        continue;
      }
      try {
        send_json(fd,
                  json{{"kind", "result"}, {"result", result_to_json(run_job(it->second, job))}});
      } catch (const wire::DispatchError&) {
        throw;  // socket-level; let the session die
      } catch (const std::exception& e) {
        send_json(fd, json{{"kind", "error"},
                           {"message", "job " + std::to_string(job.job_id) + ": " + e.what()}});
        return;
      }
      continue;
    }
    send_json(fd, json{{"kind", "error"}, {"message", "unknown message kind '" + kind + "'"}});
    return;
  }
}

struct Connection {
  int fd = -1;
  std::string endpoint;
  bool busy = false;
  std::size_t job_index = 0;
  clock::time_point deadline{};
};

void drop_connection(std::vector<Connection>& conns, std::size_t i) {
  wire::close_fd(conns[i].fd);
  conns.erase(conns.begin() + static_cast<std::ptrdiff_t>(i));
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed_base, std::uint64_t iteration, int direction_id,
                           int sign, int episode) {
  std::uint64_t h = hash_combine(seed_base, iteration);
  h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(direction_id)));
  h = hash_combine(h, sign > 0 ? 0u : 1u);
  h = hash_combine(h, static_cast<std::uint64_t>(episode));
  return h;
}

std::vector<float> job_params(const BatchContext& ctx, const EvalJob& job) {
  std::vector<float> params = ctx.base_params;
  if (job.direction_id >= 0) {
    const auto delta = ars::make_direction(ctx.ars_seed, job.iteration, job.direction_id,
                                           params.size(), ctx.frozen);
    const float scale = static_cast<float>(job.sign >= 0 ? ctx.noise_std : -ctx.noise_std);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += scale * delta[i];
  }
  return params;
}

EvalResult run_job(const BatchContext& ctx, const EvalJob& job) {
  const policy::PolicyParams params =
      policy::split_params(ctx.spec, job_params(ctx, job), ctx.freeze_ll);
  world::Environment env(ctx.spec.task);

  EvalResult result;
  result.job_id = job.job_id;
  double sum = 0.0;
  for (int e = 0; e < job.episodes; ++e) {
    const std::uint64_t seed =
        episode_seed(job.seed_base, job.iteration, job.direction_id, job.sign, e);
    const double ret = policy::run_episode(ctx.spec, params, env, seed);
    result.episode_returns.push_back(ret);
    result.total_steps += env.state().step_count;
    sum += ret;
  }
  result.mean_return = job.episodes > 0 ? sum / job.episodes : 0.0;
  return result;
}

std::vector<EvalResult> evaluate_batch_serial(const BatchContext& ctx,
                                              const std::vector<EvalJob>& jobs,
                                              const JobHook& pre_job) {
  std::vector<EvalResult> results(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    results[i] = run_job_with_retry(ctx, jobs[i], pre_job);
  }
  return results;
}

std::vector<EvalResult> evaluate_batch(const BatchContext& ctx, const std::vector<EvalJob>& jobs,
                                       int workers, const JobHook& pre_job) {
  if (workers < 1) throw nnet::ConfigError("evaluate_batch: workers must be >= 1");
  std::vector<EvalResult> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  int failed = 0;

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    try {
      results[i] = run_job_with_retry(ctx, jobs[i], pre_job);
    } catch (const std::exception& e) {
      errors[i] = e.what();
#pragma omp atomic write
      failed = 1;
    }
  }

  if (failed) {
    for (const auto& e : errors) {
      if (!e.empty()) throw ars::IterationError(e);
    }
  }
  return results;
}

void remote_worker_serve(const std::string& endpoint,
                         const std::function<bool()>& should_stop) {
  const int lfd = wire::listen_on(endpoint);
  for (;;) {
    if (should_stop && should_stop()) break;
    const int fd = wire::accept_client(lfd, 200);
    if (fd < 0) continue;
    try {
      serve_connection(fd);
    } catch (const wire::DispatchError&) {
      // peer vanished; nothing to clean up beyond the socket
    } catch (const wire::ProtocolError& e) {
      std::fprintf(stderr, "worker: protocol error: %s\n", e.what());
      try {
        send_json(fd, json{{"kind", "error"}, {"message", e.what()}});
      } catch (...) {
      }
    }
    wire::close_fd(fd);
  }
  wire::close_fd(lfd);
}

std::vector<EvalResult> remote_dispatch(const BatchContext& ctx, const std::vector<EvalJob>& jobs,
                                        const std::vector<std::string>& endpoints,
                                        const RemoteOptions& options) {
  if (endpoints.empty()) throw wire::DispatchError("no worker endpoints configured");

  std::vector<Connection> conns;
  for (const auto& ep : endpoints) {
    try {
      Connection c;
      c.fd = wire::connect_to(ep, options.connect_timeout_ms);
      c.endpoint = ep;
      send_json(c.fd, json{{"kind", "hello"},
                           {"protocol_version", wire::kProtocolVersion},
                           {"worker_caps", json::object()}});
      const auto reply = wire::recv_frame(c.fd, options.connect_timeout_ms);
      if (!reply) throw wire::ProtocolError("no hello from " + ep);
      const json h = parse_frame(*reply);
      if (h.at("kind") == "error")
        throw wire::ProtocolError(ep + " refused: " + h.at("message").get<std::string>());
      if (h.at("kind") != "hello" ||
          h.at("protocol_version").get<int>() != wire::kProtocolVersion)
        throw wire::ProtocolError("protocol version mismatch with " + ep);
      send_json(c.fd, context_to_json(ctx));
      conns.push_back(c);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "dispatch: skipping %s: %s\n", ep.c_str(), e.what());
    }
  }
  if (conns.empty()) throw wire::DispatchError("all worker endpoints are unreachable");

  std::vector<EvalResult> results(jobs.size());
  std::vector<std::uint8_t> done(jobs.size(), 0);
  std::map<std::uint64_t, std::size_t> index_of;
  for (std::size_t i = 0; i < jobs.size(); ++i) index_of[jobs[i].job_id] = i;
  std::deque<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) pending.push_back(i);
  std::size_t remaining = jobs.size();

  const auto assign = [&](Connection& c, std::size_t job_index) {
    send_json(c.fd, json{{"kind", "eval"}, {"job", job_to_json(jobs[job_index])}});
    c.busy = true;
    c.job_index = job_index;
    c.deadline = clock::now() + std::chrono::milliseconds(options.job_timeout_ms);
  };

  while (remaining > 0) {
    if (conns.empty())
      throw wire::DispatchError("lost all workers with " + std::to_string(remaining) +
                                " jobs outstanding");
    // hand work to idle connections
    for (auto& c : conns) {
      if (c.busy || pending.empty()) continue;
      const std::size_t j = pending.front();
      pending.pop_front();
      if (done[j]) continue;
      try {
        assign(c, j);
      } catch (const wire::DispatchError&) {
        pending.push_back(j);
        c.fd = -1;  // mark dead, swept below
      }
    }
    for (std::size_t i = conns.size(); i-- > 0;) {
      if (conns[i].fd < 0) drop_connection(conns, i);
    }

    // wait for whichever busy connection answers first
    bool any_busy = false;
    for (std::size_t i = 0; i < conns.size(); ++i) {
      Connection& c = conns[i];
      if (!c.busy) continue;
      any_busy = true;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            c.deadline - clock::now())
                            .count();
      if (left <= 0) {
        // straggler: abandon the socket, requeue its job
        if (!done[c.job_index]) pending.push_back(c.job_index);
        drop_connection(conns, i);
        break;
      }
      try {
        const auto frame = wire::recv_frame(c.fd, 50);
        if (!frame) continue;
        const json msg = parse_frame(*frame);
        if (msg.at("kind") == "error")
          throw wire::ProtocolError("worker error: " + msg.at("message").get<std::string>());
        if (msg.at("kind") != "result") throw wire::ProtocolError("unexpected frame kind");
        EvalResult r = result_from_json(msg.at("result"));
        const auto it = index_of.find(r.job_id);
        if (it == index_of.end() || it->second != c.job_index) {
          // mislabeled or stale frame: drop it, re-dispatch what we asked for
          std::fprintf(stderr, "dispatch: discarding frame with job_id %llu from %s\n",
                       static_cast<unsigned long long>(r.job_id), c.endpoint.c_str());
          if (!done[c.job_index]) pending.push_back(c.job_index);
          c.busy = false;
          continue;
        }
        if (!done[it->second]) {  // duplicates are ignored
          results[it->second] = std::move(r);
          done[it->second] = 1;
          --remaining;
        }
        c.busy = false;
      } catch (const wire::DispatchError&) {
        if (!done[c.job_index]) pending.push_back(c.job_index);
        drop_connection(conns, i);
        break;
      } catch (const wire::ProtocolError& e) {
        std::fprintf(stderr, "dispatch: %s from %s\n", e.what(), conns[i].endpoint.c_str());
        if (!done[c.job_index]) pending.push_back(c.job_index);
        drop_connection(conns, i);
        break;
      }
    }
    if (!any_busy && pending.empty() && remaining > 0)
      throw wire::DispatchError("dispatch stalled with jobs outstanding");
  }

  for (auto& c : conns) {
    try {
      send_json(c.fd, json{{"kind", "bye"}});
    } catch (...) {
    }
    wire::close_fd(c.fd);
  }
  return results;
}

}  // namespace quadnav::runner
