#pragma once

// Policy rollouts through the shared transition, minibatch gradient of the
// Monte Carlo objective by backpropagation through time, and Adam.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "decum/ad.hpp"
#include "decum/csv.hpp"
#include "decum/error.hpp"
#include "decum/esg.hpp"
#include "decum/policy_net.hpp"
#include "decum/rollout.hpp"

namespace decum::trainer {

using policy::MlpParams;
using policy::Normalization;

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double alpha = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct AdamState {
  explicit AdamState(std::size_t n, AdamHyper h = {}) : m(n, 0.0), v(n, 0.0), hyper(h) {}
  std::vector<double> m, v;
  std::size_t k = 0;
  AdamHyper hyper;
};

// One descent step on the gradient `grad` (of the loss, i.e. the negated objective).
inline void adam_step(AdamState& s, MlpParams& params, const MlpParams& grad) {
  auto& x = params.values();
  const auto& g = grad.values();
  if (g.size() != x.size() || s.m.size() != x.size()) throw ConfigError("adam: shape mismatch");
  ++s.k;
  const auto& h = s.hyper;
  const double c1 = 1 - std::pow(h.beta1, static_cast<double>(s.k));
  const double c2 = 1 - std::pow(h.beta2, static_cast<double>(s.k));
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1 - h.beta1) * g[i];
    s.v[i] = h.beta2 * s.v[i] + (1 - h.beta2) * g[i] * g[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    x[i] -= h.alpha * m_hat / (std::sqrt(v_hat) + h.eps_hat);
  }
}

// ---------------------------------------------------------------------------
// Policy rollouts

// Consumption decision of the network on the tape held by `pt`.
inline auto policy_decision(const MlpParams& params, const Normalization& norm, policy::PolicyTape& pt) {
  return [&params, &norm, &pt](const rollout::StepState<ad::Var>& s) {
    const policy::PolicyInput<ad::Var> in{static_cast<double>(s.t), s.W, s.R, s.Q};
    return policy::forward(params, norm, in, s.W + s.A, pt);
  };
}

// Realised objective of one path under the policy.
inline double rollout(const MlpParams& params, const Normalization& norm, const rollout::Model& model,
                      rollout::PathView path) {
  policy::PolicyTape pt(1, params.shape());
  const rollout::BatchEnv env(pt.tape, {path});
  return rollout::run(model, env, policy_decision(params, norm, pt)).value(0);
}

// Per-lane objectives of a batch of paths and the gradient of their sum.
struct ChunkGradient {
  std::vector<double> objectives;
  MlpParams grad;
};

inline ChunkGradient chunk_gradient(const MlpParams& params, const Normalization& norm, const rollout::Model& model,
                                    std::vector<rollout::PathView> paths) {
  policy::PolicyTape pt(static_cast<Eigen::Index>(paths.size()), params.shape());
  const rollout::BatchEnv env(pt.tape, std::move(paths));
  const ad::Var total = rollout::run(model, env, policy_decision(params, norm, pt));
  policy::backward(pt, total);
  const auto& v = total.value();
  return {std::vector<double>(v.data(), v.data() + v.size()), pt.grad};
}

// Realised objective and real trajectories for many paths, evaluated in
// fixed-size chunks (results do not depend on chunk size or thread count).
struct PolicyEvaluation {
  std::vector<double> utilities;
  std::vector<rollout::Trajectory> trajectories;  // empty unless requested
};

inline PolicyEvaluation evaluate_policy(const MlpParams& params, const Normalization& norm,
                                        const rollout::Model& model, const esg::ScenarioPanel& panel,
                                        std::size_t paths, bool keep_trajectories, unsigned threads = 1,
                                        std::size_t chunk = 256) {
  if (paths > panel.paths()) throw ConfigError("evaluate: more paths requested than the panel holds");
  PolicyEvaluation out;
  out.utilities.assign(paths, 0.0);
  if (keep_trajectories) out.trajectories.assign(paths, {});
  const std::size_t chunks = (paths + chunk - 1) / chunk;
  auto work = [&](std::size_t c) {
    const std::size_t lo = c * chunk, hi = std::min(paths, lo + chunk);
    std::vector<rollout::PathView> views;
    for (std::size_t m = lo; m < hi; ++m) views.push_back(rollout::path_view(panel, m));
    policy::PolicyTape pt(static_cast<Eigen::Index>(views.size()), params.shape());
    const rollout::BatchEnv env(pt.tape, std::move(views));
    auto record = [&](const rollout::StepState<ad::Var>& s, const ad::Var& C) {
      if (!keep_trajectories) return;
      for (std::size_t m = lo; m < hi; ++m) {
        const auto i = static_cast<Eigen::Index>(m - lo);
        auto& tr = out.trajectories[m];
        const double Q = s.Q.value(i);
        tr.consumption.push_back(C.value(i) / Q);
        tr.wealth.push_back(s.W.value(i) / Q);
        tr.pension.push_back(s.A.value(i) / Q);
      }
    };
    const ad::Var total = rollout::run(model, env, policy_decision(params, norm, pt), record);
    for (std::size_t m = lo; m < hi; ++m) {
      out.utilities[m] = total.value(static_cast<Eigen::Index>(m - lo));
      if (keep_trajectories) out.trajectories[m].utility = out.utilities[m];
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) work(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  rollout::Model model;
  esg::EsgParams esg = esg::EsgParams::preset();
  esg::EconState initial_state;
  std::size_t paths = 5000;       // M
  std::size_t iterations = 2000;
  std::size_t batch_size = 512;
  std::uint64_t seed = 1;
  policy::MlpShape shape;
  AdamHyper adam;
  std::size_t checkpoint_every = 100;  // 0 disables intermediate checkpoints
  std::string checkpoint_dir;          // empty keeps checkpoints in memory only
  unsigned threads = 1;
  std::size_t chunk_size = 64;         // paths per tape; fixed so results do not depend on threads
  std::uint64_t config_hash = 0;
  double clip_norm = 1.0;               // max global gradient norm of the scaled loss; 0 disables

  void validate() const {
    model.validate();
    if (iterations > 0 && batch_size > paths) throw ConfigError("train: batch_size exceeds the number of paths");
    if (batch_size < 1 || paths < 1) throw ConfigError("train: need at least one path per batch");
    if (chunk_size < 1) throw ConfigError("train: chunk_size must be positive");
  }
};

struct ReportRow {
  std::size_t iteration;
  double objective;      // minibatch mean of realised lifetime utility (before the step)
  double wallclock_ms;   // since training start
};

struct TrainResult {
  policy::Checkpoint final;
  std::vector<policy::Checkpoint> checkpoints;  // ascending iterations, starting at 0
  std::vector<ReportRow> report;
};

// Training aborted because the objective became NaN or -inf.
struct DivergenceError : NumericError {
  DivergenceError(const std::string& what, policy::Checkpoint last_good)
      : NumericError(what), checkpoint(std::move(last_good)) {}
  policy::Checkpoint checkpoint;
};

// Independent streams derived from one seed (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kBatchStream = 2;

inline Normalization normalization_for(const TrainConfig& c) {
  Normalization n;
  n.time_scale = std::max(1, c.model.horizon());
  n.wealth_scale = c.model.initial_wealth > 0 ? c.model.initial_wealth : 1.0;
  return n;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "iter,objective,wallclock_ms\n";
  for (const auto& r : rows) out << r.iteration << ',' << csv::fmt(r.objective) << ',' << csv::fmt(r.wallclock_ms) << '\n';
}

inline std::string checkpoint_path(const std::string& dir, std::size_t iteration) {
  return (std::filesystem::path(dir) / ("checkpoint_" + std::to_string(iteration) + ".txt")).string();
}

// Maximises the minibatch estimate of the expected lifetime utility. The
// training panel is simulated from `seed`; progress lines go to `log` if set.
inline TrainResult train(const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const int T = cfg.model.horizon();
  esg::SimulationOptions sim;
  sim.omega = cfg.model.account.omega;
  sim.threads = cfg.threads;
  const auto panel = esg::simulate(cfg.esg, cfg.initial_state, cfg.paths, std::max(T, 1), cfg.seed, sim);

  const Normalization norm = normalization_for(cfg);
  policy::Checkpoint current{policy::he_init(cfg.shape, derive_seed(cfg.seed, kInitStream)), norm, cfg.config_hash, 0};
  AdamState adam(current.params.size(), cfg.adam);
  std::mt19937_64 batch_rng(derive_seed(cfg.seed, kBatchStream));
  std::vector<std::size_t> order(cfg.paths);
  std::iota(order.begin(), order.end(), 0);

  // Money measured in units of W0 inside the loss: u is homogeneous of degree
  // 1 - rho, so this only rescales the loss and keeps gradients O(1) for Adam.
  const double loss_scale = std::pow(norm.wealth_scale, cfg.model.utility.rho - 1);

  TrainResult result;
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);
  auto emit = [&](const policy::Checkpoint& c) {
    result.checkpoints.push_back(c);
    if (!cfg.checkpoint_dir.empty()) policy::save_checkpoint(checkpoint_path(cfg.checkpoint_dir, c.iteration), c);
  };
  emit(current);

  const std::size_t n_chunks = (cfg.batch_size + cfg.chunk_size - 1) / cfg.chunk_size;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    // Partial Fisher-Yates: first batch_size entries become the sample.
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cfg.paths - 1);
      std::swap(order[i], order[pick(batch_rng)]);
    }
    std::vector<ChunkGradient> parts(n_chunks);
    std::vector<std::exception_ptr> errors(n_chunks);
    auto work = [&](std::size_t c) {
      try {
        const std::size_t lo = c * cfg.chunk_size, hi = std::min(cfg.batch_size, lo + cfg.chunk_size);
        std::vector<rollout::PathView> views;
        for (std::size_t i = lo; i < hi; ++i) views.push_back(rollout::path_view(panel, order[i]));
        parts[c] = chunk_gradient(current.params, norm, cfg.model, std::move(views));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n_chunks)));
    if (workers == 1) {
      for (std::size_t c = 0; c < n_chunks; ++c) work(c);
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t c = w; c < n_chunks; c += workers) work(c);
        });
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const NumericError& ne) {
        const auto& good = result.checkpoints.back();
        throw DivergenceError("training diverged at iteration " + std::to_string(it) + " (" + ne.what() +
                                  "); last good checkpoint is iteration " + std::to_string(good.iteration),
                              good);
      }
    }

    // Ordered reduction over chunks.
    double objective_sum = 0;
    MlpParams grad(cfg.shape);
    for (const auto& p : parts) {
      for (double o : p.objectives) objective_sum += o;
      for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] += p.grad.values()[i];
    }
    const double objective = objective_sum / static_cast<double>(cfg.batch_size);
    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    result.report.push_back({it, objective, wall});

    bool finite_grad = true;
    for (double& g : grad.values()) {
      g *= -loss_scale / static_cast<double>(cfg.batch_size);
      finite_grad = finite_grad && std::isfinite(g);
    }
    if (!std::isfinite(objective) || !finite_grad) {
      const auto& good = result.checkpoints.back();
      throw DivergenceError("training diverged at iteration " + std::to_string(it) +
                                "; last good checkpoint is iteration " + std::to_string(good.iteration),
                            good);
    }
    // CRRA utilities near zero wealth give gradient spikes many orders of
    // magnitude above typical values; unclipped, one spike inflates Adam's
    // second moment and stalls learning for thousands of steps.
    if (cfg.clip_norm > 0) {
      double sq = 0;
      for (double g : grad.values()) sq += g * g;
      const double norm2 = std::sqrt(sq);
      if (norm2 > cfg.clip_norm)
        for (double& g : grad.values()) g *= cfg.clip_norm / norm2;
    }
    adam_step(adam, current.params, grad);
    current.iteration = it + 1;
    if (!current.params.finite())
      throw DivergenceError("training produced non-finite parameters at iteration " + std::to_string(it),
                            result.checkpoints.back());

    const bool cadence = cfg.checkpoint_every > 0 && current.iteration % cfg.checkpoint_every == 0;
    if (cadence && current.iteration != cfg.iterations) {
      emit(current);
      if (log) *log << "iter " << current.iteration << " objective " << objective << " (" << wall << " ms)\n";
    }
  }
  if (cfg.iterations > 0) {
    emit(current);
    if (log && !result.report.empty())
      *log << "iter " << current.iteration << " objective " << result.report.back().objective << '\n';
  }
  result.final = current;
  return result;
}

}  // namespace decum::trainer
