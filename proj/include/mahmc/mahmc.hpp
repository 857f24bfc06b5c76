// Metropolis augmented HMC: MH updates of qO interleaved with leapfrog steps
// inside one trajectory, followed by a single final correction.
#pragma once

#include <mahmc/core.hpp>
#include <mahmc/integrators.hpp>
#include <mahmc/samplers.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mahmc {

/// D_j = 0 is a leapfrog step, D_j = i > 0 an MH update with proposal family i.
using UpdateSchedule = std::vector<int>;

inline UpdateSchedule reverse_schedule(const UpdateSchedule& d) { return {d.rbegin(), d.rend()}; }

/// Distribution P^D over update schedules.
class SchedulePrior {
 public:
  virtual ~SchedulePrior() = default;
  virtual UpdateSchedule sample(Rng& rng) const = 0;
  virtual double log_prob(const UpdateSchedule& d) const = 0;

  /// log P^D(D^-1) - log P^D(D)
  double reversal_log_ratio(const UpdateSchedule& d) const {
    const double forward = log_prob(d);
    const double backward = log_prob(reverse_schedule(d));
    if (forward == backward) return 0.0;
    return backward - forward;
  }
};

/// Point mass on (0^NL, g, 0^NL, g, ..., 0^NL) with NU blocks of NL leapfrogs
/// separated by NU - 1 updates of family g. The sequence is a palindrome.
class DeterministicSchedule final : public SchedulePrior {
 public:
  DeterministicSchedule(int groups, int leapfrogs_per_group, int family = 1)
      : groups_(groups), per_group_(leapfrogs_per_group), family_(family) {
    if (groups < 1 || leapfrogs_per_group < 1) {
      throw std::invalid_argument("DeterministicSchedule: N^U and N^L must be >= 1");
    }
    if (family < 1) throw std::invalid_argument("DeterministicSchedule: family must be >= 1");
    for (int g = 0; g < groups_; ++g) {
      if (g > 0) schedule_.push_back(family_);
      schedule_.insert(schedule_.end(), per_group_, 0);
    }
  }

  UpdateSchedule sample(Rng&) const override { return schedule_; }
  double log_prob(const UpdateSchedule& d) const override {
    return d == schedule_ ? 0.0 : -std::numeric_limits<double>::infinity();
  }

  const UpdateSchedule& schedule() const { return schedule_; }
  int groups() const { return groups_; }
  int leapfrogs_per_group() const { return per_group_; }

 private:
  int groups_;
  int per_group_;
  int family_;
  UpdateSchedule schedule_;
};

/// Each of the `length` entries drawn independently from `weights` over
/// {0, 1, ..., N^O}.
class IidSchedule final : public SchedulePrior {
 public:
  IidSchedule(int length, std::vector<double> weights)
      : length_(length), weights_(std::move(weights)) {
    if (length_ < 1) throw std::invalid_argument("IidSchedule: length must be >= 1");
    if (weights_.empty()) throw std::invalid_argument("IidSchedule: no weights");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("IidSchedule: weights must be finite and nonnegative");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("IidSchedule: weights must sum to 1");
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
  }

  UpdateSchedule sample(Rng& rng) const override {
    std::discrete_distribution<int> pick(weights_.begin(), weights_.end());
    UpdateSchedule d(static_cast<std::size_t>(length_));
    for (auto& entry : d) entry = pick(rng);
    return d;
  }

  double log_prob(const UpdateSchedule& d) const override {
    if (static_cast<int>(d.size()) != length_) return -std::numeric_limits<double>::infinity();
    // Summed by count so that any permutation of D gives the same bits.
    std::vector<double> counts(log_weights_.size(), 0.0);
    for (int entry : d) {
      if (entry < 0 || entry >= static_cast<int>(log_weights_.size())) {
        return -std::numeric_limits<double>::infinity();
      }
      counts[static_cast<std::size_t>(entry)] += 1.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] > 0.0) total += counts[i] * log_weights_[i];
    }
    return total;
  }

 private:
  int length_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

/// One step of a recorded path: the state before the update, and for MH
/// steps the proposal and its decision.
template <class Other>
struct PathStep {
  int update = 0;
  Vector position;
  Vector momentum;
  Other other;
  std::optional<Other> proposed;
  double forward_log_density = 0.0;  // log Q(proposed | q, other)
  double reverse_log_density = 0.0;  // log Q(other | q, proposed)
  double potential_current = 0.0;
  double potential_proposed = 0.0;
  bool accepted = true;
};

/// Full probabilistic path of one iteration. `end` is s_L before the final
/// correction, with the momentum as produced by the last step (not negated).
template <class Other>
struct PathTrace {
  UpdateSchedule schedule;
  double eps = 0.0;
  std::vector<PathStep<Other>> steps;
  HybridState<Other> start;
  HybridState<Other> end;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double delta_energy = 0.0;
  double schedule_log_ratio = 0.0;
  double log_accept_ratio = 0.0;  // (E0 - E) + schedule_log_ratio + delta_energy
  bool diverged = false;
  bool accepted = false;
};

struct MahmcStepResult {
  bool accepted = false;
  bool diverged = false;
  double log_accept_ratio = 0.0;
  double schedule_log_ratio = 0.0;
  double delta_energy = 0.0;
};

/// One iteration from the momentum already stored in `state`. Applies the
/// schedule, accumulating the potential change of accepted qO moves, then a
/// reversible final correction; accept negates the momentum, reject restores
/// the starting state exactly.
template <TargetModel M>
MahmcStepResult mahmc_transition(ChainState<typename M::Other>& state, double eps,
                                 const SchedulePrior& prior, const M& model, Rng& rng,
                                 KernelStats& stats, PathTrace<typename M::Other>* trace = nullptr) {
  using Other = typename M::Other;
  if (!(eps > 0.0)) throw std::invalid_argument("mahmc: eps must be > 0");

  ensure_gradient(state.phase, model, state.other, stats.gradients);
  const PhasePoint start = state.phase;
  const Other start_other = state.other;
  const double e0 = model.potential(start.position, start_other) + kinetic_energy(start.momentum);

  const UpdateSchedule d = prior.sample(rng);
  MahmcStepResult result;
  result.schedule_log_ratio = prior.reversal_log_ratio(d);

  if (trace) {
    *trace = PathTrace<Other>{};
    trace->schedule = d;
    trace->eps = eps;
    trace->start = {start.position, start.momentum, start_other};
    trace->initial_energy = e0;
    trace->schedule_log_ratio = result.schedule_log_ratio;
    trace->steps.reserve(d.size());
  }

  PhasePoint z = start;
  Other other = start_other;
  double delta_energy = 0.0;
  try {
    for (int update : d) {
      PathStep<Other>* step = nullptr;
      if (trace) {
        step = &trace->steps.emplace_back();
        step->update = update;
        step->position = z.position;
        step->momentum = z.momentum;
        step->other = other;
      }
      if (update == 0) {
        leapfrog(z, eps, model, other, stats.gradients);
        continue;
      }
      Other proposed = model.propose(update, z.position, other, rng);
      const double u_current = model.potential(z.position, other);
      const double u_proposed = model.potential(z.position, proposed);
      const double log_forward = model.proposal_log_density(update, proposed, z.position, other);
      const double log_reverse = model.proposal_log_density(update, other, z.position, proposed);
      const double log_ratio = -u_proposed + u_current + log_reverse - log_forward;
      const bool accept = uniform01(rng) <= std::exp(log_ratio);
      ++stats.other_proposals;
      if (step) {
        step->proposed = proposed;
        step->forward_log_density = log_forward;
        step->reverse_log_density = log_reverse;
        step->potential_current = u_current;
        step->potential_proposed = u_proposed;
        step->accepted = accept;
      }
      if (accept) {
        ++stats.other_accepts;
        delta_energy += u_proposed - u_current;
        other = std::move(proposed);
        z.invalidate();
      }
    }
  } catch (const IntegrationDivergence&) {
    ++stats.divergences;
    result.diverged = true;
  }

  const double e = result.diverged ? std::numeric_limits<double>::infinity()
                                   : model.potential(z.position, other) + kinetic_energy(z.momentum);
  result.delta_energy = delta_energy;
  result.log_accept_ratio = std::isfinite(e)
                                ? (e0 - e) + (result.schedule_log_ratio + delta_energy)
                                : -std::numeric_limits<double>::infinity();

  if (trace) {
    trace->end = {z.position, z.momentum, other};
    trace->final_energy = e;
    trace->delta_energy = delta_energy;
    trace->log_accept_ratio = result.log_accept_ratio;
    trace->diverged = result.diverged;
  }

  const MhOutcome decision = mh_correction(result.log_accept_ratio, uniform01(rng));
  ++stats.proposals;
  result.accepted = decision.accepted;
  if (decision.accepted) {
    ++stats.accepts;
    z.momentum = -z.momentum;
    state.phase = std::move(z);
    state.other = std::move(other);
  } else {
    state.phase = start;
    state.other = start_other;
  }
  if (trace) trace->accepted = result.accepted;
  return result;
}

/// MAHMC iteration with a full momentum refresh.
template <TargetModel M>
MahmcStepResult mahmc_step(ChainState<typename M::Other>& state, double eps,
                           const SchedulePrior& prior, const M& model, Rng& rng,
                           KernelStats& stats, PathTrace<typename M::Other>* trace = nullptr) {
  state.phase.momentum = standard_normal(static_cast<int>(state.phase.position.size()), rng);
  return mahmc_transition(state, eps, prior, model, rng, stats, trace);
}

struct MahmcConfig {
  double eps = 0.1;
  int groups = 1;              // N^U
  int leapfrogs_per_group = 1; // N^L

  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    if (groups < 1 || leapfrogs_per_group < 1) {
      throw std::invalid_argument("N^U and N^L must be >= 1");
    }
  }
};

/// qH kernel for within-Gibbs use: one MAHMC step with the deterministic
/// block schedule. Compose with other_kernel() for MAHMCwG.
template <TargetModel M>
auto mahmc_kernel(const M& model, const MahmcConfig& config, int family = 1) {
  config.validate();
  auto prior = std::make_shared<const DeterministicSchedule>(config.groups,
                                                             config.leapfrogs_per_group, family);
  return [&model, prior, eps = config.eps](ChainState<typename M::Other>& s, Rng& rng,
                                           KernelStats& stats) {
    mahmc_step(s, eps, *prior, model, rng, stats);
  };
}

/// MAHMC step followed by the exterior qO update.
template <TargetModel M>
void mahmc_within_gibbs(ChainState<typename M::Other>& state, const MahmcConfig& config,
                        const M& model, Rng& rng, KernelStats& stats) {
  within_gibbs(mahmc_kernel(model, config), other_kernel(model))(state, rng, stats);
}

class TraceIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool close(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool close(const Vector& a, const Vector& b, double tol) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!close(a[i], b[i], tol)) return false;
  }
  return true;
}

}  // namespace detail

/// log P(t^-1 | s_L) - log P(t | s_0) for a recorded path, recomputed from
/// the model and the prior alone.
///
/// Each accepted MH step contributes the reverse over forward probability of
/// proposing and accepting; rejected steps and leapfrog steps contribute
/// nothing. Every transition in the trace is replayed and checked against the
/// model; a mismatch beyond 1e-9 raises TraceIntegrityError.
template <TargetModel M>
double path_ratio_oracle(const PathTrace<typename M::Other>& trace, const SchedulePrior& prior,
                         const M& model) {
  constexpr double kTol = 1e-9;
  using Other = typename M::Other;
  if (trace.diverged) throw TraceIntegrityError("oracle: diverged trajectories have no end state");
  if (trace.steps.size() != trace.schedule.size()) {
    throw TraceIntegrityError("oracle: step count does not match schedule length");
  }

  const double e0 = model.potential(trace.start.position, trace.start.other) +
                    kinetic_energy(trace.start.momentum);
  if (!detail::close(e0, trace.initial_energy, kTol)) {
    throw TraceIntegrityError("oracle: initial energy mismatch");
  }

  double log_ratio =
      prior.log_prob(reverse_schedule(trace.schedule)) - prior.log_prob(trace.schedule);
  if (std::isnan(log_ratio)) log_ratio = 0.0;  // both infinite never happens for a sampled D

  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    const PathStep<Other>& step = trace.steps[j];
    const bool last = j + 1 == trace.steps.size();
    const Vector& next_position = last ? trace.end.position : trace.steps[j + 1].position;
    const Vector& next_momentum = last ? trace.end.momentum : trace.steps[j + 1].momentum;
    const Other& next_other = last ? trace.end.other : trace.steps[j + 1].other;

    if (step.update != trace.schedule[j]) throw TraceIntegrityError("oracle: update type mismatch");

    if (step.update == 0) {
      if (!step.accepted) throw TraceIntegrityError("oracle: leapfrog step marked rejected");
      if (!(next_other == step.other)) throw TraceIntegrityError("oracle: leapfrog changed qO");
      GradientCounter scratch;
      auto [q, p] = leapfrog(step.position, step.momentum, trace.eps, model, step.other, scratch);
      if (!detail::close(q, next_position, kTol) || !detail::close(p, next_momentum, kTol)) {
        throw TraceIntegrityError("oracle: leapfrog replay disagrees with the recorded path");
      }
      continue;
    }

    if (!step.proposed) throw TraceIntegrityError("oracle: MH step without a proposal");
    if (!detail::close(step.position, next_position, 0.0) ||
        !detail::close(step.momentum, next_momentum, 0.0)) {
      throw TraceIntegrityError("oracle: MH step moved qH or pH");
    }
    const Other& proposed = *step.proposed;
    const double u_current = model.potential(step.position, step.other);
    const double u_proposed = model.potential(step.position, proposed);
    const double log_forward = model.proposal_log_density(step.update, proposed, step.position, step.other);
    const double log_reverse = model.proposal_log_density(step.update, step.other, step.position, proposed);
    if (!detail::close(u_current, step.potential_current, kTol) ||
        !detail::close(u_proposed, step.potential_proposed, kTol) ||
        !detail::close(log_forward, step.forward_log_density, kTol) ||
        !detail::close(log_reverse, step.reverse_log_density, kTol)) {
      throw TraceIntegrityError("oracle: recorded MH quantities disagree with the model");
    }
    if (!(next_other == (step.accepted ? proposed : step.other))) {
      throw TraceIntegrityError("oracle: accept flag inconsistent with next state");
    }
    if (!step.accepted) continue;

    // Forward: propose then accept with min{1, p}; reverse: propose the old
    // value from the new one then accept with min{1, 1/p}.
    const double log_p = -u_proposed + u_current + log_reverse - log_forward;
    const double log_accept_forward = std::min(0.0, log_p);
    const double log_accept_reverse = std::min(0.0, -log_p);
    log_ratio += (log_reverse + log_accept_reverse) - (log_forward + log_accept_forward);
  }

  const double e = model.potential(trace.end.position, trace.end.other) +
                   kinetic_energy(trace.end.momentum);
  if (!detail::close(e, trace.final_energy, kTol)) {
    throw TraceIntegrityError("oracle: final energy mismatch");
  }
  return log_ratio;
}

}  // namespace mahmc
