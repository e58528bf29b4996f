#include "phonoflux/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "phonoflux/fit.hpp"

namespace phonoflux {

void RateSet::validate() const {
  if (!(t1m > 0) || !(t1q > 0) || !(t_phi_q > 0)) throw DomainError("coherence times must be positive");
  if (!(n_th_m >= 0) || !(n_th_q >= 0)) throw DomainError("thermal occupations must be nonnegative");
}

CollapseRates collapse_rates(const RateSet& r) {
  r.validate();
  CollapseRates c;
  c.kappa_m_down = ((1.0 + r.n_th_m) / (1.0 + 2.0 * r.n_th_m)) / r.t1m;
  c.kappa_m_up = (r.n_th_m / (1.0 + 2.0 * r.n_th_m)) / r.t1m;
  c.kappa_q_down = ((1.0 + r.n_th_q) / (1.0 + 2.0 * r.n_th_q)) / r.t1q;
  c.kappa_q_up = (r.n_th_q / (1.0 + 2.0 * r.n_th_q)) / r.t1q;
  c.gamma_phi = 2.0 / r.t_phi_q;
  return c;
}

std::vector<OperatorMatrix> collapse_ops_from_rates(const RateSet& r, const FockSpaceSpec& dims) {
  dims.validate();
  const CollapseRates c = collapse_rates(r);
  const int nq = dims.n_qudit_kept;
  const int nm = dims.n_phonon;
  const int nr = dims.n_readout ? *dims.n_readout : 1;
  if (nq < 2) throw InvalidDimension("collapse operators need at least two qudit levels");
  const OperatorMatrix iq = OperatorMatrix::Identity(nq, nq);
  const OperatorMatrix im = OperatorMatrix::Identity(nm, nm);
  const OperatorMatrix ir = OperatorMatrix::Identity(nr, nr);
  const LadderOperators b = ladder_operators(nm);
  auto on_mode = [&](const OperatorMatrix& op) { return tensor_product(tensor_product(iq, op), ir); };
  auto on_qudit = [&](int row, int col) {
    OperatorMatrix q = OperatorMatrix::Zero(nq, nq);
    q(row, col) = 1.0;
    return tensor_product(tensor_product(q, im), ir);
  };
  return {std::sqrt(c.kappa_m_down) * on_mode(b.annihilation),
          std::sqrt(c.kappa_m_up) * on_mode(b.creation),
          std::sqrt(c.kappa_q_down) * on_qudit(0, 1),
          std::sqrt(c.kappa_q_up) * on_qudit(1, 0),
          std::sqrt(c.gamma_phi) * on_qudit(1, 1)};
}

void LindbladModel::validate() const {
  if (h0.rows() == 0 || h0.rows() != h0.cols()) throw InvalidDimension("h0 must be square and nonempty");
  if (hermiticity_defect(h0) > 1e-10) throw ValidationError("h0 is not Hermitian");
  if (drive_operator.size() > 0) {
    if (drive_operator.rows() != h0.rows() || drive_operator.cols() != h0.cols()) {
      throw InvalidDimension("drive operator dimension differs from h0");
    }
    if (hermiticity_defect(drive_operator) > 1e-10) throw ValidationError("drive operator is not Hermitian");
    if (!drive) throw ValidationError("drive operator given without a drive function");
  }
  for (const auto& c : collapse_ops) {
    if (c.rows() != h0.rows() || c.cols() != h0.cols()) {
      throw InvalidDimension("collapse operator dimension differs from h0");
    }
  }
}

LindbladTrajectory integrate_lindblad(const LindbladModel& model, const DensityMatrix& rho0,
                                      const std::vector<double>& t_grid_us,
                                      const IntegrationOptions& options) {
  model.validate();
  if (rho0.dim() != model.h0.rows()) throw InvalidDimension("initial state dimension differs from h0");
  if (t_grid_us.empty()) throw ValidationError("empty time grid");
  for (std::size_t i = 1; i < t_grid_us.size(); ++i) {
    if (!(t_grid_us[i] >= t_grid_us[i - 1])) throw ValidationError("time grid must be ascending");
  }
  if (!(options.points_per_fastest_period > 0)) throw DomainError("points per period must be positive");

  const Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(model.h0, Eigen::EigenvaluesOnly);
  const double f_max =
      std::max(es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff() + model.drive_bound_mhz, 1e-12);
  double step = 1.0 / (options.points_per_fastest_period * f_max);
  if (options.max_step_us > 0) step = std::min(step, options.max_step_us);

  const int n = static_cast<int>(model.h0.rows());
  OperatorMatrix k_sum = OperatorMatrix::Zero(n, n);
  for (const auto& c : model.collapse_ops) k_sum += c.adjoint() * c;
  const bool driven = model.drive_operator.size() > 0;
  const Complex minus_i_2pi(0.0, -constants::kTwoPi);

  auto rhs = [&](double t, const OperatorMatrix& rho) {
    OperatorMatrix h = model.h0;
    if (driven) h += model.drive(t) * model.drive_operator;
    OperatorMatrix out = minus_i_2pi * (h * rho - rho * h);
    out -= 0.5 * (k_sum * rho + rho * k_sum);
    for (const auto& c : model.collapse_ops) out += c * rho * c.adjoint();
    return out;
  };

  LindbladTrajectory traj;
  traj.step_us = step;
  OperatorMatrix rho = rho0.matrix();
  double t = t_grid_us.front();
  auto record = [&]() {
    traj.times.push_back(t);
    traj.states.emplace_back(rho);
    traj.max_trace_error = std::max(traj.max_trace_error, std::abs(rho.trace().real() - rho0.trace()));
    traj.max_hermiticity_defect = std::max(traj.max_hermiticity_defect, hermiticity_defect(rho));
  };
  record();
  for (std::size_t i = 1; i < t_grid_us.size(); ++i) {
    const double span = t_grid_us[i] - t;
    if (span > 0) {
      const double count = std::ceil(span / step - 1e-9);
      if (count > 1e9) {
        std::ostringstream msg;
        msg << "step size underflow: " << count << " steps needed over " << span << " us";
        throw IntegrationFailure(msg.str());
      }
      const long steps = std::max(1L, static_cast<long>(count));
      const double h = span / static_cast<double>(steps);
      for (long s = 0; s < steps; ++s) {
        const OperatorMatrix k1 = rhs(t, rho);
        const OperatorMatrix k2 = rhs(t + 0.5 * h, rho + 0.5 * h * k1);
        const OperatorMatrix k3 = rhs(t + 0.5 * h, rho + 0.5 * h * k2);
        const OperatorMatrix k4 = rhs(t + h, rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint()).eval();
        t += h;
        ++traj.steps;
      }
      if (!rho.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite state at t = " << t << " us (step " << h << " us)";
        throw IntegrationFailure(msg.str());
      }
    }
    t = t_grid_us[i];
    record();
  }
  return traj;
}

double readout_signal(const Populations& final_pop, const Populations& initial_pop) {
  if (final_pop.qudit.size() != initial_pop.qudit.size()) {
    throw InvalidDimension("population sets have different dimensions");
  }
  return std::abs(final_pop.asymmetry() - initial_pop.asymmetry());
}

namespace {

// Runs fn(i) for i in [0, n) on `jobs` threads; the first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

RabiMap rabi_amplitude_sweep(const JointSimulator& sim, const ModulationPulse& pulse_template,
                             const std::vector<double>& v0_grid,
                             const std::vector<double>& f_mod_grid, const RabiSweepOptions& options) {
  if (v0_grid.empty() || f_mod_grid.empty()) throw ValidationError("Rabi sweep grids must be nonempty");
  RabiMap map;
  map.v0_grid = v0_grid;
  map.f_mod_grid = f_mod_grid;
  map.points.resize(v0_grid.size() * f_mod_grid.size());

  const DensityMatrix prepared = JointSimulator::apply_unitary(sim.ideal_pi_pulse(), sim.thermal_state());
  const PlanarState start = PlanarState::from(prepared);
  const Populations before = sim.populations(start);

  parallel_for(map.points.size(), options.jobs, [&](std::size_t idx) {
    ModulationPulse pulse = pulse_template;
    pulse.v0 = v0_grid[idx / f_mod_grid.size()];
    pulse.f_mod = f_mod_grid[idx % f_mod_grid.size()];
    const PlanarState after = sim.run_pulse(pulse, start, options.integrator);
    const Populations pop = sim.populations(after);
    RabiPoint& pt = map.points[idx];
    pt.v0 = pulse.v0;
    pt.f_mod = pulse.f_mod;
    pt.signal = readout_signal(pop, before);
    pt.p_g = pop.p_g();
    pt.p_e = pop.p_e();
    pt.p_phonon = pop.phonon;
  });
  return map;
}

RabiRidge rabi_ridge(const RabiMap& map, double min_signal) {
  const std::size_t nv = map.v0_grid.size();
  const std::size_t nf = map.f_mod_grid.size();
  std::vector<double> row_max(nv, 0.0);
  std::vector<double> centers(nv, 0.0);
  for (std::size_t i = 0; i < nv; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < nf; ++j) {
      if (map.at(i, j).signal > map.at(i, best).signal) best = j;
    }
    row_max[i] = map.at(i, best).signal;
    double c = map.f_mod_grid[best];
    if (best > 0 && best + 1 < nf) {
      // Parabolic refinement on a locally uniform grid.
      const double ym = map.at(i, best - 1).signal;
      const double y0 = map.at(i, best).signal;
      const double yp = map.at(i, best + 1).signal;
      const double denom = ym - 2.0 * y0 + yp;
      const double step = 0.5 * (map.f_mod_grid[best + 1] - map.f_mod_grid[best - 1]);
      if (denom < 0) c += step * 0.5 * (ym - yp) / denom;
    }
    centers[i] = c;
  }
  // First fringe: from the first resolvable row up to the first local maximum
  // of the row maxima.
  RabiRidge ridge;
  std::size_t first = nv;
  for (std::size_t i = 0; i < nv; ++i) {
    if (row_max[i] >= min_signal) {
      first = i;
      break;
    }
  }
  if (first == nv) return ridge;
  std::size_t last = first;
  while (last + 1 < nv && row_max[last + 1] >= row_max[last]) ++last;
  for (std::size_t i = first; i <= last; ++i) {
    ridge.v0.push_back(map.v0_grid[i]);
    ridge.f_mod.push_back(centers[i]);
    if (i > first) {
      if (centers[i] > centers[i - 1] + 1e-12) ++ridge.increases;
      if (centers[i] < centers[i - 1] - 1e-12) ++ridge.decreases;
    }
  }
  if (ridge.v0.size() >= 3) {
    const RealVector x = Eigen::Map<const RealVector>(ridge.v0.data(), static_cast<Eigen::Index>(ridge.v0.size()));
    const RealVector y = Eigen::Map<const RealVector>(ridge.f_mod.data(), static_cast<Eigen::Index>(ridge.f_mod.size()));
    ridge.slope = weighted_linear_fit(x, y).params(1);
  } else if (ridge.v0.size() == 2) {
    ridge.slope = (ridge.f_mod[1] - ridge.f_mod[0]) / (ridge.v0[1] - ridge.v0[0]);
  }
  return ridge;
}

AmplitudeCut amplitude_cut(const RabiMap& map, std::size_t i_f) {
  if (i_f >= map.f_mod_grid.size()) throw InvalidDimension("frequency index outside the map");
  AmplitudeCut cut;
  std::size_t best_s = 0;
  std::size_t best_p = 0;
  auto p1 = [&](std::size_t i) {
    const auto& p = map.at(i, i_f).p_phonon;
    return p.size() > 1 ? p[1] : 0.0;
  };
  for (std::size_t i = 0; i < map.v0_grid.size(); ++i) {
    if (map.at(i, i_f).signal > map.at(best_s, i_f).signal) best_s = i;
    if (p1(i) > p1(best_p)) best_p = i;
  }
  cut.v0_at_max_signal = map.v0_grid[best_s];
  cut.max_signal = map.at(best_s, i_f).signal;
  cut.p1_at_max_signal = p1(best_s);
  cut.v0_at_max_p1 = map.v0_grid[best_p];
  cut.max_p1 = p1(best_p);
  return cut;
}

SwapTrace swap_sequence(const JointSimulator& sim, const ModulationPulse& pulse,
                        const std::vector<double>& delays_us, const SwapOptions& options) {
  if (delays_us.empty()) throw ValidationError("swap sequence needs at least one delay");
  if (options.phases.empty()) throw ValidationError("swap sequence needs at least one phase");
  for (std::size_t i = 0; i < delays_us.size(); ++i) {
    if (delays_us[i] < 0 || (i > 0 && delays_us[i] < delays_us[i - 1])) {
      throw ValidationError("delays must be nonnegative and ascending");
    }
  }
  const OperatorMatrix prep =
      options.prep == SwapPrep::Pi ? sim.ideal_pi_pulse() : sim.ideal_half_pi_pulse();
  const DensityMatrix prepared = JointSimulator::apply_unitary(prep, sim.thermal_state());
  const Populations after_prep = sim.populations(prepared);

  ModulationPulse first = pulse;
  first.theta = 0.0;
  PlanarState state = sim.run_pulse(first, PlanarState::from(prepared));

  std::vector<PlanarState> waiting;
  waiting.reserve(delays_us.size());
  double elapsed = 0.0;
  for (double d : delays_us) {
    state = sim.free_evolution(state, d - elapsed);
    elapsed = d;
    waiting.push_back(state);
  }

  const std::size_t np = options.phases.size();
  std::vector<Populations> results(delays_us.size() * np);
  const OperatorMatrix recovery = options.recovery == SwapRecovery::HalfPi
                                      ? sim.ideal_half_pi_pulse()
                                      : OperatorMatrix();
  parallel_for(results.size(), options.jobs, [&](std::size_t idx) {
    ModulationPulse second = pulse;
    second.theta = options.phases[idx % np];
    const PlanarState out = sim.run_pulse(second, waiting[idx / np]);
    if (recovery.size() > 0) {
      results[idx] = sim.populations(JointSimulator::apply_unitary(recovery, out.to_density()));
    } else {
      results[idx] = sim.populations(out);
    }
  });

  SwapTrace trace;
  trace.delays_us = delays_us;
  trace.phases = options.phases;
  for (std::size_t i = 0; i < delays_us.size(); ++i) {
    double pe = 0.0, pg = 0.0, asym = 0.0;
    std::vector<double> asym_phase;
    std::vector<double> phonon(results[i * np].phonon.size(), 0.0);
    for (std::size_t p = 0; p < np; ++p) {
      const Populations& pop = results[i * np + p];
      pe += pop.p_e() / static_cast<double>(np);
      pg += pop.p_g() / static_cast<double>(np);
      asym += pop.asymmetry() / static_cast<double>(np);
      asym_phase.push_back(pop.asymmetry());
      for (std::size_t n = 0; n < phonon.size(); ++n) phonon[n] += pop.phonon[n] / static_cast<double>(np);
    }
    trace.p_e.push_back(pe);
    trace.p_g.push_back(pg);
    trace.signal.push_back(std::abs(asym - after_prep.asymmetry()));
    trace.asym_per_phase.push_back(asym_phase);
    trace.p_phonon.push_back(phonon);
  }
  return trace;
}

}  // namespace phonoflux
