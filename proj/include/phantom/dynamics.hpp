#pragma once

// Single-excitation amplitude dynamics: atom A, the field modes, atom B.

#include <complex>
#include <string>
#include <vector>

#include "phantom/atom_field_coupling.hpp"
#include "phantom/loss_model.hpp"
#include "phantom/mode_solver.hpp"
#include "phantom/simd/kernels.hpp"

namespace phantom {

struct AmplitudeState {
  std::complex<double> c100{1.0, 0.0};
  std::vector<std::complex<double>> c010;
  std::complex<double> c001{0.0, 0.0};
  double t = 0.0;  // s

  double field_population() const;
  double norm() const;  // total population
};

struct Sample {
  double t = 0.0;  // s
  double p_atom_A = 0.0;
  double p_field = 0.0;
  double p_atom_B = 0.0;
};

struct DynamicsOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  LossConvention convention = LossConvention::half;
  bool record_modes = false;
  simd::Isa isa = simd::Isa::automatic;
  double cap_T = 20.0;        // hard stop, in pulse widths after the start
  double start_T = 6.0;       // start this many widths before the first peak
  double pulse_off = 1e-6;    // relative to the peak Rabi frequency
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<std::vector<double>> mode_populations;  // per sample, when recorded
  AmplitudeState final_state;
  std::size_t mode_count = 0;
  double rtol = 0.0, atol = 0.0;
  PulseSchedule schedule;
  double L = 0.0;
  double kappa_c = 0.0;
  long accepted_steps = 0;
  long rejected_steps = 0;
  bool hit_cap = false;
  std::string kernel;
};

/// Time-independent inputs of the amplitude equations.
struct CoupledModel {
  std::vector<double> delta;  // omega_L - c k_i (rad/s)
  std::vector<double> gA, gB; // bare couplings g_i (rad/s)
  std::vector<double> gamma;  // 1/s, empty when lossless
  std::vector<double> s;      // sqrt(cavity fraction)
  std::vector<Parity> parity;
  double gamma_c = 0.0, gamma_f = 0.0;
  double Delta_A = 0.0, Delta_B = 0.0;
  double kappa_c = 0.0;
  double L = 0.0;
  PulseSchedule pulses;
  bool lossy = false;

  std::size_t size() const { return delta.size(); }
};

CoupledModel build_model(const SystemParams& params, const ModeTable& modes, const LossMatrix* loss,
                         double omega_L);

/// Time derivative of the amplitudes for frozen couplings G_A, G_B (rad/s):
///   i c100' = sum G_A c,  i c001' = sum G_B c,
///   i c_i'  = -(delta_i + i w gamma_i) c_i + w sum_{j != i} C_ij c_j + G_A_i c100 + G_B_i c001
/// with w = 1/2 (half) or 1 (full). Dense reference form.
AmplitudeState rhs(const AmplitudeState& state, const std::vector<double>& G_A,
                   const std::vector<double>& G_B, const std::vector<double>& delta,
                   const LossMatrix* loss, LossConvention convention);

/// Integrates from c100 = 1 until both pulses have fallen below pulse_off after
/// their peaks, or the hard cap is reached. Throws NumericalError on step underflow.
Trajectory integrate(const CoupledModel& model, const DynamicsOptions& options);
Trajectory integrate(const SystemParams& params, const ModeTable& modes, const LossMatrix* loss,
                     double omega_L, const DynamicsOptions& options);

/// Same integrator with frozen couplings over [0, duration] from a given
/// state; pulses are ignored and G_A, G_B held constant (rad/s).
AmplitudeState propagate_frozen(const CoupledModel& model, const std::vector<double>& G_A,
                                const std::vector<double>& G_B, AmplitudeState initial,
                                double duration, const DynamicsOptions& options);

/// |c001|^2 at the end; warns on stderr if the field still holds > 1e-4.
double transfer_probability(const Trajectory& traj);

/// Time-integrated field population over P (L/c + 2/kappa_c).
double dwell_ratio(const Trajectory& traj, double L, double kappa_c);

/// (kappa_c / (kappa_c + gamma_c))^2 exp(-gamma_f L / c)
double p1_bound(double kappa_c, double gamma_c, double gamma_f, double L);

/// trajectory.csv: t_s, p_atom_A, p_field_total, p_atom_B, norm [, p_mode_i ...]
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

}  // namespace phantom
