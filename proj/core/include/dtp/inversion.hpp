#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dtp/netcore.hpp"

namespace dtp {

/// A single-layer map, either an encoder f or a decoder g.
using LayerMap = std::function<Vector(const Vector&)>;

LayerMap encoder_map(const Network& net, int l);
LayerMap decoder_map(const Network& net, int l);

struct InversionResult {
  Vector target;       // the input-side target (tau_x / tau_{l-1})
  Vector last_input;   // final iterate u_T (decoder input or decoder output, by method)
  int iterations_used = 0;
  std::vector<double> increment_norms;  // one entry per iteration
  bool converged = false;
  double estimated_alpha = 0.0;
};

enum class InversionKind {
  SimpleTP,               // tau_{l-1} = g_l(tau_l)
  InputCorrection,        // iterate on the decoder input
  OutputStep,             // input correction followed by one decoder-output correction
  OutputIterative,        // iterate on the decoder output, from g_l(tau_l)
  OutputIterativeSeeded,  // as OutputIterative, seeded by the input-correction target
};

struct InversionMethod {
  InversionKind kind = InversionKind::OutputIterative;
  int max_iters = 100;
  double tol = 1e-6;
};

/// Decoder-input correction: u_0 = tau_y, u_t = u_{t-1} + tau_y - f(g(u_{t-1})).
/// Returns g(u_T). Records |u_{t-1} - u_t| per iteration and stops once it
/// drops below `tol`. Throws NonContractiveError after three consecutive
/// growing increments.
InversionResult invert_input_correction(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, int max_iters = 100,
                                        double tol = 1e-6);

/// One decoder-output correction around the point g(u_last):
/// g(tau_y) + g(u_last) - g(f(g(u_last))).
Vector invert_output_step(const LayerMap& encode, const LayerMap& decode, const Vector& tau_y,
                          const Vector& u_last);

/// Decoder-output iteration u_{t+1} = u_t + g(tau_y) - g(f(u_t)) starting at
/// `init`. The target is the last iterate.
InversionResult invert_output_iterative(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, const Vector& init,
                                        int max_iters = 100, double tol = 1e-6);
/// Same, initialized at g(tau_y).
InversionResult invert_output_iterative(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, int max_iters = 100,
                                        double tol = 1e-6);

/// Geometric mean of successive increment ratios. Returns 0 when the sequence
/// reaches an exact zero, +infinity when any ratio is >= 1.5. Throws
/// InsufficientDataError with fewer than 3 norms (unless terminated by zero).
double estimate_contraction_alpha(std::span<const double> increment_norms);
double estimate_contraction_alpha(const InversionResult& result);

/// Inverts one layer of `net` at target `tau` with the chosen method.
InversionResult invert_layer(const Network& net, int l, const Vector& tau,
                             const InversionMethod& method);

/// tau_l = (g_{l+1} o ... o g_L)(tau_L) for l = 0..L; tau_L is echoed.
std::vector<Vector> propagate_targets_simple(const Network& net, const Vector& tau_L);

struct SequentialTargets {
  std::vector<Vector> targets;            // tau_0 .. tau_L
  std::vector<InversionResult> per_layer; // index l-1 holds the inversion of layer l
};

/// Layer-by-layer inversion from the top, each layer run to convergence
/// before the one below starts.
SequentialTargets propagate_targets_sequential(const Network& net, const Vector& tau_L,
                                               const InversionMethod& method);

enum class SweepOrder {
  Jacobi,       // every layer reads the previous sweep's targets
  GaussSeidel,  // top-down, layer l-1 sees this sweep's tau_l
};

struct RelaxationOptions {
  double stopping_precision = 1e-6;
  int max_sweeps = 100;
  SweepOrder order = SweepOrder::Jacobi;
};

struct RelaxationResult {
  std::vector<Vector> targets;            // tau_0 .. tau_L
  std::vector<InversionResult> per_layer; // index l-1: history of tau_{l-1} under layer l
  int sweeps_used = 0;
  bool converged = false;
};

/// Simultaneous target relaxation. Targets start from the sequential pass
/// tau_{l-1} = g_l(tau_l); each sweep applies
///   tau_{l-1} <- tau_{l-1} + g_l(tau_l) - g_l(f_l(tau_{l-1}))
/// to tau_1 .. tau_{L-1}. Stops when every |delta tau_l| (in particular
/// |delta tau_1|) is below the stopping precision, or at max_sweeps.
/// tau_0 is not relaxed; it is g_1(tau_1) of the final tau_1.
RelaxationResult parallel_target_relaxation(const Network& net, const Vector& tau_L,
                                            const RelaxationOptions& options);

}  // namespace dtp
