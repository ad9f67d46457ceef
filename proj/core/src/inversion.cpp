#include "dtp/inversion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dtp/errors.hpp"

namespace dtp {
namespace {

constexpr int kGrowthLimit = 3;
constexpr double kDivergentRatio = 1.5;

// Counts consecutive growing increments. Increments below the tolerance are
// round-off and never count as growth.
class DivergenceMonitor {
 public:
  explicit DivergenceMonitor(double floor = 0.0) : floor_(floor) {}

  // Returns true once the growth limit is hit.
  bool observe(double norm) {
    if (has_previous_ && norm > previous_ && norm >= floor_) {
      ++growing_;
    } else {
      growing_ = 0;
    }
    previous_ = norm;
    has_previous_ = true;
    return growing_ >= kGrowthLimit;
  }

 private:
  double floor_;
  double previous_ = 0.0;
  bool has_previous_ = false;
  int growing_ = 0;
};

// Geometric mean of ratios over whatever norms are available; 0 with fewer
// than two.
double lenient_alpha(std::span<const double> norms) {
  if (norms.size() < 2) return 0.0;
  double log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 1; i < norms.size(); ++i) {
    if (norms[i - 1] == 0.0 || norms[i] == 0.0) return 0.0;
    const double ratio = norms[i] / norms[i - 1];
    if (ratio >= kDivergentRatio) return std::numeric_limits<double>::infinity();
    log_sum += std::log(ratio);
    ++count;
  }
  return std::exp(log_sum / static_cast<double>(count));
}

[[noreturn]] void throw_divergence(int layer, std::span<const double> norms, const char* method) {
  const double alpha = std::max(1.0, lenient_alpha(norms));
  std::string where = layer > 0 ? " at layer " + std::to_string(layer) : std::string();
  throw NonContractiveError(layer, alpha,
                            std::string(method) + " is not contracting" + where +
                                " (estimated alpha " + std::to_string(alpha) + ")");
}

void check_limits(int max_iters, double tol) {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
}

void check_finite(const Vector& v, int layer, const char* what) {
  if (!v.allFinite()) throw NumericalOverflowError(layer, what);
}

}  // namespace

LayerMap encoder_map(const Network& net, int l) {
  (void)net.encoder(l);  // range check now rather than on first call
  return [&net, l](const Vector& u) { return layer_encode(net, l, u); };
}

LayerMap decoder_map(const Network& net, int l) {
  (void)net.decoder(l);
  return [&net, l](const Vector& v) { return layer_decode(net, l, v); };
}

InversionResult invert_input_correction(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, int max_iters, double tol) {
  check_limits(max_iters, tol);
  InversionResult result;
  DivergenceMonitor monitor(tol);
  Vector u = tau_y;
  for (int t = 1; t <= max_iters; ++t) {
    Vector next = u + tau_y - encode(decode(u));
    check_finite(next, -1, "input correction iterate");
    const double norm = (u - next).norm();
    u = std::move(next);
    result.increment_norms.push_back(norm);
    result.iterations_used = t;
    if (norm < tol) {
      result.converged = true;
      break;
    }
    if (monitor.observe(norm)) throw_divergence(-1, result.increment_norms, "input correction");
  }
  result.target = decode(u);
  result.last_input = std::move(u);
  result.estimated_alpha = lenient_alpha(result.increment_norms);
  return result;
}

Vector invert_output_step(const LayerMap& encode, const LayerMap& decode, const Vector& tau_y,
                          const Vector& u_last) {
  const Vector x_prime = decode(u_last);
  return decode(tau_y) + x_prime - decode(encode(x_prime));
}

InversionResult invert_output_iterative(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, const Vector& init, int max_iters,
                                        double tol) {
  check_limits(max_iters, tol);
  InversionResult result;
  DivergenceMonitor monitor(tol);
  const Vector decoded_target = decode(tau_y);
  Vector u = init;
  for (int t = 1; t <= max_iters; ++t) {
    Vector next = u + decoded_target - decode(encode(u));
    check_finite(next, -1, "output iteration iterate");
    const double norm = (next - u).norm();
    u = std::move(next);
    result.increment_norms.push_back(norm);
    result.iterations_used = t;
    if (norm < tol) {
      result.converged = true;
      break;
    }
    if (monitor.observe(norm)) throw_divergence(-1, result.increment_norms, "output iteration");
  }
  result.target = u;
  result.last_input = std::move(u);
  result.estimated_alpha = lenient_alpha(result.increment_norms);
  return result;
}

InversionResult invert_output_iterative(const LayerMap& encode, const LayerMap& decode,
                                        const Vector& tau_y, int max_iters, double tol) {
  return invert_output_iterative(encode, decode, tau_y, decode(tau_y), max_iters, tol);
}

double estimate_contraction_alpha(std::span<const double> norms) {
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] == 0.0) {
      // Exact convergence. Growth before the zero still counts as divergence.
      const double before = lenient_alpha(norms.first(i));
      return std::isinf(before) ? before : 0.0;
    }
  }
  if (norms.size() < 3) {
    throw InsufficientDataError("contraction estimate needs at least 3 increment norms, got " +
                                std::to_string(norms.size()));
  }
  return lenient_alpha(norms);
}

double estimate_contraction_alpha(const InversionResult& result) {
  return estimate_contraction_alpha(std::span<const double>(result.increment_norms));
}

InversionResult invert_layer(const Network& net, int l, const Vector& tau,
                             const InversionMethod& method) {
  const LayerMap f = encoder_map(net, l);
  const LayerMap g = decoder_map(net, l);
  try {
    switch (method.kind) {
      case InversionKind::SimpleTP: {
        InversionResult r;
        r.target = g(tau);
        r.last_input = tau;
        r.converged = true;
        return r;
      }
      case InversionKind::InputCorrection:
        return invert_input_correction(f, g, tau, method.max_iters, method.tol);
      case InversionKind::OutputStep: {
        InversionResult r = invert_input_correction(f, g, tau, method.max_iters, method.tol);
        r.target = invert_output_step(f, g, tau, r.last_input);
        return r;
      }
      case InversionKind::OutputIterative:
        return invert_output_iterative(f, g, tau, method.max_iters, method.tol);
      case InversionKind::OutputIterativeSeeded: {
        const InversionResult seed =
            invert_input_correction(f, g, tau, method.max_iters, method.tol);
        return invert_output_iterative(f, g, tau, seed.target, method.max_iters, method.tol);
      }
    }
  } catch (const NonContractiveError& e) {
    throw NonContractiveError(l, e.estimated_alpha(),
                              std::string(e.what()) + " (layer " + std::to_string(l) + ")");
  } catch (const NumericalOverflowError& e) {
    throw NumericalOverflowError(l, e.what());
  }
  throw std::logic_error("unknown inversion kind");
}

std::vector<Vector> propagate_targets_simple(const Network& net, const Vector& tau_L) {
  const int L = net.layer_count();
  std::vector<Vector> targets(static_cast<std::size_t>(L) + 1);
  targets[static_cast<std::size_t>(L)] = tau_L;
  for (int l = L; l >= 1; --l) {
    Vector below = layer_decode(net, l, targets[static_cast<std::size_t>(l)]);
    check_finite(below, l, "propagated target");
    targets[static_cast<std::size_t>(l - 1)] = std::move(below);
  }
  return targets;
}

SequentialTargets propagate_targets_sequential(const Network& net, const Vector& tau_L,
                                               const InversionMethod& method) {
  const int L = net.layer_count();
  SequentialTargets out;
  out.targets.resize(static_cast<std::size_t>(L) + 1);
  out.per_layer.resize(static_cast<std::size_t>(L));
  out.targets[static_cast<std::size_t>(L)] = tau_L;
  for (int l = L; l >= 1; --l) {
    InversionResult r = invert_layer(net, l, out.targets[static_cast<std::size_t>(l)], method);
    out.targets[static_cast<std::size_t>(l - 1)] = r.target;
    out.per_layer[static_cast<std::size_t>(l - 1)] = std::move(r);
  }
  return out;
}

RelaxationResult parallel_target_relaxation(const Network& net, const Vector& tau_L,
                                            const RelaxationOptions& options) {
  if (options.max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
  if (!(options.stopping_precision > 0.0)) {
    throw std::invalid_argument("stopping precision must be positive");
  }
  const int L = net.layer_count();
  const auto idx = [](int l) { return static_cast<std::size_t>(l); };

  RelaxationResult result;
  result.targets = propagate_targets_simple(net, tau_L);
  result.per_layer.resize(idx(L));
  result.converged = L == 1;
  std::vector<DivergenceMonitor> monitors(idx(L), DivergenceMonitor(options.stopping_precision));

  for (int sweep = 1; L > 1 && sweep <= options.max_sweeps; ++sweep) {
    // Jacobi reads from a frozen copy of the previous sweep; Gauss-Seidel
    // updates in place from the top down.
    const std::vector<Vector> previous =
        options.order == SweepOrder::Jacobi ? result.targets : std::vector<Vector>{};
    const std::vector<Vector>& source =
        options.order == SweepOrder::Jacobi ? previous : result.targets;

    double largest = 0.0;
    for (int l = L; l >= 2; --l) {
      const Vector& upper = source[idx(l)];
      const Vector& current = source[idx(l - 1)];
      Vector step = layer_decode(net, l, upper) -
                    layer_decode(net, l, layer_encode(net, l, current));
      Vector next = current + step;
      check_finite(next, l, "relaxed target");
      const double norm = step.norm();
      largest = std::max(largest, norm);

      InversionResult& history = result.per_layer[idx(l - 1)];
      history.increment_norms.push_back(norm);
      history.iterations_used = sweep;
      // Targets above need up to L-2 sweeps to settle, so growth only
      // counts once information has reached every relaxed layer.
      if (sweep >= L - 1 && monitors[idx(l - 1)].observe(norm)) {
        throw_divergence(l, history.increment_norms, "target relaxation");
      }
      result.targets[idx(l - 1)] = std::move(next);
    }
    result.sweeps_used = sweep;
    if (largest < options.stopping_precision) {
      result.converged = true;
      break;
    }
  }

  // No weight update reads tau_0, so it is decoded once from the relaxed
  // tau_1 instead of being relaxed against the input layer.
  result.targets[0] = layer_decode(net, 1, result.targets[1]);
  check_finite(result.targets[0], 1, "input target");

  for (int l = 1; l <= L; ++l) {
    InversionResult& history = result.per_layer[idx(l - 1)];
    history.target = result.targets[idx(l - 1)];
    history.last_input = history.target;
    history.converged = result.converged;
    history.estimated_alpha = lenient_alpha(history.increment_norms);
  }
  return result;
}

}  // namespace dtp
