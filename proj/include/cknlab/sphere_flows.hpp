#pragma once

#include "cknlab/functionals.hpp"

#include <array>
#include <vector>

namespace cknlab {

enum class FlowKind { heat, fde };
enum class HeatScheme { implicit_euler, exponential };

struct TimeStepPolicy {
    double dt0 = 1e-4;
    double dt_max = 0.05;
    double growth = 1.25;
    double dt_min = 1e-12;
    long max_node_steps = 1000000;
};

struct FlowSpec {
    FlowKind kind = FlowKind::heat;
    double m = 1;    // fde only
    double p = 2;    // exponent of the diagnostics E_p, I_p
    TimeStepPolicy policy;
    int grid_size = 64;
    double t_end = 1;
    HeatScheme heat_scheme = HeatScheme::implicit_euler;
    int newton_max_iter = 40;
};

void validate(const FlowSpec& spec);

struct FlowState {
    GridFunction1D density;
    double time = 0;
    double mass = 0;
};

FlowState make_state(GridFunction1D rho, double time = 0);

FlowState flow_step(const FlowState& state, const FlowSpec& spec, double dt);

struct FlowSample {
    double time, mass, E_p, I_p, deficit, min_density;
};

struct Trajectory {
    std::vector<FlowSample> samples;
    FlowState final_state;
    long steps = 0;
    long rejected = 0;
};

Trajectory integrate(const FlowState& state0, const FlowSpec& spec, int sample_every = 1);

struct DerivativeEstimate {
    double value = 0;
    double error = 0;
};

DerivativeEstimate deficit_derivative(const GridFunction1D& rho0, double p, const FlowSpec& spec);

// Density exp(q log(1 + eps z) + b2 z^2 + b3 z^3) scaled to unit mass.  b2 = b3 = 0
// is the scanned family c (1 + eps z)^q; the two extra modes are used by the ascent.
GridFunction1D ascent_density(std::shared_ptr<const ZonalBasis> basis,
                              const std::array<double, 4>& x);

struct SearchTraceEntry {
    std::array<double, 4> x;  // eps, q, b2, b3
    double derivative;
    double error;
    double normalized;  // derivative / I_p
};

struct SearchOptions {
    int grid_size = 96;
    int n_eps = 18;
    int n_q = 16;
    int ascent_iters = 300;
};

struct CounterexampleResult {
    GridFunction1D rho0;
    std::array<double, 4> x{};
    double derivative = 0;
    double error = 0;
    std::vector<SearchTraceEntry> trace;
};

CounterexampleResult counterexample_search(int d, double p, const SearchOptions& opt = {});

}  // namespace cknlab
