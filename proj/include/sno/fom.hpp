#ifndef SNO_FOM_HPP
#define SNO_FOM_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sno/rng.hpp"
#include "sno/sampler.hpp"

namespace sno {

/// Recipe for one random property realization: smoothed white noise,
/// porosity affinely mapped into [porosity_min, porosity_max], per-axis
/// permeability exp(logk_mean + logk_std * noise).
struct FieldSpec {
    GridSpec grid;
    double porosity_min = 0.1;
    double porosity_max = 0.3;
    double logk_mean = 0.0;
    double logk_std = 0.5;
    std::size_t correlation_cells = 2;
    std::uint64_t seed = 0;
};

void validate_field_spec(const FieldSpec& spec);

struct Fields {
    std::vector<double> porosity; // ncells
    std::vector<double> perm;     // 3 * ncells: x block, y block, z block
};

/// One simulated case: static property fields, the two per-case scalars
/// (injection rate and duration), the injection cell, and the solved
/// state snapshots. states is nt * ncells with states[0] the zero
/// initial condition.
struct SampleRecord {
    GridSpec grid;
    std::vector<double> porosity;
    std::vector<double> perm;
    double rate = 0.0;     // volume per unit time
    double duration = 0.0; // time the source stays on
    std::array<std::size_t, 3> well = {0, 0, 0};
    std::vector<double> states;
};

/// Checks array sizes against the grid and the well cell bounds.
void validate_record(const SampleRecord& record);

/// Mean filter with clamped windows of the given radius, applied
/// separately along x, then y, then z. Radius 0 is the identity.
std::vector<double> box_smooth(const GridSpec& grid, const std::vector<double>& field,
                               std::size_t radius);

Fields generate_fields(const FieldSpec& spec, Rng& rng);

struct SolverOptions {
    double cg_tol = 1e-10;
    std::size_t cg_max_iter = 0; // 0 picks a cap proportional to the cell count
};

/// Backward-Euler finite-volume solve of phi du/dt = div(kappa grad u) + q
/// at the well cell, no-flux boundaries, harmonic-mean face
/// transmissibilities, zero initial condition. The source injects `rate`
/// during every step that starts before `duration`. Each implicit system
/// is solved by Jacobi-preconditioned conjugate gradients to a relative
/// residual of cg_tol. Timestep size is t_end / (nt - 1).
std::vector<double> solve_diffusion(const GridSpec& grid, std::span<const double> porosity,
                                    std::span<const double> perm,
                                    const std::array<std::size_t, 3>& well, double rate,
                                    double duration, const SolverOptions& options = {});

struct DatasetSpec {
    FieldSpec fields;
    double rate_min = 0.5;
    double rate_max = 1.5;
    double duration_min = 0.5;
    double duration_max = 1.0;
    SolverOptions solver;
};

/// n_samples independent cases: fresh fields, rate and duration drawn
/// uniformly from the configured ranges, a random interior well cell,
/// and solved states. Per-sample RNG streams are derived from one draw
/// of the passed rng, so the result is deterministic per seed and
/// independent of generation order.
std::vector<SampleRecord> build_dataset(std::size_t n_samples, const DatasetSpec& spec,
                                        Rng& rng);

} // namespace sno

#endif
