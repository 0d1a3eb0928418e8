#ifndef SNO_SAMPLER_HPP
#define SNO_SAMPLER_HPP

#include <cstddef>
#include <vector>

#include "sno/matrix.hpp"
#include "sno/model.hpp"
#include "sno/rng.hpp"

namespace sno {

struct SampleRecord; // fom.hpp
class Normalizer;    // dataio.hpp

/// Regular spatio-temporal lattice. Cell centers carry the field values;
/// the nt timestamps are spaced uniformly over [0, t_end] including both
/// endpoints (states[0] is the initial condition at t = 0).
struct GridSpec {
    std::size_t nx = 1, ny = 1, nz = 1, nt = 1;
    double xmin = 0.0, xmax = 1.0;
    double ymin = 0.0, ymax = 1.0;
    double zmin = 0.0, zmax = 1.0;
    double t_end = 1.0;
};

void validate_grid(const GridSpec& grid);

inline std::size_t num_cells(const GridSpec& g) { return g.nx * g.ny * g.nz; }

inline std::size_t cell_index(const GridSpec& g, std::size_t xi, std::size_t yi,
                              std::size_t zi) {
    return (zi * g.ny + yi) * g.nx + xi;
}

struct GridIndex {
    std::size_t ti = 0, xi = 0, yi = 0, zi = 0;
    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

using SubsampleIndices = std::vector<GridIndex>;

struct Point4 {
    double t = 0.0, x = 0.0, y = 0.0, z = 0.0;
};

/// n_sub indices drawn i.i.d. uniformly over the nt*nx*ny*nz lattice,
/// with replacement. A fresh draw per call.
SubsampleIndices subsample(const GridSpec& grid, std::size_t n_sub, Rng& rng);

/// Every lattice point exactly once, in (t, z, y, x) raster order.
SubsampleIndices all_indices(const GridSpec& grid);

/// Cell-center mapping: x = xmin + (xi + 0.5) * (xmax - xmin) / nx (and
/// analogously per axis); t maps the ti-th timestamp uniformly over
/// [0, t_end].
Point4 point_of(const GridSpec& grid, const GridIndex& index);

/// Physical (t, x, y, z) values of the given indices, one row each.
Matrix coordinates_of(const GridSpec& grid, const SubsampleIndices& indices);

/// Gathers normalized topo/hetero/homo features and targets for the
/// given lattice indices of one sample.
QueryBatch gather_batch(const SampleRecord& sample, const SubsampleIndices& indices,
                        const Normalizer& normalizer);

} // namespace sno

#endif
