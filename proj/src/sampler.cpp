#include "sno/sampler.hpp"

#include <cmath>
#include <string>

#include "sno/dataio.hpp"
#include "sno/errors.hpp"
#include "sno/fom.hpp"

namespace sno {

void validate_grid(const GridSpec& grid) {
    if (grid.nx == 0 || grid.ny == 0 || grid.nz == 0 || grid.nt == 0) {
        throw ConfigError("grid cell and timestamp counts must all be at least 1");
    }
    if (!(grid.xmin < grid.xmax) || !(grid.ymin < grid.ymax) || !(grid.zmin < grid.zmax)) {
        throw ConfigError("grid extents must satisfy min < max on every axis");
    }
    if (!(grid.t_end > 0.0)) {
        throw ConfigError("grid t_end must be positive, got " + std::to_string(grid.t_end));
    }
}

SubsampleIndices subsample(const GridSpec& grid, std::size_t n_sub, Rng& rng) {
    validate_grid(grid);
    if (n_sub == 0) {
        throw ConfigError("subsample size must be positive");
    }
    SubsampleIndices indices(n_sub);
    for (GridIndex& idx : indices) {
        idx.ti = rng.below(grid.nt);
        idx.xi = rng.below(grid.nx);
        idx.yi = rng.below(grid.ny);
        idx.zi = rng.below(grid.nz);
    }
    return indices;
}

SubsampleIndices all_indices(const GridSpec& grid) {
    validate_grid(grid);
    SubsampleIndices indices;
    indices.reserve(grid.nt * num_cells(grid));
    for (std::size_t ti = 0; ti < grid.nt; ++ti) {
        for (std::size_t zi = 0; zi < grid.nz; ++zi) {
            for (std::size_t yi = 0; yi < grid.ny; ++yi) {
                for (std::size_t xi = 0; xi < grid.nx; ++xi) {
                    indices.push_back({ti, xi, yi, zi});
                }
            }
        }
    }
    return indices;
}

namespace {

double check_index(std::size_t value, std::size_t bound, const char* axis) {
    if (value >= bound) {
        throw RangeError("grid index out of range on axis " + std::string(axis) + ": " +
                         std::to_string(value) + " >= " + std::to_string(bound));
    }
    return static_cast<double>(value);
}

} // namespace

Point4 point_of(const GridSpec& grid, const GridIndex& index) {
    Point4 p;
    const double ti = check_index(index.ti, grid.nt, "t");
    p.t = grid.nt == 1 ? 0.0 : ti / static_cast<double>(grid.nt - 1) * grid.t_end;
    p.x = grid.xmin +
          (check_index(index.xi, grid.nx, "x") + 0.5) * (grid.xmax - grid.xmin) / static_cast<double>(grid.nx);
    p.y = grid.ymin +
          (check_index(index.yi, grid.ny, "y") + 0.5) * (grid.ymax - grid.ymin) / static_cast<double>(grid.ny);
    p.z = grid.zmin +
          (check_index(index.zi, grid.nz, "z") + 0.5) * (grid.zmax - grid.zmin) / static_cast<double>(grid.nz);
    return p;
}

Matrix coordinates_of(const GridSpec& grid, const SubsampleIndices& indices) {
    validate_grid(grid);
    Matrix coords(indices.size(), 4);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Point4 p = point_of(grid, indices[i]);
        coords(i, 0) = p.t;
        coords(i, 1) = p.x;
        coords(i, 2) = p.y;
        coords(i, 3) = p.z;
    }
    return coords;
}

QueryBatch gather_batch(const SampleRecord& sample, const SubsampleIndices& indices,
                        const Normalizer& normalizer) {
    const GridSpec& grid = sample.grid;
    validate_record(sample);

    const std::size_t n = indices.size();
    const std::size_t ncells = num_cells(grid);
    QueryBatch batch;
    batch.topo = Matrix(n, 4);
    batch.hetero = Matrix(n, 4);
    batch.homo = Matrix(n, 2);
    batch.target = Matrix(n, 1);

    const double rate = normalizer.normalize(Feature::kRate, sample.rate);
    const double duration = normalizer.normalize(Feature::kDuration, sample.duration);

    for (std::size_t i = 0; i < n; ++i) {
        const GridIndex& idx = indices[i];
        const Point4 p = point_of(grid, idx);
        batch.topo(i, 0) = normalizer.normalize(Feature::kT, p.t);
        batch.topo(i, 1) = normalizer.normalize(Feature::kX, p.x);
        batch.topo(i, 2) = normalizer.normalize(Feature::kY, p.y);
        batch.topo(i, 3) = normalizer.normalize(Feature::kZ, p.z);

        const std::size_t c = cell_index(grid, idx.xi, idx.yi, idx.zi);
        batch.hetero(i, 0) = normalizer.normalize(Feature::kPorosity, sample.porosity[c]);
        batch.hetero(i, 1) = normalizer.normalize(Feature::kLogKx, std::log(sample.perm[c]));
        batch.hetero(i, 2) = normalizer.normalize(Feature::kLogKy, std::log(sample.perm[ncells + c]));
        batch.hetero(i, 3) = normalizer.normalize(Feature::kLogKz, std::log(sample.perm[2 * ncells + c]));

        batch.homo(i, 0) = rate;
        batch.homo(i, 1) = duration;

        (*batch.target)(i, 0) = normalizer.normalize_target(sample.states[idx.ti * ncells + c]);
    }
    return batch;
}

} // namespace sno
