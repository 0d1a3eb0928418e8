#include "sno/fom.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sno/errors.hpp"

namespace sno {

void validate_field_spec(const FieldSpec& spec) {
    validate_grid(spec.grid);
    if (!(spec.porosity_min > 0.0) || !(spec.porosity_min <= spec.porosity_max) ||
        !(spec.porosity_max < 1.0)) {
        throw ConfigError("porosity range must satisfy 0 < min <= max < 1");
    }
    if (!(spec.logk_std >= 0.0)) {
        throw ConfigError("logk_std must be non-negative, got " +
                          std::to_string(spec.logk_std));
    }
}

void validate_record(const SampleRecord& record) {
    validate_grid(record.grid);
    const GridSpec& g = record.grid;
    const std::size_t ncells = num_cells(g);
    if (record.porosity.size() != ncells) {
        throw DimensionError("record porosity has " + std::to_string(record.porosity.size()) +
                             " entries, grid has " + std::to_string(ncells) + " cells");
    }
    if (record.perm.size() != 3 * ncells) {
        throw DimensionError("record permeability has " + std::to_string(record.perm.size()) +
                             " entries, expected " + std::to_string(3 * ncells));
    }
    if (record.states.size() != g.nt * ncells) {
        throw DimensionError("record states have " + std::to_string(record.states.size()) +
                             " entries, expected " + std::to_string(g.nt * ncells));
    }
    if (record.well[0] >= g.nx || record.well[1] >= g.ny || record.well[2] >= g.nz) {
        throw RangeError("well cell lies outside the grid");
    }
}

namespace {

/// Smooths every line of the field along one axis, in place. A line has
/// `len` entries spaced `stride` apart starting at each offset in
/// `starts`. Windows are clamped at the line ends, so each output is the
/// mean of the in-bounds entries within `radius`.
void smooth_lines(std::vector<double>& field, std::size_t len, std::size_t stride,
                  const std::vector<std::size_t>& starts, std::size_t radius) {
    std::vector<double> prefix(len + 1);
    for (const std::size_t start : starts) {
        prefix[0] = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            prefix[i + 1] = prefix[i] + field[start + i * stride];
        }
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t lo = i >= radius ? i - radius : 0;
            const std::size_t hi = std::min(i + radius, len - 1);
            field[start + i * stride] =
                (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
        }
    }
}

} // namespace

std::vector<double> box_smooth(const GridSpec& grid, const std::vector<double>& field,
                               std::size_t radius) {
    validate_grid(grid);
    if (field.size() != num_cells(grid)) {
        throw DimensionError("box_smooth field has " + std::to_string(field.size()) +
                             " entries, grid has " + std::to_string(num_cells(grid)) +
                             " cells");
    }
    std::vector<double> out = field;
    if (radius == 0) {
        return out;
    }

    std::vector<std::size_t> starts;
    starts.reserve(grid.ny * grid.nz);
    for (std::size_t zi = 0; zi < grid.nz; ++zi) {
        for (std::size_t yi = 0; yi < grid.ny; ++yi) {
            starts.push_back((zi * grid.ny + yi) * grid.nx);
        }
    }
    smooth_lines(out, grid.nx, 1, starts, radius);

    starts.clear();
    for (std::size_t zi = 0; zi < grid.nz; ++zi) {
        for (std::size_t xi = 0; xi < grid.nx; ++xi) {
            starts.push_back(zi * grid.ny * grid.nx + xi);
        }
    }
    smooth_lines(out, grid.ny, grid.nx, starts, radius);

    starts.clear();
    for (std::size_t yi = 0; yi < grid.ny; ++yi) {
        for (std::size_t xi = 0; xi < grid.nx; ++xi) {
            starts.push_back(yi * grid.nx + xi);
        }
    }
    smooth_lines(out, grid.nz, grid.nx * grid.ny, starts, radius);
    return out;
}

Fields generate_fields(const FieldSpec& spec, Rng& rng) {
    validate_field_spec(spec);
    const std::size_t ncells = num_cells(spec.grid);
    const auto draw_noise = [&] {
        std::vector<double> noise(ncells);
        for (double& v : noise) v = rng.normal();
        return box_smooth(spec.grid, noise, spec.correlation_cells);
    };

    Fields fields;
    const std::vector<double> phi_noise = draw_noise();
    const auto [lo_it, hi_it] = std::minmax_element(phi_noise.begin(), phi_noise.end());
    const double lo = *lo_it, hi = *hi_it;
    fields.porosity.resize(ncells);
    if (hi == lo) {
        std::fill(fields.porosity.begin(), fields.porosity.end(),
                  0.5 * (spec.porosity_min + spec.porosity_max));
    } else {
        for (std::size_t c = 0; c < ncells; ++c) {
            const double u = (phi_noise[c] - lo) / (hi - lo);
            fields.porosity[c] = std::clamp(spec.porosity_min +
                                                u * (spec.porosity_max - spec.porosity_min),
                                            spec.porosity_min, spec.porosity_max);
        }
    }

    fields.perm.resize(3 * ncells);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const std::vector<double> noise = draw_noise();
        for (std::size_t c = 0; c < ncells; ++c) {
            fields.perm[axis * ncells + c] = std::exp(spec.logk_mean + spec.logk_std * noise[c]);
        }
    }
    return fields;
}

namespace {

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

struct ImplicitSystem {
    std::size_t nx, ny, nz, n;
    std::vector<double> diag;       // phi V / dt plus the incident transmissibilities
    std::vector<double> tx, ty, tz; // face transmissibilities toward +x/+y/+z

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t xi = c % nx;
            const std::size_t yi = (c / nx) % ny;
            const std::size_t zi = c / (nx * ny);
            double acc = diag[c] * x[c];
            if (xi > 0) acc -= tx[c - 1] * x[c - 1];
            if (xi + 1 < nx) acc -= tx[c] * x[c + 1];
            if (yi > 0) acc -= ty[c - nx] * x[c - nx];
            if (yi + 1 < ny) acc -= ty[c] * x[c + nx];
            if (zi > 0) acc -= tz[c - nx * ny] * x[c - nx * ny];
            if (zi + 1 < nz) acc -= tz[c] * x[c + nx * ny];
            y[c] = acc;
        }
    }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
    return total;
}

/// Jacobi-preconditioned CG with warm start. Overwrites x with the
/// solution of A x = b.
void cg_solve(const ImplicitSystem& sys, const std::vector<double>& b, std::vector<double>& x,
              double tol, std::size_t max_iter) {
    const std::size_t n = sys.n;
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }

    std::vector<double> r(n), z(n), p(n), ap(n);
    sys.apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];

    double rnorm = std::sqrt(dot(r, r));
    if (rnorm <= tol * bnorm) return;

    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / sys.diag[i];
    p = z;
    double rz = dot(r, z);

    for (std::size_t it = 0; it < max_iter; ++it) {
        sys.apply(p, ap);
        const double alpha = rz / dot(p, ap);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = std::sqrt(dot(r, r));
        if (rnorm <= tol * bnorm) return;
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / sys.diag[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError("conjugate gradients did not converge within " +
                      std::to_string(max_iter) + " iterations; relative residual " +
                      std::to_string(rnorm / bnorm));
}

} // namespace

std::vector<double> solve_diffusion(const GridSpec& grid, std::span<const double> porosity,
                                    std::span<const double> perm,
                                    const std::array<std::size_t, 3>& well, double rate,
                                    double duration, const SolverOptions& options) {
    validate_grid(grid);
    const std::size_t n = num_cells(grid);
    if (porosity.size() != n || perm.size() != 3 * n) {
        throw DimensionError("solve_diffusion fields do not match the grid: porosity " +
                             std::to_string(porosity.size()) + ", permeability " +
                             std::to_string(perm.size()) + ", cells " + std::to_string(n));
    }
    if (well[0] >= grid.nx || well[1] >= grid.ny || well[2] >= grid.nz) {
        throw RangeError("well cell lies outside the grid");
    }
    if (!std::isfinite(rate) || !std::isfinite(duration) || duration < 0.0) {
        throw ConfigError("injection rate must be finite and duration finite and non-negative");
    }
    if (!(options.cg_tol > 0.0)) {
        throw ConfigError("cg_tol must be positive");
    }

    std::vector<double> states(grid.nt * n, 0.0);
    if (grid.nt == 1) {
        return states;
    }

    const double dt = grid.t_end / static_cast<double>(grid.nt - 1);
    const double dx = (grid.xmax - grid.xmin) / static_cast<double>(grid.nx);
    const double dy = (grid.ymax - grid.ymin) / static_cast<double>(grid.ny);
    const double dz = (grid.zmax - grid.zmin) / static_cast<double>(grid.nz);
    const double volume = dx * dy * dz;

    ImplicitSystem sys;
    sys.nx = grid.nx;
    sys.ny = grid.ny;
    sys.nz = grid.nz;
    sys.n = n;
    sys.tx.assign(n, 0.0);
    sys.ty.assign(n, 0.0);
    sys.tz.assign(n, 0.0);
    const std::span<const double> kx = perm.subspan(0, n);
    const std::span<const double> ky = perm.subspan(n, n);
    const std::span<const double> kz = perm.subspan(2 * n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t xi = c % grid.nx;
        const std::size_t yi = (c / grid.nx) % grid.ny;
        const std::size_t zi = c / (grid.nx * grid.ny);
        if (xi + 1 < grid.nx) sys.tx[c] = dy * dz / dx * harmonic_mean(kx[c], kx[c + 1]);
        if (yi + 1 < grid.ny) sys.ty[c] = dx * dz / dy * harmonic_mean(ky[c], ky[c + grid.nx]);
        if (zi + 1 < grid.nz) {
            sys.tz[c] = dx * dy / dz * harmonic_mean(kz[c], kz[c + grid.nx * grid.ny]);
        }
    }
    sys.diag.assign(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t xi = c % grid.nx;
        const std::size_t yi = (c / grid.nx) % grid.ny;
        const std::size_t zi = c / (grid.nx * grid.ny);
        double acc = porosity[c] * volume / dt;
        if (xi > 0) acc += sys.tx[c - 1];
        if (xi + 1 < grid.nx) acc += sys.tx[c];
        if (yi > 0) acc += sys.ty[c - grid.nx];
        if (yi + 1 < grid.ny) acc += sys.ty[c];
        if (zi > 0) acc += sys.tz[c - grid.nx * grid.ny];
        if (zi + 1 < grid.nz) acc += sys.tz[c];
        sys.diag[c] = acc;
    }

    const std::size_t cap =
        options.cg_max_iter != 0 ? options.cg_max_iter : std::max<std::size_t>(1000, 20 * n);
    const std::size_t wc = cell_index(grid, well[0], well[1], well[2]);
    std::vector<double> u(n, 0.0), b(n);
    for (std::size_t k = 0; k + 1 < grid.nt; ++k) {
        const double t_start = static_cast<double>(k) * dt;
        for (std::size_t c = 0; c < n; ++c) {
            b[c] = porosity[c] * volume / dt * u[c];
        }
        if (t_start < duration) {
            b[wc] += rate;
        }
        cg_solve(sys, b, u, options.cg_tol, cap);
        std::copy(u.begin(), u.end(), states.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    }
    return states;
}

std::vector<SampleRecord> build_dataset(std::size_t n_samples, const DatasetSpec& spec,
                                        Rng& rng) {
    if (n_samples == 0) {
        throw ConfigError("build_dataset requires n_samples >= 1");
    }
    validate_field_spec(spec.fields);
    if (!(spec.rate_min <= spec.rate_max) || !std::isfinite(spec.rate_min) ||
        !std::isfinite(spec.rate_max)) {
        throw ConfigError("injection rate range must be finite with min <= max");
    }
    if (!(spec.duration_min >= 0.0) || !(spec.duration_min <= spec.duration_max) ||
        !std::isfinite(spec.duration_max)) {
        throw ConfigError("injection duration range must be non-negative with min <= max");
    }
    const GridSpec& grid = spec.fields.grid;
    if (grid.nx < 3 || grid.ny < 3 || grid.nz < 3) {
        throw ConfigError("interior well placement needs at least 3 cells per axis");
    }

    const std::uint64_t base = rng.raw();
    std::vector<SampleRecord> records;
    records.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng stream(mix_seed(base, i));
        SampleRecord record;
        record.grid = grid;
        Fields fields = generate_fields(spec.fields, stream);
        record.porosity = std::move(fields.porosity);
        record.perm = std::move(fields.perm);
        record.rate = stream.uniform(spec.rate_min, spec.rate_max);
        record.duration = stream.uniform(spec.duration_min, spec.duration_max);
        record.well = {1 + stream.below(grid.nx - 2), 1 + stream.below(grid.ny - 2),
                       1 + stream.below(grid.nz - 2)};
        try {
            record.states = solve_diffusion(grid, record.porosity, record.perm, record.well,
                                            record.rate, record.duration, spec.solver);
        } catch (const SolverError& err) {
            throw SolverError("sample " + std::to_string(i) + ": " + err.what());
        }
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace sno
