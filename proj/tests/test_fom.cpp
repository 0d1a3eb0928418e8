#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "sno/errors.hpp"
#include "sno/fom.hpp"
#include "sno/rng.hpp"
#include "sno/sampler.hpp"

using namespace sno;

namespace {

GridSpec make_grid(std::size_t nx, std::size_t ny, std::size_t nz, std::size_t nt) {
    GridSpec grid;
    grid.nx = nx;
    grid.ny = ny;
    grid.nz = nz;
    grid.nt = nt;
    return grid;
}

std::vector<double> random_field(std::size_t n, Rng& rng) {
    std::vector<double> field(n);
    for (double& v : field) v = rng.uniform(-2.0, 2.0);
    return field;
}

/// Naive clamped-window mean along one axis, for checking box_smooth.
std::vector<double> naive_axis_smooth(const GridSpec& g, const std::vector<double>& field,
                                      std::size_t radius, int axis) {
    std::vector<double> out(field.size());
    const std::array<std::size_t, 3> dims = {g.nx, g.ny, g.nz};
    for (std::size_t zi = 0; zi < g.nz; ++zi) {
        for (std::size_t yi = 0; yi < g.ny; ++yi) {
            for (std::size_t xi = 0; xi < g.nx; ++xi) {
                std::array<std::size_t, 3> idx = {xi, yi, zi};
                const std::size_t pos = idx[static_cast<std::size_t>(axis)];
                const std::size_t len = dims[static_cast<std::size_t>(axis)];
                const std::size_t lo = pos >= radius ? pos - radius : 0;
                const std::size_t hi = std::min(pos + radius, len - 1);
                double acc = 0.0;
                for (std::size_t k = lo; k <= hi; ++k) {
                    std::array<std::size_t, 3> probe = idx;
                    probe[static_cast<std::size_t>(axis)] = k;
                    acc += field[cell_index(g, probe[0], probe[1], probe[2])];
                }
                out[cell_index(g, xi, yi, zi)] = acc / static_cast<double>(hi - lo + 1);
            }
        }
    }
    return out;
}

double total_content(const GridSpec& g, const std::vector<double>& porosity,
                     const std::vector<double>& states, std::size_t snapshot) {
    const std::size_t n = num_cells(g);
    const double volume = (g.xmax - g.xmin) / static_cast<double>(g.nx) *
                          (g.ymax - g.ymin) / static_cast<double>(g.ny) *
                          (g.zmax - g.zmin) / static_cast<double>(g.nz);
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += porosity[c] * states[snapshot * n + c];
    return acc * volume;
}

} // namespace

TEST_CASE("zero logk_std produces exactly constant permeability") {
    FieldSpec spec;
    spec.grid = make_grid(6, 5, 4, 2);
    spec.logk_mean = 0.7;
    spec.logk_std = 0.0;
    Rng rng(42);
    const Fields fields = generate_fields(spec, rng);
    const double want = std::exp(0.7);
    for (const double k : fields.perm) CHECK(k == want);
}

TEST_CASE("box smoothing with radius zero is the identity") {
    const GridSpec grid = make_grid(5, 4, 3, 2);
    Rng rng(7);
    const std::vector<double> field = random_field(num_cells(grid), rng);
    CHECK(box_smooth(grid, field, 0) == field);
}

TEST_CASE("box smoothing matches a naive separable filter") {
    const GridSpec grid = make_grid(5, 4, 3, 2);
    Rng rng(11);
    const std::vector<double> field = random_field(num_cells(grid), rng);
    for (const std::size_t radius : {1u, 2u, 10u}) {
        std::vector<double> want = naive_axis_smooth(grid, field, radius, 0);
        want = naive_axis_smooth(grid, want, radius, 1);
        want = naive_axis_smooth(grid, want, radius, 2);
        const std::vector<double> got = box_smooth(grid, field, radius);
        REQUIRE(got.size() == want.size());
        for (std::size_t c = 0; c < got.size(); ++c) {
            CHECK(std::abs(got[c] - want[c]) < 1e-12);
        }
    }
}

TEST_CASE("box smoothing preserves a constant field") {
    const GridSpec grid = make_grid(6, 6, 3, 2);
    const std::vector<double> field(num_cells(grid), 0.37);
    const std::vector<double> smoothed = box_smooth(grid, field, 2);
    for (const double v : smoothed) CHECK(v == doctest::Approx(0.37).epsilon(1e-13));
}

TEST_CASE("box smoothing rejects a field of the wrong size") {
    const GridSpec grid = make_grid(4, 4, 4, 2);
    CHECK_THROWS_AS(box_smooth(grid, std::vector<double>(10, 0.0), 1), DimensionError);
}

TEST_CASE("generated porosity spans exactly the configured range") {
    FieldSpec spec;
    spec.grid = make_grid(25, 20, 20, 2); // 10^4 cells
    spec.porosity_min = 0.05;
    spec.porosity_max = 0.35;
    Rng rng(2025);
    const Fields fields = generate_fields(spec, rng);
    REQUIRE(fields.porosity.size() == 10000);
    const auto [lo, hi] = std::minmax_element(fields.porosity.begin(), fields.porosity.end());
    CHECK(*lo == 0.05);
    CHECK(*hi == 0.35);
    for (const double p : fields.porosity) {
        CHECK(p >= 0.05);
        CHECK(p <= 0.35);
    }
    for (const double k : fields.perm) CHECK(k > 0.0);
}

TEST_CASE("no smoothing means the fields are the mapped raw noise") {
    FieldSpec spec;
    spec.grid = make_grid(5, 4, 3, 2);
    spec.porosity_min = 0.1;
    spec.porosity_max = 0.3;
    spec.logk_mean = -0.25;
    spec.logk_std = 0.6;
    spec.correlation_cells = 0;
    const std::size_t n = num_cells(spec.grid);

    Rng gen_rng(909);
    const Fields fields = generate_fields(spec, gen_rng);

    Rng replay(909);
    std::vector<double> noise(n);
    for (double& v : noise) v = replay.normal();
    const auto [lo_it, hi_it] = std::minmax_element(noise.begin(), noise.end());
    for (std::size_t c = 0; c < n; ++c) {
        const double u = (noise[c] - *lo_it) / (*hi_it - *lo_it);
        const double want = std::clamp(0.1 + u * (0.3 - 0.1), 0.1, 0.3);
        CHECK(fields.porosity[c] == want);
    }
    for (std::size_t axis = 0; axis < 3; ++axis) {
        for (double& v : noise) v = replay.normal();
        for (std::size_t c = 0; c < n; ++c) {
            CHECK(fields.perm[axis * n + c] == std::exp(-0.25 + 0.6 * noise[c]));
        }
    }
}

TEST_CASE("field generation validates its spec") {
    FieldSpec spec;
    spec.grid = make_grid(4, 4, 4, 2);
    Rng rng(1);
    spec.porosity_min = 0.0;
    CHECK_THROWS_AS(generate_fields(spec, rng), ConfigError);
    spec.porosity_min = 0.4;
    spec.porosity_max = 0.2;
    CHECK_THROWS_AS(generate_fields(spec, rng), ConfigError);
    spec.porosity_max = 1.2;
    CHECK_THROWS_AS(generate_fields(spec, rng), ConfigError);
    spec.porosity_min = 0.1;
    spec.porosity_max = 0.3;
    spec.logk_std = -1.0;
    CHECK_THROWS_AS(generate_fields(spec, rng), ConfigError);
}

TEST_CASE("zero injection keeps the state identically zero") {
    const GridSpec grid = make_grid(5, 5, 3, 4);
    FieldSpec field_spec;
    field_spec.grid = grid;
    Rng rng(3);
    const Fields fields = generate_fields(field_spec, rng);
    const std::vector<double> states =
        solve_diffusion(grid, fields.porosity, fields.perm, {2, 2, 1}, 0.0, 1.0);
    REQUIRE(states.size() == grid.nt * num_cells(grid));
    for (const double u : states) CHECK(u == 0.0);
}

TEST_CASE("homogeneous runs with mirrored wells are mirror images") {
    const GridSpec grid = make_grid(7, 5, 3, 4);
    const std::size_t n = num_cells(grid);
    const std::vector<double> porosity(n, 0.2);
    const std::vector<double> perm(3 * n, 1.5);

    const std::vector<double> a =
        solve_diffusion(grid, porosity, perm, {1, 3, 1}, 2.0, 1.0);
    const std::vector<double> b =
        solve_diffusion(grid, porosity, perm, {5, 3, 1}, 2.0, 1.0);

    for (std::size_t t = 0; t < grid.nt; ++t) {
        for (std::size_t zi = 0; zi < grid.nz; ++zi) {
            for (std::size_t yi = 0; yi < grid.ny; ++yi) {
                for (std::size_t xi = 0; xi < grid.nx; ++xi) {
                    const double ua = a[t * n + cell_index(grid, xi, yi, zi)];
                    const double ub =
                        b[t * n + cell_index(grid, grid.nx - 1 - xi, yi, zi)];
                    CHECK(std::abs(ua - ub) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("injected mass is conserved at every snapshot") {
    const GridSpec grid = make_grid(6, 5, 4, 5); // dt = 0.25
    FieldSpec field_spec;
    field_spec.grid = grid;
    field_spec.logk_std = 0.4;
    Rng rng(88);
    const Fields fields = generate_fields(field_spec, rng);

    const double rate = 1.3;
    const double duration = 0.5; // exactly two active steps
    const std::vector<double> states =
        solve_diffusion(grid, fields.porosity, fields.perm, {3, 2, 1}, rate, duration);

    const double dt = grid.t_end / static_cast<double>(grid.nt - 1);
    for (std::size_t m = 0; m < grid.nt; ++m) {
        const double t = static_cast<double>(m) * dt;
        const double expected = rate * std::min(t, duration);
        const double got = total_content(grid, fields.porosity, states, m);
        if (expected == 0.0) {
            CHECK(got == 0.0);
        } else {
            CHECK(std::abs(got - expected) <= 1e-8 * expected);
        }
    }
}

TEST_CASE("the well cell holds the domain maximum while injecting") {
    const GridSpec grid = make_grid(8, 7, 5, 6);
    FieldSpec field_spec;
    field_spec.grid = grid;
    field_spec.logk_std = 0.5;
    Rng rng(19);
    const Fields fields = generate_fields(field_spec, rng);

    const std::array<std::size_t, 3> well = {4, 3, 2};
    const std::vector<double> states =
        solve_diffusion(grid, fields.porosity, fields.perm, well, 1.0, 1.0);
    const std::size_t n = num_cells(grid);
    const std::size_t wc = cell_index(grid, well[0], well[1], well[2]);
    for (std::size_t t = 1; t < grid.nt; ++t) {
        const double at_well = states[t * n + wc];
        for (std::size_t c = 0; c < n; ++c) {
            CHECK(states[t * n + c] <= at_well);
        }
        CHECK(at_well > 0.0);
    }
}

TEST_CASE("halving the timestep moves the final state by under two percent") {
    FieldSpec field_spec;
    field_spec.grid = make_grid(10, 10, 4, 6); // dt = 0.2
    field_spec.logk_std = 0.2;
    Rng rng(555);
    const Fields fields = generate_fields(field_spec, rng);

    const std::array<std::size_t, 3> well = {5, 4, 2};
    const GridSpec coarse = field_spec.grid;
    GridSpec fine = field_spec.grid;
    fine.nt = 11; // dt = 0.1, same horizon

    const std::vector<double> uc =
        solve_diffusion(coarse, fields.porosity, fields.perm, well, 1.0, 1.0);
    const std::vector<double> uf =
        solve_diffusion(fine, fields.porosity, fields.perm, well, 1.0, 1.0);

    const std::size_t n = num_cells(coarse);
    double diff = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        const double a = uc[(coarse.nt - 1) * n + c];
        const double b = uf[(fine.nt - 1) * n + c];
        diff += (a - b) * (a - b);
        norm += b * b;
    }
    CHECK(std::sqrt(diff / norm) < 0.02);
}

TEST_CASE("solve_diffusion validates its inputs") {
    const GridSpec grid = make_grid(4, 4, 4, 3);
    const std::size_t n = num_cells(grid);
    const std::vector<double> porosity(n, 0.2);
    const std::vector<double> perm(3 * n, 1.0);

    CHECK_THROWS_AS(solve_diffusion(grid, std::vector<double>(5, 0.2), perm, {1, 1, 1}, 1.0, 1.0),
                    DimensionError);
    CHECK_THROWS_AS(solve_diffusion(grid, porosity, perm, {4, 1, 1}, 1.0, 1.0), RangeError);
    CHECK_THROWS_AS(solve_diffusion(grid, porosity, perm, {1, 1, 1}, 1.0, -0.5), ConfigError);
    SolverOptions bad_tol;
    bad_tol.cg_tol = 0.0;
    CHECK_THROWS_AS(solve_diffusion(grid, porosity, perm, {1, 1, 1}, 1.0, 1.0, bad_tol),
                    ConfigError);
}

TEST_CASE("an exhausted iteration cap raises a solver error with the residual") {
    const GridSpec grid = make_grid(8, 8, 4, 3);
    FieldSpec field_spec;
    field_spec.grid = grid;
    field_spec.logk_std = 1.0;
    Rng rng(4);
    const Fields fields = generate_fields(field_spec, rng);
    SolverOptions options;
    options.cg_max_iter = 1;
    try {
        solve_diffusion(grid, fields.porosity, fields.perm, {4, 4, 2}, 1.0, 1.0, options);
        FAIL("expected a solver error");
    } catch (const SolverError& err) {
        CHECK(std::string(err.what()).find("residual") != std::string::npos);
    }
}

TEST_CASE("dataset generation is deterministic per seed") {
    DatasetSpec spec;
    spec.fields.grid = make_grid(6, 6, 4, 3);

    Rng rng_a(7);
    const std::vector<SampleRecord> a = build_dataset(2, spec, rng_a);
    Rng rng_b(7);
    const std::vector<SampleRecord> b = build_dataset(2, spec, rng_b);

    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].porosity == b[i].porosity);
        CHECK(a[i].perm == b[i].perm);
        CHECK(a[i].rate == b[i].rate);
        CHECK(a[i].duration == b[i].duration);
        CHECK(a[i].well == b[i].well);
        CHECK(a[i].states == b[i].states);
    }
    CHECK(a[0].porosity != a[1].porosity);
}

TEST_CASE("a generated dataset satisfies every record invariant") {
    DatasetSpec spec;
    spec.fields.grid = make_grid(8, 8, 8, 5);
    spec.rate_min = 0.5;
    spec.rate_max = 1.5;
    spec.duration_min = 0.5;
    spec.duration_max = 1.0;
    Rng rng(2026);
    const std::vector<SampleRecord> records = build_dataset(16, spec, rng);
    REQUIRE(records.size() == 16);

    const std::size_t n = num_cells(spec.fields.grid);
    for (const SampleRecord& record : records) {
        validate_record(record);
        for (const double p : record.porosity) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
        for (const double k : record.perm) CHECK(k > 0.0);
        for (const double u : record.states) CHECK(std::isfinite(u));
        for (std::size_t c = 0; c < n; ++c) CHECK(record.states[c] == 0.0);
        CHECK(record.rate >= 0.5);
        CHECK(record.rate <= 1.5);
        CHECK(record.duration >= 0.5);
        CHECK(record.duration <= 1.0);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            CHECK(record.well[axis] >= 1);
            CHECK(record.well[axis] <= 6);
        }
    }
}

TEST_CASE("dataset generation rejects bad configurations") {
    DatasetSpec spec;
    spec.fields.grid = make_grid(6, 6, 4, 3);
    Rng rng(1);
    CHECK_THROWS_AS(build_dataset(0, spec, rng), ConfigError);

    DatasetSpec tiny = spec;
    tiny.fields.grid = make_grid(2, 6, 4, 3);
    CHECK_THROWS_AS(build_dataset(1, tiny, rng), ConfigError);

    DatasetSpec bad_rate = spec;
    bad_rate.rate_min = 2.0;
    bad_rate.rate_max = 1.0;
    CHECK_THROWS_AS(build_dataset(1, bad_rate, rng), ConfigError);

    DatasetSpec bad_duration = spec;
    bad_duration.duration_min = -0.5;
    CHECK_THROWS_AS(build_dataset(1, bad_duration, rng), ConfigError);
}

TEST_CASE("solver failures during dataset generation name the sample") {
    DatasetSpec spec;
    spec.fields.grid = make_grid(6, 6, 4, 3);
    spec.solver.cg_max_iter = 1;
    Rng rng(12);
    try {
        build_dataset(1, spec, rng);
        FAIL("expected a solver error");
    } catch (const SolverError& err) {
        CHECK(std::string(err.what()).find("sample 0") != std::string::npos);
    }
}

TEST_CASE("record validation catches structural problems") {
    DatasetSpec spec;
    spec.fields.grid = make_grid(4, 4, 4, 3);
    Rng rng(5);
    const std::vector<SampleRecord> records = build_dataset(1, spec, rng);

    SampleRecord broken = records[0];
    broken.porosity.pop_back();
    CHECK_THROWS_AS(validate_record(broken), DimensionError);

    broken = records[0];
    broken.perm.resize(10);
    CHECK_THROWS_AS(validate_record(broken), DimensionError);

    broken = records[0];
    broken.states.clear();
    CHECK_THROWS_AS(validate_record(broken), DimensionError);

    broken = records[0];
    broken.well = {4, 0, 0};
    CHECK_THROWS_AS(validate_record(broken), RangeError);
}
