#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sno/dataio.hpp"
#include "sno/errors.hpp"
#include "sno/fom.hpp"
#include "sno/metrics.hpp"
#include "sno/model.hpp"
#include "sno/optim.hpp"
#include "sno/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sno;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL; // "split"

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open JSON file: " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& err) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + err.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& err) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type: " +
                          err.what());
    }
}

/// The full run configuration with library-default constants.
struct RunConfig {
    FieldSpec fields;
    DatasetSpec data;
    std::size_t n_samples = 100;
    ModelConfig model;
    TrainConfig train;
    double test_fraction = 0.1;
};

RunConfig parse_config(const json& j) {
    RunConfig cfg;

    const json fields = j.contains("fields") ? j.at("fields") : json::object();
    if (fields.contains("grid")) {
        const json& g = fields.at("grid");
        cfg.fields.grid.nx = get_or<std::size_t>(g, "nx", 32);
        cfg.fields.grid.ny = get_or<std::size_t>(g, "ny", 32);
        cfg.fields.grid.nz = get_or<std::size_t>(g, "nz", 8);
        cfg.fields.grid.nt = get_or<std::size_t>(g, "nt", 10);
        cfg.fields.grid.xmin = get_or<double>(g, "xmin", 0.0);
        cfg.fields.grid.xmax = get_or<double>(g, "xmax", 1.0);
        cfg.fields.grid.ymin = get_or<double>(g, "ymin", 0.0);
        cfg.fields.grid.ymax = get_or<double>(g, "ymax", 1.0);
        cfg.fields.grid.zmin = get_or<double>(g, "zmin", 0.0);
        cfg.fields.grid.zmax = get_or<double>(g, "zmax", 1.0);
        cfg.fields.grid.t_end = get_or<double>(g, "t_end", 1.0);
    } else {
        cfg.fields.grid = GridSpec{32, 32, 8, 10, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0};
    }
    cfg.fields.porosity_min = get_or<double>(fields, "porosity_min", 0.1);
    cfg.fields.porosity_max = get_or<double>(fields, "porosity_max", 0.3);
    cfg.fields.logk_mean = get_or<double>(fields, "logk_mean", 0.0);
    cfg.fields.logk_std = get_or<double>(fields, "logk_std", 0.5);
    cfg.fields.correlation_cells = get_or<std::size_t>(fields, "correlation_cells", 2);
    cfg.fields.seed = get_or<std::uint64_t>(fields, "seed", 1234);

    const json data = j.contains("data") ? j.at("data") : json::object();
    cfg.data.fields = cfg.fields;
    cfg.n_samples = get_or<std::size_t>(data, "n_samples", 100);
    cfg.data.rate_min = get_or<double>(data, "rate_min", 0.5);
    cfg.data.rate_max = get_or<double>(data, "rate_max", 1.5);
    cfg.data.duration_min = get_or<double>(data, "duration_min", 0.5);
    cfg.data.duration_max = get_or<double>(data, "duration_max", 1.0);
    cfg.data.solver.cg_tol = get_or<double>(data, "cg_tol", 1e-10);
    cfg.data.solver.cg_max_iter = get_or<std::size_t>(data, "cg_max_iter", 0);

    const json model = j.contains("model") ? j.at("model") : json::object();
    const std::size_t p = get_or<std::size_t>(model, "p", 250);
    cfg.model = ModelConfig::defaults(p);
    if (model.contains("embedder_width")) {
        const std::size_t w = model.at("embedder_width").get<std::size_t>();
        cfg.model.te_dims = {4, w, w, w, w, p};
        cfg.model.hepe_dims = {4, w, w, w, w, p};
    }
    if (model.contains("hope_width")) {
        const std::size_t w = model.at("hope_width").get<std::size_t>();
        cfg.model.hope_dims = {2, w, w, w, p};
    }
    if (model.contains("te_dims")) {
        cfg.model.te_dims = model.at("te_dims").get<std::vector<std::size_t>>();
    }
    if (model.contains("hepe_dims")) {
        cfg.model.hepe_dims = model.at("hepe_dims").get<std::vector<std::size_t>>();
    }
    if (model.contains("hope_dims")) {
        cfg.model.hope_dims = model.at("hope_dims").get<std::vector<std::size_t>>();
    }
    cfg.model.dropout_rate = get_or<double>(model, "dropout_rate", 0.3);
    cfg.model.leaky_slope = get_or<double>(model, "leaky_slope", 0.2);
    cfg.model.seed = get_or<std::uint64_t>(model, "seed", 1);

    const json train = j.contains("train") ? j.at("train") : json::object();
    cfg.train.n_sub = get_or<std::size_t>(train, "n_sub", 4096);
    cfg.train.eta_min = get_or<double>(train, "eta_min", 1e-16);
    cfg.train.outer.steps = get_or<std::size_t>(train, "outer_steps", 2000);
    cfg.train.outer.eta_max = get_or<double>(train, "outer_eta_max", 1e-4);
    cfg.train.inner.steps = get_or<std::size_t>(train, "inner_steps", 2000);
    cfg.train.inner.eta_max = get_or<double>(train, "inner_eta_max", 1e-5);
    cfg.train.seed = get_or<std::uint64_t>(train, "seed", 0);
    cfg.test_fraction = get_or<double>(train, "test_fraction", 0.1);
    if (!(cfg.test_fraction >= 0.0) || !(cfg.test_fraction < 1.0)) {
        throw ConfigError("train.test_fraction must lie in [0, 1)");
    }
    return cfg;
}

/// FNV-1a over the canonical dump of the generation-relevant sections.
std::string spec_hash(const RunConfig& cfg) {
    const json j = {{"grid",
                     {{"nx", cfg.fields.grid.nx},
                      {"ny", cfg.fields.grid.ny},
                      {"nz", cfg.fields.grid.nz},
                      {"nt", cfg.fields.grid.nt},
                      {"xmin", cfg.fields.grid.xmin},
                      {"xmax", cfg.fields.grid.xmax},
                      {"ymin", cfg.fields.grid.ymin},
                      {"ymax", cfg.fields.grid.ymax},
                      {"zmin", cfg.fields.grid.zmin},
                      {"zmax", cfg.fields.grid.zmax},
                      {"t_end", cfg.fields.grid.t_end}}},
                    {"porosity_min", cfg.fields.porosity_min},
                    {"porosity_max", cfg.fields.porosity_max},
                    {"logk_mean", cfg.fields.logk_mean},
                    {"logk_std", cfg.fields.logk_std},
                    {"correlation_cells", cfg.fields.correlation_cells},
                    {"seed", cfg.fields.seed},
                    {"n_samples", cfg.n_samples},
                    {"rate_min", cfg.data.rate_min},
                    {"rate_max", cfg.data.rate_max},
                    {"duration_min", cfg.data.duration_min},
                    {"duration_max", cfg.data.duration_max}};
    const std::string dump = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : dump) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Manifest {
    std::vector<std::string> files;
    std::uint64_t seed = 0;
    std::string hash;
};

Manifest read_manifest(const fs::path& data_dir) {
    const fs::path path = data_dir / "manifest.json";
    const json j = load_json_file(path);
    Manifest manifest;
    try {
        manifest.files = j.at("files").get<std::vector<std::string>>();
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.hash = j.at("spec_hash").get<std::string>();
    } catch (const json::exception& err) {
        throw ConfigError("malformed manifest " + path.string() + ": " + err.what());
    }
    if (manifest.files.empty()) {
        throw ConfigError("manifest lists no sample files: " + path.string());
    }
    return manifest;
}

int cmd_gen_data(const fs::path& config_path, const fs::path& out_dir,
                 std::optional<std::size_t> samples_flag,
                 std::optional<std::uint64_t> seed_flag) {
    RunConfig cfg = parse_config(load_json_file(config_path));
    if (samples_flag) cfg.n_samples = *samples_flag;
    if (seed_flag) cfg.fields.seed = *seed_flag;
    cfg.data.fields = cfg.fields;
    if (cfg.n_samples == 0) {
        throw ConfigError("sample count must be at least 1");
    }

    fs::create_directories(out_dir);
    Rng rng(cfg.fields.seed);
    const std::vector<SampleRecord> records = build_dataset(cfg.n_samples, cfg.data, rng);

    std::vector<std::string> files;
    files.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "sample_%04zu.snod", i);
        write_sample(out_dir / name, records[i]);
        files.emplace_back(name);
    }

    const json manifest = {{"kind", "manifest"},
                           {"n_samples", records.size()},
                           {"seed", cfg.fields.seed},
                           {"spec_hash", spec_hash(cfg)},
                           {"files", files}};
    std::ofstream out(out_dir / "manifest.json");
    if (!out || !(out << manifest.dump(2) << '\n').flush()) {
        throw ConfigError("cannot write manifest to " + (out_dir / "manifest.json").string());
    }
    std::cout << "wrote " << records.size() << " samples to " << out_dir.string() << "\n";
    return kExitOk;
}

struct Split {
    std::vector<std::string> train_files, test_files;
};

Split split_files(const std::vector<std::string>& files, double test_fraction,
                  std::uint64_t seed) {
    std::vector<std::size_t> order(files.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, kSplitStream));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    std::size_t n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(files.size()) * test_fraction + 0.5));
    n_test = std::min(n_test, files.size() - 1);

    std::vector<std::size_t> test_idx(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                                       order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    Split split;
    for (const std::size_t i : train_idx) split.train_files.push_back(files[i]);
    for (const std::size_t i : test_idx) split.test_files.push_back(files[i]);
    return split;
}

std::vector<SampleRecord> load_records(const fs::path& data_dir,
                                       const std::vector<std::string>& files) {
    std::vector<SampleRecord> records;
    records.reserve(files.size());
    for (const std::string& name : files) {
        records.push_back(read_sample(data_dir / name));
    }
    return records;
}

int cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out_dir) {
    const RunConfig cfg = parse_config(load_json_file(config_path));
    const Manifest manifest = read_manifest(data_dir);
    const Split split = split_files(manifest.files, cfg.test_fraction, cfg.train.seed);
    const std::vector<SampleRecord> train_set = load_records(data_dir, split.train_files);

    Model model = build_model(cfg.model);
    std::cout << "model parameters: " << count_params(model) << "\n";
    std::cout << "model macs per query: " << count_macs(model) << "\n";
    std::cout << "training samples: " << train_set.size()
              << ", test samples: " << split.test_files.size() << "\n";

    const Normalizer normalizer = fit_normalizer(train_set);
    OptimState optim = init_optim_state(model);
    const std::vector<LossRecord> history =
        run_training(model, optim, train_set, normalizer, cfg.train);

    fs::create_directories(out_dir);
    write_loss_csv((out_dir / "loss.csv").string(), history);

    Checkpoint checkpoint;
    checkpoint.model = std::move(model);
    checkpoint.optim = std::move(optim);
    checkpoint.normalizer = normalizer;
    checkpoint.train = cfg.train;
    checkpoint.step = cfg.train.outer.steps + cfg.train.inner.steps;
    checkpoint.train_files = split.train_files;
    checkpoint.test_files = split.test_files;
    save_checkpoint(out_dir / "checkpoint.snoc", checkpoint);

    if (!history.empty()) {
        std::cout << "final subsample mse: " << fmt(history.back().mse) << "\n";
    }
    std::cout << "wrote checkpoint: " << (out_dir / "checkpoint.snoc").string() << "\n";
    std::cout << "wrote loss history: " << (out_dir / "loss.csv").string() << "\n";
    return kExitOk;
}

/// Full-grid eval-mode predictions in physical units, shaped nt x ncells,
/// assembled in batches of batch_size points.
Matrix predict_full_grid(const Model& model, const Normalizer& normalizer,
                         const SampleRecord& record, std::size_t batch_size) {
    const GridSpec& grid = record.grid;
    const std::size_t ncells = num_cells(grid);
    const SubsampleIndices all = all_indices(grid);
    Matrix shat(grid.nt, ncells);
    for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, all.size());
        const SubsampleIndices chunk(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                     all.begin() + static_cast<std::ptrdiff_t>(end));
        const QueryBatch batch = gather_batch(record, chunk, normalizer);
        const Matrix pred = predict(model, batch);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const GridIndex& idx = chunk[i];
            shat(idx.ti, cell_index(grid, idx.xi, idx.yi, idx.zi)) =
                normalizer.denormalize_target(pred(i, 0));
        }
    }
    return shat;
}

json report_entry(const MetricsReport& metrics, double mean_abs_s) {
    return {{"rmse", metrics.rmse},
            {"mae", metrics.mae},
            {"max_mae", metrics.max_mae},
            {"max_mae_series", metrics.max_mae_series},
            {"n_points", metrics.n_points},
            {"n_timestamps", metrics.n_timestamps},
            {"mean_abs_s", mean_abs_s},
            {"relative_error", mean_abs_s > 0.0 ? metrics.rmse / mean_abs_s : 0.0}};
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& data_dir, const fs::path& report_path,
             const std::string& split_name, std::size_t points, std::uint64_t seed,
             const std::optional<fs::path>& difference_dir, std::size_t batch_size) {
    const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    const std::vector<std::string>& files =
        split_name == "train" ? checkpoint.train_files : checkpoint.test_files;
    if (files.empty()) {
        throw ConfigError("checkpoint lists no files for split '" + split_name + "'");
    }
    if (difference_dir) {
        fs::create_directories(*difference_dir);
    }

    json per_sample = json::array();
    double total_sq = 0.0, total_abs_err = 0.0, total_abs_s = 0.0;
    std::size_t total_n = 0;

    for (std::size_t fi = 0; fi < files.size(); ++fi) {
        const SampleRecord record = read_sample(data_dir / files[fi]);
        const GridSpec& grid = record.grid;
        const std::size_t ncells = num_cells(grid);

        Matrix s, shat;
        if (points == 0) {
            s = Matrix(grid.nt, ncells);
            std::copy(record.states.begin(), record.states.end(), s.view().begin());
            shat = predict_full_grid(checkpoint.model, checkpoint.normalizer, record, batch_size);
        } else {
            Rng rng(mix_seed(seed, fi));
            const SubsampleIndices indices = subsample(grid, points, rng);
            const QueryBatch batch = gather_batch(record, indices, checkpoint.normalizer);
            const Matrix pred = predict(checkpoint.model, batch);
            s = Matrix(1, points);
            shat = Matrix(1, points);
            for (std::size_t i = 0; i < points; ++i) {
                const GridIndex& idx = indices[i];
                s(0, i) = record.states[idx.ti * ncells + cell_index(grid, idx.xi, idx.yi, idx.zi)];
                shat(0, i) = checkpoint.normalizer.denormalize_target(pred(i, 0));
            }
        }

        const MetricsReport metrics = compute_metrics(s, shat);
        double abs_s = 0.0, abs_err = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            abs_s += std::abs(s.data()[i]);
            const double r = s.data()[i] - shat.data()[i];
            abs_err += std::abs(r);
            total_sq += r * r;
        }
        total_abs_err += abs_err;
        total_abs_s += abs_s;
        total_n += s.size();

        json entry = report_entry(metrics, abs_s / static_cast<double>(s.size()));
        entry["file"] = files[fi];
        per_sample.push_back(std::move(entry));

        if (difference_dir && points == 0) {
            Matrix diffs(grid.nt, ncells);
            for (std::size_t t = 0; t < grid.nt; ++t) {
                const std::vector<double> d = pointwise_difference(
                    std::span<const double>(s.row(t), ncells),
                    std::span<const double>(shat.row(t), ncells));
                std::copy(d.begin(), d.end(), diffs.row(t));
            }
            write_difference_field(*difference_dir / ("diff_" + files[fi]), grid, diffs);
        }
    }

    const double agg_rmse = std::sqrt(total_sq / static_cast<double>(total_n));
    const double agg_mean_abs = total_abs_s / static_cast<double>(total_n);
    const json report = {
        {"split", split_name},
        {"relative_error_formula", "rmse / mean(|S|)"},
        {"samples", std::move(per_sample)},
        {"aggregate",
         {{"rmse", agg_rmse},
          {"mae", total_abs_err / static_cast<double>(total_n)},
          {"mean_abs_s", agg_mean_abs},
          {"relative_error", agg_mean_abs > 0.0 ? agg_rmse / agg_mean_abs : 0.0},
          {"n_points", total_n}}}};

    std::ofstream out(report_path);
    if (!out || !(out << report.dump(2) << '\n').flush()) {
        throw ConfigError("cannot write report to " + report_path.string());
    }
    std::cout << "aggregate rmse: " << fmt(agg_rmse) << "\n";
    std::cout << "aggregate relative error: "
              << fmt(agg_mean_abs > 0.0 ? agg_rmse / agg_mean_abs : 0.0) << "\n";
    std::cout << "wrote report: " << report_path.string() << "\n";
    return kExitOk;
}

struct PointRow {
    std::string raw;
    bool parsed = false;
    bool in_extent = false;
    double t = 0, x = 0, y = 0, z = 0;
};

bool parse_point_row(const std::string& line, PointRow& row) {
    double vals[4];
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
        const std::size_t next = k == 3 ? line.size() : line.find(',', pos);
        if (next == std::string::npos) return false;
        try {
            std::size_t used = 0;
            vals[k] = std::stod(line.substr(pos, next - pos), &used);
            std::string rest = line.substr(pos, next - pos);
            rest.erase(0, used);
            if (rest.find_first_not_of(" \t") != std::string::npos) return false;
        } catch (const std::exception&) {
            return false;
        }
        pos = next + 1;
    }
    row.t = vals[0];
    row.x = vals[1];
    row.y = vals[2];
    row.z = vals[3];
    return true;
}

int cmd_infer(const fs::path& checkpoint_path, const fs::path& sample_path,
              const fs::path& points_path, const fs::path& out_path, std::size_t batch_size) {
    const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    const SampleRecord record = read_sample(sample_path);
    const GridSpec& grid = record.grid;
    const std::size_t ncells = num_cells(grid);
    const Normalizer& normalizer = checkpoint.normalizer;

    std::ifstream in(points_path);
    if (!in) {
        throw ConfigError("cannot open points file: " + points_path.string());
    }
    std::ofstream out(out_path);
    if (!out) {
        throw ConfigError("cannot open output file: " + out_path.string());
    }

    std::string header;
    if (!std::getline(in, header)) {
        throw ConfigError("points file is empty: " + points_path.string());
    }
    std::string canon = header;
    canon.erase(std::remove_if(canon.begin(), canon.end(),
                               [](char c) { return c == ' ' || c == '\t' || c == '\r'; }),
                canon.end());
    if (canon != "t,x,y,z") {
        throw ConfigError("points file must start with header 't,x,y,z', found '" + header + "'");
    }
    out << "t,x,y,z,prediction,status\n";

    const double dx = (grid.xmax - grid.xmin) / static_cast<double>(grid.nx);
    const double dy = (grid.ymax - grid.ymin) / static_cast<double>(grid.ny);
    const double dz = (grid.zmax - grid.zmin) / static_cast<double>(grid.nz);
    const auto nearest = [](double v, double lo, double step, std::size_t count) {
        const double raw = std::floor((v - lo) / step);
        if (raw < 0.0) return std::size_t{0};
        const std::size_t i = static_cast<std::size_t>(raw);
        return std::min(i, count - 1);
    };

    const double rate_n = normalizer.normalize(Feature::kRate, record.rate);
    const double duration_n = normalizer.normalize(Feature::kDuration, record.duration);

    std::vector<PointRow> rows;
    rows.reserve(batch_size);
    std::size_t n_ok = 0, n_rows = 0;
    bool done = false;
    while (!done) {
        rows.clear();
        std::string line;
        while (rows.size() < batch_size) {
            if (!std::getline(in, line)) {
                done = true;
                break;
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            PointRow row;
            row.raw = line;
            row.parsed = parse_point_row(line, row);
            if (row.parsed) {
                row.in_extent = row.t >= 0.0 && row.t <= grid.t_end && row.x >= grid.xmin &&
                                row.x <= grid.xmax && row.y >= grid.ymin && row.y <= grid.ymax &&
                                row.z >= grid.zmin && row.z <= grid.zmax;
            }
            rows.push_back(std::move(row));
        }
        if (rows.empty()) continue;
        n_rows += rows.size();

        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].parsed && rows[i].in_extent) live.push_back(i);
        }

        Matrix pred;
        if (!live.empty()) {
            QueryBatch batch;
            batch.topo = Matrix(live.size(), 4);
            batch.hetero = Matrix(live.size(), 4);
            batch.homo = Matrix(live.size(), 2);
            for (std::size_t k = 0; k < live.size(); ++k) {
                const PointRow& row = rows[live[k]];
                batch.topo(k, 0) = normalizer.normalize(Feature::kT, row.t);
                batch.topo(k, 1) = normalizer.normalize(Feature::kX, row.x);
                batch.topo(k, 2) = normalizer.normalize(Feature::kY, row.y);
                batch.topo(k, 3) = normalizer.normalize(Feature::kZ, row.z);
                const std::size_t xi = nearest(row.x, grid.xmin, dx, grid.nx);
                const std::size_t yi = nearest(row.y, grid.ymin, dy, grid.ny);
                const std::size_t zi = nearest(row.z, grid.zmin, dz, grid.nz);
                const std::size_t c = cell_index(grid, xi, yi, zi);
                batch.hetero(k, 0) = normalizer.normalize(Feature::kPorosity, record.porosity[c]);
                batch.hetero(k, 1) =
                    normalizer.normalize(Feature::kLogKx, std::log(record.perm[c]));
                batch.hetero(k, 2) =
                    normalizer.normalize(Feature::kLogKy, std::log(record.perm[ncells + c]));
                batch.hetero(k, 3) =
                    normalizer.normalize(Feature::kLogKz, std::log(record.perm[2 * ncells + c]));
                batch.homo(k, 0) = rate_n;
                batch.homo(k, 1) = duration_n;
            }
            pred = predict(checkpoint.model, batch);
        }

        std::size_t next_live = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const PointRow& row = rows[i];
            if (!row.parsed) {
                out << row.raw << ",,parse_error\n";
            } else if (!row.in_extent) {
                out << fmt(row.t) << ',' << fmt(row.x) << ',' << fmt(row.y) << ',' << fmt(row.z)
                    << ",,out_of_extent\n";
            } else {
                const double value =
                    normalizer.denormalize_target(pred(next_live++, 0));
                out << fmt(row.t) << ',' << fmt(row.x) << ',' << fmt(row.y) << ',' << fmt(row.z)
                    << ',' << fmt(value) << ",ok\n";
                ++n_ok;
            }
        }
    }
    if (!out.flush()) {
        throw ConfigError("failed writing predictions to " + out_path.string());
    }
    if (n_rows == 0) {
        throw ConfigError("points file has no data rows: " + points_path.string());
    }
    std::cout << "predicted " << n_ok << " of " << n_rows << " points\n";
    return n_ok == 0 ? kExitConfig : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural-operator surrogate toolkit: synthetic data generation, training, "
                 "evaluation, and point inference"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint_path, report_path, sample_path;
    std::string points_csv, out_csv, split_name = "test", difference_dir;
    std::size_t samples_flag = 0, points_count = 0, batch_size = 8192;
    std::uint64_t seed_flag = 0, eval_seed = 0;

    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen->add_option("--config", config_path, "Run configuration JSON")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    CLI::Option* samples_opt =
        gen->add_option("--samples", samples_flag, "Override the configured sample count");
    CLI::Option* seed_opt =
        gen->add_option("--seed", seed_flag, "Override the configured generation seed");

    CLI::App* train = app.add_subcommand("train", "Train a model on a generated dataset");
    train->add_option("--config", config_path, "Run configuration JSON")->required();
    train->add_option("--data", data_dir, "Dataset directory with manifest.json")->required();
    train->add_option("--out", out_dir, "Output directory for checkpoint and loss history")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--data", data_dir, "Dataset directory")->required();
    eval->add_option("--report", report_path, "Metrics report JSON output path")->required();
    eval->add_option("--split", split_name, "Split to evaluate: test or train")
        ->check(CLI::IsMember({"test", "train"}));
    eval->add_option("--points", points_count,
                     "Evaluate this many random points per sample instead of the full grid");
    eval->add_option("--seed", eval_seed, "Seed for --points sampling");
    eval->add_option("--difference", difference_dir,
                     "Directory for per-sample pointwise-difference fields");
    eval->add_option("--batch", batch_size, "Evaluation batch size");

    CLI::App* infer = app.add_subcommand("infer", "Predict at arbitrary points of one sample");
    infer->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    infer->add_option("--sample", sample_path, "Sample file supplying fields and scalars")
        ->required();
    infer->add_option("--points", points_csv, "Input CSV with header t,x,y,z")->required();
    infer->add_option("--out", out_csv, "Output CSV path")->required();
    infer->add_option("--batch", batch_size, "Internal batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_data(config_path, out_dir,
                                samples_opt->count() > 0
                                    ? std::optional<std::size_t>(samples_flag)
                                    : std::nullopt,
                                seed_opt->count() > 0 ? std::optional<std::uint64_t>(seed_flag)
                                                      : std::nullopt);
        }
        if (train->parsed()) {
            return cmd_train(config_path, data_dir, out_dir);
        }
        if (eval->parsed()) {
            return cmd_eval(checkpoint_path, data_dir, report_path, split_name, points_count,
                            eval_seed,
                            difference_dir.empty()
                                ? std::nullopt
                                : std::optional<fs::path>(difference_dir),
                            batch_size);
        }
        if (infer->parsed()) {
            return cmd_infer(checkpoint_path, sample_path, points_csv, out_csv, batch_size);
        }
    } catch (const DivergenceError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitDivergence;
    } catch (const SolverError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitDivergence;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
