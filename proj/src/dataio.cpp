#include "sno/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <utility>

#include "json.hpp"
#include "sno/errors.hpp"

namespace sno {

using nlohmann::json;

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kSampleMagic[4] = {'S', 'N', 'O', 'D'};
constexpr char kCheckpointMagic[4] = {'S', 'N', 'O', 'C'};

constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "t", "x", "y", "z", "porosity", "logkx", "logky", "logkz", "rate", "duration"};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint64_t get_u64(const std::string& buf, std::size_t offset, std::size_t nbytes) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < nbytes; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
    }
    return v;
}

std::string hex_bytes(const std::string& buf, std::size_t offset, std::size_t nbytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < nbytes; ++i) {
        const unsigned char b = static_cast<unsigned char>(buf[offset + i]);
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

struct NamedArray {
    std::string name;
    std::span<const double> data;
};

void write_container(const std::filesystem::path& path, const char magic[4], json header,
                     const std::vector<NamedArray>& arrays) {
    json declared = json::array();
    std::size_t total = 0;
    for (const NamedArray& arr : arrays) {
        declared.push_back({{"name", arr.name}, {"len", arr.data.size()}});
        total += arr.data.size();
    }
    header["arrays"] = std::move(declared);
    const std::string header_str = header.dump();

    std::string blob;
    blob.reserve(16 + header_str.size() + 8 * total);
    blob.append(magic, 4);
    put_u32(blob, kFormatVersion);
    put_u64(blob, header_str.size());
    blob += header_str;
    for (const NamedArray& arr : arrays) {
        for (const double d : arr.data) put_f64(blob, d);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open file for writing: " + path.string());
    }
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out.flush()) {
        throw ConfigError("failed writing file: " + path.string());
    }
}

struct Container {
    json header;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;
};

Container read_container(const std::filesystem::path& path, const char magic[4]) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open file for reading: " + path.string());
    }
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) {
        throw FormatError("file is too short to hold a container preamble: " + path.string());
    }
    if (std::memcmp(buf.data(), magic, 4) != 0) {
        throw FormatError("bad magic in " + path.string() + ": expected " +
                          std::string(magic, 4) + ", found 0x" + hex_bytes(buf, 0, 4));
    }
    const std::uint64_t version = get_u64(buf, 4, 4);
    if (version != kFormatVersion) {
        throw FormatError("unsupported format version " + std::to_string(version) +
                          " in " + path.string() + ", expected " +
                          std::to_string(kFormatVersion));
    }
    const std::uint64_t header_len = get_u64(buf, 8, 8);
    if (16 + header_len > buf.size()) {
        throw FormatError("header length " + std::to_string(header_len) +
                          " extends past the end of " + path.string());
    }

    Container container;
    try {
        container.header = json::parse(buf.begin() + 16,
                                       buf.begin() + static_cast<std::ptrdiff_t>(16 + header_len));
    } catch (const json::exception& err) {
        throw FormatError("invalid header JSON in " + path.string() + ": " + err.what());
    }

    std::size_t total = 0;
    std::vector<std::pair<std::string, std::size_t>> declared;
    try {
        for (const json& entry : container.header.at("arrays")) {
            declared.emplace_back(entry.at("name").get<std::string>(),
                                  entry.at("len").get<std::size_t>());
            total += declared.back().second;
        }
    } catch (const json::exception& err) {
        throw FormatError("malformed array declarations in " + path.string() + ": " +
                          err.what());
    }
    const std::size_t expected = 16 + header_len + 8 * total;
    if (buf.size() != expected) {
        throw FormatError("file length " + std::to_string(buf.size()) + " of " + path.string() +
                          " does not match the header-declared " + std::to_string(expected));
    }

    std::size_t offset = 16 + header_len;
    for (const auto& [name, len] : declared) {
        std::vector<double> data(len);
        for (std::size_t i = 0; i < len; ++i) {
            data[i] = std::bit_cast<double>(get_u64(buf, offset, 8));
            offset += 8;
        }
        container.arrays.emplace_back(name, std::move(data));
    }
    return container;
}

std::vector<double> take_array(Container& container, const std::string& name,
                               std::size_t expected_len, const std::filesystem::path& path) {
    for (auto& [arr_name, data] : container.arrays) {
        if (arr_name != name) continue;
        if (data.size() != expected_len) {
            throw FormatError("array '" + name + "' in " + path.string() + " has " +
                              std::to_string(data.size()) + " entries, expected " +
                              std::to_string(expected_len));
        }
        return std::move(data);
    }
    throw FormatError("array '" + name + "' missing from " + path.string());
}

json grid_to_json(const GridSpec& g) {
    return {{"nx", g.nx},     {"ny", g.ny},     {"nz", g.nz},     {"nt", g.nt},
            {"xmin", g.xmin}, {"xmax", g.xmax}, {"ymin", g.ymin}, {"ymax", g.ymax},
            {"zmin", g.zmin}, {"zmax", g.zmax}, {"t_end", g.t_end}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.nx = j.at("nx").get<std::size_t>();
    g.ny = j.at("ny").get<std::size_t>();
    g.nz = j.at("nz").get<std::size_t>();
    g.nt = j.at("nt").get<std::size_t>();
    g.xmin = j.at("xmin").get<double>();
    g.xmax = j.at("xmax").get<double>();
    g.ymin = j.at("ymin").get<double>();
    g.ymax = j.at("ymax").get<double>();
    g.zmin = j.at("zmin").get<double>();
    g.zmax = j.at("zmax").get<double>();
    g.t_end = j.at("t_end").get<double>();
    return g;
}

void require_kind(const json& header, const char* kind, const std::filesystem::path& path) {
    if (!header.contains("kind") || header["kind"] != kind) {
        throw FormatError("file " + path.string() + " is not a " + kind + " container");
    }
}

} // namespace

const char* feature_name(Feature feature) { return kFeatureNames[static_cast<std::size_t>(feature)]; }

Normalizer::Normalizer(const std::array<ValueRange, kFeatureCount>& features, ValueRange target)
    : features_(features), target_(target) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const ValueRange& r = features_[i];
        if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.max > r.min)) {
            throw ConfigError(std::string("degenerate range for feature '") + kFeatureNames[i] +
                              "': [" + std::to_string(r.min) + ", " + std::to_string(r.max) +
                              "]");
        }
    }
    if (!std::isfinite(target_.min) || !std::isfinite(target_.max) || !(target_.max > target_.min)) {
        throw ConfigError("degenerate range for feature 'target': [" +
                          std::to_string(target_.min) + ", " + std::to_string(target_.max) + "]");
    }
}

namespace {

double to_unit(double value, const ValueRange& r) {
    return -1.0 + 2.0 * (value - r.min) / (r.max - r.min);
}

double from_unit(double value, const ValueRange& r) {
    return r.min + 0.5 * (value + 1.0) * (r.max - r.min);
}

} // namespace

double Normalizer::normalize(Feature feature, double value) const {
    return to_unit(value, features_[static_cast<std::size_t>(feature)]);
}

double Normalizer::denormalize(Feature feature, double value) const {
    return from_unit(value, features_[static_cast<std::size_t>(feature)]);
}

double Normalizer::normalize_target(double value) const { return to_unit(value, target_); }

double Normalizer::denormalize_target(double value) const { return from_unit(value, target_); }

const ValueRange& Normalizer::feature_range(Feature feature) const {
    return features_[static_cast<std::size_t>(feature)];
}

Normalizer fit_normalizer(const std::vector<SampleRecord>& train_set) {
    if (train_set.empty()) {
        throw ConfigError("fit_normalizer requires a non-empty training split");
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::array<ValueRange, kFeatureCount> features;
    features.fill({inf, -inf});
    ValueRange target{inf, -inf};
    const auto expand = [](ValueRange& r, double lo, double hi) {
        r.min = std::min(r.min, lo);
        r.max = std::max(r.max, hi);
    };

    for (const SampleRecord& record : train_set) {
        validate_record(record);
        const GridSpec& g = record.grid;
        const Point4 first = point_of(g, {0, 0, 0, 0});
        const Point4 last = point_of(g, {g.nt - 1, g.nx - 1, g.ny - 1, g.nz - 1});
        expand(features[static_cast<std::size_t>(Feature::kT)], first.t, last.t);
        expand(features[static_cast<std::size_t>(Feature::kX)], first.x, last.x);
        expand(features[static_cast<std::size_t>(Feature::kY)], first.y, last.y);
        expand(features[static_cast<std::size_t>(Feature::kZ)], first.z, last.z);

        const auto [phi_lo, phi_hi] =
            std::minmax_element(record.porosity.begin(), record.porosity.end());
        expand(features[static_cast<std::size_t>(Feature::kPorosity)], *phi_lo, *phi_hi);

        const std::size_t ncells = num_cells(g);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const auto begin = record.perm.begin() + static_cast<std::ptrdiff_t>(axis * ncells);
            const auto [k_lo, k_hi] = std::minmax_element(begin, begin + static_cast<std::ptrdiff_t>(ncells));
            ValueRange& r = features[static_cast<std::size_t>(Feature::kLogKx) + axis];
            expand(r, std::log(*k_lo), std::log(*k_hi));
        }

        expand(features[static_cast<std::size_t>(Feature::kRate)], record.rate, record.rate);
        expand(features[static_cast<std::size_t>(Feature::kDuration)], record.duration,
               record.duration);

        const auto [s_lo, s_hi] = std::minmax_element(record.states.begin(), record.states.end());
        expand(target, *s_lo, *s_hi);
    }
    return Normalizer(features, target);
}

void write_sample(const std::filesystem::path& path, const SampleRecord& record) {
    validate_record(record);
    json header = {{"kind", "sample"},
                   {"grid", grid_to_json(record.grid)},
                   {"homo", {{"rate", record.rate}, {"duration", record.duration}}},
                   {"well", {record.well[0], record.well[1], record.well[2]}}};
    write_container(path, kSampleMagic, std::move(header),
                    {{"porosity", record.porosity}, {"perm", record.perm},
                     {"states", record.states}});
}

SampleRecord read_sample(const std::filesystem::path& path) {
    Container container = read_container(path, kSampleMagic);
    require_kind(container.header, "sample", path);

    SampleRecord record;
    try {
        record.grid = grid_from_json(container.header.at("grid"));
        record.rate = container.header.at("homo").at("rate").get<double>();
        record.duration = container.header.at("homo").at("duration").get<double>();
        const json& well = container.header.at("well");
        for (std::size_t i = 0; i < 3; ++i) record.well[i] = well.at(i).get<std::size_t>();
    } catch (const json::exception& err) {
        throw FormatError("malformed sample header in " + path.string() + ": " + err.what());
    }

    const std::size_t ncells = num_cells(record.grid);
    record.porosity = take_array(container, "porosity", ncells, path);
    record.perm = take_array(container, "perm", 3 * ncells, path);
    record.states = take_array(container, "states", record.grid.nt * ncells, path);
    try {
        validate_record(record);
    } catch (const Error& err) {
        throw FormatError("inconsistent sample in " + path.string() + ": " + err.what());
    }
    return record;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const ModelConfig& mc = checkpoint.model.config;
    json normalizer_features = json::array();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const ValueRange& r = checkpoint.normalizer.feature_range(static_cast<Feature>(i));
        normalizer_features.push_back(
            {{"name", kFeatureNames[i]}, {"min", r.min}, {"max", r.max}});
    }
    const ValueRange& target = checkpoint.normalizer.target_range();

    json header = {
        {"kind", "checkpoint"},
        {"model",
         {{"te_dims", mc.te_dims},
          {"hepe_dims", mc.hepe_dims},
          {"hope_dims", mc.hope_dims},
          {"p", mc.p},
          {"dropout_rate", mc.dropout_rate},
          {"leaky_slope", mc.leaky_slope},
          {"seed", mc.seed}}},
        {"normalizer",
         {{"features", std::move(normalizer_features)},
          {"target", {{"min", target.min}, {"max", target.max}}}}},
        {"train",
         {{"n_sub", checkpoint.train.n_sub},
          {"eta_min", checkpoint.train.eta_min},
          {"outer_steps", checkpoint.train.outer.steps},
          {"outer_eta_max", checkpoint.train.outer.eta_max},
          {"inner_steps", checkpoint.train.inner.steps},
          {"inner_eta_max", checkpoint.train.inner.eta_max},
          {"seed", checkpoint.train.seed}}},
        {"optim",
         {{"beta1", checkpoint.optim.beta1},
          {"beta2", checkpoint.optim.beta2},
          {"eps", checkpoint.optim.eps},
          {"step_c", checkpoint.optim.step_c}}},
        {"step", checkpoint.step},
        {"split", {{"train", checkpoint.train_files}, {"test", checkpoint.test_files}}}};

    const std::vector<std::span<const double>> views = parameter_views(checkpoint.model);
    if (checkpoint.optim.m.size() != views.size() || checkpoint.optim.v.size() != views.size()) {
        throw DimensionError("optimizer state does not match the model parameter layout");
    }
    std::vector<NamedArray> arrays;
    arrays.reserve(3 * views.size());
    for (std::size_t k = 0; k < views.size(); ++k) {
        arrays.push_back({"param_" + std::to_string(k), views[k]});
    }
    for (std::size_t k = 0; k < views.size(); ++k) {
        arrays.push_back({"m_" + std::to_string(k), checkpoint.optim.m[k]});
    }
    for (std::size_t k = 0; k < views.size(); ++k) {
        arrays.push_back({"v_" + std::to_string(k), checkpoint.optim.v[k]});
    }
    write_container(path, kCheckpointMagic, std::move(header), arrays);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Container container = read_container(path, kCheckpointMagic);
    require_kind(container.header, "checkpoint", path);

    Checkpoint checkpoint;
    ModelConfig mc;
    std::array<ValueRange, kFeatureCount> features;
    ValueRange target;
    try {
        const json& model = container.header.at("model");
        mc.te_dims = model.at("te_dims").get<std::vector<std::size_t>>();
        mc.hepe_dims = model.at("hepe_dims").get<std::vector<std::size_t>>();
        mc.hope_dims = model.at("hope_dims").get<std::vector<std::size_t>>();
        mc.p = model.at("p").get<std::size_t>();
        mc.dropout_rate = model.at("dropout_rate").get<double>();
        mc.leaky_slope = model.at("leaky_slope").get<double>();
        mc.seed = model.at("seed").get<std::uint64_t>();

        const json& norm = container.header.at("normalizer");
        const json& feats = norm.at("features");
        if (feats.size() != kFeatureCount) {
            throw FormatError("checkpoint normalizer lists " + std::to_string(feats.size()) +
                              " features, expected " + std::to_string(kFeatureCount));
        }
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (feats.at(i).at("name") != kFeatureNames[i]) {
                throw FormatError("checkpoint normalizer feature " + std::to_string(i) +
                                  " is '" + feats.at(i).at("name").get<std::string>() +
                                  "', expected '" + kFeatureNames[i] + "'");
            }
            features[i] = {feats.at(i).at("min").get<double>(),
                           feats.at(i).at("max").get<double>()};
        }
        target = {norm.at("target").at("min").get<double>(),
                  norm.at("target").at("max").get<double>()};

        const json& train = container.header.at("train");
        checkpoint.train.n_sub = train.at("n_sub").get<std::size_t>();
        checkpoint.train.eta_min = train.at("eta_min").get<double>();
        checkpoint.train.outer.steps = train.at("outer_steps").get<std::size_t>();
        checkpoint.train.outer.eta_max = train.at("outer_eta_max").get<double>();
        checkpoint.train.inner.steps = train.at("inner_steps").get<std::size_t>();
        checkpoint.train.inner.eta_max = train.at("inner_eta_max").get<double>();
        checkpoint.train.seed = train.at("seed").get<std::uint64_t>();

        const json& optim = container.header.at("optim");
        checkpoint.optim.beta1 = optim.at("beta1").get<double>();
        checkpoint.optim.beta2 = optim.at("beta2").get<double>();
        checkpoint.optim.eps = optim.at("eps").get<double>();
        checkpoint.optim.step_c = optim.at("step_c").get<std::uint64_t>();

        checkpoint.step = container.header.at("step").get<std::uint64_t>();
        const json& split = container.header.at("split");
        checkpoint.train_files = split.at("train").get<std::vector<std::string>>();
        checkpoint.test_files = split.at("test").get<std::vector<std::string>>();
    } catch (const json::exception& err) {
        throw FormatError("malformed checkpoint header in " + path.string() + ": " + err.what());
    }

    try {
        checkpoint.model = build_model(mc);
        checkpoint.normalizer = Normalizer(features, target);
    } catch (const Error& err) {
        throw FormatError("invalid checkpoint contents in " + path.string() + ": " + err.what());
    }

    const std::vector<std::span<double>> views = parameter_views(checkpoint.model);
    for (std::size_t k = 0; k < views.size(); ++k) {
        const std::vector<double> data =
            take_array(container, "param_" + std::to_string(k), views[k].size(), path);
        std::copy(data.begin(), data.end(), views[k].begin());
        checkpoint.optim.m.push_back(
            take_array(container, "m_" + std::to_string(k), views[k].size(), path));
        checkpoint.optim.v.push_back(
            take_array(container, "v_" + std::to_string(k), views[k].size(), path));
    }
    return checkpoint;
}

void write_difference_field(const std::filesystem::path& path, const GridSpec& grid,
                            const Matrix& diffs) {
    validate_grid(grid);
    if (diffs.rows() != grid.nt || diffs.cols() != num_cells(grid)) {
        throw DimensionError("difference field is " + shape_string(diffs) + ", grid wants " +
                             std::to_string(grid.nt) + "x" + std::to_string(num_cells(grid)));
    }
    json header = {{"kind", "difference"}, {"grid", grid_to_json(grid)}};
    write_container(path, kSampleMagic, std::move(header), {{"difference", diffs.view()}});
}

Matrix read_difference_field(const std::filesystem::path& path, GridSpec& grid_out) {
    Container container = read_container(path, kSampleMagic);
    require_kind(container.header, "difference", path);
    try {
        grid_out = grid_from_json(container.header.at("grid"));
    } catch (const json::exception& err) {
        throw FormatError("malformed difference header in " + path.string() + ": " + err.what());
    }
    const std::size_t ncells = num_cells(grid_out);
    const std::vector<double> data =
        take_array(container, "difference", grid_out.nt * ncells, path);
    Matrix diffs(grid_out.nt, ncells);
    std::copy(data.begin(), data.end(), diffs.view().begin());
    return diffs;
}

} // namespace sno
