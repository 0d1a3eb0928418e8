#ifndef SNO_DATAIO_HPP
#define SNO_DATAIO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sno/fom.hpp"
#include "sno/matrix.hpp"
#include "sno/model.hpp"
#include "sno/optim.hpp"

namespace sno {

/// The ten model input features, in the order they appear in a query:
/// four topological coordinates, four per-point field values, two
/// per-case scalars.
enum class Feature : std::size_t {
    kT = 0,
    kX,
    kY,
    kZ,
    kPorosity,
    kLogKx,
    kLogKy,
    kLogKz,
    kRate,
    kDuration,
};

inline constexpr std::size_t kFeatureCount = 10;

const char* feature_name(Feature feature);

struct ValueRange {
    double min = 0.0;
    double max = 0.0;
};

/// Min-max statistics mapping each input feature and the target into
/// [-1, 1]. Fitted on the training split only; values outside a fitted
/// range pass through without clamping.
class Normalizer {
public:
    Normalizer() = default;

    /// Throws if any range is degenerate (max <= min), naming the feature.
    Normalizer(const std::array<ValueRange, kFeatureCount>& features, ValueRange target);

    double normalize(Feature feature, double value) const;
    double denormalize(Feature feature, double value) const;
    double normalize_target(double value) const;
    double denormalize_target(double value) const;

    const ValueRange& feature_range(Feature feature) const;
    const ValueRange& target_range() const { return target_; }

private:
    std::array<ValueRange, kFeatureCount> features_{};
    ValueRange target_{};
};

Normalizer fit_normalizer(const std::vector<SampleRecord>& train_set);

void write_sample(const std::filesystem::path& path, const SampleRecord& record);
SampleRecord read_sample(const std::filesystem::path& path);

/// Everything needed to resume training or run inference.
struct Checkpoint {
    Model model;
    OptimState optim;
    Normalizer normalizer;
    TrainConfig train;
    std::uint64_t step = 0; // completed training steps
    std::vector<std::string> train_files;
    std::vector<std::string> test_files;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Per-timestamp |S - Shat| fields in the dataset container format, for
/// external visualization. diffs is nt x ncells.
void write_difference_field(const std::filesystem::path& path, const GridSpec& grid,
                            const Matrix& diffs);
Matrix read_difference_field(const std::filesystem::path& path, GridSpec& grid_out);

} // namespace sno

#endif
