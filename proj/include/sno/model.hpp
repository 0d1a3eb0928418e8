#ifndef SNO_MODEL_HPP
#define SNO_MODEL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sno/kernels.hpp"
#include "sno/matrix.hpp"
#include "sno/rng.hpp"

namespace sno {

/// Layer widths of the three embedders plus the decoder. Every dims list
/// must end in the embedded dimension p; the decoder is implicitly [p, 1].
struct ModelConfig {
    std::vector<std::size_t> te_dims;
    std::vector<std::size_t> hepe_dims;
    std::vector<std::size_t> hope_dims;
    std::size_t p = 250;
    double dropout_rate = 0.3;
    double leaky_slope = 0.2;
    std::uint64_t seed = 0;

    /// Default architecture for a given embedded dimension.
    static ModelConfig defaults(std::size_t p = 250) {
        ModelConfig c;
        c.p = p;
        c.te_dims = {4, 512, 512, 512, 512, p};
        c.hepe_dims = {4, 512, 512, 512, 512, p};
        c.hope_dims = {2, 32, 32, 32, p};
        return c;
    }
};

struct AffineParams {
    Matrix weight;              // out x in
    std::vector<double> bias;   // out
};

/// One embedder: hidden affine layers each followed by LeakyReLU and
/// dropout, final affine followed by tanh and no dropout.
struct Mlp {
    std::vector<AffineParams> layers;
};

/// A batch of queries. Rows are points; all features are normalized to
/// [-1, 1] by the caller. homo rows of a single case are identical.
struct QueryBatch {
    Matrix topo;                    // n x 4, (t, x, y, z)
    Matrix hetero;                  // n x 4, per-point field values
    Matrix homo;                    // n x 2, per-case scalars
    std::optional<Matrix> target;   // n x 1
};

/// Gradients mirror the parameter layout exactly.
struct ModelGrads {
    Mlp te, hepe, hope;
    AffineParams decoder;
};

class Model {
public:
    ModelConfig config;
    Mlp te, hepe, hope;
    AffineParams decoder;
    Mode mode = Mode::kTrain;

    /// Tape from the most recent train-mode forward; consumed by backward.
    struct Tape {
        std::vector<LayerCache> te_caches, hepe_caches, hope_caches;
        LayerCache decoder_cache;
    };
    std::optional<Tape> tape;
};

/// Initializes all weights uniformly in +-sqrt(1/fan_in) from config.seed.
/// Deterministic for a fixed seed.
Model build_model(const ModelConfig& config);

/// predictions = decoder(TE(topo) + HePE(hetero) + HoPE(homo)).
/// In train mode the layer caches are retained for backward and dropout
/// is active; in eval mode the pass is pure and dropout is the identity.
Matrix forward(Model& model, const QueryBatch& batch, Rng& rng);

/// Eval-mode forward on an immutable model; safe to share across threads.
Matrix predict(const Model& model, const QueryBatch& batch);

/// Gradients of the loss w.r.t. every weight and bias given the loss
/// gradient w.r.t. predictions. Requires a matching train-mode forward;
/// consumes the tape.
ModelGrads backward(Model& model, const Matrix& dpred);

ModelGrads zero_grads(const Model& model);

/// Sum over affine layers of (in + 1) * out.
std::size_t count_params(const Model& model);

/// Sum over affine layers of in * out multiply-accumulates per query row.
std::size_t count_macs(const Model& model);

/// Flat views over all parameters (or gradients) in a fixed canonical
/// order: te, hepe, hope, decoder; per layer weight then bias.
std::vector<std::span<double>> parameter_views(Model& model);
std::vector<std::span<double>> parameter_views(ModelGrads& grads);
std::vector<std::span<const double>> parameter_views(const Model& model);

} // namespace sno

#endif
