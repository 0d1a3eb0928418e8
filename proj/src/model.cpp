#include "sno/model.hpp"

#include <cmath>
#include <string>

namespace sno {

namespace {

void check_dims(const std::vector<std::size_t>& dims, std::size_t p, const char* name) {
    if (dims.size() < 2) {
        throw ConfigError(std::string(name) + ": needs at least in and out widths");
    }
    for (std::size_t w : dims) {
        if (w < 1) throw ConfigError(std::string(name) + ": zero layer width");
    }
    if (dims.back() != p) {
        throw ConfigError(std::string(name) + ": dims must end in p=" + std::to_string(p) +
                          ", got " + std::to_string(dims.back()));
    }
}

Mlp build_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
    Mlp mlp;
    mlp.layers.reserve(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l];
        const std::size_t out = dims[l + 1];
        AffineParams layer;
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        const double bound = std::sqrt(1.0 / static_cast<double>(in));
        for (double& w : layer.weight.view()) {
            w = rng.uniform(-bound, bound);
        }
        for (double& b : layer.bias) {
            b = rng.uniform(-bound, bound);
        }
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

/// Runs one embedder stack. Caches are appended in execution order:
/// per hidden layer affine, leaky, dropout; then final affine, tanh.
Matrix mlp_forward(const Mlp& mlp, const Matrix& input, const ModelConfig& cfg,
                   Mode mode, Rng& rng, std::vector<LayerCache>* caches) {
    Matrix h = input;
    const std::size_t last = mlp.layers.size() - 1;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        auto [z, affine_cache] = affine_forward(mlp.layers[l].weight, mlp.layers[l].bias, h);
        if (caches) caches->push_back(std::move(affine_cache));
        if (l < last) {
            auto [a, act_cache] = leaky_relu(z, cfg.leaky_slope);
            if (caches) caches->push_back(std::move(act_cache));
            auto [d, drop_cache] = dropout(a, cfg.dropout_rate, mode, rng);
            if (caches) caches->push_back(std::move(drop_cache));
            h = std::move(d);
        } else {
            auto [a, act_cache] = tanh_layer(z);
            if (caches) caches->push_back(std::move(act_cache));
            h = std::move(a);
        }
    }
    return h;
}

/// Walks the caches in reverse, producing parameter grads and the
/// gradient w.r.t. the embedder input (discarded by callers).
void mlp_backward(const Mlp& mlp, const std::vector<LayerCache>& caches,
                  const Matrix& dout, const ModelConfig& cfg, Mlp& grads) {
    Matrix d = dout;
    const std::size_t last = mlp.layers.size() - 1;
    std::size_t cache_pos = caches.size();
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        if (l < last) {
            d = dropout_backward(d, caches[--cache_pos]);
            d = leaky_relu_backward(d, caches[--cache_pos], cfg.leaky_slope);
        } else {
            d = tanh_backward(d, caches[--cache_pos]);
        }
        AffineGrads g = affine_backward(d, mlp.layers[l].weight, caches[--cache_pos]);
        grads.layers[l].weight = std::move(g.dweight);
        grads.layers[l].bias = std::move(g.dbias);
        d = std::move(g.dinput);
    }
}

Mlp zero_like(const Mlp& mlp) {
    Mlp z;
    z.layers.reserve(mlp.layers.size());
    for (const auto& layer : mlp.layers) {
        AffineParams g;
        g.weight = Matrix(layer.weight.rows(), layer.weight.cols());
        g.bias.assign(layer.bias.size(), 0.0);
        z.layers.push_back(std::move(g));
    }
    return z;
}

std::size_t mlp_params(const Mlp& mlp) {
    std::size_t n = 0;
    for (const auto& layer : mlp.layers) {
        n += (layer.weight.cols() + 1) * layer.weight.rows();
    }
    return n;
}

std::size_t mlp_macs(const Mlp& mlp) {
    std::size_t n = 0;
    for (const auto& layer : mlp.layers) {
        n += layer.weight.cols() * layer.weight.rows();
    }
    return n;
}

void check_batch(const Model& model, const QueryBatch& batch) {
    const std::size_t n = batch.topo.rows();
    if (batch.hetero.rows() != n || batch.homo.rows() != n) {
        throw DimensionError("forward: batch row counts disagree: topo " +
                             shape_string(batch.topo) + ", hetero " +
                             shape_string(batch.hetero) + ", homo " +
                             shape_string(batch.homo));
    }
    if (batch.topo.cols() != model.config.te_dims.front() ||
        batch.hetero.cols() != model.config.hepe_dims.front() ||
        batch.homo.cols() != model.config.hope_dims.front()) {
        throw DimensionError("forward: batch feature widths do not match embedder "
                             "in-features");
    }
}

} // namespace

Model build_model(const ModelConfig& config) {
    check_dims(config.te_dims, config.p, "te_dims");
    check_dims(config.hepe_dims, config.p, "hepe_dims");
    check_dims(config.hope_dims, config.p, "hope_dims");
    if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (!(config.leaky_slope > 0.0) || !(config.leaky_slope < 1.0)) {
        throw ConfigError("leaky_slope must be in (0, 1)");
    }

    Model model;
    model.config = config;
    Rng rng(config.seed);
    model.te = build_mlp(config.te_dims, rng);
    model.hepe = build_mlp(config.hepe_dims, rng);
    model.hope = build_mlp(config.hope_dims, rng);

    AffineParams decoder;
    decoder.weight = Matrix(1, config.p);
    decoder.bias.assign(1, 0.0);
    const double bound = std::sqrt(1.0 / static_cast<double>(config.p));
    for (double& w : decoder.weight.view()) {
        w = rng.uniform(-bound, bound);
    }
    decoder.bias[0] = rng.uniform(-bound, bound);
    model.decoder = std::move(decoder);
    return model;
}

Matrix forward(Model& model, const QueryBatch& batch, Rng& rng) {
    check_batch(model, batch);
    const bool train = model.mode == Mode::kTrain;
    Model::Tape tape;
    auto* te_caches = train ? &tape.te_caches : nullptr;
    auto* hepe_caches = train ? &tape.hepe_caches : nullptr;
    auto* hope_caches = train ? &tape.hope_caches : nullptr;

    Matrix latent = mlp_forward(model.te, batch.topo, model.config, model.mode, rng, te_caches);
    Matrix hepe_latent =
        mlp_forward(model.hepe, batch.hetero, model.config, model.mode, rng, hepe_caches);
    Matrix hope_latent =
        mlp_forward(model.hope, batch.homo, model.config, model.mode, rng, hope_caches);

    // Element-wise latent fusion.
    double* l = latent.data();
    const double* a = hepe_latent.data();
    const double* b = hope_latent.data();
    for (std::size_t i = 0; i < latent.size(); ++i) {
        l[i] += a[i] + b[i];
    }

    auto [pred, decoder_cache] = affine_forward(model.decoder.weight, model.decoder.bias, latent);
    if (train) {
        tape.decoder_cache = std::move(decoder_cache);
        model.tape = std::move(tape);
    }
    return pred;
}

Matrix predict(const Model& model, const QueryBatch& batch) {
    check_batch(model, batch);
    Rng unused(0);
    Matrix latent =
        mlp_forward(model.te, batch.topo, model.config, Mode::kEval, unused, nullptr);
    Matrix hepe_latent =
        mlp_forward(model.hepe, batch.hetero, model.config, Mode::kEval, unused, nullptr);
    Matrix hope_latent =
        mlp_forward(model.hope, batch.homo, model.config, Mode::kEval, unused, nullptr);
    double* l = latent.data();
    const double* a = hepe_latent.data();
    const double* b = hope_latent.data();
    for (std::size_t i = 0; i < latent.size(); ++i) {
        l[i] += a[i] + b[i];
    }
    return affine_forward(model.decoder.weight, model.decoder.bias, latent).first;
}

ModelGrads backward(Model& model, const Matrix& dpred) {
    if (!model.tape) {
        throw StateError("backward: no train-mode forward pass to differentiate");
    }
    ModelGrads grads = zero_grads(model);

    AffineGrads dec =
        affine_backward(dpred, model.decoder.weight, model.tape->decoder_cache);
    grads.decoder.weight = std::move(dec.dweight);
    grads.decoder.bias = std::move(dec.dbias);

    // Fusion is an elementwise sum, so the latent gradient flows to all
    // three embedders unchanged.
    const Matrix& dlatent = dec.dinput;
    mlp_backward(model.te, model.tape->te_caches, dlatent, model.config, grads.te);
    mlp_backward(model.hepe, model.tape->hepe_caches, dlatent, model.config, grads.hepe);
    mlp_backward(model.hope, model.tape->hope_caches, dlatent, model.config, grads.hope);

    model.tape.reset();
    return grads;
}

ModelGrads zero_grads(const Model& model) {
    ModelGrads g;
    g.te = zero_like(model.te);
    g.hepe = zero_like(model.hepe);
    g.hope = zero_like(model.hope);
    g.decoder.weight = Matrix(model.decoder.weight.rows(), model.decoder.weight.cols());
    g.decoder.bias.assign(model.decoder.bias.size(), 0.0);
    return g;
}

std::size_t count_params(const Model& model) {
    return mlp_params(model.te) + mlp_params(model.hepe) + mlp_params(model.hope) +
           (model.decoder.weight.cols() + 1) * model.decoder.weight.rows();
}

std::size_t count_macs(const Model& model) {
    return mlp_macs(model.te) + mlp_macs(model.hepe) + mlp_macs(model.hope) +
           model.decoder.weight.cols() * model.decoder.weight.rows();
}

namespace {

template <typename ModelT, typename SpanT>
std::vector<SpanT> collect_views(ModelT& m) {
    std::vector<SpanT> views;
    auto add_mlp = [&](auto& mlp) {
        for (auto& layer : mlp.layers) {
            views.push_back(SpanT(layer.weight.data(), layer.weight.size()));
            views.push_back(SpanT(layer.bias.data(), layer.bias.size()));
        }
    };
    add_mlp(m.te);
    add_mlp(m.hepe);
    add_mlp(m.hope);
    views.push_back(SpanT(m.decoder.weight.data(), m.decoder.weight.size()));
    views.push_back(SpanT(m.decoder.bias.data(), m.decoder.bias.size()));
    return views;
}

} // namespace

std::vector<std::span<double>> parameter_views(Model& model) {
    return collect_views<Model, std::span<double>>(model);
}

std::vector<std::span<double>> parameter_views(ModelGrads& grads) {
    return collect_views<ModelGrads, std::span<double>>(grads);
}

std::vector<std::span<const double>> parameter_views(const Model& model) {
    return collect_views<const Model, std::span<const double>>(model);
}

} // namespace sno
