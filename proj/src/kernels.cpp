#include "sno/kernels.hpp"

#include <cmath>
#include <cstddef>

namespace sno {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shapes " + shape_string(a) +
                             " and " + shape_string(b) + " do not match");
    }
}

} // namespace

std::pair<Matrix, LayerCache> affine_forward(const Matrix& weight,
                                             std::span<const double> bias,
                                             const Matrix& x) {
    const std::size_t out = weight.rows();
    const std::size_t in = weight.cols();
    if (x.cols() != in) {
        throw DimensionError("affine_forward: input " + shape_string(x) +
                             " does not match weight " + shape_string(weight));
    }
    if (bias.size() != out) {
        throw DimensionError("affine_forward: bias length " +
                             std::to_string(bias.size()) + " does not match weight " +
                             shape_string(weight));
    }

    Matrix y(x.rows(), out);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        for (std::size_t o = 0; o < out; ++o) {
            const double* wo = weight.row(o);
            double acc = 0.0;
            for (std::size_t k = 0; k < in; ++k) {
                acc += xi[k] * wo[k];
            }
            yi[o] = acc + bias[o];
        }
    }
    return {std::move(y), LayerCache{x, std::nullopt, std::nullopt}};
}

AffineGrads affine_backward(const Matrix& dy, const Matrix& weight,
                            const LayerCache& cache) {
    const Matrix& x = cache.input;
    const std::size_t out = weight.rows();
    const std::size_t in = weight.cols();
    if (dy.cols() != out || dy.rows() != x.rows()) {
        throw DimensionError("affine_backward: dy " + shape_string(dy) +
                             " does not match weight " + shape_string(weight) +
                             " and cached input " + shape_string(x));
    }

    AffineGrads g;
    g.dinput = Matrix(x.rows(), in);
    g.dweight = Matrix(out, in);
    g.dbias.assign(out, 0.0);

    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* dyi = dy.row(i);
        const double* xi = x.row(i);
        double* dxi = g.dinput.row(i);
        for (std::size_t o = 0; o < out; ++o) {
            const double d = dyi[o];
            if (d == 0.0) continue;
            const double* wo = weight.row(o);
            double* dwo = g.dweight.row(o);
            for (std::size_t k = 0; k < in; ++k) {
                dxi[k] += d * wo[k];
                dwo[k] += d * xi[k];
            }
            g.dbias[o] += d;
        }
    }
    return g;
}

std::pair<Matrix, LayerCache> leaky_relu(const Matrix& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ConfigError("leaky_relu: slope must be in (0, 1), got " +
                          std::to_string(slope));
    }
    Matrix y = x;
    for (double& v : y.view()) {
        if (v < 0.0) v *= slope;
    }
    return {std::move(y), LayerCache{x, std::nullopt, std::nullopt}};
}

Matrix leaky_relu_backward(const Matrix& dy, const LayerCache& cache, double slope) {
    require_same_shape(dy, cache.input, "leaky_relu_backward");
    Matrix dx = dy;
    const double* xin = cache.input.data();
    double* d = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (xin[i] < 0.0) d[i] *= slope;
    }
    return dx;
}

std::pair<Matrix, LayerCache> tanh_layer(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.view()) {
        v = std::tanh(v);
    }
    LayerCache cache{x, std::nullopt, y};
    return {std::move(y), std::move(cache)};
}

Matrix tanh_backward(const Matrix& dy, const LayerCache& cache) {
    if (!cache.activation) {
        throw StateError("tanh_backward: cache has no saved activation");
    }
    require_same_shape(dy, *cache.activation, "tanh_backward");
    Matrix dx = dy;
    const double* y = cache.activation->data();
    double* d = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
        d[i] *= 1.0 - y[i] * y[i];
    }
    return dx;
}

std::pair<Matrix, LayerCache> dropout(const Matrix& x, double rate, Mode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::kEval) {
        return {x, LayerCache{x, std::nullopt, std::nullopt}};
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(x.rows(), x.cols());
    Matrix y = x;
    double* m = mask.data();
    double* v = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        v[i] *= m[i];
    }
    return {std::move(y), LayerCache{x, std::move(mask), std::nullopt}};
}

Matrix dropout_backward(const Matrix& dy, const LayerCache& cache) {
    if (!cache.mask) {
        return dy; // eval-mode forward was the identity
    }
    require_same_shape(dy, *cache.mask, "dropout_backward");
    Matrix dx = dy;
    const double* m = cache.mask->data();
    double* d = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
        d[i] *= m[i];
    }
    return dx;
}

MseResult mse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.size();
    if (n == 0) {
        throw DimensionError("mse_loss: empty batch");
    }
    MseResult result;
    result.dpred = Matrix(pred.rows(), pred.cols());
    const double* p = pred.data();
    const double* t = target.data();
    double* d = result.dpred.data();
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = p[i] - t[i];
        acc += r * r;
        d[i] = 2.0 * inv_n * r;
    }
    result.loss = acc * inv_n;
    return result;
}

} // namespace sno
