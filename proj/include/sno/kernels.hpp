#ifndef SNO_KERNELS_HPP
#define SNO_KERNELS_HPP

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sno/matrix.hpp"
#include "sno/rng.hpp"

namespace sno {

enum class Mode { kTrain, kEval };

/// Saved forward state, consumed by the matching backward call.
/// `mask` holds dropout keep factors (0 or exactly 1/(1-rate));
/// `activation` holds the forward output where backward needs it (tanh).
struct LayerCache {
    Matrix input;
    std::optional<Matrix> mask;
    std::optional<Matrix> activation;
};

struct AffineGrads {
    Matrix dinput;              // n x in
    Matrix dweight;             // out x in
    std::vector<double> dbias;  // out
};

struct MseResult {
    double loss = 0.0;
    Matrix dpred;               // n x 1
};

/// y = x * weight^T + bias, bias broadcast over rows.
/// weight is out x in, x is n x in, y is n x out.
std::pair<Matrix, LayerCache> affine_forward(const Matrix& weight,
                                             std::span<const double> bias,
                                             const Matrix& x);

/// dinput = dy * weight; dweight = dy^T * input; dbias = column sums of dy.
AffineGrads affine_backward(const Matrix& dy, const Matrix& weight,
                            const LayerCache& cache);

/// y = x where x >= 0, slope * x otherwise. slope must be in (0, 1).
std::pair<Matrix, LayerCache> leaky_relu(const Matrix& x, double slope);
Matrix leaky_relu_backward(const Matrix& dy, const LayerCache& cache, double slope);

/// Elementwise hyperbolic tangent; backward uses 1 - y^2.
std::pair<Matrix, LayerCache> tanh_layer(const Matrix& x);
Matrix tanh_backward(const Matrix& dy, const LayerCache& cache);

/// Inverted dropout. Train mode keeps each entry with probability 1-rate
/// and scales it by 1/(1-rate); eval mode is the identity, bit-exact.
std::pair<Matrix, LayerCache> dropout(const Matrix& x, double rate, Mode mode, Rng& rng);
Matrix dropout_backward(const Matrix& dy, const LayerCache& cache);

/// loss = mean((pred - target)^2); dpred = (2/n)(pred - target).
MseResult mse_loss(const Matrix& pred, const Matrix& target);

} // namespace sno

#endif
