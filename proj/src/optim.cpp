#include "sno/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "sno/dataio.hpp"
#include "sno/errors.hpp"
#include "sno/fom.hpp"
#include "sno/sampler.hpp"

namespace sno {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_schedule(const LrSchedule& sched) {
    if (!(sched.eta_min > 0.0) || !(sched.eta_min <= sched.eta_max)) {
        throw ConfigError("learning-rate schedule requires 0 < eta_min <= eta_max");
    }
    if (sched.step_f == 0) {
        throw ConfigError("learning-rate schedule requires step_f >= 1");
    }
}

} // namespace

double cosine_lr(std::size_t step_c, const LrSchedule& sched) {
    validate_schedule(sched);
    if (step_c > sched.step_f) {
        throw RangeError("cosine_lr: step_c " + std::to_string(step_c) +
                         " exceeds step_f " + std::to_string(sched.step_f));
    }
    const double phase = kPi * static_cast<double>(step_c) / static_cast<double>(sched.step_f);
    return sched.eta_min + 0.5 * (sched.eta_max - sched.eta_min) * (1.0 + std::cos(phase));
}

OptimState init_optim_state(const Model& model) {
    OptimState state;
    for (std::span<const double> view : parameter_views(model)) {
        state.m.emplace_back(view.size(), 0.0);
        state.v.emplace_back(view.size(), 0.0);
    }
    return state;
}

void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<double>>& grads,
               OptimState& state, double eta) {
    if (!(eta > 0.0)) {
        throw ConfigError("adam_step requires eta > 0");
    }
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam_step: parameter, gradient, and state view counts differ");
    }
    const std::uint64_t t = state.step_c + 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::span<double> p = params[k];
        std::span<double> g = grads[k];
        std::vector<double>& m = state.m[k];
        std::vector<double>& v = state.v[k];
        if (p.size() != g.size() || p.size() != m.size()) {
            throw DimensionError("adam_step: view " + std::to_string(k) + " has size " +
                                 std::to_string(p.size()) + ", state has " +
                                 std::to_string(m.size()));
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= eta * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    state.step_c = t;
}

std::vector<LossRecord> run_training(Model& model, OptimState& state,
                                     const std::vector<SampleRecord>& train_set,
                                     const Normalizer& normalizer,
                                     const TrainConfig& config,
                                     std::uint64_t start_step, std::uint64_t end_step) {
    if (train_set.empty()) {
        throw ConfigError("run_training requires a non-empty training set");
    }
    if (config.n_sub == 0) {
        throw ConfigError("run_training requires n_sub >= 1");
    }
    const std::uint64_t total = config.outer.steps + config.inner.steps;
    if (start_step > total) {
        throw ConfigError("run_training: start step " + std::to_string(start_step) +
                          " is past the configured " + std::to_string(total) + " steps");
    }
    const std::uint64_t stop = std::min(end_step, total);
    if (start_step > stop) {
        throw ConfigError("run_training: start step " + std::to_string(start_step) +
                          " is past end step " + std::to_string(stop));
    }

    std::vector<LossRecord> history;
    history.reserve(stop - start_step);
    std::vector<std::span<double>> params = parameter_views(model);

    for (std::uint64_t step = start_step; step < stop; ++step) {
        const bool outer = step < config.outer.steps;
        LrSchedule sched;
        sched.eta_min = config.eta_min;
        sched.eta_max = outer ? config.outer.eta_max : config.inner.eta_max;
        sched.step_f = outer ? config.outer.steps : config.inner.steps;
        const std::size_t step_c =
            static_cast<std::size_t>(outer ? step : step - config.outer.steps);
        const double eta = cosine_lr(step_c, sched);

        Rng rng(mix_seed(config.seed, step));
        const SampleRecord& sample = train_set[rng.below(train_set.size())];
        const SubsampleIndices indices = subsample(sample.grid, config.n_sub, rng);
        const QueryBatch batch = gather_batch(sample, indices, normalizer);

        model.mode = Mode::kTrain;
        const Matrix pred = forward(model, batch, rng);
        const MseResult mse = mse_loss(pred, *batch.target);
        if (!std::isfinite(mse.loss)) {
            throw DivergenceError("training loss is not finite at step " +
                                      std::to_string(step),
                                  static_cast<std::size_t>(step));
        }
        ModelGrads grads = backward(model, mse.dpred);
        adam_step(params, parameter_views(grads), state, eta);

        history.push_back({step, outer ? "outer" : "inner", eta, mse.loss});
    }
    return history;
}

double full_domain_mse(const Model& model, const std::vector<SampleRecord>& records,
                       const Normalizer& normalizer, std::size_t batch_size) {
    if (records.empty()) {
        throw ConfigError("full_domain_mse requires at least one record");
    }
    if (batch_size == 0) {
        throw ConfigError("full_domain_mse requires batch_size >= 1");
    }
    double total = 0.0;
    std::size_t count = 0;
    for (const SampleRecord& record : records) {
        const SubsampleIndices all = all_indices(record.grid);
        for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, all.size());
            const SubsampleIndices chunk(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                         all.begin() + static_cast<std::ptrdiff_t>(end));
            const QueryBatch batch = gather_batch(record, chunk, normalizer);
            const Matrix pred = predict(model, batch);
            for (std::size_t i = 0; i < pred.rows(); ++i) {
                const double r = pred(i, 0) - (*batch.target)(i, 0);
                total += r * r;
            }
            count += pred.rows();
        }
    }
    return total / static_cast<double>(count);
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open loss file for writing: " + path);
    }
    out << "step,phase,eta,mse\n";
    char buf[64];
    for (const LossRecord& rec : history) {
        out << rec.step << ',' << rec.phase << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rec.eta);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rec.mse);
        out << buf << '\n';
    }
    if (!out.flush()) {
        throw ConfigError("failed writing loss file: " + path);
    }
}

} // namespace sno
