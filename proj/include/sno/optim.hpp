#ifndef SNO_OPTIM_HPP
#define SNO_OPTIM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sno/model.hpp"

namespace sno {

struct SampleRecord; // fom.hpp
class Normalizer;    // dataio.hpp

/// Cosine annealing from eta_max down to eta_min over step_f steps.
struct LrSchedule {
    double eta_min = 1e-16;
    double eta_max = 1e-4;
    std::size_t step_f = 1;
};

/// eta = eta_min + 0.5 * (eta_max - eta_min) * (1 + cos(pi * step_c / step_f)).
double cosine_lr(std::size_t step_c, const LrSchedule& sched);

/// ADAM moment buffers, one flat vector per parameter view. step_c counts
/// applied updates and drives bias correction.
struct OptimState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_c = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

OptimState init_optim_state(const Model& model);

/// One ADAM update with bias correction, in place.
void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<double>>& grads,
               OptimState& state, double eta);

struct TrainPhase {
    std::size_t steps = 0;
    double eta_max = 0.0;
};

struct TrainConfig {
    std::size_t n_sub = 4096;
    double eta_min = 1e-16;
    TrainPhase outer{0, 1e-4};
    TrainPhase inner{0, 1e-5};
    std::uint64_t seed = 0;
};

struct LossRecord {
    std::uint64_t step = 0;
    std::string phase;
    double eta = 0.0;
    double mse = 0.0;
};

/// Two sequential phases (outer then inner), each under its own cosine
/// schedule. Every step draws one random training sample, subsamples
/// n_sub lattice points from it, and applies one ADAM update on the
/// subsampled MSE. Per-step randomness is derived from (seed, step), so
/// a run resumed at start_step continues the exact same trajectory.
/// Executes steps [start_step, min(end_step, outer.steps + inner.steps)).
std::vector<LossRecord> run_training(Model& model, OptimState& state,
                                     const std::vector<SampleRecord>& train_set,
                                     const Normalizer& normalizer,
                                     const TrainConfig& config,
                                     std::uint64_t start_step = 0,
                                     std::uint64_t end_step = UINT64_MAX);

/// Eval-mode MSE in normalized units over every lattice point of every
/// record, streamed in batches of batch_size points.
double full_domain_mse(const Model& model, const std::vector<SampleRecord>& records,
                       const Normalizer& normalizer, std::size_t batch_size = 8192);

/// Columns: step, phase, eta, mse.
void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history);

} // namespace sno

#endif
