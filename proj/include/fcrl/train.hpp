#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcrl/adam.hpp"
#include "fcrl/dataset.hpp"
#include "fcrl/error.hpp"
#include "fcrl/model.hpp"
#include "fcrl/objective.hpp"
#include "fcrl/rng.hpp"

namespace fcrl {

struct TrainConfig {
    double beta = 0.1;
    double lambda = 2.0;
    std::size_t d = 8;
    std::size_t hidden = 50;
    std::size_t pred_hidden = 50;
    std::size_t epochs = 200;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    Objective objective = Objective::O2;

    void validate() const {
        if (epochs < 1) throw DomainError("train: epochs must be >= 1");
        if (batch_size < 2) throw DomainError("train: batch size must be >= 2");
        if (!(beta >= 0.0)) throw DomainError("train: beta must be >= 0");
        if (!(lambda > 0.0)) throw DomainError("train: lambda must be > 0");
    }
};

// Default sweep grid: 0.005..0.05 in steps of 0.005,
// then 0.05..1.0 in steps of 0.05 (30 entries; 0.05 appears in both legs,
// which is what makes the 200 + 29x20 epoch arithmetic come out).
inline std::vector<double> default_beta_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(0.005 * i);
    for (int i = 1; i <= 20; ++i) grid.push_back(0.05 * i);
    return grid;
}

struct SweepConfig {
    std::vector<double> beta_grid = default_beta_grid();
    bool warm_start = false;
    std::size_t finetune_epochs = 20;

    void validate() const {
        if (beta_grid.empty()) throw DomainError("sweep: empty beta grid");
        for (std::size_t i = 1; i < beta_grid.size(); ++i)
            if (beta_grid[i] < beta_grid[i - 1])
                throw DomainError("sweep: beta grid must be sorted ascending");
        if (warm_start && finetune_epochs < 1)
            throw DomainError("sweep: finetune epochs must be >= 1 with warm start");
    }

    // Epochs executed per grid point under `base_epochs` full training.
    std::size_t total_epochs(std::size_t base_epochs) const {
        if (!warm_start) return base_epochs * beta_grid.size();
        return base_epochs + (beta_grid.size() - 1) * finetune_epochs;
    }
};

// Model plus optimizer state plus epoch counter; everything needed to
// continue training bit-exactly.
struct TrainState {
    FcrlModel model;
    AdamState adam;
    std::size_t epochs_done = 0;
};

struct TrainResult {
    TrainState state;
    std::vector<LossBreakdown> trace;  // one averaged entry per epoch
};

namespace detail {

// Stream tags keep the init draw and every (beta index, epoch) pair on
// decorrelated but reproducible rng streams.
inline std::uint64_t epoch_stream(std::size_t beta_index, std::size_t epoch) {
    return 1'000'000 * (beta_index + 1) + epoch;
}

}  // namespace detail

// Runs `n_epochs` additional epochs on an existing state. The epoch
// index (state.epochs_done) determines the rng stream, so interrupted
// and uninterrupted runs agree.
inline std::vector<LossBreakdown> run_epochs(TrainState& state, const Dataset& ds,
                                             const TrainConfig& cfg, std::size_t n_epochs,
                                             std::size_t beta_index = 0) {
    cfg.validate();
    std::vector<LossBreakdown> trace;
    std::vector<std::size_t> order(ds.n());
    for (std::size_t e = 0; e < n_epochs; ++e) {
        const std::size_t epoch = state.epochs_done;
        Rng rng(derive_seed(cfg.seed, detail::epoch_stream(beta_index, epoch)));
        // start each epoch from the identity permutation so the batch
        // order depends only on (seed, beta index, epoch), not on history
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        LossBreakdown epoch_mean;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            if (stop - start < 2) continue;  // a singleton tail batch has no negatives
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            Batch batch = gather_batch(ds, idx);
            LossResult res;
            try {
                res = total_loss(state.model, batch, cfg.beta, cfg.lambda, rng);
            } catch (const NumericError& err) {
                throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(n_batches) + ": " + err.what());
            }
            state.adam.step(state.model.params(),
                            static_cast<const FcrlModel&>(res.grads).params());
            epoch_mean.label_loss += res.breakdown.label_loss;
            epoch_mean.rate += res.breakdown.rate;
            epoch_mean.contrastive += res.breakdown.contrastive;
            epoch_mean.total += res.breakdown.total;
            ++n_batches;
        }
        const double inv = 1.0 / static_cast<double>(n_batches);
        epoch_mean.label_loss *= inv;
        epoch_mean.rate *= inv;
        epoch_mean.contrastive *= inv;
        epoch_mean.total *= inv;
        epoch_mean.beta = cfg.beta;
        epoch_mean.lambda = cfg.lambda;
        trace.push_back(epoch_mean);
        ++state.epochs_done;
    }
    return trace;
}

inline TrainState init_train_state(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    Dims dims;
    dims.p = ds.p();
    dims.d = cfg.d;
    dims.h = cfg.hidden;
    dims.K = static_cast<std::size_t>(ds.K);
    dims.pred_hidden = cfg.pred_hidden;
    Rng init_rng(derive_seed(cfg.seed, 0));
    TrainState state;
    state.model = init_model(dims, cfg.objective, init_rng);
    state.adam = AdamState({.lr = cfg.learning_rate});
    return state;
}

inline TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
    TrainResult out;
    out.state = init_train_state(ds, cfg);
    out.trace = run_epochs(out.state, ds, cfg, cfg.epochs);
    return out;
}

// ---------------------------------------------------------------------------
// Beta sweep with optional warm-start finetuning.

struct SweepEntry {
    double beta = 0.0;
    TrainState state;
    std::vector<LossBreakdown> trace;
    std::size_t epochs_executed = 0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    std::size_t total_epochs = 0;
};

inline SweepResult sweep(const Dataset& ds, const TrainConfig& base, const SweepConfig& sc) {
    sc.validate();
    SweepResult out;
    TrainState carry;
    for (std::size_t i = 0; i < sc.beta_grid.size(); ++i) {
        TrainConfig cfg = base;
        cfg.beta = sc.beta_grid[i];
        SweepEntry entry;
        entry.beta = cfg.beta;
        if (!sc.warm_start || i == 0) {
            entry.state = init_train_state(ds, cfg);
            entry.epochs_executed = cfg.epochs;
        } else {
            // keep the model weights, restart the optimizer for the new beta
            entry.state.model = carry.model;
            entry.state.adam = AdamState({.lr = cfg.learning_rate});
            entry.state.epochs_done = 0;
            entry.epochs_executed = sc.finetune_epochs;
        }
        // cold starts replay the standalone-training streams so a sweep
        // entry is bit-identical to training that beta on its own
        entry.trace = run_epochs(entry.state, ds, cfg, entry.epochs_executed,
                                 sc.warm_start ? i : 0);
        out.total_epochs += entry.epochs_executed;
        carry = entry.state;
        out.entries.push_back(std::move(entry));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: model + optimizer + epoch counter in one JSON envelope.

constexpr int kCheckpointVersion = 1;

inline nlohmann::json tensor_list_json(const std::vector<Matrix>& ts) {
    nlohmann::json out = nlohmann::json::array();
    for (const Matrix& m : ts)
        out.push_back({{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}});
    return out;
}

inline std::vector<Matrix> tensor_list_from_json(const nlohmann::json& j) {
    std::vector<Matrix> out;
    for (const auto& tj : j) {
        auto data = tj.at("data").get<std::vector<double>>();
        out.emplace_back(tj.at("rows").get<std::size_t>(), tj.at("cols").get<std::size_t>(),
                         std::move(data));
    }
    return out;
}

inline void save_checkpoint(const TrainState& state, const std::string& path,
                            double beta = 0.0) {
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["beta"] = beta;
    j["epochs_done"] = state.epochs_done;
    j["model"] = model_to_json(state.model);
    j["adam"] = {{"lr", state.adam.config().lr},
                 {"step", state.adam.step_count()},
                 {"m", tensor_list_json(state.adam.first_moments())},
                 {"v", tensor_list_json(state.adam.second_moments())}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << j.dump() << "\n";
    if (!f) throw DataError("write failed: " + path);
}

inline TrainState load_checkpoint(const std::string& path, double* beta_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint " + path + ": " + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != kCheckpointVersion)
        throw DataError("checkpoint " + path + ": missing or unsupported version");
    TrainState state;
    try {
        state.model = model_from_json(j.at("model"));
        state.epochs_done = j.at("epochs_done").get<std::size_t>();
        const auto& aj = j.at("adam");
        state.adam = AdamState({.lr = aj.at("lr").get<double>()});
        state.adam.restore(tensor_list_from_json(aj.at("m")), tensor_list_from_json(aj.at("v")),
                           aj.at("step").get<long>());
        if (beta_out) *beta_out = j.at("beta").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint " + path + ": " + e.what());
    }
    return state;
}

inline void write_trace_csv(const std::vector<LossBreakdown>& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << "epoch,label_loss,rate,contrastive,total\n";
    for (std::size_t e = 0; e < trace.size(); ++e)
        f << e << "," << detail::format_double(trace[e].label_loss) << ","
          << detail::format_double(trace[e].rate) << ","
          << detail::format_double(trace[e].contrastive) << ","
          << detail::format_double(trace[e].total) << "\n";
}

}  // namespace fcrl
