#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "laketemp/adam.hpp"
#include "laketemp/dataio.hpp"
#include "laketemp/geometry.hpp"
#include "laketemp/lstm.hpp"
#include "laketemp/physics.hpp"

namespace laketemp {

struct TrainingConfig {
    double lambda_ec = 0.01;       // weight of the conservation penalty
    double tau_ec = 24.0;          // W/m^2 threshold
    double learning_rate = 0.005;
    int epochs = 150;
    int chunk_length = 400;        // days per BPTT chunk
    int chunk_stride = 200;
    uint64_t seed = 1;
    int hidden_size = 21;
    int checkpoint_every = 0;      // epochs between checkpoint writes (0: final only)
    std::string checkpoint_path;   // empty: no checkpoint files
    int early_stop_patience = 20;  // epochs without validation improvement; 0 disables
    double validation_tail = 0.1;  // trailing fraction of the observed span held out
    bool ec_only = false;          // semi-supervised: drop the supervised term
    std::pair<int, int> window{0, -1};  // day span used for chunking (-1: whole series)
};

struct EpochRecord {
    int epoch = 0;
    double rmse = 0.0;      // pooled over the epoch's chunks
    double ec = 0.0;        // pooled conservation penalty
    double combined = 0.0;  // rmse + lambda * ec
    double seconds = 0.0;   // wall time (excluded from determinism contracts)
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
};

/// Everything one training run reads. Observations must already be restricted
/// to the training windows; the EC term sees every chunk day regardless.
struct DataBundle {
    const FeatureMatrix* features = nullptr;
    const MeteoSeries* drivers = nullptr;
    const LakeGeometry* geometry = nullptr;
    ObservationSet observations;
};

struct LossParts {
    double rmse = 0.0;
    double ec = 0.0;
    double combined = 0.0;
    double sse = 0.0;  // sum of squared errors behind rmse
    int n_obs = 0;
    int ice_free_days = 0;
};

/// Combined chunk loss L = L_RNN + lambda_EC * L_EC over one day window.
/// Chunks without observations contribute the EC term only. Returns an
/// undefined tensor when neither term applies.
std::pair<Tensor, LossParts> combined_loss(const ModelParams& params, const DataBundle& data,
                                           std::pair<int, int> window,
                                           const TrainingConfig& cfg);

struct TrainResult {
    ModelParams params;
    AdamState adam;
    TrainingHistory history;
    int stopped_epoch = 0;  // epochs actually run (early stopping may cut short)
};

/// Chunked full-batch training with per-chunk ADAM updates. Deterministic per
/// (initial params, data, config). Throws NumericError on a non-finite loss;
/// the last checkpoint file written stays on disk as the survivor.
TrainResult train(const ModelParams& initial, const DataBundle& data,
                  const TrainingConfig& cfg, const AdamState* resume = nullptr);

/// Dense no-grad prediction over [day_begin, day_end) for every depth.
TemperatureField predict_field(const ModelParams& params, const FeatureMatrix& features,
                               int day_begin, int day_end);

// -- model checkpoints -----------------------------------------------------------

struct Checkpoint {
    int version = 1;
    ModelParams params;
    NormStats stats;
    bool has_adam = false;
    AdamState adam;
    int epoch = 0;
    std::map<std::string, std::string> meta;
};

/// JSON container; doubles are written with round-trip precision so values
/// reload bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

// -- pretraining -------------------------------------------------------------------

struct PretrainResult {
    ModelParams pretrained;
    TrainingHistory pre_history;
    ModelParams finetuned;
    TrainingHistory fine_history;
};

/// Stage 1 trains on the dense simulated field (every cell of the pretrain
/// bundle's observation set); stage 2 warm-starts from stage 1 on the sparse
/// set. An empty fine-tune set returns the stage-1 parameters unchanged
/// unless fine_cfg.ec_only requests EC-only refinement.
PretrainResult pretrain_then_finetune(const DataBundle& pretrain_data,
                                      const DataBundle& finetune_data,
                                      const TrainingConfig& pre_cfg,
                                      const TrainingConfig& fine_cfg);

/// Dense observation set covering every (depth, day) cell of a field window.
ObservationSet dense_observations(const TemperatureField& field,
                                  std::pair<int, int> day_window);

}  // namespace laketemp
