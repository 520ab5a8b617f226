#include "laketemp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>

#include "json.hpp"
#include "laketemp/errors.hpp"

namespace laketemp {

namespace {

using nlohmann::json;

std::pair<int, int> resolve_window(const TrainingConfig& cfg, int n_days) {
    int begin = cfg.window.first;
    int end = cfg.window.second < 0 ? n_days : cfg.window.second;
    if (begin < 0 || end > n_days || begin >= end)
        throw DataError("training window outside the feature matrix");
    return {begin, end};
}

std::vector<std::pair<int, int>> make_chunks(int begin, int end, int length, int stride) {
    if (length < 2) throw DataError("chunk length must span at least two days");
    if (stride < 1) throw DataError("chunk stride must be positive");
    std::vector<std::pair<int, int>> chunks;
    if (end - begin <= length) {
        chunks.push_back({begin, end});
        return chunks;
    }
    int start = begin;
    for (; start + length <= end; start += stride) chunks.push_back({start, start + length});
    if (chunks.back().second < end) chunks.push_back({end - length, end});
    return chunks;
}

std::vector<WindowObservation> window_observations(const ObservationSet& obs,
                                                   std::pair<int, int> window) {
    std::vector<WindowObservation> out;
    for (const Observation& o : obs.obs)
        if (o.time_index >= window.first && o.time_index < window.second)
            out.push_back({o.depth_index, o.time_index - window.first, o.temp_c});
    return out;
}

struct ChunkData {
    std::pair<int, int> window;
    Tensor features;  // [(T*B) x F]
    std::vector<WindowObservation> obs;
};

std::pair<Tensor, LossParts> chunk_loss(const ModelParams& params, const ChunkData& chunk,
                                        const DataBundle& data, const TrainingConfig& cfg) {
    const int t_steps = chunk.window.second - chunk.window.first;
    const int batch = data.features->n_depths;
    LossParts parts;

    const bool want_rmse = !cfg.ec_only && !chunk.obs.empty();
    const bool want_ec = cfg.lambda_ec > 0.0;
    if (!want_rmse && !want_ec) return {Tensor(), parts};

    auto preds = forward_window(chunk.features, t_steps, batch, params);

    Tensor loss;
    if (want_rmse) {
        Tensor rmse = rmse_loss(preds, chunk.obs);
        parts.rmse = rmse.item();
        parts.n_obs = static_cast<int>(chunk.obs.size());
        parts.sse = parts.rmse * parts.rmse * parts.n_obs;
        loss = rmse;
    }
    if (want_ec) {
        EcPenalty pen = ec_penalty_t(preds, *data.drivers, chunk.window.first,
                                     *data.geometry, cfg.tau_ec);
        parts.ec = pen.value.item();
        parts.ice_free_days = pen.ice_free_days;
        Tensor weighted = pen.value * cfg.lambda_ec;
        loss = loss.defined() ? add(loss, weighted) : weighted;
    }
    parts.combined = parts.rmse + cfg.lambda_ec * parts.ec;
    return {loss, parts};
}

void validate_bundle(const DataBundle& data) {
    if (!data.features || !data.drivers || !data.geometry)
        throw DataError("data bundle is missing features, drivers or geometry");
    if (data.features->n_days > data.drivers->size())
        throw DataError("data bundle: features cover more days than the drivers");
    if (data.features->n_depths != data.geometry->n_layers())
        throw DataError("data bundle: feature depths do not match the geometry");
    data.observations.validate(data.features->n_depths, data.features->n_days);
}

double pooled_rmse(double sse, int n) { return n > 0 ? std::sqrt(sse / n) : 0.0; }

}  // namespace

std::pair<Tensor, LossParts> combined_loss(const ModelParams& params, const DataBundle& data,
                                           std::pair<int, int> window,
                                           const TrainingConfig& cfg) {
    validate_bundle(data);
    if (window.first < 0 || window.second > data.features->n_days ||
        window.first >= window.second)
        throw DataError("combined_loss: window outside the feature matrix");
    ChunkData chunk;
    chunk.window = window;
    chunk.features = data.features->window_tensor(window.first, window.second);
    chunk.obs = window_observations(data.observations, window);
    return chunk_loss(params, chunk, data, cfg);
}

TemperatureField predict_field(const ModelParams& params, const FeatureMatrix& features,
                               int day_begin, int day_end) {
    NoGradGuard ng;
    const int t_steps = day_end - day_begin;
    Tensor block = features.window_tensor(day_begin, day_end);
    auto preds = forward_window(block, t_steps, features.n_depths, params);
    TemperatureField field = TemperatureField::zeros(features.n_depths, t_steps);
    for (int t = 0; t < t_steps; ++t) {
        auto v = preds[t].values();
        for (int d = 0; d < features.n_depths; ++d) field.at(d, t) = v[d];
    }
    return field;
}

TrainResult train(const ModelParams& initial, const DataBundle& data,
                  const TrainingConfig& cfg, const AdamState* resume) {
    validate_bundle(data);
    if (cfg.epochs < 0) throw DataError("train: negative epoch count");
    const auto window = resolve_window(cfg, data.features->n_days);

    TrainResult result;
    result.params = initial.clone();
    auto named = result.params.named();
    result.adam = resume ? *resume : AdamState::init(named);

    // Hold out a trailing slice of the observed span for early stopping.
    ObservationSet train_obs = data.observations;
    std::pair<int, int> val_span{0, 0};
    if (cfg.early_stop_patience > 0 && !data.observations.obs.empty()) {
        int lo = data.features->n_days, hi = -1;
        for (const Observation& o : data.observations.obs) {
            lo = std::min(lo, o.time_index);
            hi = std::max(hi, o.time_index);
        }
        const int span = hi - lo + 1;
        const int val_days = std::max(1, static_cast<int>(std::ceil(span * cfg.validation_tail)));
        val_span = {hi - val_days + 1, hi + 1};
        ObservationSet tr;
        tr.source = data.observations.source;
        for (const Observation& o : data.observations.obs)
            if (o.time_index < val_span.first)
                tr.obs.push_back(o);
        if (!tr.obs.empty()) train_obs = std::move(tr);
        else val_span = {0, 0};  // too few observations to hold anything out
    }

    // Chunk windows, features and in-window observations are fixed across
    // epochs; build them once.
    std::vector<ChunkData> chunks;
    for (auto w : make_chunks(window.first, window.second, cfg.chunk_length, cfg.chunk_stride)) {
        ChunkData c;
        c.window = w;
        c.features = data.features->window_tensor(w.first, w.second);
        c.obs = window_observations(train_obs, w);
        chunks.push_back(std::move(c));
    }

    const auto maybe_checkpoint = [&](int epoch, bool final) {
        if (cfg.checkpoint_path.empty()) return;
        if (!final && (cfg.checkpoint_every <= 0 || epoch % cfg.checkpoint_every != 0)) return;
        Checkpoint cp;
        cp.params = result.params.clone();
        cp.stats = data.features->stats;
        cp.has_adam = true;
        cp.adam = result.adam;
        cp.epoch = epoch;
        save_checkpoint(cfg.checkpoint_path, cp);
    };

    double best_val = std::numeric_limits<double>::infinity();
    ModelParams best_params = result.params.clone();
    int waited = 0;
    bool early_stopped = false;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double sse = 0.0, ec_weighted = 0.0;
        int n_obs = 0, ec_days = 0;
        for (const ChunkData& chunk : chunks) {
            result.params.zero_grads();
            auto [loss, parts] = chunk_loss(result.params, chunk, data, cfg);
            if (!loss.defined()) continue;
            if (!std::isfinite(loss.item()))
                throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch) +
                                   "; last checkpoint retained");
            loss.backward();
            adam_step(named, result.adam, cfg.learning_rate);
            sse += parts.sse;
            n_obs += parts.n_obs;
            ec_weighted += parts.ec * parts.ice_free_days;
            ec_days += parts.ice_free_days;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.rmse = pooled_rmse(sse, n_obs);
        rec.ec = ec_days > 0 ? ec_weighted / ec_days : 0.0;
        rec.combined = rec.rmse + cfg.lambda_ec * rec.ec;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(rec);
        result.stopped_epoch = epoch;
        maybe_checkpoint(epoch, false);

        if (cfg.early_stop_patience > 0 && val_span.second > val_span.first) {
            TemperatureField val_field =
                predict_field(result.params, *data.features, val_span.first, val_span.second);
            double vsse = 0.0;
            int vn = 0;
            for (const Observation& o : data.observations.obs) {
                if (o.time_index < val_span.first || o.time_index >= val_span.second) continue;
                const double e = val_field.at(o.depth_index, o.time_index - val_span.first) -
                                 o.temp_c;
                vsse += e * e;
                ++vn;
            }
            const double val = pooled_rmse(vsse, vn);
            if (val + 1e-12 < best_val) {
                best_val = val;
                best_params = result.params.clone();
                waited = 0;
            } else if (++waited >= cfg.early_stop_patience) {
                early_stopped = true;
                break;
            }
        }
    }

    if (early_stopped) {
        result.params = std::move(best_params);
        named = result.params.named();
    }
    maybe_checkpoint(result.stopped_epoch, true);
    return result;
}

// -- checkpoints -----------------------------------------------------------------

namespace {

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape();
    j["values"] = std::vector<double>(t.values().begin(), t.values().end());
    return j;
}

Tensor tensor_from_json(const json& j, bool requires_grad) {
    std::vector<int> shape = j.at("shape").get<std::vector<int>>();
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    return Tensor::from_values(std::move(shape), std::move(values), requires_grad);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    json j;
    j["version"] = cp.version;
    j["hidden_size"] = cp.params.hidden_size;
    j["input_size"] = cp.params.input_size;
    json weights;
    for (const auto& [name, tensor] : cp.params.named()) weights[name] = tensor_to_json(tensor);
    j["weights"] = weights;
    j["norm_stats"] = {{"names", cp.stats.names},
                       {"mean", cp.stats.mean},
                       {"stddev", cp.stats.stddev},
                       {"dropped", cp.stats.dropped}};
    j["epoch"] = cp.epoch;
    j["meta"] = cp.meta;
    if (cp.has_adam) {
        j["adam"] = {{"step", cp.adam.step_count()},
                     {"beta1", cp.adam.config().beta1},
                     {"beta2", cp.adam.config().beta2},
                     {"epsilon", cp.adam.config().epsilon},
                     {"m", cp.adam.first_moments()},
                     {"v", cp.adam.second_moments()}};
    }
    // atomic write: temp file then rename
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write checkpoint: " + path);
        out << j.dump();
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    Checkpoint cp;
    cp.version = j.at("version").get<int>();
    if (cp.version != 1)
        throw DataError("unsupported checkpoint version " + std::to_string(cp.version));
    cp.params.hidden_size = j.at("hidden_size").get<int>();
    cp.params.input_size = j.at("input_size").get<int>();
    const json& w = j.at("weights");
    cp.params.w_xc = tensor_from_json(w.at("w_xc"), true);
    cp.params.w_hc = tensor_from_json(w.at("w_hc"), true);
    cp.params.b_c = tensor_from_json(w.at("b_c"), true);
    cp.params.w_xf = tensor_from_json(w.at("w_xf"), true);
    cp.params.w_hf = tensor_from_json(w.at("w_hf"), true);
    cp.params.b_f = tensor_from_json(w.at("b_f"), true);
    cp.params.w_xg = tensor_from_json(w.at("w_xg"), true);
    cp.params.w_hg = tensor_from_json(w.at("w_hg"), true);
    cp.params.b_g = tensor_from_json(w.at("b_g"), true);
    cp.params.w_xo = tensor_from_json(w.at("w_xo"), true);
    cp.params.w_ho = tensor_from_json(w.at("w_ho"), true);
    cp.params.b_o = tensor_from_json(w.at("b_o"), true);
    cp.params.w_y = tensor_from_json(w.at("w_y"), true);
    cp.params.b_y = tensor_from_json(w.at("b_y"), true);
    const json& ns = j.at("norm_stats");
    cp.stats.names = ns.at("names").get<std::vector<std::string>>();
    cp.stats.mean = ns.at("mean").get<std::vector<double>>();
    cp.stats.stddev = ns.at("stddev").get<std::vector<double>>();
    cp.stats.dropped = ns.at("dropped").get<std::vector<std::string>>();
    cp.epoch = j.at("epoch").get<int>();
    cp.meta = j.at("meta").get<std::map<std::string, std::string>>();
    if (j.contains("adam")) {
        const json& a = j.at("adam");
        AdamConfig ac;
        ac.beta1 = a.at("beta1").get<double>();
        ac.beta2 = a.at("beta2").get<double>();
        ac.epsilon = a.at("epsilon").get<double>();
        cp.adam = AdamState::restore(ac, a.at("step").get<long long>(),
                                     a.at("m").get<std::vector<std::vector<double>>>(),
                                     a.at("v").get<std::vector<std::vector<double>>>());
        cp.has_adam = true;
    }
    return cp;
}

// -- pretraining -------------------------------------------------------------------

ObservationSet dense_observations(const TemperatureField& field,
                                  std::pair<int, int> day_window) {
    return mint_profile_observations(field, 1, day_window, 1);
}

PretrainResult pretrain_then_finetune(const DataBundle& pretrain_data,
                                      const DataBundle& finetune_data,
                                      const TrainingConfig& pre_cfg,
                                      const TrainingConfig& fine_cfg) {
    validate_bundle(pretrain_data);
    validate_bundle(finetune_data);
    if (pretrain_data.features->n_features != finetune_data.features->n_features)
        throw DataError("pretrain/finetune feature widths differ; stats are incompatible");

    PretrainResult out;
    ModelParams init = ModelParams::init(pretrain_data.features->n_features,
                                         pre_cfg.hidden_size, pre_cfg.seed);
    TrainResult pre = train(init, pretrain_data, pre_cfg);
    out.pretrained = std::move(pre.params);
    out.pre_history = std::move(pre.history);

    if (finetune_data.observations.obs.empty() && !fine_cfg.ec_only) {
        out.finetuned = out.pretrained.clone();
        return out;
    }
    TrainResult fine = train(out.pretrained, finetune_data, fine_cfg);
    out.finetuned = std::move(fine.params);
    out.fine_history = std::move(fine.history);
    return out;
}

}  // namespace laketemp
