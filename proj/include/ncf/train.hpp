#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/cost.hpp"
#include "ncf/data.hpp"
#include "ncf/losses.hpp"
#include "ncf/model.hpp"
#include "ncf/rng.hpp"

namespace ncf {

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

/// One Adam update with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& state, double lr) {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_step: size mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

struct TrainConfig {
    int epochs = 0;
    double lr = 1e-3;
    double lr_final = 0.0;  // >0 turns on cosine decay from lr down to this value
    std::size_t n_colloc = 1000;
    std::size_t n_mmd = 750;
    double tf = 1.0;
    double margin = 0.05;  // collocation box padding around the pooled samples
    std::uint64_t seed = 0;
    LossWeights weights;
    bool class_conditional = false;
    BackwardTimeMode backward_mode = BackwardTimeMode::Horizon;
    int eval_every = 0;  // 0 disables the callback
};

/// Learning rate for one epoch: flat, or cosine-decayed when lr_final is set.
inline double epoch_lr(const TrainConfig& cfg, int epoch) {
    if (cfg.lr_final <= 0.0 || cfg.epochs <= 1) return cfg.lr;
    const double pi = 3.14159265358979323846;
    const double s = 0.5 * (1.0 + std::cos(pi * epoch / (cfg.epochs - 1)));
    return cfg.lr_final + (cfg.lr - cfg.lr_final) * s;
}

/// Architecture plus schedule defaults for the two built-in experiment scales.
struct Preset {
    std::vector<int> hidden;
    Activation act;
    bool quad_input = false;
    double kappa = 0.0;
    TrainConfig cfg;
};

inline Preset preset_2d() {
    Preset p;
    p.hidden = {64, 64, 64, 64, 64};
    p.act = {Act::Softplus, 100.0};
    p.quad_input = false;
    p.cfg.lr = 1e-3;
    p.cfg.n_colloc = 1000;
    p.cfg.n_mmd = 750;
    p.cfg.epochs = 2000;
    return p;
}

// A gently saturating softplus keeps the potential smooth enough that the map
// cannot split into locally reflected patches (a sharp activation permits
// those, and they match the target distribution while breaking map
// optimality), yet sharp enough to fit strongly expanding pairs.
inline Preset preset_gaussian(int d) {
    Preset p;
    p.hidden = {std::max(2 * d, 64), std::max(2 * d, 64), std::max(d, 32)};
    p.act = {Act::Softplus, 3.0};
    p.quad_input = true;
    p.cfg.lr = 1e-4;
    p.cfg.n_colloc = 1000;
    p.cfg.n_mmd = 2000;
    p.cfg.epochs = 2000;
    return p;
}

/// Raised when the loss explodes or stops being finite.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Without-replacement batch index stream; reshuffles once the pool runs dry.
class PoolSampler {
public:
    PoolSampler(std::size_t n, Rng& rng) : rng_(rng), idx_(n) {
        for (std::size_t i = 0; i < n; ++i) idx_[i] = i;
        rng_.shuffle(idx_);
    }

    std::vector<std::size_t> draw(std::size_t k) {
        if (k > idx_.size()) k = idx_.size();
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            if (cursor_ == idx_.size()) {
                rng_.shuffle(idx_);
                cursor_ = 0;
            }
            out.push_back(idx_[cursor_++]);
        }
        return out;
    }

private:
    Rng& rng_;
    std::vector<std::size_t> idx_;
    std::size_t cursor_ = 0;
};

inline SampleSet take_rows(const SampleSet& s, const std::vector<std::size_t>& idx) {
    SampleSet out;
    out.dim = s.dim;
    out.norm = s.norm;
    out.points.resize(idx.size() * static_cast<std::size_t>(s.dim));
    if (!s.labels.empty()) out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int k = 0; k < s.dim; ++k)
            out.points[i * static_cast<std::size_t>(s.dim) + static_cast<std::size_t>(k)] =
                s.row(idx[i])[k];
        if (!s.labels.empty()) out.labels[i] = s.labels[idx[i]];
    }
    return out;
}

}  // namespace detail

struct FitResult {
    std::vector<LossValues> history;  // one entry per epoch
    int rejected_steps = 0;
};

using EvalCallback = std::function<void(int epoch, const MlpPotential& model)>;

/// Full training loop. src/tgt must already be in the training frame; the
/// collocation box is the padded bounding box of both sets. Non-finite
/// gradients reject the step; a non-finite or exploding loss aborts.
inline FitResult fit(MlpPotential& model, const SampleSet& src, const SampleSet& tgt,
                     const CostModel& cost, const TrainConfig& cfg,
                     const EvalCallback& on_eval = nullptr) {
    if (src.dim != model.dim || tgt.dim != model.dim)
        throw std::invalid_argument("fit: sample dimension mismatch");
    if (src.size() == 0 || tgt.size() == 0) throw std::invalid_argument("fit: empty sample set");
    check_weights(cfg.weights);
    if (cfg.class_conditional && (src.labels.empty() || tgt.labels.empty()))
        throw std::invalid_argument("fit: class-conditional training needs labeled sets");

    std::vector<double> lo, hi;
    bounding_box({&src, &tgt}, cfg.margin, lo, hi);

    Rng rng(cfg.seed);
    detail::PoolSampler src_pool(src.size(), rng);
    detail::PoolSampler tgt_pool(tgt.size(), rng);

    AdamState adam;
    Tape tape;
    FitResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::vector<double> grad(model.params.size());
    const int d = model.dim;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        TrainBatch batch;
        batch.colloc.dim = d;
        batch.colloc.x.resize(cfg.n_colloc * static_cast<std::size_t>(d));
        batch.colloc.t.resize(cfg.n_colloc);
        for (std::size_t i = 0; i < cfg.n_colloc; ++i) {
            for (int k = 0; k < d; ++k)
                batch.colloc.x[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
                    rng.uniform(lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)]);
            batch.colloc.t[i] = rng.uniform(0.0, cfg.tf);
        }
        batch.src = detail::take_rows(src, src_pool.draw(cfg.n_mmd));
        batch.tgt = detail::take_rows(tgt, tgt_pool.draw(cfg.n_mmd));

        tape.clear();
        const int pbase = tape.constants(model.params.data(), static_cast<int>(model.params.size()));
        const TapeLoss slots = emit_total_loss(tape, model, pbase, cost, batch, cfg.weights,
                                               cfg.tf, cfg.class_conditional, cfg.backward_mode);

        LossValues vals;
        vals.total = tape.val(slots.total);
        vals.hj_f = slots.hj_f >= 0 ? tape.val(slots.hj_f) : 0.0;
        vals.hj_b = slots.hj_b >= 0 ? tape.val(slots.hj_b) : 0.0;
        vals.mmd_f = slots.mmd_f >= 0 ? tape.val(slots.mmd_f) : 0.0;
        vals.mmd_b = slots.mmd_b >= 0 ? tape.val(slots.mmd_b) : 0.0;

        if (!std::isfinite(vals.total) || vals.total > 1e6) {
            const std::string op = tape.first_non_finite();
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                                  ": loss " + std::to_string(vals.total) +
                                  (op.empty() ? "" : " (first bad op: " + op + ")"));
        }

        tape.backward(slots.total);
        bool grads_ok = true;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] = tape.adj(pbase + static_cast<int>(i));
            if (!std::isfinite(grad[i])) grads_ok = false;
        }
        if (grads_ok) {
            adam_step(model.params, grad, adam, epoch_lr(cfg, epoch));
        } else {
            ++result.rejected_steps;
            std::cerr << "fit: non-finite gradient at epoch " << epoch << ", step rejected\n";
        }

        result.history.push_back(vals);
        if (on_eval && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)
            on_eval(epoch + 1, model);
    }
    return result;
}

inline void save_loss_history(const std::string& path, const std::vector<LossValues>& history) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,loss_total,loss_hj_f,loss_hj_b,loss_mmd_f,loss_mmd_b\n";
    for (std::size_t i = 0; i < history.size(); ++i)
        f << i << "," << format_full(history[i].total) << "," << format_full(history[i].hj_f) << ","
          << format_full(history[i].hj_b) << "," << format_full(history[i].mmd_f) << ","
          << format_full(history[i].mmd_b) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

// ---- checkpoints --------------------------------------------------------------

struct Checkpoint {
    MlpPotential model;
    double tf = 1.0;
    std::string cost = "quadratic";
    Normalization src_norm, tgt_norm;
    std::map<std::string, std::string> extra;
};

namespace detail {

inline std::string join_csv(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_full(v[i]);
    return s;
}

inline std::vector<double> split_csv(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::strtod(cell.c_str(), nullptr));
    return out;
}

inline std::string arch_line(const MlpPotential& m) {
    std::string hidden;
    for (std::size_t i = 0; i < m.hidden.size(); ++i)
        hidden += (i ? "," : "") + std::to_string(m.hidden[i]);
    return "mlp dim=" + std::to_string(m.dim) + " hidden=" + hidden +
           " act=" + (m.act.kind == Act::Tanh ? "tanh" : "softplus") +
           " beta=" + format_full(m.act.beta) + " kappa=" + format_full(m.kappa) +
           " quad=" + (m.quad_input ? "1" : "0");
}

inline MlpPotential parse_arch_line(const std::string& line) {
    std::stringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "mlp") throw std::runtime_error("checkpoint: unknown architecture '" + tag + "'");
    MlpPotential m;
    std::string field;
    while (ss >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad field " + field);
        const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "dim") m.dim = std::stoi(val);
        else if (key == "hidden") {
            std::stringstream hs(val);
            std::string w;
            while (std::getline(hs, w, ',')) m.hidden.push_back(std::stoi(w));
        } else if (key == "act") m.act.kind = val == "tanh" ? Act::Tanh : Act::Softplus;
        else if (key == "beta") m.act.beta = std::strtod(val.c_str(), nullptr);
        else if (key == "kappa") m.kappa = std::strtod(val.c_str(), nullptr);
        else if (key == "quad") m.quad_input = val == "1";
        else throw std::runtime_error("checkpoint: unknown architecture field " + key);
    }
    return m;
}

}  // namespace detail

/// Plain-text model file: magic, architecture, one parameter per line at full
/// precision, then key=value metadata.
inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "NCF/1\n" << detail::arch_line(ck.model) << "\n";
    for (double p : ck.model.params) f << format_full(p) << "\n";
    f << "tf=" << format_full(ck.tf) << "\n";
    f << "cost=" << ck.cost << "\n";
    f << "src_shift=" << detail::join_csv(ck.src_norm.shift) << "\n";
    f << "src_scale=" << detail::join_csv(ck.src_norm.scale) << "\n";
    f << "tgt_shift=" << detail::join_csv(ck.tgt_norm.shift) << "\n";
    f << "tgt_scale=" << detail::join_csv(ck.tgt_norm.scale) << "\n";
    for (const auto& [k, v] : ck.extra) f << k << "=" << v << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line) || line != "NCF/1")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint: missing architecture");
    Checkpoint ck;
    ck.model = detail::parse_arch_line(line);
    const std::size_t n = ck.model.param_count();
    ck.model.params.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(f, line)) throw std::runtime_error("checkpoint: truncated parameters");
        ck.model.params.push_back(std::strtod(line.c_str(), nullptr));
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: stray line '" + line + "'");
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "tf") ck.tf = std::strtod(val.c_str(), nullptr);
        else if (key == "cost") ck.cost = val;
        else if (key == "src_shift") ck.src_norm.shift = detail::split_csv(val);
        else if (key == "src_scale") ck.src_norm.scale = detail::split_csv(val);
        else if (key == "tgt_shift") ck.tgt_norm.shift = detail::split_csv(val);
        else if (key == "tgt_scale") ck.tgt_norm.scale = detail::split_csv(val);
        else ck.extra[key] = val;
    }
    return ck;
}

inline CostModel cost_from_name(const std::string& name) {
    if (name == "quadratic") return CostModel::quadratic();
    if (name.rfind("pnorm:", 0) == 0)
        return CostModel::p_norm(std::strtod(name.c_str() + 6, nullptr));
    throw std::invalid_argument("unknown cost: " + name);
}

inline std::string cost_name(const CostModel& c) {
    if (c.kind() == CostModel::Kind::Quadratic) return "quadratic";
    return "pnorm:" + format_full(c.p());
}

}  // namespace ncf
