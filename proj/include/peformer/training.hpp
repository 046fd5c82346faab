#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/adam.hpp"
#include "peformer/baselines.hpp"
#include "peformer/composer.hpp"
#include "peformer/diff_objective.hpp"
#include "peformer/modules.hpp"
#include "peformer/pe_check.hpp"
#include "peformer/wireless.hpp"

namespace peformer {

// ---------------------------------------------------------------------------
// Stack execution
// ---------------------------------------------------------------------------

namespace detail {

inline SharedWeight resolve_shared(const ParamPool& pool, const std::string& prefix) {
    return SharedWeight{pool.at(prefix + ".u1"), pool.at(prefix + ".u2")};
}

}  // namespace detail

/// Run the attention/FFN layers of a model on one token batch (no head).
inline TokenBatch stack_forward(Graph& g, const ModelGraph& graph, TokenBatch tokens) {
    const ParamPool& pool = *graph.pool;
    if (graph.positional)
        tokens = tokens.with_reps(g.add(tokens.reps, positional_encoding(tokens.rows(), tokens.width())),
                                  tokens.feat_j);
    std::optional<TokenBatch> ctx;
    for (const auto& layer : graph.layers) {
        switch (layer.kind) {
            case ModuleKind::Att:
                ctx = att_forward(g, tokens, AttParams{pool.at(layer.slots.at("uk")), pool.at(layer.slots.at("uv"))});
                break;
            case ModuleKind::AttPs:
                ctx = att_ps_forward(g, tokens,
                                     AttPsParams{detail::resolve_shared(pool, layer.slots.at("uk")),
                                                 detail::resolve_shared(pool, layer.slots.at("uv"))});
                break;
            case ModuleKind::Natt:
                ctx = natt_forward(g, tokens,
                                   NattParams{pool.at(layer.slots.at("us_k")), pool.at(layer.slots.at("us_v")),
                                              pool.at(layer.slots.at("ud_k")), pool.at(layer.slots.at("ud_v"))});
                break;
            case ModuleKind::NattPs:
                ctx = natt_ps_forward(g, tokens,
                                      NattPsParams{detail::resolve_shared(pool, layer.slots.at("us_k")),
                                                   detail::resolve_shared(pool, layer.slots.at("us_v")),
                                                   detail::resolve_shared(pool, layer.slots.at("ud_k")),
                                                   detail::resolve_shared(pool, layer.slots.at("ud_v"))});
                break;
            case ModuleKind::Ffn:
            case ModuleKind::FfnPs: {
                TokenBatch context =
                    ctx ? *ctx : tokens.with_reps(zeros(tokens.reps->shape), tokens.feat_j);
                if (layer.kind == ModuleKind::Ffn)
                    tokens = ffn_forward(g, tokens, context, FfnParams{pool.at(layer.slots.at("uf"))}, layer.act);
                else
                    tokens = ffn_ps_forward(g, tokens, context,
                                            FfnPsParams{detail::resolve_shared(pool, layer.slots.at("uf"))},
                                            layer.act);
                ctx.reset();
                break;
            }
        }
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Task executors: tokens -> stack -> head -> feasible output
// ---------------------------------------------------------------------------

struct TaskOutput {
    std::optional<CxTensor> v;       // precoding tasks: [N_t, streams]
    std::vector<CxTensor> v_rb;      // wideband: per-RB [N_t, K]
    TensorPtr amplitudes;            // power allocation: [1, M*K]
    std::optional<CxTensor> estimate;  // estimation: [N_t, K]
};

namespace detail {

/// Split a [T, 2*N] token matrix into the complex [N, T] column layout.
inline CxTensor tokens_to_complex(Graph& g, const TensorPtr& reps, std::int64_t n) {
    const std::int64_t t = reps->shape[0];
    return {g.transpose(g.slice(reps, 0, 0, t, n)), g.transpose(g.slice(reps, 0, n, t, n))};
}

}  // namespace detail

inline TaskOutput forward_task(Graph& g, const ModelGraph& graph, const ProblemInstance& inst) {
    if (graph.task && *graph.task != inst.task)
        throw std::invalid_argument(std::string("forward_task: model is bound to ") + task_name(*graph.task) +
                                    " but instance is " + task_name(inst.task));
    const auto& sz = inst.sizes;
    auto tokens = build_tokens(inst);
    TaskOutput out;
    switch (inst.task) {
        case Task::MuMisoPrecoding:
        case Task::MuMimoPrecoding: {
            auto reps = stack_forward(g, graph, tokens.parts[0]).reps;
            auto feasible = power_normalize(g, reps, inst.p_t);
            out.v = detail::tokens_to_complex(g, feasible, sz.n_t);
            break;
        }
        case Task::CoordinatedBeamforming: {
            auto reps = stack_forward(g, graph, tokens.parts[0]).reps;  // [M*MK, 2*N_t]
            const std::int64_t s_total = sz.m * sz.k;
            // Block-diagonal head: keep the cell-m representation of each
            // cell-m token.
            std::vector<TensorPtr> rows;
            for (std::int64_t m = 0; m < sz.m; ++m)
                for (std::int64_t k = 0; k < sz.k; ++k)
                    rows.push_back(g.slice(reps, m * s_total + m * sz.k + k, 0, 1, 2 * sz.n_t));
            auto selected = g.concat(rows, 0);  // [M*K, 2*N_t]
            std::vector<std::pair<std::int64_t, std::int64_t>> groups;
            for (std::int64_t m = 0; m < sz.m; ++m) groups.push_back({m * sz.k, sz.k});
            auto feasible = power_normalize(g, selected, inst.p_t, groups);
            out.v = detail::tokens_to_complex(g, feasible, sz.n_t);
            break;
        }
        case Task::PowerAllocation: {
            auto reps = stack_forward(g, graph, tokens.parts[0]).reps;  // [MK, MK]
            const std::int64_t s_total = sz.m * sz.k;
            if (reps->shape != Shape{s_total, s_total})
                throw std::invalid_argument("forward_task: power allocation head expects a square token sheet");
            // Double-diagonal head: token t keeps only its own stream entry.
            auto diag_col = g.matmul(g.elementwise_mul(reps, identity(s_total)), full({s_total, 1}, 1.0));
            auto positive = g.softplus(diag_col);
            std::vector<std::pair<std::int64_t, std::int64_t>> groups;
            for (std::int64_t m = 0; m < sz.m; ++m) groups.push_back({m * sz.k, sz.k});
            auto feasible = power_normalize(g, positive, inst.p_t, groups);
            out.amplitudes = g.transpose(feasible);  // [1, M*K]
            break;
        }
        case Task::WidebandMuMisoPrecoding: {
            std::vector<TensorPtr> flat;
            for (const auto& part : tokens.parts) flat.push_back(stack_forward(g, graph, part).reps);
            auto scaled = power_normalize_joint(g, flat, inst.p_t);
            for (auto& reps : scaled) out.v_rb.push_back(detail::tokens_to_complex(g, reps, sz.n_t));
            break;
        }
        case Task::ChannelEstimation: {
            auto reps = stack_forward(g, graph, tokens.parts[0]).reps;
            out.estimate = detail::tokens_to_complex(g, reps, sz.n_t);
            break;
        }
    }
    return out;
}

/// Loss on the differentiable path: negative SE for the unsupervised tasks,
/// label MSE for estimation.
inline TensorPtr task_loss(Graph& g, const ModelGraph& graph, const ProblemInstance& inst) {
    auto out = forward_task(g, graph, inst);
    switch (inst.task) {
        case Task::MuMisoPrecoding:
        case Task::CoordinatedBeamforming:
            return g.scale(se_diff_miso(g, inst, *out.v), -1.0);
        case Task::MuMimoPrecoding:
            return g.scale(se_diff_mimo(g, inst, *out.v), -1.0);
        case Task::PowerAllocation:
            return g.scale(se_diff_power_allocation(g, inst, out.amplitudes), -1.0);
        case Task::WidebandMuMisoPrecoding:
            return g.scale(se_diff_wideband(g, inst, out.v_rb), -1.0);
        case Task::ChannelEstimation: {
            CxTensor diff{g.sub(out.estimate->re, cx_const(inst.label).re),
                          g.sub(out.estimate->im, cx_const(inst.label).im)};
            auto sq = g.add(g.sum(g.square(diff.re)), g.sum(g.square(diff.im)));
            return g.scale(sq, 1.0 / static_cast<double>(inst.sizes.n_t * inst.sizes.k));
        }
    }
    throw std::logic_error("task_loss: unreachable");
}

/// Sum of weighted per-task batch means; the homogeneous-batch trainer uses
/// one term per step, joint reporting uses the full sum.
inline TensorPtr weighted_total_loss(Graph& g, const std::map<Task, const ModelGraph*>& models,
                                     const std::map<Task, std::vector<ProblemInstance>>& batches,
                                     const std::map<Task, double>& weights) {
    TensorPtr total;
    for (const auto& [task, model] : models) {
        const auto& batch = batches.at(task);
        if (batch.empty()) continue;
        TensorPtr acc;
        for (const auto& inst : batch) {
            auto l = task_loss(g, *model, inst);
            acc = acc ? g.add(acc, l) : l;
        }
        auto mean = g.scale(acc, weights.at(task) / static_cast<double>(batch.size()));
        total = total ? g.add(total, mean) : mean;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Plain (non-graph) evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline ComplexMatrix read_cx(const CxTensor& t) {
    ComplexMatrix m(t.re->shape[0], t.re->shape[1]);
    m.re = t.re->data;
    m.im = t.im->data;
    return m;
}

}  // namespace detail

/// Model output in the task's complex layout (throwaway graph, values only).
inline ComplexMatrix model_output(const ModelGraph& graph, const ProblemInstance& inst) {
    Graph g;
    auto out = forward_task(g, graph, inst);
    switch (inst.task) {
        case Task::MuMisoPrecoding:
        case Task::MuMimoPrecoding:
        case Task::CoordinatedBeamforming:
            return detail::read_cx(*out.v);
        case Task::PowerAllocation: {
            ComplexMatrix v(1, out.amplitudes->shape[1]);
            v.re = out.amplitudes->data;
            return v;
        }
        case Task::WidebandMuMisoPrecoding: {
            const auto& sz = inst.sizes;
            ComplexMatrix v(sz.n_rb * sz.n_t, sz.k);
            for (std::int64_t rb = 0; rb < sz.n_rb; ++rb)
                v.set_block(rb * sz.n_t, 0, detail::read_cx(out.v_rb[static_cast<std::size_t>(rb)]));
            return v;
        }
        case Task::ChannelEstimation:
            return detail::read_cx(*out.estimate);
    }
    throw std::logic_error("model_output: unreachable");
}

inline double model_se(const ModelGraph& graph, const ProblemInstance& inst) {
    return se_objective(inst, model_output(graph, inst));
}

inline double model_mse(const ModelGraph& graph, const ProblemInstance& inst) {
    return estimation_mse(model_output(graph, inst), inst.label);
}

// ---------------------------------------------------------------------------
// Oracle cache and SE ratio
// ---------------------------------------------------------------------------

/// WMMSE (or LMMSE) reference values keyed by instance seed.
struct OracleCache {
    Task task = Task::MuMisoPrecoding;
    std::map<std::uint64_t, double> values;

    double at(std::uint64_t seed) const {
        auto it = values.find(seed);
        if (it == values.end())
            throw std::invalid_argument("oracle cache: no value for instance seed " + std::to_string(seed));
        return it->second;
    }
};

inline OracleCache compute_wmmse_oracle(const std::vector<ProblemInstance>& instances,
                                        const WmmseConfig& cfg = {}) {
    OracleCache cache;
    if (!instances.empty()) cache.task = instances.front().task;
    for (const auto& inst : instances) cache.values[inst.seed] = wmmse(inst, cfg).se;
    return cache;
}

/// Ratio of means: mean model SE over mean oracle SE.
inline double se_ratio(const ModelGraph& graph, const std::vector<ProblemInstance>& instances,
                       const OracleCache& oracle) {
    if (instances.empty()) throw std::invalid_argument("se_ratio: empty test set");
    double model_sum = 0.0, oracle_sum = 0.0;
    for (const auto& inst : instances) {
        model_sum += model_se(graph, inst);
        oracle_sum += oracle.at(inst.seed);
    }
    return model_sum / oracle_sum;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::vector<Task> tasks;
    std::int64_t samples_per_task = 100;
    std::int64_t batch_size = 32;
    std::int64_t epochs = 200;
    double learning_rate = 0.002;
    std::uint64_t seed = 0;
    std::map<Task, double> loss_weights;  // empty: reciprocal of initial loss magnitude
};

struct TraceRow {
    std::int64_t epoch;
    Task task;
    double loss;
};

struct TrainResult {
    std::vector<TraceRow> trace;
    std::map<Task, double> loss_weights_used;
};

/// Adam with per-parameter moments so that shared pools can be updated one
/// task at a time; untouched parameters keep their state and values.
class PoolAdam {
public:
    explicit PoolAdam(double lr) : lr_(lr) {}

    void step(const std::vector<std::string>& names, const ParamPool& pool) {
        for (const auto& name : names) {
            auto [it, inserted] = states_.try_emplace(name, AdamState(lr_));
            adam_step({pool.at(name)}, it->second);
        }
    }

private:
    double lr_;
    std::map<std::string, AdamState> states_;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::int64_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

inline double initial_loss_magnitude(const ModelGraph& graph, const std::vector<ProblemInstance>& data,
                                     std::int64_t batch_size) {
    Graph g;
    TensorPtr acc;
    const std::size_t n = std::min<std::size_t>(data.size(), static_cast<std::size_t>(batch_size));
    for (std::size_t i = 0; i < n; ++i) {
        auto l = task_loss(g, graph, data[i]);
        acc = acc ? g.add(acc, l) : l;
    }
    return std::abs(acc->data[0]) / static_cast<double>(n);
}

}  // namespace detail

/// Train one or more task graphs over a shared pool. Tasks are cycled in a
/// fixed round-robin with homogeneous batches; sample order within a task is
/// reshuffled per epoch from the run seed. Deterministic end to end.
inline TrainResult train(std::map<Task, ModelGraph>& graphs,
                         const std::map<Task, std::vector<ProblemInstance>>& data, const TrainConfig& cfg,
                         PoolAdam* optimizer = nullptr) {
    for (Task task : cfg.tasks) {
        if (!graphs.count(task))
            throw std::invalid_argument(std::string("train: no model graph for task ") + task_name(task));
        if (!data.count(task) || data.at(task).empty())
            throw std::invalid_argument(std::string("train: no training data for task ") + task_name(task));
    }

    TrainResult result;
    for (Task task : cfg.tasks) {
        auto it = cfg.loss_weights.find(task);
        if (it != cfg.loss_weights.end()) {
            if (it->second <= 0.0) throw std::invalid_argument("train: loss weights must be positive");
            result.loss_weights_used[task] = it->second;
        } else {
            const double mag = detail::initial_loss_magnitude(graphs.at(task), data.at(task), cfg.batch_size);
            result.loss_weights_used[task] = 1.0 / (mag + 1e-9);
        }
    }

    PoolAdam local_adam(cfg.learning_rate);
    PoolAdam& adam = optimizer ? *optimizer : local_adam;

    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (Task task : cfg.tasks) {
            const auto& graph = graphs.at(task);
            const auto& samples = data.at(task);
            Rng shuffle_rng(derive_seed(cfg.seed, std::string("epoch/") + std::to_string(epoch) + "/" +
                                                      task_name(task)));
            double epoch_loss = 0.0;
            std::int64_t batches_done = 0;
            for (const auto& batch : detail::make_batches(samples.size(), cfg.batch_size, shuffle_rng)) {
                Graph g;
                TensorPtr acc;
                for (std::size_t idx : batch) {
                    auto l = task_loss(g, graph, samples[idx]);
                    acc = acc ? g.add(acc, l) : l;
                }
                auto loss = g.scale(acc, result.loss_weights_used.at(task) / static_cast<double>(batch.size()));
                if (!std::isfinite(loss->data[0])) {
                    std::ostringstream os;
                    os << "train: non-finite loss at epoch " << epoch << " task " << task_name(task)
                       << " batch " << batches_done << " (raw "
                       << acc->data[0] / static_cast<double>(batch.size()) << ")";
                    throw std::runtime_error(os.str());
                }
                g.backward(loss);
                adam.step(graph.param_names(), *graph.pool);
                epoch_loss += loss->data[0];
                ++batches_done;
            }
            result.trace.push_back({epoch, task, epoch_loss / static_cast<double>(batches_done)});
        }
    }
    return result;
}

/// Fine-tune only the modules used by one task of a shared pool; reports the
/// first epoch at which the SE ratio on the probe set reaches the target
/// (epoch 0 means the pre-trained pool already meets it). -1 if never.
struct FineTuneResult {
    std::int64_t epochs_to_target = -1;
    std::vector<double> ratio_per_epoch;
    TrainResult inner;
};

inline FineTuneResult fine_tune(MoFormer& mo, Task task, const std::vector<ProblemInstance>& train_data,
                                const std::vector<ProblemInstance>& probe_data, const OracleCache& oracle,
                                double target_ratio, const TrainConfig& cfg) {
    if (!mo.graphs.count(task))
        throw std::invalid_argument(std::string("fine_tune: pool has no modules for task ") + task_name(task));
    FineTuneResult result;
    const double start_ratio = se_ratio(mo.graphs.at(task), probe_data, oracle);
    result.ratio_per_epoch.push_back(start_ratio);
    if (start_ratio >= target_ratio) {
        result.epochs_to_target = 0;
        return result;
    }
    PoolAdam adam(cfg.learning_rate);
    std::map<Task, std::vector<ProblemInstance>> data{{task, train_data}};
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        TrainConfig one = cfg;
        one.tasks = {task};
        one.epochs = 1;
        one.seed = derive_seed(cfg.seed, std::string("fine_tune/") + std::to_string(epoch));
        one.loss_weights = {{task, 1.0}};
        auto tr = train(mo.graphs, data, one, &adam);
        result.inner.trace.insert(result.inner.trace.end(), tr.trace.begin(), tr.trace.end());
        const double ratio = se_ratio(mo.graphs.at(task), probe_data, oracle);
        result.ratio_per_epoch.push_back(ratio);
        if (ratio >= target_ratio && result.epochs_to_target < 0) {
            result.epochs_to_target = epoch + 1;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Generalization evaluation
// ---------------------------------------------------------------------------

enum class EvalAxis { NT, K, NR, M, Snr, ChannelModel };

inline const char* eval_axis_name(EvalAxis a) {
    switch (a) {
        case EvalAxis::NT: return "n_t";
        case EvalAxis::K: return "k";
        case EvalAxis::NR: return "n_r";
        case EvalAxis::M: return "m";
        case EvalAxis::Snr: return "snr_db";
        case EvalAxis::ChannelModel: return "channel_model";
    }
    return "?";
}

struct EvalReport {
    Task task = Task::MuMisoPrecoding;
    std::string metric_name = "se_ratio";
    double in_distribution = 0.0;
    std::vector<std::pair<std::string, double>> per_point;
    std::int64_t parameter_count = 0;
    double wall_clock_sec = 0.0;
    std::string config_echo;
    std::uint64_t seed = 0;

    std::string table() const {
        std::ostringstream os;
        os << "task=" << task_name(task) << " metric=" << metric_name
           << " in_distribution=" << in_distribution << "\n";
        for (const auto& [label, value] : per_point) os << "  " << label << "  " << value << "\n";
        return os.str();
    }
};

/// Evaluate one trained model across a grid along a single axis, with fresh
/// token batches and WMMSE oracles per grid point.
inline EvalReport generalization_eval(const ModelGraph& graph, Task task, const ChannelConfig& base_cfg,
                                      const SizeSpec& base_sizes, EvalAxis axis,
                                      const std::vector<double>& grid, std::int64_t n_eval,
                                      std::uint64_t seed, double in_distribution_metric,
                                      const WmmseConfig& wcfg = {}) {
    if (graph.dense_family && (axis == EvalAxis::NT || axis == EvalAxis::M))
        throw std::invalid_argument(
            "generalization_eval: dense attention widths are fixed in N_t; this model cannot change axis " +
            std::string(eval_axis_name(axis)));
    const auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.task = task;
    report.seed = seed;
    report.parameter_count = graph.parameter_count();
    report.in_distribution = in_distribution_metric;
    report.metric_name = task == Task::ChannelEstimation ? "mse" : "se_ratio";

    for (double value : grid) {
        SizeSpec sz = base_sizes;
        ChannelConfig cfg = base_cfg;
        std::string label = std::string(eval_axis_name(axis)) + "=";
        switch (axis) {
            case EvalAxis::NT: sz.n_t = static_cast<std::int64_t>(value); break;
            case EvalAxis::K: sz.k = static_cast<std::int64_t>(value); break;
            case EvalAxis::NR: sz.n_r = static_cast<std::int64_t>(value); break;
            case EvalAxis::M: sz.m = static_cast<std::int64_t>(value); break;
            case EvalAxis::Snr: cfg.snr_db = value; break;
            case EvalAxis::ChannelModel:
                cfg.model = value == 0.0 ? ChannelConfig::Model::SalehValenzuela : ChannelConfig::Model::Rayleigh;
                break;
        }
        label += axis == EvalAxis::ChannelModel ? (value == 0.0 ? "sv" : "rayleigh")
                                                : std::to_string(value);

        std::vector<ProblemInstance> instances;
        for (std::int64_t i = 0; i < n_eval; ++i)
            instances.push_back(sample_instance(task, cfg, sz, derive_seed(seed, label + "/" + std::to_string(i))));
        double metric;
        if (task == Task::ChannelEstimation) {
            double acc = 0.0;
            for (const auto& inst : instances) acc += model_mse(graph, inst);
            metric = acc / static_cast<double>(instances.size());
        } else {
            metric = se_ratio(graph, instances, compute_wmmse_oracle(instances, wcfg));
        }
        report.per_point.push_back({label, metric});
    }
    report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Equivariance suites
// ---------------------------------------------------------------------------

struct SuiteResult {
    bool pass = false;
    double worst_deviation = 0.0;
    std::string note;
};

/// One sampled transformation: how to transform the stack input and the
/// matching expected transformation of the stack output.
struct TokenTransform {
    std::function<TokenBatch(const TokenBatch&)> input;
    std::function<TokenBatch(const TokenBatch&)> output;
};

namespace detail {

inline PermutationSpec sample_width_perm(const TokenBatch& b, Rng& rng) {
    return sample(SetStructure::normal(b.n_block), rng.next_u64());
}

/// Transformation sampler for a claimed property over the batch's layout.
inline TokenTransform sample_transform(PEProperty claimed, const TokenBatch& batch, Rng& rng) {
    TokenTransform t;
    switch (claimed) {
        case PEProperty::PE1D: {
            auto pi = sample(SetStructure::normal(batch.n_tokens), rng.next_u64());
            t.input = t.output = [pi](const TokenBatch& b) { return permute_tokens(b, pi); };
            break;
        }
        case PEProperty::Nested1D: {
            auto omega = sample(batch.token_structure, rng.next_u64());
            t.input = t.output = [omega](const TokenBatch& b) { return permute_tokens(b, omega); };
            break;
        }
        case PEProperty::Ind2D: {
            auto pa = sample_width_perm(batch, rng);
            auto pb = sample(SetStructure::normal(batch.n_tokens), rng.next_u64());
            t.input = t.output = [pa, pb](const TokenBatch& b) {
                return permute_width_blocks(permute_tokens(b, pb), pa);
            };
            break;
        }
        case PEProperty::Joint2D: {
            if (batch.n_block != batch.n_tokens)
                throw std::invalid_argument("joint 2D transform needs n_block == n_tokens");
            auto pi = sample(SetStructure::normal(batch.n_tokens), rng.next_u64());
            t.input = t.output = [pi](const TokenBatch& b) {
                return permute_width_blocks(permute_tokens(b, pi), pi);
            };
            break;
        }
        case PEProperty::PartialNested2D: {
            auto pa = sample_width_perm(batch, rng);
            auto omega = sample(batch.token_structure, rng.next_u64());
            t.input = t.output = [pa, omega](const TokenBatch& b) {
                return permute_width_blocks(permute_tokens(b, omega), pa);
            };
            break;
        }
        case PEProperty::NestedJoint2D: {
            if (batch.n_block != batch.n_tokens)
                throw std::invalid_argument("nested joint 2D transform needs n_block == n_tokens");
            auto omega = sample(batch.token_structure, rng.next_u64());
            t.input = t.output = [omega](const TokenBatch& b) {
                return permute_width_blocks(permute_tokens(b, omega), omega);
            };
            break;
        }
        case PEProperty::NestedInd2D:
        case PEProperty::NestedPartialJoint2D: {
            // Width axis nested over (reps, per-rep blocks); token axis
            // nested. For the partial-joint property the subset permutations
            // of the two axes coincide.
            const std::int64_t reps = batch.n_reps;
            auto omega_b = sample(batch.token_structure, rng.next_u64());
            std::vector<std::int64_t> rep_source;
            if (claimed == PEProperty::NestedPartialJoint2D) {
                rep_source = omega_b.subset_perm;
            } else {
                auto pi = sample(SetStructure::normal(reps), rng.next_u64());
                rep_source = pi.source_map();
            }
            std::vector<PermutationSpec> width_per_rep;
            for (std::int64_t r = 0; r < reps; ++r)
                width_per_rep.push_back(sample(SetStructure::normal(batch.n_block), rng.next_u64()));
            t.input = t.output = [omega_b, rep_source, width_per_rep](const TokenBatch& b) {
                // Permute reps, permute each (new) rep's width by the spec of
                // its source rep, then permute tokens.
                auto moved = permute_reps(b, rep_source);
                std::vector<PermutationSpec> per_rep;
                for (std::int64_t r = 0; r < b.n_reps; ++r)
                    per_rep.push_back(width_per_rep[static_cast<std::size_t>(rep_source[static_cast<std::size_t>(r)])]);
                return permute_tokens(permute_width_blocks_per_rep(moved, per_rep), omega_b);
            };
            break;
        }
        default:
            throw std::invalid_argument(std::string("no transform sampler for property ") +
                                        pe_property_name(claimed));
    }
    return t;
}

}  // namespace detail

/// Check a token-to-token map against a claimed property: `trials` sampled
/// transformations, max relative deviation below tol. With expect_violation
/// the suite instead searches for a counterexample and succeeds on finding
/// one.
inline SuiteResult equivariance_suite(const std::function<TokenBatch(const TokenBatch&)>& fn,
                                      PEProperty claimed, const TokenBatch& prototype, int trials,
                                      double tol, std::uint64_t seed, bool expect_violation = false) {
    Rng rng(derive_seed(seed, std::string("suite/") + pe_property_name(claimed)));
    SuiteResult res;
    auto base_out = fn(prototype);
    for (int trial = 0; trial < trials; ++trial) {
        auto t = detail::sample_transform(claimed, prototype, rng);
        auto got = fn(t.input(prototype));
        auto want = t.output(base_out);
        const double dev = rel_deviation(got.reps, want.reps);
        res.worst_deviation = std::max(res.worst_deviation, dev);
        if (expect_violation && dev > 1e-6) {
            res.pass = true;
            res.note = "counterexample found at trial " + std::to_string(trial);
            return res;
        }
    }
    if (expect_violation) {
        res.pass = false;
        res.note = "no violating transformation found";
    } else {
        res.pass = res.worst_deviation < tol;
    }
    return res;
}

}  // namespace peformer
