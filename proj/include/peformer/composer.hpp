#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "peformer/modules.hpp"
#include "peformer/rng.hpp"
#include "peformer/tensor.hpp"
#include "peformer/wireless.hpp"

namespace peformer {

enum class PEProperty {
    NonPE,
    PE1D,
    Nested1D,
    Ind2D,
    Joint2D,
    PartialNested2D,
    NestedInd2D,
    NestedPartialJoint2D,
    NestedJoint2D,
    Ind3D,
    PartialNested3D,
};

inline constexpr int kNumProperties = 11;

inline const char* pe_property_name(PEProperty p) {
    switch (p) {
        case PEProperty::NonPE: return "non_pe";
        case PEProperty::PE1D: return "1d_pe";
        case PEProperty::Nested1D: return "nested_1d_pe";
        case PEProperty::Ind2D: return "ind_2d_pe";
        case PEProperty::Joint2D: return "joint_2d_pe";
        case PEProperty::PartialNested2D: return "partial_nested_2d_pe";
        case PEProperty::NestedInd2D: return "nested_ind_2d_pe";
        case PEProperty::NestedPartialJoint2D: return "nested_partial_joint_2d_pe";
        case PEProperty::NestedJoint2D: return "nested_joint_2d_pe";
        case PEProperty::Ind3D: return "ind_3d_pe";
        case PEProperty::PartialNested3D: return "partial_nested_3d_pe";
    }
    return "?";
}

/// F_a is contained in F_b: reflexive-transitive closure of the three
/// inclusion chains. Pairs outside the chains are incomparable.
inline bool hypothesis_leq(PEProperty a, PEProperty b) {
    static const auto closure = [] {
        std::array<std::array<bool, kNumProperties>, kNumProperties> leq{};
        auto idx = [](PEProperty p) { return static_cast<std::size_t>(p); };
        for (int i = 0; i < kNumProperties; ++i) leq[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = true;
        const std::vector<std::pair<PEProperty, PEProperty>> edges = {
            {PEProperty::Ind3D, PEProperty::Ind2D},
            {PEProperty::Ind2D, PEProperty::PartialNested2D},
            {PEProperty::PartialNested2D, PEProperty::NestedInd2D},
            {PEProperty::NestedInd2D, PEProperty::PE1D},
            {PEProperty::PE1D, PEProperty::Nested1D},
            {PEProperty::Ind2D, PEProperty::Joint2D},
            {PEProperty::Joint2D, PEProperty::NestedPartialJoint2D},
            {PEProperty::NestedPartialJoint2D, PEProperty::NestedJoint2D},
            {PEProperty::NestedInd2D, PEProperty::NestedPartialJoint2D},
        };
        for (const auto& [a0, b0] : edges) leq[idx(a0)][idx(b0)] = true;
        for (int k = 0; k < kNumProperties; ++k)
            for (int i = 0; i < kNumProperties; ++i)
                for (int j = 0; j < kNumProperties; ++j)
                    if (leq[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] &&
                        leq[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])
                        leq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
        return leq;
    }();
    return closure[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

/// Wireless policies and their PE properties; lookup is total over the six
/// implemented task tags and over the listed policy names.
inline const std::vector<std::pair<std::string, PEProperty>>& policy_table() {
    static const std::vector<std::pair<std::string, PEProperty>> rows = {
        {"SU-MISO channel prediction, estimation", PEProperty::NonPE},
        {"MU-MIMO / Wideband SU-MISO channel prediction, estimation", PEProperty::PE1D},
        {"Bandwidth allocation", PEProperty::PE1D},
        {"MU-MISO channel estimation", PEProperty::PE1D},
        {"Multi-cast beamforming", PEProperty::Nested1D},
        {"MU-MISO precoding", PEProperty::Ind2D},
        {"User association", PEProperty::Ind2D},
        {"Signal detection", PEProperty::Ind2D},
        {"MU-MIMO precoding", PEProperty::PartialNested2D},
        {"Cell-free / Cooperative MU-MISO beamforming", PEProperty::PartialNested2D},
        {"D2D power control", PEProperty::Joint2D},
        {"Link scheduling", PEProperty::Joint2D},
        {"Cell-free / Cooperative MU-MIMO beamforming", PEProperty::NestedInd2D},
        {"CB", PEProperty::NestedPartialJoint2D},
        {"Multi-cell power allocation", PEProperty::NestedJoint2D},
        {"IRS-aided / Wideband MU-MISO precoding", PEProperty::Ind3D},
        {"Hybrid MU-MISO precoding", PEProperty::Ind3D},
        {"Joint beamforming and sensing", PEProperty::Ind3D},
        {"IRS-aided / Wideband MU-MIMO precoding", PEProperty::PartialNested3D},
        {"Partially-connected hybrid precoding", PEProperty::PartialNested3D},
    };
    return rows;
}

inline PEProperty task_property(Task task) {
    switch (task) {
        case Task::MuMisoPrecoding: return PEProperty::Ind2D;
        case Task::MuMimoPrecoding: return PEProperty::PartialNested2D;
        case Task::CoordinatedBeamforming: return PEProperty::NestedPartialJoint2D;
        case Task::PowerAllocation: return PEProperty::NestedJoint2D;
        case Task::WidebandMuMisoPrecoding: return PEProperty::Ind3D;
        case Task::ChannelEstimation: return PEProperty::PE1D;
    }
    throw std::logic_error("task_property: unreachable");
}

enum class ModuleKind { Att, AttPs, Natt, NattPs, Ffn, FfnPs };

inline const char* module_kind_name(ModuleKind k) {
    switch (k) {
        case ModuleKind::Att: return "att";
        case ModuleKind::AttPs: return "att_ps";
        case ModuleKind::Natt: return "natt";
        case ModuleKind::NattPs: return "natt_ps";
        case ModuleKind::Ffn: return "ffn";
        case ModuleKind::FfnPs: return "ffn_ps";
    }
    return "?";
}

enum class HeadKind { None, Diag, DoubleDiag, DualityHead };

inline const char* head_kind_name(HeadKind h) {
    switch (h) {
        case HeadKind::None: return "none";
        case HeadKind::Diag: return "diag";
        case HeadKind::DoubleDiag: return "double_diag";
        case HeadKind::DualityHead: return "duality_head";
    }
    return "?";
}

/// Named parameter storage. Ordered map so that every walk over the pool is
/// deterministic.
struct ParamPool {
    std::map<std::string, TensorPtr> tensors;

    TensorPtr at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::invalid_argument("parameter pool: missing entry '" + name + "'");
        return it->second;
    }

    bool has(const std::string& name) const { return tensors.count(name) > 0; }

    std::int64_t total_parameters() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : tensors) n += t->numel();
        return n;
    }
};

/// One attention or feed-forward stage. Slot names map to pool keys; shared
/// weights store the key prefix and resolve <prefix>.u1 / <prefix>.u2.
struct LayerRef {
    ModuleKind kind;
    Activation act = Activation::Tanh;
    std::map<std::string, std::string> slots;
};

/// An ordered module stack with its parameter pool, output head and token
/// conventions; produced by the composer.
struct ModelGraph {
    PEProperty property = PEProperty::PE1D;
    std::optional<Task> task;
    std::vector<LayerRef> layers;  // att/ffn alternating, final ffn is the linear output stage
    HeadKind head = HeadKind::None;
    bool multi_rep = false;
    bool shared_third_axis = false;
    bool positional = false;
    bool dense_family = false;
    std::vector<std::int64_t> j_path;      // feature counts per stage (P.S. family)
    std::vector<std::int64_t> width_path;  // absolute widths (dense family)
    std::shared_ptr<ParamPool> pool;

    /// Unique referenced pool keys in deterministic order.
    std::vector<std::string> param_names() const {
        std::set<std::string> seen;
        std::vector<std::string> out;
        for (const auto& layer : layers)
            for (const auto& [slot, key] : layer.slots) {
                const bool ps = layer.kind == ModuleKind::AttPs || layer.kind == ModuleKind::NattPs ||
                                layer.kind == ModuleKind::FfnPs;
                for (const std::string& name : ps ? std::vector<std::string>{key + ".u1", key + ".u2"}
                                                  : std::vector<std::string>{key}) {
                    if (seen.insert(name).second) out.push_back(name);
                }
            }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<TensorPtr> parameters() const {
        std::vector<TensorPtr> out;
        for (const auto& name : param_names()) out.push_back(pool->at(name));
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& name : param_names()) n += pool->at(name)->numel();
        return n;
    }

    /// Structured text description for run manifests.
    std::string blueprint() const {
        std::ostringstream os;
        os << "property=" << pe_property_name(property);
        if (task) os << " task=" << task_name(*task);
        os << " head=" << head_kind_name(head);
        if (multi_rep) os << " tokens=multi_rep";
        if (shared_third_axis) os << " shared_third_axis=1";
        if (positional) os << " positional_encoding=1";
        os << " layers=[";
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (i) os << ",";
            os << module_kind_name(layers[i].kind);
        }
        os << "]";
        os << (dense_family ? " widths=[" : " j=[");
        const auto& path = dense_family ? width_path : j_path;
        for (std::size_t i = 0; i < path.size(); ++i) os << (i ? "," : "") << path[i];
        os << "] sharing={";
        bool first = true;
        std::set<std::string> prefixes;
        for (const auto& layer : layers)
            for (const auto& [slot, key] : layer.slots) prefixes.insert(key.substr(0, key.find('.')));
        for (const auto& p : prefixes) {
            os << (first ? "" : ",") << p;
            first = false;
        }
        os << "}";
        return os.str();
    }
};

// ---------------------------------------------------------------------------
// Module composition
// ---------------------------------------------------------------------------

struct ComposeOptions {
    std::int64_t j_in = 2;     // [Re; Im] features per width block
    std::int64_t j_out = 2;
    std::uint64_t seed = 1;
    std::string prefix;        // pool key prefix (empty for specific models)
};

namespace detail {

inline double score_scale(std::int64_t width) { return 1.0 / static_cast<double>(width); }
inline double value_scale(std::int64_t width) { return std::sqrt(3.0 / static_cast<double>(width)); }

inline void add_shared(ParamPool& pool, const std::string& key, std::int64_t j_out, std::int64_t j_in,
                       Rng& rng, double scale) {
    if (pool.has(key + ".u1")) return;
    auto w = make_shared_weight(j_out, j_in, rng, scale);
    pool.tensors[key + ".u1"] = w.u1;
    pool.tensors[key + ".u2"] = w.u2;
}

inline void add_dense(ParamPool& pool, const std::string& key, std::int64_t rows, std::int64_t cols,
                      Rng& rng, double scale) {
    if (pool.has(key)) return;
    pool.tensors[key] = make_dense_weight(rows, cols, rng, scale);
}

/// Representative block count used only to set initial weight magnitudes.
inline std::int64_t init_block_count(const SizeSpec& sizes, PEProperty target) {
    if (target == PEProperty::NestedJoint2D) return sizes.m * sizes.k;
    return sizes.n_t;
}

}  // namespace detail

/// Assemble the module stack for a target PE property:
///   dense ATT/NATT + FFN for the 1D properties, parameter-shared variants
///   for everything two-dimensional, a diagonal head for the joint
///   properties, multi-representation tokens when both sets are nested, and
///   third-axis sharing for the 3D properties.
inline ModelGraph compose(PEProperty target, const SizeSpec& sizes, const std::vector<std::int64_t>& widths,
                          ComposeOptions opt = {}) {
    if (widths.empty()) throw std::invalid_argument("compose: need at least one layer (empty stack rejected)");

    ModelGraph graph;
    graph.property = target;
    graph.pool = std::make_shared<ParamPool>();
    Rng rng(derive_seed(opt.seed, std::string("compose/") + pe_property_name(target)));

    ModuleKind att_kind;
    ModuleKind ffn_kind;
    switch (target) {
        case PEProperty::NonPE:
            graph.positional = true;
            att_kind = ModuleKind::Att;
            ffn_kind = ModuleKind::Ffn;
            break;
        case PEProperty::PE1D:
            att_kind = ModuleKind::Att;
            ffn_kind = ModuleKind::Ffn;
            break;
        case PEProperty::Nested1D:
            att_kind = ModuleKind::Natt;
            ffn_kind = ModuleKind::Ffn;
            break;
        case PEProperty::Ind2D:
        case PEProperty::Joint2D:
        case PEProperty::Ind3D:
            att_kind = ModuleKind::AttPs;
            ffn_kind = ModuleKind::FfnPs;
            break;
        case PEProperty::PartialNested2D:
        case PEProperty::NestedInd2D:
        case PEProperty::NestedPartialJoint2D:
        case PEProperty::NestedJoint2D:
        case PEProperty::PartialNested3D:
            att_kind = ModuleKind::NattPs;
            ffn_kind = ModuleKind::FfnPs;
            break;
        default:
            throw std::invalid_argument("compose: unimplemented target property");
    }
    graph.dense_family = att_kind == ModuleKind::Att || att_kind == ModuleKind::Natt;
    graph.head = target == PEProperty::Joint2D || target == PEProperty::NestedPartialJoint2D
                     ? HeadKind::Diag
                     : target == PEProperty::NestedJoint2D ? HeadKind::DoubleDiag : HeadKind::None;
    graph.multi_rep = target == PEProperty::NestedInd2D || target == PEProperty::NestedPartialJoint2D;
    graph.shared_third_axis = target == PEProperty::Ind3D || target == PEProperty::PartialNested3D;

    const std::int64_t n_block = detail::init_block_count(sizes, target);
    graph.j_path.push_back(opt.j_in);
    for (auto j : widths) graph.j_path.push_back(j);
    graph.j_path.push_back(opt.j_out);
    if (graph.dense_family) {
        graph.width_path.push_back(opt.j_in * n_block);
        for (auto j : widths) graph.width_path.push_back(j);
        graph.width_path.push_back(opt.j_out * n_block);
    } else {
        for (auto j : graph.j_path) graph.width_path.push_back(j * n_block);
    }

    const std::int64_t n_layers = static_cast<std::int64_t>(widths.size());
    for (std::int64_t l = 0; l < n_layers + 1; ++l) {
        const std::int64_t w_in = graph.width_path[static_cast<std::size_t>(l)];
        const std::int64_t w_out = graph.width_path[static_cast<std::size_t>(l + 1)];
        const std::int64_t j_in = graph.j_path[static_cast<std::size_t>(l)];
        const std::int64_t j_out = graph.j_path[static_cast<std::size_t>(l + 1)];
        const std::string idx = l == n_layers ? "out" : std::to_string(l);

        if (l < n_layers) {
            LayerRef att;
            att.kind = att_kind;
            const std::string base = opt.prefix + module_kind_name(att_kind) + "." + idx;
            switch (att_kind) {
                case ModuleKind::Att:
                    detail::add_dense(*graph.pool, base + ".uk", w_in, w_in, rng, detail::score_scale(w_in));
                    detail::add_dense(*graph.pool, base + ".uv", w_in, w_in, rng, detail::value_scale(w_in));
                    att.slots = {{"uk", base + ".uk"}, {"uv", base + ".uv"}};
                    break;
                case ModuleKind::Natt:
                    detail::add_dense(*graph.pool, base + ".us_k", w_in, w_in, rng, detail::score_scale(w_in));
                    detail::add_dense(*graph.pool, base + ".us_v", w_in, w_in, rng, detail::value_scale(w_in));
                    detail::add_dense(*graph.pool, base + ".ud_k", w_in, w_in, rng, detail::score_scale(w_in));
                    detail::add_dense(*graph.pool, base + ".ud_v", w_in, w_in, rng, detail::value_scale(w_in));
                    att.slots = {{"us_k", base + ".us_k"},
                                 {"us_v", base + ".us_v"},
                                 {"ud_k", base + ".ud_k"},
                                 {"ud_v", base + ".ud_v"}};
                    break;
                case ModuleKind::AttPs:
                    detail::add_shared(*graph.pool, base + ".uk", j_in, j_in, rng,
                                       detail::score_scale(j_in * n_block));
                    detail::add_shared(*graph.pool, base + ".uv", j_in, j_in, rng,
                                       detail::value_scale(j_in * n_block));
                    att.slots = {{"uk", base + ".uk"}, {"uv", base + ".uv"}};
                    break;
                case ModuleKind::NattPs:
                    detail::add_shared(*graph.pool, base + ".us_k", j_in, j_in, rng,
                                       detail::score_scale(j_in * n_block));
                    detail::add_shared(*graph.pool, base + ".us_v", j_in, j_in, rng,
                                       detail::value_scale(j_in * n_block));
                    detail::add_shared(*graph.pool, base + ".ud_k", j_in, j_in, rng,
                                       detail::score_scale(j_in * n_block));
                    detail::add_shared(*graph.pool, base + ".ud_v", j_in, j_in, rng,
                                       detail::value_scale(j_in * n_block));
                    att.slots = {{"us_k", base + ".us_k"},
                                 {"us_v", base + ".us_v"},
                                 {"ud_k", base + ".ud_k"},
                                 {"ud_v", base + ".ud_v"}};
                    break;
                default:
                    break;
            }
            graph.layers.push_back(att);
        }

        LayerRef ffn;
        ffn.kind = ffn_kind;
        ffn.act = l == n_layers ? Activation::Identity : Activation::Tanh;
        const std::string fbase = opt.prefix + module_kind_name(ffn_kind) + "." + idx;
        if (ffn_kind == ModuleKind::Ffn) {
            detail::add_dense(*graph.pool, fbase + ".uf", w_in, w_out, rng, detail::value_scale(w_in));
            ffn.slots = {{"uf", fbase + ".uf"}};
        } else {
            detail::add_shared(*graph.pool, fbase + ".uf", j_out, j_in, rng,
                               detail::value_scale(j_in * n_block));
            ffn.slots = {{"uf", fbase + ".uf"}};
        }
        graph.layers.push_back(ffn);
    }
    return graph;
}

/// Fig-4a-style blueprint without parameters: module kinds per layer, head
/// and token conventions for a named policy.
struct Blueprint {
    PEProperty property;
    std::vector<ModuleKind> per_layer;  // attention + ffn kinds
    HeadKind head;
    bool multi_rep;
    bool shared_third_axis;
};

inline Blueprint blueprint_for(PEProperty p) {
    SizeSpec dummy;
    dummy.n_t = 2;
    dummy.k = 2;
    dummy.m = 2;
    auto g = compose(p, dummy, {4});
    Blueprint b;
    b.property = p;
    for (const auto& layer : g.layers) b.per_layer.push_back(layer.kind);
    b.head = g.head;
    b.multi_rep = g.multi_rep;
    b.shared_third_axis = g.shared_third_axis;
    return b;
}

/// Module-selector lookup: Table-style policy name (or task tag) to its PE
/// property and composition blueprint.
inline std::pair<PEProperty, Blueprint> select_modules(const std::string& policy) {
    for (const auto& [name, prop] : policy_table())
        if (name == policy) return {prop, blueprint_for(prop)};
    for (Task t : all_tasks())
        if (policy == task_name(t)) return {task_property(t), blueprint_for(task_property(t))};
    std::string known;
    for (const auto& [name, prop] : policy_table()) known += (known.empty() ? "" : "; ") + name;
    throw std::invalid_argument("select_modules: unknown policy '" + policy + "'. Known policies: " + known);
}

// ---------------------------------------------------------------------------
// Task models and the cross-task parameter pool
// ---------------------------------------------------------------------------

/// Specific model for one task (its own fresh parameter pool).
inline ModelGraph build_task_model(Task task, const SizeSpec& sizes, const std::vector<std::int64_t>& widths,
                                   std::uint64_t seed) {
    ComposeOptions opt;
    opt.seed = seed;
    opt.j_out = task == Task::PowerAllocation ? 1 : 2;
    auto graph = compose(task_property(task), sizes, widths, opt);
    graph.task = task;
    return graph;
}

struct MoFormerOptions {
    bool reuse_global_branch = true;  // ind.-2D tasks run on NATT (P.S.)'s global branch
    std::uint64_t seed = 1;
};

/// Cross-task model: one parameter pool per module family, task graphs that
/// activate only their selected modules. The nested attention family is
/// shared by every parameter-shared task; the dense family backs the 1D
/// estimation task.
struct MoFormer {
    std::shared_ptr<ParamPool> pool;
    std::map<Task, ModelGraph> graphs;
    MoFormerOptions options;

    std::int64_t total_parameters() const { return pool->total_parameters(); }
};

inline MoFormer build_moformer(const std::vector<Task>& tasks,
                               const std::map<Task, SizeSpec>& sizes_per_task,
                               const std::vector<std::int64_t>& widths, MoFormerOptions opt = {}) {
    MoFormer mo;
    mo.options = opt;
    mo.pool = std::make_shared<ParamPool>();

    for (Task task : tasks) {
        auto it = sizes_per_task.find(task);
        if (it == sizes_per_task.end())
            throw std::invalid_argument(std::string("build_moformer: no sizes for task ") + task_name(task));
        const SizeSpec& sizes = it->second;

        ComposeOptions copt;
        copt.seed = opt.seed;
        copt.j_out = task == Task::PowerAllocation ? 1 : 2;
        copt.prefix = "moformer.";
        auto graph = compose(task_property(task), sizes, widths, copt);
        graph.task = task;

        // Re-point the graph at the shared pool, with family-level sharing:
        // every parameter-shared task uses the one natt_ps/ffn_ps family and
        // a j_out-specific output stage; ind.-2D attention reuses the global
        // branch unless disabled.
        ParamPool& pool = *mo.pool;
        Rng rng(derive_seed(opt.seed, "moformer"));
        const std::int64_t n_layers = static_cast<std::int64_t>(widths.size());
        if (!graph.dense_family) {
            graph.layers.clear();
            for (std::int64_t l = 0; l < n_layers; ++l) {
                const std::int64_t j_in = graph.j_path[static_cast<std::size_t>(l)];
                const std::int64_t j_next = graph.j_path[static_cast<std::size_t>(l + 1)];
                const std::int64_t init_w = j_in * detail::init_block_count(sizes, graph.property);
                const std::string nbase = "moformer.natt_ps." + std::to_string(l);
                detail::add_shared(pool, nbase + ".us_k", j_in, j_in, rng, detail::score_scale(init_w));
                detail::add_shared(pool, nbase + ".us_v", j_in, j_in, rng, detail::value_scale(init_w));
                detail::add_shared(pool, nbase + ".ud_k", j_in, j_in, rng, detail::score_scale(init_w));
                detail::add_shared(pool, nbase + ".ud_v", j_in, j_in, rng, detail::value_scale(init_w));
                const std::string fbase = "moformer.ffn_ps." + std::to_string(l);
                detail::add_shared(pool, fbase + ".uf", j_next, j_in, rng, detail::value_scale(init_w));

                LayerRef att;
                if (task_property(task) == PEProperty::Ind2D || task_property(task) == PEProperty::Ind3D) {
                    att.kind = ModuleKind::AttPs;
                    if (opt.reuse_global_branch) {
                        att.slots = {{"uk", nbase + ".ud_k"}, {"uv", nbase + ".ud_v"}};
                    } else {
                        const std::string abase = "moformer.att_ps." + std::to_string(l);
                        detail::add_shared(pool, abase + ".uk", j_in, j_in, rng, detail::score_scale(init_w));
                        detail::add_shared(pool, abase + ".uv", j_in, j_in, rng, detail::value_scale(init_w));
                        att.slots = {{"uk", abase + ".uk"}, {"uv", abase + ".uv"}};
                    }
                } else {
                    att.kind = ModuleKind::NattPs;
                    att.slots = {{"us_k", nbase + ".us_k"},
                                 {"us_v", nbase + ".us_v"},
                                 {"ud_k", nbase + ".ud_k"},
                                 {"ud_v", nbase + ".ud_v"}};
                }
                graph.layers.push_back(att);

                LayerRef ffn;
                ffn.kind = ModuleKind::FfnPs;
                ffn.slots = {{"uf", fbase + ".uf"}};
                graph.layers.push_back(ffn);
            }
            // Output stage per output width.
            const std::int64_t j_last = graph.j_path[static_cast<std::size_t>(n_layers)];
            const std::int64_t j_out = graph.j_path.back();
            const std::string obase = "moformer.ffn_ps.out.j" + std::to_string(j_out);
            detail::add_shared(pool, obase + ".uf", j_out, j_last, rng,
                               detail::value_scale(j_last * detail::init_block_count(sizes, graph.property)));
            LayerRef out;
            out.kind = ModuleKind::FfnPs;
            out.act = Activation::Identity;
            out.slots = {{"uf", obase + ".uf"}};
            graph.layers.push_back(out);
        } else {
            // Dense 1D family (estimation): move this graph's fresh tensors
            // into the shared pool under their existing names.
            for (const auto& [name, t] : graph.pool->tensors)
                if (!pool.has(name)) pool.tensors[name] = t;
        }
        graph.pool = mo.pool;
        mo.graphs[task] = graph;
    }
    return mo;
}

}  // namespace peformer
