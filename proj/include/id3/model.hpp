#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "id3/rng.hpp"
#include "id3/tensor.hpp"

namespace id3 {

// Stable address of one scalar parameter: registry index + row-major offset.
struct ParamId {
    std::uint32_t tensor = 0;
    std::uint64_t offset = 0;

    friend bool operator==(const ParamId&, const ParamId&) = default;
    friend auto operator<=>(const ParamId& a, const ParamId& b) {
        return std::tie(a.tensor, a.offset) <=> std::tie(b.tensor, b.offset);
    }
};

enum class ParamKind { weight, bias, adapter_a, adapter_b };

struct TensorParam {
    std::string name;
    ParamKind kind;
    Tensor value;
    bool trainable = true;
};

enum class Activation { relu, tanh };

struct ModelConfig {
    std::vector<std::size_t> widths;
    Activation activation = Activation::relu;
    std::size_t adapter_rank = 0;          // 0 = no adapter
    std::vector<std::size_t> adapter_layers;
    std::uint64_t init_seed = 0;
};

// MLP classifier with a named tensor-parameter registry. Layer l computes
// x * W_l + b_l (weights stored fan_in x fan_out, batches are row vectors);
// a layer with an attached adapter adds x * A_l * B_l on top of the frozen
// base weight.
class Model {
public:
    static Model build_mlp(const ModelConfig& config) {
        if (config.widths.size() < 2) {
            throw ConfigError("model needs at least input and output widths");
        }
        for (std::size_t w : config.widths) {
            if (w == 0) throw ConfigError("layer widths must be positive");
        }
        Model m;
        m.config_ = config;
        Rng rng(config.init_seed);
        for (std::size_t l = 0; l + 1 < config.widths.size(); ++l) {
            const std::size_t fan_in = config.widths[l];
            const std::size_t fan_out = config.widths[l + 1];
            Tensor w({fan_in, fan_out});
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-scale, scale);
            Tensor b({fan_out});  // zero init
            const std::string prefix = "layers." + std::to_string(l) + ".";
            m.params_.push_back({prefix + "weight", ParamKind::weight, std::move(w), true});
            m.params_.push_back({prefix + "bias", ParamKind::bias, std::move(b), true});
            m.layers_.push_back({m.params_.size() - 2, m.params_.size() - 1, {}, {}});
        }
        if (config.adapter_rank > 0) {
            Rng arng(derive_seed(config.init_seed, 0xADA9));
            for (std::size_t l : config.adapter_layers) {
                m.attach_low_rank_adapter(l, config.adapter_rank, arng);
            }
        }
        return m;
    }

    // Adds adapter_A (fan_in x r, random) and adapter_B (r x fan_out, zero)
    // so the layer computes x*W + x*A*B; the base weight is frozen. B = 0
    // means the forward pass is unchanged at attach time.
    void attach_low_rank_adapter(std::size_t layer, std::size_t r, Rng& rng) {
        if (layer >= layers_.size()) {
            throw ConfigError("adapter target layer " + std::to_string(layer) +
                              " does not exist (model has " +
                              std::to_string(layers_.size()) + " layers)");
        }
        if (r < 1) throw ConfigError("adapter rank must be >= 1");
        Layer& ly = layers_[layer];
        if (ly.adapter_a) throw ConfigError("layer already has an adapter");
        const std::size_t fan_in = params_[ly.weight].value.rows();
        const std::size_t fan_out = params_[ly.weight].value.cols();
        if (r > std::min(fan_in, fan_out)) {
            throw ConfigError("adapter rank " + std::to_string(r) + " exceeds min(" +
                              std::to_string(fan_in) + ", " + std::to_string(fan_out) + ")");
        }
        Tensor a({fan_in, r});
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-scale, scale);
        Tensor b({r, fan_out});  // zero init, delta starts at zero
        const std::string prefix = "layers." + std::to_string(layer) + ".";
        params_[ly.weight].trainable = false;
        params_.push_back({prefix + "adapter_A", ParamKind::adapter_a, std::move(a), true});
        ly.adapter_a = params_.size() - 1;
        params_.push_back({prefix + "adapter_B", ParamKind::adapter_b, std::move(b), true});
        ly.adapter_b = params_.size() - 1;
    }

    struct ForwardPass {
        Tape tape;
        NodeId logits = 0;
        std::vector<NodeId> param_nodes;  // aligned with registry order
    };

    ForwardPass forward(const Tensor& batch) const {
        if (batch.rank() != 2 || batch.cols() != config_.widths.front()) {
            throw DimensionError("forward input " + batch.shape_string() +
                                 " does not match input width " +
                                 std::to_string(config_.widths.front()));
        }
        ForwardPass fp;
        fp.param_nodes.reserve(params_.size());
        for (const auto& p : params_) fp.param_nodes.push_back(fp.tape.leaf(p.value));
        NodeId x = fp.tape.leaf(batch);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& ly = layers_[l];
            NodeId h = fp.tape.matmul(x, fp.param_nodes[ly.weight]);
            if (ly.adapter_a) {
                NodeId xa = fp.tape.matmul(x, fp.param_nodes[*ly.adapter_a]);
                NodeId delta = fp.tape.matmul(xa, fp.param_nodes[*ly.adapter_b]);
                h = fp.tape.add(h, delta);
            }
            h = fp.tape.add(h, fp.param_nodes[ly.bias]);
            if (l + 1 < layers_.size()) {
                x = config_.activation == Activation::relu ? fp.tape.relu(h)
                                                           : fp.tape.tanh(h);
            } else {
                x = h;
            }
        }
        fp.logits = x;
        return fp;
    }

    const std::vector<TensorParam>& registry() const { return params_; }
    std::vector<TensorParam>& registry_mut() { return params_; }
    const ModelConfig& config() const { return config_; }

    std::size_t tensor_count() const { return params_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    std::size_t trainable_scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_)
            if (p.trainable) n += p.value.size();
        return n;
    }

    double get_scalar(ParamId id) const { return params_[id.tensor].value[id.offset]; }
    void set_scalar(ParamId id, double v) { params_[id.tensor].value[id.offset] = v; }

    std::optional<std::size_t> find_tensor(const std::string& name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        return std::nullopt;
    }

    // Dense checkpoint: shape table then flat f64 LE values, registry order.
    void save_dense(std::ostream& out) const {
        write_u32(out, 0x444B4449u);  // "IDKD"
        write_u32(out, static_cast<std::uint32_t>(params_.size()));
        for (const auto& p : params_) {
            write_u32(out, static_cast<std::uint32_t>(p.value.rank()));
            for (std::size_t d : p.value.shape())
                write_u32(out, static_cast<std::uint32_t>(d));
        }
        for (const auto& p : params_) {
            for (double v : p.value.data()) write_f64(out, v);
        }
    }

    void load_dense(std::istream& in) {
        if (read_u32(in) != 0x444B4449u) throw FormatError("bad dense checkpoint magic", 0);
        const std::uint32_t count = read_u32(in);
        if (count != params_.size()) {
            throw ApplyError("dense checkpoint has " + std::to_string(count) +
                             " tensors, model has " + std::to_string(params_.size()));
        }
        for (auto& p : params_) {
            const std::uint32_t rank = read_u32(in);
            std::vector<std::size_t> shape(rank);
            for (auto& d : shape) d = read_u32(in);
            if (shape != p.value.shape()) {
                throw ApplyError("dense checkpoint shape mismatch for " + p.name);
            }
        }
        for (auto& p : params_) {
            for (double& v : p.value.data()) v = read_f64(in);
        }
    }

    static void write_u32(std::ostream& out, std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }

    static std::uint32_t read_u32(std::istream& in) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw FormatError("truncated stream reading u32",
                              static_cast<std::size_t>(in.gcount()));
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }

    static void write_f64(std::ostream& out, double v) {
        std::uint64_t u;
        static_assert(sizeof(u) == sizeof(v));
        std::memcpy(&u, &v, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }

    static double read_f64(std::istream& in) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8))
            throw FormatError("truncated stream reading f64",
                              static_cast<std::size_t>(in.gcount()));
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }

private:
    struct Layer {
        std::size_t weight;
        std::size_t bias;
        std::optional<std::size_t> adapter_a;
        std::optional<std::size_t> adapter_b;
    };

    ModelConfig config_;
    std::vector<TensorParam> params_;
    std::vector<Layer> layers_;
};

}  // namespace id3
