#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pego/space.hpp"

namespace pego::allcnn {

inline const std::vector<std::string> kActivations{"elu", "relu", "tanh", "selu", "sigmoid"};

inline constexpr int kDescriptorVersion = 1;

/// Search space of the configurable all-convolutional network with `stacks`
/// stacks. Parameter names: f_0, k_0; per stack i (1-based) f_i, k_i,
/// f_out_i, k_out_i, s_out_i, n_i; dropouts d_0..d_q; l2; lr; activation;
/// activation_out; global_pooling.
ParameterSpace space(std::size_t stacks);

/// Number of stacks a space produced by `space()` encodes, if it is one.
std::optional<std::size_t> stacks_of(const ParameterSpace& s);

struct Dropout {
    double rate = 0.0;
    friend bool operator==(const Dropout&, const Dropout&) = default;
};

struct Conv {
    std::int64_t filters = 1;
    std::int64_t kernel = 1;
    std::int64_t stride = 1;
    double l2 = 0.0;
    std::string activation;
    std::string padding = "same";
    friend bool operator==(const Conv&, const Conv&) = default;
};

/// Strided convolution that takes the place of pooling at the end of a stack.
struct ConvOut {
    std::int64_t filters = 1;
    std::int64_t kernel = 1;
    std::int64_t stride = 1;
    double l2 = 0.0;
    std::string activation;
    std::string padding = "same";
    friend bool operator==(const ConvOut&, const ConvOut&) = default;
};

struct GlobalPooling {
    friend bool operator==(const GlobalPooling&, const GlobalPooling&) = default;
};

struct Dense {
    std::int64_t units = 1;
    double l2 = 0.0;
    std::string activation;
    friend bool operator==(const Dense&, const Dense&) = default;
};

using Layer = std::variant<Dropout, Conv, ConvOut, GlobalPooling, Dense>;

struct Training {
    std::string optimizer = "sgd";
    double learning_rate = 0.01;
    double decay = 0.0;
    std::int64_t epochs = 10;
    std::int64_t batch_size = 100;
    std::int64_t early_stop_patience = 6;
    friend bool operator==(const Training&, const Training&) = default;
};

/// Overrides of the training metadata; unset fields keep their defaults
/// (10 epochs, batch size 100, patience 6, decay 0).
struct TrainingOverrides {
    std::optional<std::int64_t> epochs;
    std::optional<std::int64_t> batch_size;
    std::optional<std::int64_t> early_stop_patience;
    std::optional<double> decay;

    static TrainingOverrides from_json(const json& j);
    json to_json() const;
};

struct NetworkDescriptor {
    int version = kDescriptorVersion;
    std::vector<Layer> layers;
    Training training;
    friend bool operator==(const NetworkDescriptor&, const NetworkDescriptor&) = default;
};

/// Layer stack for `c`: dropout(d_0), conv(f_0, k_0), then per stack
/// n_i x conv(f_i, k_i), conv_out(f_out_i, k_out_i, s_out_i), dropout(d_i),
/// then global pooling when enabled, then a dense head with `classes` units.
/// Throws InvalidConfiguration when `c` is not valid in the matching space.
NetworkDescriptor to_descriptor(const Configuration& c, std::size_t classes,
                                const TrainingOverrides& overrides = {});

/// Structural check of `d` against the configuration it came from; empty
/// when the descriptor is exactly the stack that `c` prescribes.
std::vector<std::string> descriptor_violations(const NetworkDescriptor& d, const Configuration& c,
                                               std::size_t classes);

json descriptor_to_json(const NetworkDescriptor& d);
/// Canonical text form: compact JSON with sorted keys.
std::string descriptor_serialize(const NetworkDescriptor& d);
/// Throws std::invalid_argument on unknown layer kinds (naming the kind),
/// missing fields, or an unsupported version.
NetworkDescriptor descriptor_parse(const json& j);
NetworkDescriptor descriptor_parse(const std::string& text);

} // namespace pego::allcnn
