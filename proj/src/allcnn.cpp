#include "pego/allcnn.hpp"

#include <stdexcept>

namespace pego::allcnn {

namespace {

std::string idx(const char* base, std::size_t i) { return std::string(base) + std::to_string(i); }

constexpr std::int64_t kFilterMax = 512;
constexpr std::int64_t kKernelMax = 8;
constexpr std::int64_t kStrideMax = 5;
constexpr std::int64_t kDepthMax = 6;

template <class T>
T field(const json& j, const char* name, const std::string& kind) {
    if (!j.contains(name))
        throw std::invalid_argument("layer '" + kind + "' is missing field '" + name + "'");
    return j.at(name).get<T>();
}

} // namespace

ParameterSpace space(std::size_t stacks) {
    if (stacks < 1)
        throw std::invalid_argument("all-CNN space needs at least one stack");
    std::vector<ParameterSpec> p;
    p.push_back(ParameterSpec::integer("f_0", 1, kFilterMax));
    p.push_back(ParameterSpec::integer("k_0", 1, kKernelMax));
    for (std::size_t i = 1; i <= stacks; ++i) {
        p.push_back(ParameterSpec::integer(idx("f_", i), 1, kFilterMax));
        p.push_back(ParameterSpec::integer(idx("k_", i), 1, kKernelMax));
        p.push_back(ParameterSpec::integer(idx("f_out_", i), 1, kFilterMax));
        p.push_back(ParameterSpec::integer(idx("k_out_", i), 1, kKernelMax));
        p.push_back(ParameterSpec::integer(idx("s_out_", i), 1, kStrideMax));
        p.push_back(ParameterSpec::integer(idx("n_", i), 1, kDepthMax));
    }
    for (std::size_t i = 0; i <= stacks; ++i)
        p.push_back(ParameterSpec::continuous(idx("d_", i), 1e-5, 0.8, Scale::log10));
    p.push_back(ParameterSpec::continuous("l2", 1e-5, 1e-2, Scale::log10));
    p.push_back(ParameterSpec::continuous("lr", 1e-5, 1.0, Scale::log10));
    p.push_back(ParameterSpec::categorical("activation", kActivations));
    p.push_back(ParameterSpec::categorical("activation_out", kActivations));
    p.push_back(ParameterSpec::boolean("global_pooling"));
    return ParameterSpace(std::move(p));
}

std::optional<std::size_t> stacks_of(const ParameterSpace& s) {
    // size = (6q + 2) + (q + 3) + 3
    if (s.size() < 15 || (s.size() - 8) % 7 != 0)
        return std::nullopt;
    const std::size_t q = (s.size() - 8) / 7;
    if (!(space(q) == s))
        return std::nullopt;
    return q;
}

TrainingOverrides TrainingOverrides::from_json(const json& j) {
    TrainingOverrides o;
    if (j.is_null())
        return o;
    for (const auto& [key, value] : j.items()) {
        if (key == "epochs")
            o.epochs = value.get<std::int64_t>();
        else if (key == "batch_size")
            o.batch_size = value.get<std::int64_t>();
        else if (key == "early_stop_patience")
            o.early_stop_patience = value.get<std::int64_t>();
        else if (key == "decay")
            o.decay = value.get<double>();
        else
            throw std::invalid_argument("unknown training override '" + key + "'");
    }
    if ((o.epochs && *o.epochs < 1) || (o.batch_size && *o.batch_size < 1) ||
        (o.early_stop_patience && *o.early_stop_patience < 1) || (o.decay && *o.decay < 0.0))
        throw std::invalid_argument("training overrides must be positive");
    return o;
}

json TrainingOverrides::to_json() const {
    json j = json::object();
    if (epochs)
        j["epochs"] = *epochs;
    if (batch_size)
        j["batch_size"] = *batch_size;
    if (early_stop_patience)
        j["early_stop_patience"] = *early_stop_patience;
    if (decay)
        j["decay"] = *decay;
    return j;
}

NetworkDescriptor to_descriptor(const Configuration& c, std::size_t classes, const TrainingOverrides& overrides) {
    if (classes < 1)
        throw std::invalid_argument("descriptor needs at least one output class");
    std::size_t stacks = 0;
    while (c.contains(idx("n_", stacks + 1)))
        ++stacks;
    if (stacks == 0)
        throw InvalidConfiguration({"configuration has no all-CNN stacks"});
    if (auto v = space(stacks).validate(c); !v.empty())
        throw InvalidConfiguration(std::move(v));

    const double l2 = c.real("l2");
    const std::string& a = c.level("activation");
    NetworkDescriptor d;
    d.layers.push_back(Dropout{c.real("d_0")});
    d.layers.push_back(Conv{c.integer("f_0"), c.integer("k_0"), 1, l2, a});
    for (std::size_t i = 1; i <= stacks; ++i) {
        const auto n = c.integer(idx("n_", i));
        for (std::int64_t r = 0; r < n; ++r)
            d.layers.push_back(Conv{c.integer(idx("f_", i)), c.integer(idx("k_", i)), 1, l2, a});
        d.layers.push_back(
            ConvOut{c.integer(idx("f_out_", i)), c.integer(idx("k_out_", i)), c.integer(idx("s_out_", i)), l2, a});
        d.layers.push_back(Dropout{c.real(idx("d_", i))});
    }
    if (c.flag("global_pooling"))
        d.layers.push_back(GlobalPooling{});
    d.layers.push_back(Dense{static_cast<std::int64_t>(classes), l2, c.level("activation_out")});

    d.training.learning_rate = c.real("lr");
    d.training.decay = overrides.decay.value_or(0.0);
    d.training.epochs = overrides.epochs.value_or(10);
    d.training.batch_size = overrides.batch_size.value_or(100);
    d.training.early_stop_patience = overrides.early_stop_patience.value_or(6);
    return d;
}

std::vector<std::string> descriptor_violations(const NetworkDescriptor& d, const Configuration& c,
                                               std::size_t classes) {
    std::vector<std::string> out;
    NetworkDescriptor expected;
    try {
        expected = to_descriptor(c, classes, {});
    } catch (const std::exception& e) {
        out.push_back(e.what());
        return out;
    }
    if (d.version != kDescriptorVersion)
        out.push_back("unsupported descriptor version " + std::to_string(d.version));
    if (d.layers.size() != expected.layers.size())
        out.push_back("layer count " + std::to_string(d.layers.size()) + ", expected " +
                      std::to_string(expected.layers.size()));
    const std::size_t n = std::min(d.layers.size(), expected.layers.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (d.layers[i].index() != expected.layers[i].index())
            out.push_back("layer " + std::to_string(i) + " has the wrong kind");
        else if (!(d.layers[i] == expected.layers[i]))
            out.push_back("layer " + std::to_string(i) + " parameters differ from the configuration");
    }
    if (d.training.learning_rate != c.real("lr"))
        out.push_back("learning rate differs from the configuration");
    if (d.training.optimizer != "sgd")
        out.push_back("optimizer must be sgd");
    return out;
}

json descriptor_to_json(const NetworkDescriptor& d) {
    json layers = json::array();
    for (const auto& layer : d.layers) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, Dropout>) {
                    layers.push_back({{"kind", "dropout"}, {"rate", l.rate}});
                } else if constexpr (std::is_same_v<T, Conv> || std::is_same_v<T, ConvOut>) {
                    layers.push_back({{"kind", std::is_same_v<T, Conv> ? "conv" : "conv_out"},
                                      {"filters", l.filters},
                                      {"kernel", l.kernel},
                                      {"stride", l.stride},
                                      {"l2", l.l2},
                                      {"activation", l.activation},
                                      {"padding", l.padding}});
                } else if constexpr (std::is_same_v<T, GlobalPooling>) {
                    layers.push_back({{"kind", "global_pooling"}});
                } else {
                    layers.push_back(
                        {{"kind", "dense"}, {"units", l.units}, {"l2", l.l2}, {"activation", l.activation}});
                }
            },
            layer);
    }
    const auto& t = d.training;
    return json{{"version", d.version},
                {"layers", std::move(layers)},
                {"training",
                 {{"optimizer", t.optimizer},
                  {"learning_rate", t.learning_rate},
                  {"decay", t.decay},
                  {"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"early_stop_patience", t.early_stop_patience}}}};
}

std::string descriptor_serialize(const NetworkDescriptor& d) { return descriptor_to_json(d).dump(); }

NetworkDescriptor descriptor_parse(const json& j) {
    if (!j.is_object())
        throw std::invalid_argument("descriptor must be a JSON object");
    if (!j.contains("version"))
        throw std::invalid_argument("descriptor is missing its version");
    NetworkDescriptor d;
    d.version = j.at("version").get<int>();
    if (d.version != kDescriptorVersion)
        throw std::invalid_argument("unsupported descriptor version " + std::to_string(d.version));
    for (const auto& l : j.at("layers")) {
        const auto kind = l.at("kind").get<std::string>();
        if (kind == "dropout") {
            d.layers.push_back(Dropout{field<double>(l, "rate", kind)});
        } else if (kind == "conv" || kind == "conv_out") {
            Conv c{field<std::int64_t>(l, "filters", kind), field<std::int64_t>(l, "kernel", kind),
                   field<std::int64_t>(l, "stride", kind),  field<double>(l, "l2", kind),
                   field<std::string>(l, "activation", kind), field<std::string>(l, "padding", kind)};
            if (kind == "conv")
                d.layers.push_back(c);
            else
                d.layers.push_back(ConvOut{c.filters, c.kernel, c.stride, c.l2, c.activation, c.padding});
        } else if (kind == "global_pooling") {
            d.layers.push_back(GlobalPooling{});
        } else if (kind == "dense") {
            d.layers.push_back(Dense{field<std::int64_t>(l, "units", kind), field<double>(l, "l2", kind),
                                     field<std::string>(l, "activation", kind)});
        } else {
            throw std::invalid_argument("unknown layer kind '" + kind + "'");
        }
    }
    const auto& t = j.at("training");
    d.training.optimizer = t.at("optimizer").get<std::string>();
    d.training.learning_rate = t.at("learning_rate").get<double>();
    d.training.decay = t.at("decay").get<double>();
    d.training.epochs = t.at("epochs").get<std::int64_t>();
    d.training.batch_size = t.at("batch_size").get<std::int64_t>();
    d.training.early_stop_patience = t.at("early_stop_patience").get<std::int64_t>();
    return d;
}

NetworkDescriptor descriptor_parse(const std::string& text) { return descriptor_parse(json::parse(text)); }

} // namespace pego::allcnn
