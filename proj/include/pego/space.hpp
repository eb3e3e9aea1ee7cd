#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace pego {

using json = nlohmann::json;

enum class ParameterKind { continuous, integer, categorical, boolean };
enum class Scale { linear, log10 };

std::string to_string(ParameterKind kind);
std::string to_string(Scale scale);

/// One dimension of a search space.
///
/// Continuous and integer parameters carry a closed [low, high] range; a
/// categorical parameter carries its ordered level list (encoded by index);
/// a boolean carries nothing. Only continuous parameters may be log10-scaled.
class ParameterSpec {
public:
    static ParameterSpec continuous(std::string name, double low, double high, Scale scale = Scale::linear);
    static ParameterSpec integer(std::string name, std::int64_t low, std::int64_t high);
    static ParameterSpec categorical(std::string name, std::vector<std::string> levels);
    static ParameterSpec boolean(std::string name);

    const std::string& name() const noexcept { return name_; }
    ParameterKind kind() const noexcept { return kind_; }
    Scale scale() const noexcept { return scale_; }
    double low() const noexcept { return low_; }
    double high() const noexcept { return high_; }
    const std::vector<std::string>& levels() const noexcept { return levels_; }

    /// Range of the encoded coordinate: scaled bounds for continuous
    /// parameters, [low, high] for integers, [0, levels-1] for categoricals
    /// and [0, 1] for booleans.
    double encoded_low() const noexcept;
    double encoded_high() const noexcept;

    /// Continuous relaxation used for stratified sampling and uniform draws:
    /// the encoded range widened by half a unit on either side for discrete
    /// kinds so that each level has equal mass.
    double relaxed_low() const noexcept;
    double relaxed_high() const noexcept;

    bool is_discrete() const noexcept { return kind_ != ParameterKind::continuous; }

    json to_json() const;
    static ParameterSpec from_json(const json& j);

    friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;

private:
    ParameterSpec() = default;

    std::string name_;
    ParameterKind kind_ = ParameterKind::continuous;
    Scale scale_ = Scale::linear;
    double low_ = 0.0;
    double high_ = 0.0;
    std::vector<std::string> levels_;
};

using Value = std::variant<bool, std::int64_t, double, std::string>;

/// A point in a ParameterSpace: named values.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::map<std::string, Value> values) : values_(std::move(values)) {}

    const std::map<std::string, Value>& values() const noexcept { return values_; }
    void set(const std::string& name, Value v) { values_[name] = std::move(v); }
    const Value& at(const std::string& name) const;
    bool contains(const std::string& name) const { return values_.count(name) != 0; }
    std::size_t size() const noexcept { return values_.size(); }

    double real(const std::string& name) const;
    std::int64_t integer(const std::string& name) const;
    const std::string& level(const std::string& name) const;
    bool flag(const std::string& name) const;

    json to_json() const;

    friend bool operator==(const Configuration&, const Configuration&) = default;

private:
    std::map<std::string, Value> values_;
};

class InvalidConfiguration : public std::invalid_argument {
public:
    explicit InvalidConfiguration(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Ordered, immutable schema of typed parameters.
class ParameterSpace {
public:
    ParameterSpace() = default;
    explicit ParameterSpace(std::vector<ParameterSpec> params);

    const std::vector<ParameterSpec>& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }
    const ParameterSpec& operator[](std::size_t i) const { return params_[i]; }
    std::optional<std::size_t> index_of(const std::string& name) const;

    /// Empty iff `c` names exactly this space's parameters and each value
    /// has the right type and lies within its bounds or level set.
    std::vector<std::string> validate(const Configuration& c) const;

    /// Throws InvalidConfiguration when `c` is not valid.
    std::vector<double> encode(const Configuration& c) const;

    /// Nearest-with-clamp inverse of encode. Discrete coordinates round to
    /// the nearest integer with ties toward the lower value. A coordinate
    /// more than half an encoded unit outside its range is an error.
    Configuration decode(std::span<const double> v) const;

    /// Snaps an encoded vector onto the lattice of valid encodings
    /// (continuous coordinates clamped, discrete ones rounded and clamped).
    std::vector<double> canonicalize(std::span<const double> v) const;

    /// Builds a Configuration from a JSON object, coercing numeric types
    /// to the schema's kinds. Does not validate.
    Configuration parse_configuration(const json& j) const;

    json to_json() const;
    static ParameterSpace from_json(const json& j);

    friend bool operator==(const ParameterSpace&, const ParameterSpace&) = default;

private:
    std::vector<ParameterSpec> params_;
};

/// Ties-toward-low rounding used for all discrete decoding.
double round_half_down(double x) noexcept;

} // namespace pego
