#include "pego/space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace pego {

namespace {

std::string format_number(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

std::string value_type_name(const Value& v) {
    switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "real";
    default: return "string";
    }
}

constexpr double kClampTolerance = 0.5;

} // namespace

std::string to_string(ParameterKind kind) {
    switch (kind) {
    case ParameterKind::continuous: return "continuous";
    case ParameterKind::integer: return "integer";
    case ParameterKind::categorical: return "categorical";
    case ParameterKind::boolean: return "boolean";
    }
    return "unknown";
}

std::string to_string(Scale scale) { return scale == Scale::log10 ? "log10" : "linear"; }

double round_half_down(double x) noexcept { return std::ceil(x - 0.5); }

// --- ParameterSpec -----------------------------------------------------------

ParameterSpec ParameterSpec::continuous(std::string name, double low, double high, Scale scale) {
    if (!std::isfinite(low) || !std::isfinite(high) || !(low < high))
        throw std::invalid_argument("parameter '" + name + "': continuous bounds need low < high");
    if (scale == Scale::log10 && !(low > 0.0))
        throw std::invalid_argument("parameter '" + name + "': log10 scale needs low > 0");
    ParameterSpec p;
    p.name_ = std::move(name);
    p.kind_ = ParameterKind::continuous;
    p.scale_ = scale;
    p.low_ = low;
    p.high_ = high;
    return p;
}

ParameterSpec ParameterSpec::integer(std::string name, std::int64_t low, std::int64_t high) {
    if (low > high)
        throw std::invalid_argument("parameter '" + name + "': integer bounds need low <= high");
    ParameterSpec p;
    p.name_ = std::move(name);
    p.kind_ = ParameterKind::integer;
    p.low_ = static_cast<double>(low);
    p.high_ = static_cast<double>(high);
    return p;
}

ParameterSpec ParameterSpec::categorical(std::string name, std::vector<std::string> levels) {
    std::set<std::string> distinct(levels.begin(), levels.end());
    if (levels.size() < 2 || distinct.size() != levels.size())
        throw std::invalid_argument("parameter '" + name + "': categorical needs >= 2 distinct levels");
    ParameterSpec p;
    p.name_ = std::move(name);
    p.kind_ = ParameterKind::categorical;
    p.low_ = 0.0;
    p.high_ = static_cast<double>(levels.size() - 1);
    p.levels_ = std::move(levels);
    return p;
}

ParameterSpec ParameterSpec::boolean(std::string name) {
    ParameterSpec p;
    p.name_ = std::move(name);
    p.kind_ = ParameterKind::boolean;
    p.low_ = 0.0;
    p.high_ = 1.0;
    return p;
}

double ParameterSpec::encoded_low() const noexcept {
    return scale_ == Scale::log10 ? std::log10(low_) : low_;
}

double ParameterSpec::encoded_high() const noexcept {
    return scale_ == Scale::log10 ? std::log10(high_) : high_;
}

double ParameterSpec::relaxed_low() const noexcept {
    return is_discrete() ? encoded_low() - 0.5 : encoded_low();
}

double ParameterSpec::relaxed_high() const noexcept {
    return is_discrete() ? encoded_high() + 0.5 : encoded_high();
}

json ParameterSpec::to_json() const {
    json j;
    j["name"] = name_;
    j["kind"] = to_string(kind_);
    switch (kind_) {
    case ParameterKind::continuous:
        j["low"] = low_;
        j["high"] = high_;
        j["scale"] = to_string(scale_);
        break;
    case ParameterKind::integer:
        j["low"] = static_cast<std::int64_t>(low_);
        j["high"] = static_cast<std::int64_t>(high_);
        break;
    case ParameterKind::categorical:
        j["levels"] = levels_;
        break;
    case ParameterKind::boolean:
        break;
    }
    return j;
}

ParameterSpec ParameterSpec::from_json(const json& j) {
    if (!j.is_object())
        throw std::invalid_argument("parameter spec must be an object");
    const auto name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "continuous") {
        Scale scale = Scale::linear;
        if (j.contains("scale")) {
            const auto s = j.at("scale").get<std::string>();
            if (s == "log10")
                scale = Scale::log10;
            else if (s != "linear")
                throw std::invalid_argument("parameter '" + name + "': unknown scale '" + s + "'");
        }
        return continuous(name, j.at("low").get<double>(), j.at("high").get<double>(), scale);
    }
    if (kind == "integer") {
        if (j.contains("scale") && j.at("scale") != "linear")
            throw std::invalid_argument("parameter '" + name + "': scale applies to continuous parameters only");
        return integer(name, j.at("low").get<std::int64_t>(), j.at("high").get<std::int64_t>());
    }
    if (kind == "categorical")
        return categorical(name, j.at("levels").get<std::vector<std::string>>());
    if (kind == "boolean")
        return boolean(name);
    throw std::invalid_argument("parameter '" + name + "': unknown kind '" + kind + "'");
}

// --- Configuration -----------------------------------------------------------

const Value& Configuration::at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end())
        throw std::out_of_range("configuration has no parameter '" + name + "'");
    return it->second;
}

double Configuration::real(const std::string& name) const {
    const auto& v = at(name);
    if (const auto* d = std::get_if<double>(&v))
        return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v))
        return static_cast<double>(*i);
    throw std::invalid_argument("parameter '" + name + "' is not numeric");
}

std::int64_t Configuration::integer(const std::string& name) const {
    const auto& v = at(name);
    if (const auto* i = std::get_if<std::int64_t>(&v))
        return *i;
    throw std::invalid_argument("parameter '" + name + "' is not an integer");
}

const std::string& Configuration::level(const std::string& name) const {
    const auto& v = at(name);
    if (const auto* s = std::get_if<std::string>(&v))
        return *s;
    throw std::invalid_argument("parameter '" + name + "' is not categorical");
}

bool Configuration::flag(const std::string& name) const {
    const auto& v = at(name);
    if (const auto* b = std::get_if<bool>(&v))
        return *b;
    throw std::invalid_argument("parameter '" + name + "' is not boolean");
}

json Configuration::to_json() const {
    json j = json::object();
    for (const auto& [name, v] : values_)
        std::visit([&, &key = name](const auto& x) { j[key] = x; }, v);
    return j;
}

InvalidConfiguration::InvalidConfiguration(std::vector<std::string> violations)
    : std::invalid_argument([&] {
          std::string msg = "invalid configuration:";
          for (const auto& v : violations)
              msg += " " + v + ";";
          return msg;
      }()),
      violations_(std::move(violations)) {}

// --- ParameterSpace ----------------------------------------------------------

ParameterSpace::ParameterSpace(std::vector<ParameterSpec> params) : params_(std::move(params)) {
    std::set<std::string> names;
    for (const auto& p : params_) {
        if (p.name().empty())
            throw std::invalid_argument("parameter names must be non-empty");
        if (!names.insert(p.name()).second)
            throw std::invalid_argument("duplicate parameter name '" + p.name() + "'");
    }
}

std::optional<std::size_t> ParameterSpace::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name() == name)
            return i;
    return std::nullopt;
}

std::vector<std::string> ParameterSpace::validate(const Configuration& c) const {
    std::vector<std::string> out;
    for (const auto& p : params_) {
        if (!c.contains(p.name())) {
            out.push_back(p.name() + " missing");
            continue;
        }
        const Value& v = c.at(p.name());
        switch (p.kind()) {
        case ParameterKind::continuous: {
            const auto* d = std::get_if<double>(&v);
            if (!d) {
                out.push_back(p.name() + " must be real, got " + value_type_name(v));
            } else if (!std::isfinite(*d) || *d < p.low() || *d > p.high()) {
                out.push_back(p.name() + " out of range [" + format_number(p.low()) + "," +
                              format_number(p.high()) + "]");
            }
            break;
        }
        case ParameterKind::integer: {
            const auto* i = std::get_if<std::int64_t>(&v);
            if (!i) {
                out.push_back(p.name() + " must be integer, got " + value_type_name(v));
            } else if (static_cast<double>(*i) < p.low() || static_cast<double>(*i) > p.high()) {
                out.push_back(p.name() + " out of range [" + format_number(p.low()) + "," +
                              format_number(p.high()) + "]");
            }
            break;
        }
        case ParameterKind::categorical: {
            const auto* s = std::get_if<std::string>(&v);
            if (!s) {
                out.push_back(p.name() + " must be a level name, got " + value_type_name(v));
            } else if (std::find(p.levels().begin(), p.levels().end(), *s) == p.levels().end()) {
                out.push_back(p.name() + " has unknown level '" + *s + "'");
            }
            break;
        }
        case ParameterKind::boolean:
            if (!std::holds_alternative<bool>(v))
                out.push_back(p.name() + " must be boolean, got " + value_type_name(v));
            break;
        }
    }
    for (const auto& [name, v] : c.values())
        if (!index_of(name))
            out.push_back(name + " is not a parameter of this space");
    return out;
}

std::vector<double> ParameterSpace::encode(const Configuration& c) const {
    if (auto violations = validate(c); !violations.empty())
        throw InvalidConfiguration(std::move(violations));
    std::vector<double> v;
    v.reserve(params_.size());
    for (const auto& p : params_) {
        const Value& x = c.at(p.name());
        switch (p.kind()) {
        case ParameterKind::continuous: {
            const double d = std::get<double>(x);
            v.push_back(p.scale() == Scale::log10 ? std::log10(d) : d);
            break;
        }
        case ParameterKind::integer:
            v.push_back(static_cast<double>(std::get<std::int64_t>(x)));
            break;
        case ParameterKind::categorical: {
            const auto& levels = p.levels();
            const auto it = std::find(levels.begin(), levels.end(), std::get<std::string>(x));
            v.push_back(static_cast<double>(it - levels.begin()));
            break;
        }
        case ParameterKind::boolean:
            v.push_back(std::get<bool>(x) ? 1.0 : 0.0);
            break;
        }
    }
    return v;
}

std::vector<double> ParameterSpace::canonicalize(std::span<const double> v) const {
    if (v.size() != params_.size())
        throw std::invalid_argument("encoded vector has length " + std::to_string(v.size()) + ", expected " +
                                    std::to_string(params_.size()));
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = params_[i];
        double x = v[i];
        if (p.is_discrete())
            x = round_half_down(x);
        out[i] = std::clamp(x, p.encoded_low(), p.encoded_high());
    }
    return out;
}

Configuration ParameterSpace::decode(std::span<const double> v) const {
    if (v.size() != params_.size())
        throw std::invalid_argument("encoded vector has length " + std::to_string(v.size()) + ", expected " +
                                    std::to_string(params_.size()));
    Configuration c;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = params_[i];
        const double lo = p.encoded_low();
        const double hi = p.encoded_high();
        if (!std::isfinite(v[i]) || v[i] < lo - kClampTolerance || v[i] > hi + kClampTolerance)
            throw std::out_of_range("coordinate " + std::to_string(i) + " (" + p.name() + ") = " +
                                    format_number(v[i]) + " outside [" + format_number(lo) + "," +
                                    format_number(hi) + "] beyond clamp tolerance");
        switch (p.kind()) {
        case ParameterKind::continuous: {
            const double x = std::clamp(v[i], lo, hi);
            const double value = p.scale() == Scale::log10 ? std::pow(10.0, x) : x;
            c.set(p.name(), std::clamp(value, p.low(), p.high()));
            break;
        }
        case ParameterKind::integer:
            c.set(p.name(), static_cast<std::int64_t>(std::clamp(round_half_down(v[i]), lo, hi)));
            break;
        case ParameterKind::categorical: {
            const auto idx = static_cast<std::size_t>(std::clamp(round_half_down(v[i]), lo, hi));
            c.set(p.name(), p.levels()[idx]);
            break;
        }
        case ParameterKind::boolean:
            c.set(p.name(), std::clamp(round_half_down(v[i]), 0.0, 1.0) > 0.5);
            break;
        }
    }
    return c;
}

Configuration ParameterSpace::parse_configuration(const json& j) const {
    if (!j.is_object())
        throw std::invalid_argument("configuration must be a JSON object");
    Configuration c;
    for (const auto& [name, x] : j.items()) {
        const auto idx = index_of(name);
        const auto kind = idx ? params_[*idx].kind() : ParameterKind::continuous;
        if (x.is_boolean()) {
            c.set(name, x.get<bool>());
        } else if (x.is_string()) {
            c.set(name, x.get<std::string>());
        } else if (x.is_number_integer() && idx && kind == ParameterKind::continuous) {
            c.set(name, x.get<double>());
        } else if (x.is_number_integer()) {
            c.set(name, x.get<std::int64_t>());
        } else if (x.is_number_float()) {
            const double d = x.get<double>();
            if (idx && kind == ParameterKind::integer && std::isfinite(d) && d == std::floor(d) &&
                std::abs(d) < 9.0e15)
                c.set(name, static_cast<std::int64_t>(d));
            else
                c.set(name, d);
        } else {
            throw std::invalid_argument("parameter '" + name + "' has unsupported JSON type");
        }
    }
    return c;
}

json ParameterSpace::to_json() const {
    json params = json::array();
    for (const auto& p : params_)
        params.push_back(p.to_json());
    return json{{"format", "pego-space"}, {"version", 1}, {"parameters", std::move(params)}};
}

ParameterSpace ParameterSpace::from_json(const json& j) {
    if (!j.is_object() || !j.contains("parameters"))
        throw std::invalid_argument("space schema must be an object with a 'parameters' list");
    if (j.contains("format") && j.at("format") != "pego-space")
        throw std::invalid_argument("space schema has unexpected format tag");
    if (j.contains("version") && j.at("version") != 1)
        throw std::invalid_argument("unsupported space schema version " + j.at("version").dump());
    std::vector<ParameterSpec> params;
    for (const auto& p : j.at("parameters"))
        params.push_back(ParameterSpec::from_json(p));
    return ParameterSpace(std::move(params));
}

} // namespace pego
