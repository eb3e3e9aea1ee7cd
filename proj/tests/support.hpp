#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pego/space.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "pego-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data()))
            throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// Random mixed space with 1..8 parameters of every kind.
inline pego::ParameterSpace random_space(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 8), kind(0, 4), levels(2, 6), lo_int(-20, 20), width(0, 30);
    std::uniform_real_distribution<double> lo_real(-100, 100), span(1e-3, 50), lo_exp(-6, 1), exp_span(0.5, 6);
    std::vector<pego::ParameterSpec> specs;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const std::string name = "p" + std::to_string(i);
        switch (kind(rng)) {
        case 0: {
            const double lo = lo_real(rng);
            specs.push_back(pego::ParameterSpec::continuous(name, lo, lo + span(rng)));
            break;
        }
        case 1: {
            const double e = lo_exp(rng);
            specs.push_back(pego::ParameterSpec::continuous(name, std::pow(10.0, e), std::pow(10.0, e + exp_span(rng)),
                                                            pego::Scale::log10));
            break;
        }
        case 2: {
            const int lo = lo_int(rng);
            specs.push_back(pego::ParameterSpec::integer(name, lo, lo + width(rng)));
            break;
        }
        case 3: {
            std::vector<std::string> lv;
            const int k = levels(rng);
            for (int j = 0; j < k; ++j)
                lv.push_back("l" + std::to_string(j));
            specs.push_back(pego::ParameterSpec::categorical(name, lv));
            break;
        }
        default:
            specs.push_back(pego::ParameterSpec::boolean(name));
        }
    }
    return pego::ParameterSpace(specs);
}

/// Uniformly drawn valid configuration (log-uniform for log10 parameters).
inline pego::Configuration random_config(const pego::ParameterSpace& s, std::mt19937_64& rng) {
    pego::Configuration c;
    for (const auto& p : s.params()) {
        switch (p.kind()) {
        case pego::ParameterKind::continuous: {
            std::uniform_real_distribution<double> u(p.encoded_low(), p.encoded_high());
            double v = p.scale() == pego::Scale::log10 ? std::pow(10.0, u(rng)) : u(rng);
            v = std::clamp(v, p.low(), p.high());
            c.set(p.name(), v);
            break;
        }
        case pego::ParameterKind::integer: {
            std::uniform_int_distribution<std::int64_t> u(static_cast<std::int64_t>(p.low()),
                                                          static_cast<std::int64_t>(p.high()));
            c.set(p.name(), u(rng));
            break;
        }
        case pego::ParameterKind::categorical: {
            std::uniform_int_distribution<std::size_t> u(0, p.levels().size() - 1);
            c.set(p.name(), p.levels()[u(rng)]);
            break;
        }
        case pego::ParameterKind::boolean:
            c.set(p.name(), std::bernoulli_distribution(0.5)(rng));
            break;
        }
    }
    return c;
}

} // namespace testing_support
