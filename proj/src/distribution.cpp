#include "threatlang/distribution.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "threatlang/errors.hpp"

namespace threatlang {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* family_name(DistFamily f) {
    switch (f) {
    case DistFamily::Constant: return "Constant";
    case DistFamily::Exponential: return "Exponential";
    case DistFamily::Gamma: return "Gamma";
    case DistFamily::LogNormal: return "LogNormal";
    case DistFamily::Bernoulli: return "Bernoulli";
    case DistFamily::Infinity: return "Infinity";
    }
    return "?";
}

// Shortest representation that round-trips; integral values keep one
// decimal so "Constant(3.0)" parses back bit-equal.
std::string format_param(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    double back = std::stod(s);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            std::ostringstream t;
            t.precision(prec);
            t << v;
            if (std::stod(t.str()) == v) {
                s = t.str();
                break;
            }
        }
    }
    return s;
}

// Marsaglia-Tsang squeeze for shape >= 1; boost trick for shape < 1.
double sample_gamma(double shape, double scale, Rng& rng) {
    if (shape < 1.0) {
        double u = rng.next_open();
        return sample_gamma(shape + 1.0, scale, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.next_normal();
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = rng.next_double();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return scale * d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
}

} // namespace

TtcDistribution::TtcDistribution() : family_(DistFamily::Constant), params_{0.0} {}

TtcDistribution::TtcDistribution(DistFamily family, std::vector<double> params)
    : family_(family), params_(std::move(params)) {}

TtcDistribution TtcDistribution::constant(double value) {
    if (!(value >= 0.0) || std::isinf(value))
        throw InvalidParameters("Constant requires a finite value >= 0");
    return {DistFamily::Constant, {value}};
}

TtcDistribution TtcDistribution::exponential(double rate) {
    if (!(rate > 0.0) || std::isinf(rate))
        throw InvalidParameters("Exponential requires rate > 0");
    return {DistFamily::Exponential, {rate}};
}

TtcDistribution TtcDistribution::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0) || std::isinf(shape) || std::isinf(scale))
        throw InvalidParameters("Gamma requires shape > 0 and scale > 0");
    return {DistFamily::Gamma, {shape, scale}};
}

TtcDistribution TtcDistribution::lognormal(double mu, double sigma) {
    if (!(sigma > 0.0) || std::isinf(mu) || std::isinf(sigma) || std::isnan(mu))
        throw InvalidParameters("LogNormal requires finite mu and sigma > 0");
    return {DistFamily::LogNormal, {mu, sigma}};
}

TtcDistribution TtcDistribution::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidParameters("Bernoulli requires p in [0,1]");
    return {DistFamily::Bernoulli, {p}};
}

TtcDistribution TtcDistribution::infinity() { return {DistFamily::Infinity, {}}; }

TtcDistribution TtcDistribution::parse(const std::string& text) {
    size_t open = text.find('(');
    std::string name;
    std::vector<double> params;
    if (open == std::string::npos) {
        name = text;
    } else {
        name = text.substr(0, open);
        size_t close = text.rfind(')');
        if (close == std::string::npos || close < open)
            throw InvalidParameters("malformed distribution: " + text);
        std::string body = text.substr(open + 1, close - open - 1);
        size_t pos = 0;
        while (pos < body.size()) {
            size_t comma = body.find(',', pos);
            std::string tok = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            size_t used = 0;
            double v;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw InvalidParameters("bad number '" + tok + "' in distribution: " + text);
            }
            while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
            if (used != tok.size())
                throw InvalidParameters("bad number '" + tok + "' in distribution: " + text);
            params.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }

    auto want = [&](size_t n) {
        if (params.size() != n)
            throw InvalidParameters(name + " expects " + std::to_string(n) + " parameter(s), got " +
                                    std::to_string(params.size()));
    };
    if (name == "Constant") { want(1); return constant(params[0]); }
    if (name == "Exponential") { want(1); return exponential(params[0]); }
    if (name == "Gamma") { want(2); return gamma(params[0], params[1]); }
    if (name == "LogNormal") { want(2); return lognormal(params[0], params[1]); }
    if (name == "Bernoulli") { want(1); return bernoulli(params[0]); }
    if (name == "Infinity") { want(0); return infinity(); }
    throw InvalidParameters("unknown distribution family: " + name);
}

std::string TtcDistribution::to_string() const {
    std::string out = family_name(family_);
    out += '(';
    for (size_t i = 0; i < params_.size(); ++i) {
        if (i) out += ',';
        out += format_param(params_[i]);
    }
    out += ')';
    return out;
}

double TtcDistribution::mean() const {
    switch (family_) {
    case DistFamily::Constant: return params_[0];
    case DistFamily::Exponential: return 1.0 / params_[0];
    case DistFamily::Gamma: return params_[0] * params_[1];
    case DistFamily::LogNormal: return std::exp(params_[0] + 0.5 * params_[1] * params_[1]);
    case DistFamily::Infinity: return kInf;
    case DistFamily::Bernoulli: break;
    }
    throw InvalidParameters("Bernoulli has no time mean; it models defense enablement");
}

double TtcDistribution::sample(Rng& rng) const {
    switch (family_) {
    case DistFamily::Constant: return params_[0];
    case DistFamily::Exponential: return -std::log(rng.next_open()) / params_[0];
    case DistFamily::Gamma: return sample_gamma(params_[0], params_[1], rng);
    case DistFamily::LogNormal: return std::exp(params_[0] + params_[1] * rng.next_normal());
    case DistFamily::Infinity: return kInf;
    case DistFamily::Bernoulli: break;
    }
    throw InvalidParameters("Bernoulli cannot be sampled as a time; use sample_bool");
}

bool TtcDistribution::sample_bool(Rng& rng) const {
    if (family_ != DistFamily::Bernoulli)
        throw InvalidParameters("sample_bool is only defined for Bernoulli");
    return rng.next_double() < params_[0];
}

} // namespace threatlang
