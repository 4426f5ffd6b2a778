#pragma once

#include <optional>
#include <string>
#include <vector>

#include "threatlang/rng.hpp"

namespace threatlang {

enum class DistFamily { Constant, Exponential, Gamma, LogNormal, Bernoulli, Infinity };

// Local time-to-compromise distribution attached to an attack step, or a
// Bernoulli enablement attached to a defense. Parameters are validated at
// construction; sampling never fails.
class TtcDistribution {
public:
    // Defaults to Constant(0) so purely structural steps cost nothing.
    TtcDistribution();

    static TtcDistribution constant(double value);
    static TtcDistribution exponential(double rate);
    static TtcDistribution gamma(double shape, double scale);
    static TtcDistribution lognormal(double mu, double sigma);
    static TtcDistribution bernoulli(double p);
    static TtcDistribution infinity();

    // Text form used in DSL sources and JSON graphs, e.g. "Gamma(2.0,1.5)".
    static TtcDistribution parse(const std::string& text);
    std::string to_string() const;

    DistFamily family() const { return family_; }
    const std::vector<double>& params() const { return params_; }

    // Expected value; +inf for Infinity. Not defined for Bernoulli.
    double mean() const;

    // Draw a time sample. Not defined for Bernoulli (use sample_bool).
    double sample(Rng& rng) const;
    // Bernoulli only: draw an enablement flag.
    bool sample_bool(Rng& rng) const;

    bool operator==(const TtcDistribution&) const = default;

private:
    TtcDistribution(DistFamily family, std::vector<double> params);

    DistFamily family_;
    std::vector<double> params_;
};

} // namespace threatlang
