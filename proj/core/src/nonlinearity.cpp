#include "ibrid/nonlinearity.hpp"

#include "ibrid/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ibrid {

namespace {

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double mexican_hat(double r) {
    const double r2 = r * r;
    return (1.0 - r2) * std::exp(-0.5 * r2);
}

double mexican_hat_derivative(double r) {
    const double r2 = r * r;
    return -r * (3.0 - r2) * std::exp(-0.5 * r2);
}

void check_breakpoints(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2) throw ContractError("piecewise_linear: need at least 2 breakpoints");
    if (xs.size() != ys.size())
        throw ContractError("piecewise_linear: breakpoint/value count mismatch");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1]))
            throw ContractError("piecewise_linear: breakpoints must be strictly increasing");
}

} // namespace

std::string to_string(NlFamily family) {
    switch (family) {
        case NlFamily::identity: return "identity";
        case NlFamily::piecewise_linear: return "piecewise_linear";
        case NlFamily::polynomial: return "polynomial";
        case NlFamily::sigmoid_network: return "sigmoid_network";
        case NlFamily::wavelet_network: return "wavelet_network";
    }
    return "unknown";
}

NlFamily nl_family_from_string(const std::string& name) {
    if (name == "identity") return NlFamily::identity;
    if (name == "piecewise_linear") return NlFamily::piecewise_linear;
    if (name == "polynomial") return NlFamily::polynomial;
    if (name == "sigmoid_network") return NlFamily::sigmoid_network;
    if (name == "wavelet_network") return NlFamily::wavelet_network;
    throw ContractError("unknown nonlinearity family '" + name + "'");
}

Nonlinearity Nonlinearity::identity() { return Nonlinearity(); }

Nonlinearity Nonlinearity::piecewise_linear(std::vector<double> breakpoints,
                                            std::vector<double> values) {
    check_breakpoints(breakpoints, values);
    Nonlinearity nl;
    nl.family_ = NlFamily::piecewise_linear;
    nl.xs_ = std::move(breakpoints);
    nl.ys_ = std::move(values);
    return nl;
}

Nonlinearity Nonlinearity::polynomial(std::vector<double> coefficients) {
    if (coefficients.size() < 2)
        throw ContractError("polynomial: degree must be >= 1 (need >= 2 coefficients)");
    Nonlinearity nl;
    nl.family_ = NlFamily::polynomial;
    nl.coeffs_ = std::move(coefficients);
    return nl;
}

Nonlinearity Nonlinearity::sigmoid_network(std::vector<NlUnit> units, double offset,
                                           double linear_slope) {
    if (units.empty()) throw ContractError("sigmoid_network: need at least one unit");
    Nonlinearity nl;
    nl.family_ = NlFamily::sigmoid_network;
    nl.units_ = std::move(units);
    nl.offset_ = offset;
    nl.slope_ = linear_slope;
    return nl;
}

Nonlinearity Nonlinearity::wavelet_network(std::vector<NlUnit> units, double offset,
                                           double linear_slope) {
    if (units.empty()) throw ContractError("wavelet_network: need at least one unit");
    Nonlinearity nl;
    nl.family_ = NlFamily::wavelet_network;
    nl.units_ = std::move(units);
    nl.offset_ = offset;
    nl.slope_ = linear_slope;
    return nl;
}

double Nonlinearity::operator()(double x) const {
    switch (family_) {
        case NlFamily::identity:
            return x;
        case NlFamily::piecewise_linear: {
            const std::size_t n = xs_.size();
            if (x <= xs_.front()) {
                const double s = (ys_[1] - ys_[0]) / (xs_[1] - xs_[0]);
                return ys_[0] + s * (x - xs_[0]);
            }
            if (x >= xs_.back()) {
                const double s = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
                return ys_[n - 1] + s * (x - xs_[n - 1]);
            }
            const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
            const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
            return ys_[i - 1] + w * (ys_[i] - ys_[i - 1]);
        }
        case NlFamily::polynomial: {
            double acc = 0.0;
            for (std::size_t i = coeffs_.size(); i-- > 0;) acc = acc * x + coeffs_[i];
            return acc;
        }
        case NlFamily::sigmoid_network: {
            double acc = offset_ + slope_ * x;
            for (const auto& u : units_) acc += u.amplitude * logistic(u.dilation * (x - u.translation));
            return acc;
        }
        case NlFamily::wavelet_network: {
            double acc = offset_ + slope_ * x;
            for (const auto& u : units_) acc += u.amplitude * mexican_hat(u.dilation * (x - u.translation));
            return acc;
        }
    }
    return x;
}

double Nonlinearity::input_derivative(double x) const {
    switch (family_) {
        case NlFamily::identity:
            return 1.0;
        case NlFamily::piecewise_linear: {
            const std::size_t n = xs_.size();
            std::size_t i;
            if (x <= xs_.front())
                i = 1;
            else if (x >= xs_.back())
                i = n - 1;
            else
                i = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin());
            return (ys_[i] - ys_[i - 1]) / (xs_[i] - xs_[i - 1]);
        }
        case NlFamily::polynomial: {
            double acc = 0.0;
            for (std::size_t i = coeffs_.size(); i-- > 1;)
                acc = acc * x + coeffs_[i] * static_cast<double>(i);
            return acc;
        }
        case NlFamily::sigmoid_network: {
            double acc = slope_;
            for (const auto& u : units_) {
                const double s = logistic(u.dilation * (x - u.translation));
                acc += u.amplitude * s * (1.0 - s) * u.dilation;
            }
            return acc;
        }
        case NlFamily::wavelet_network: {
            double acc = slope_;
            for (const auto& u : units_)
                acc += u.amplitude * mexican_hat_derivative(u.dilation * (x - u.translation)) * u.dilation;
            return acc;
        }
    }
    return 1.0;
}

std::size_t Nonlinearity::parameter_count() const {
    switch (family_) {
        case NlFamily::identity: return 0;
        case NlFamily::piecewise_linear: return xs_.size() + ys_.size();
        case NlFamily::polynomial: return coeffs_.size();
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network: return units_.size() * 3 + 2;
    }
    return 0;
}

void Nonlinearity::pack_parameters(std::span<double> out) const {
    if (out.size() != parameter_count()) throw ContractError("Nonlinearity: pack size mismatch");
    std::size_t j = 0;
    switch (family_) {
        case NlFamily::identity:
            break;
        case NlFamily::piecewise_linear:
            for (double v : xs_) out[j++] = v;
            for (double v : ys_) out[j++] = v;
            break;
        case NlFamily::polynomial:
            for (double v : coeffs_) out[j++] = v;
            break;
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network:
            for (const auto& u : units_) {
                out[j++] = u.amplitude;
                out[j++] = u.dilation;
                out[j++] = u.translation;
            }
            out[j++] = offset_;
            out[j++] = slope_;
            break;
    }
}

void Nonlinearity::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) throw ContractError("Nonlinearity: unpack size mismatch");
    std::size_t j = 0;
    switch (family_) {
        case NlFamily::identity:
            break;
        case NlFamily::piecewise_linear: {
            std::vector<double> xs(xs_.size()), ys(ys_.size());
            for (auto& v : xs) v = params[j++];
            for (auto& v : ys) v = params[j++];
            check_breakpoints(xs, ys);
            xs_ = std::move(xs);
            ys_ = std::move(ys);
            break;
        }
        case NlFamily::polynomial:
            for (auto& v : coeffs_) v = params[j++];
            break;
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network:
            for (auto& u : units_) {
                u.amplitude = params[j++];
                u.dilation = params[j++];
                u.translation = params[j++];
            }
            offset_ = params[j++];
            slope_ = params[j++];
            break;
    }
}

std::vector<bool> Nonlinearity::analytic_parameter_mask() const {
    std::vector<bool> mask(parameter_count(), true);
    if (family_ == NlFamily::piecewise_linear)
        for (std::size_t i = 0; i < xs_.size(); ++i) mask[i] = false; // breakpoints -> FD
    return mask;
}

void Nonlinearity::parameter_gradient(double x, std::span<double> grad) const {
    if (grad.size() != parameter_count())
        throw ContractError("Nonlinearity: gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
    switch (family_) {
        case NlFamily::identity:
            break;
        case NlFamily::piecewise_linear: {
            // hat-basis sensitivity of the values; breakpoints handled by FD
            const std::size_t n = xs_.size();
            const std::size_t base = n;
            if (x <= xs_.front()) {
                const double w = (x - xs_[0]) / (xs_[1] - xs_[0]);
                grad[base + 0] = 1.0 - w;
                grad[base + 1] = w;
            } else if (x >= xs_.back()) {
                const double w = (x - xs_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
                grad[base + n - 2] = 1.0 - w;
                grad[base + n - 1] = w;
            } else {
                const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
                const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
                const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
                grad[base + i - 1] = 1.0 - w;
                grad[base + i] = w;
            }
            break;
        }
        case NlFamily::polynomial: {
            double p = 1.0;
            for (std::size_t i = 0; i < coeffs_.size(); ++i) {
                grad[i] = p;
                p *= x;
            }
            break;
        }
        case NlFamily::sigmoid_network: {
            std::size_t j = 0;
            for (const auto& u : units_) {
                const double z = u.dilation * (x - u.translation);
                const double s = logistic(z);
                const double ds = s * (1.0 - s);
                grad[j++] = s;
                grad[j++] = u.amplitude * ds * (x - u.translation);
                grad[j++] = -u.amplitude * ds * u.dilation;
            }
            grad[j++] = 1.0;
            grad[j++] = x;
            break;
        }
        case NlFamily::wavelet_network: {
            std::size_t j = 0;
            for (const auto& u : units_) {
                const double r = u.dilation * (x - u.translation);
                grad[j++] = mexican_hat(r);
                grad[j++] = u.amplitude * mexican_hat_derivative(r) * (x - u.translation);
                grad[j++] = -u.amplitude * mexican_hat_derivative(r) * u.dilation;
            }
            grad[j++] = 1.0;
            grad[j++] = x;
            break;
        }
    }
}

const std::vector<double>& Nonlinearity::breakpoints() const {
    if (family_ != NlFamily::piecewise_linear) throw ContractError("not a piecewise_linear");
    return xs_;
}
const std::vector<double>& Nonlinearity::values() const {
    if (family_ != NlFamily::piecewise_linear) throw ContractError("not a piecewise_linear");
    return ys_;
}
const std::vector<double>& Nonlinearity::coefficients() const {
    if (family_ != NlFamily::polynomial) throw ContractError("not a polynomial");
    return coeffs_;
}
const std::vector<NlUnit>& Nonlinearity::units() const {
    if (family_ != NlFamily::sigmoid_network && family_ != NlFamily::wavelet_network)
        throw ContractError("not a unit network");
    return units_;
}

} // namespace ibrid
