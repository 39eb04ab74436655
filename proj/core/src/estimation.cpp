#include "ibrid/estimation.hpp"

#include "ibrid/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace ibrid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t effective_discard(const HWModelMiso& model, int transient_discard) {
    return std::max<std::size_t>(static_cast<std::size_t>(std::max(transient_discard, 0)),
                                 model.linear.denominator_order());
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::subspace_gauss_newton: return "subspace_gauss_newton";
        case Method::adaptive_subspace_gauss_newton: return "adaptive_subspace_gauss_newton";
        case Method::levenberg_marquardt: return "levenberg_marquardt";
        case Method::steepest_descent: return "steepest_descent";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "subspace_gauss_newton") return Method::subspace_gauss_newton;
    if (name == "adaptive_subspace_gauss_newton") return Method::adaptive_subspace_gauss_newton;
    if (name == "levenberg_marquardt") return Method::levenberg_marquardt;
    if (name == "steepest_descent") return Method::steepest_descent;
    throw ContractError("unknown estimation method '" + name + "'");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::gradient: return "gradient";
        case Termination::loss_stalled: return "loss_stalled";
        case Termination::max_iter: return "max_iter";
        case Termination::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

void EstimationConfig::validate() const {
    if (weight.rows() != weight.cols() || weight.rows() < 1)
        throw ContractError("EstimationConfig: W must be square");
    if (!weight.isApprox(weight.transpose(), 1e-12))
        throw ContractError("EstimationConfig: W must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(weight);
    if (es.eigenvalues().minCoeff() < -1e-12)
        throw ContractError("EstimationConfig: W must be positive semidefinite");
    if (!(gradient_tolerance > 0.0) || !(loss_improvement_tolerance > 0.0))
        throw ContractError("EstimationConfig: tolerances must be > 0");
    if (max_iterations < 1) throw ContractError("EstimationConfig: max_iterations must be >= 1");
}

std::vector<double> prediction_errors(const HWModelMiso& model, const TimeSeries& data,
                                      int transient_discard) {
    if (!data.has_channel(model.output_name))
        throw ContractError("prediction_errors: data lacks measured output '" + model.output_name +
                            "'");
    const std::vector<double> sim = simulate_miso(model, data);
    const std::vector<double>& meas = data.channel(model.output_name);
    const std::size_t discard = effective_discard(model, transient_discard);
    if (discard >= sim.size()) throw ContractError("prediction_errors: transient discard exceeds data");
    std::vector<double> e(sim.size() - discard);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = meas[k + discard] - sim[k + discard];
    return e;
}

double loss(const HWModelMiso& model, const TimeSeries& data, const EstimationConfig& config) {
    const double w = config.weight(0, 0);
    const std::vector<double> e = prediction_errors(model, data, config.transient_discard);
    if (!all_finite(e)) return kInf;
    double acc = 0.0;
    for (double v : e) acc += v * v;
    return w * acc / static_cast<double>(e.size());
}

// ---------------------------------------------------------------------------
// Jacobian
// ---------------------------------------------------------------------------

namespace {

// y[k] = b(q) u[k] - f(q) y[k]: one shared-denominator recursion.
void iir_filter(std::span<const double> input, const std::vector<double>& den,
                std::span<double> out) {
    const std::size_t nf = den.size();
    for (std::size_t k = 0; k < input.size(); ++k) {
        double acc = input[k];
        for (std::size_t m = 1; m <= nf && m <= k; ++m) acc -= den[m - 1] * out[k - m];
        out[k] = acc;
    }
}

struct ForwardPass {
    std::vector<std::vector<double>> w;      // post input-NL signals
    std::vector<double> x;                   // linear block output
    std::vector<double> hprime_over_scale;   // h'(xn) / scale
    std::vector<double> sim;                 // model output
};

ForwardPass forward_pass(const HWModelMiso& model, const TimeSeries& data) {
    const std::size_t n = data.length();
    const auto& lin = model.linear;
    ForwardPass fp;
    fp.w.resize(lin.input_count());
    for (std::size_t i = 0; i < lin.input_count(); ++i) {
        const auto& u = data.channel(model.input_names[i]);
        fp.w[i].resize(n);
        for (std::size_t k = 0; k < n; ++k) fp.w[i][k] = model.input_nonlinearities[i](u[k]);
    }
    fp.x.assign(n, 0.0);
    const std::size_t nb = lin.numerator_order();
    const auto nk = static_cast<std::size_t>(lin.delay);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < lin.input_count(); ++i)
            for (std::size_t j = 0; j < nb; ++j)
                if (k >= nk + j) acc += lin.numerators[i][j] * fp.w[i][k - nk - j];
        for (std::size_t m = 1; m <= lin.denominator_order() && m <= k; ++m)
            acc -= lin.denominator[m - 1] * fp.x[k - m];
        fp.x[k] = acc;
    }
    fp.hprime_over_scale.resize(n);
    fp.sim.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double xn = (fp.x[k] - model.output_offset) / model.output_scale;
        fp.sim[k] = model.output_nonlinearity(xn);
        fp.hprime_over_scale[k] = model.output_nonlinearity.input_derivative(xn) / model.output_scale;
    }
    return fp;
}

// finite-difference step tailored to a breakpoint parameter so the
// perturbation cannot cross a neighbour
double fd_step_for(const HWModelMiso& model, std::size_t flat_index, double value) {
    double step = 1e-6 * std::max(1.0, std::abs(value));
    std::size_t base = 0;
    for (const auto& nl : model.input_nonlinearities) {
        const std::size_t np = nl.parameter_count();
        if (flat_index < base + np && nl.family() == NlFamily::piecewise_linear) {
            const auto& xs = nl.breakpoints();
            const std::size_t local = flat_index - base;
            if (local < xs.size()) {
                double gap = kInf;
                if (local > 0) gap = std::min(gap, xs[local] - xs[local - 1]);
                if (local + 1 < xs.size()) gap = std::min(gap, xs[local + 1] - xs[local]);
                step = std::min(step, 0.25 * gap);
            }
        }
        base += np;
    }
    base += model.linear.parameter_count();
    const auto& h = model.output_nonlinearity;
    if (h.family() == NlFamily::piecewise_linear && flat_index >= base) {
        const auto& xs = h.breakpoints();
        const std::size_t local = flat_index - base;
        if (local < xs.size()) {
            double gap = kInf;
            if (local > 0) gap = std::min(gap, xs[local] - xs[local - 1]);
            if (local + 1 < xs.size()) gap = std::min(gap, xs[local + 1] - xs[local]);
            step = std::min(step, 0.25 * gap);
        }
    }
    return step;
}

} // namespace

JacobianResult jacobian(const HWModelMiso& model, const TimeSeries& data,
                        const EstimationConfig& config) {
    model.validate();
    const std::size_t n = data.length();
    const std::size_t np = model.parameter_count();
    const std::size_t discard = effective_discard(model, config.transient_discard);
    if (discard >= n) throw ContractError("jacobian: transient discard exceeds data");
    const std::size_t rows = n - discard;

    const std::vector<double>& meas = data.channel(model.output_name);
    const ForwardPass fp = forward_pass(model, data);

    JacobianResult out;
    out.jacobian.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(np));
    out.error.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t k = 0; k < rows; ++k)
        out.error(static_cast<Eigen::Index>(k)) = meas[k + discard] - fp.sim[k + discard];

    const auto& lin = model.linear;
    const std::size_t nb = lin.numerator_order();
    const auto nk = static_cast<std::size_t>(lin.delay);

    // analytic-parameter mask over the packed theta
    std::vector<bool> mask;
    mask.reserve(np);
    for (const auto& nl : model.input_nonlinearities) {
        const auto m = nl.analytic_parameter_mask();
        mask.insert(mask.end(), m.begin(), m.end());
    }
    mask.insert(mask.end(), lin.parameter_count(), true);
    {
        const auto m = model.output_nonlinearity.analytic_parameter_mask();
        mask.insert(mask.end(), m.begin(), m.end());
    }

    std::size_t col = 0;
    std::vector<double> work(n), filtered(n);

    // input-nonlinearity parameters
    for (std::size_t i = 0; i < lin.input_count(); ++i) {
        const auto& nl = model.input_nonlinearities[i];
        const std::size_t nlp = nl.parameter_count();
        if (nlp == 0) continue;
        const auto& u = data.channel(model.input_names[i]);
        std::vector<double> grads(n * nlp);
        for (std::size_t k = 0; k < n; ++k)
            nl.parameter_gradient(u[k], std::span<double>(grads).subspan(k * nlp, nlp));
        for (std::size_t p = 0; p < nlp; ++p, ++col) {
            if (!mask[col]) continue;
            // sensitivity signal filtered through B_i q^-nk / F
            for (std::size_t k = 0; k < n; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < nb; ++j)
                    if (k >= nk + j) acc += lin.numerators[i][j] * grads[(k - nk - j) * nlp + p];
                work[k] = acc;
            }
            iir_filter(work, lin.denominator, filtered);
            for (std::size_t k = 0; k < rows; ++k)
                out.jacobian(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(col)) =
                    -fp.hprime_over_scale[k + discard] * filtered[k + discard];
        }
    }

    // numerator coefficients: columns are shifted copies of (1/F) w_i
    for (std::size_t i = 0; i < lin.input_count(); ++i) {
        iir_filter(fp.w[i], lin.denominator, filtered);
        for (std::size_t j = 0; j < nb; ++j, ++col) {
            for (std::size_t k = 0; k < rows; ++k) {
                const std::size_t kk = k + discard;
                const double z = kk >= nk + j ? filtered[kk - nk - j] : 0.0;
                out.jacobian(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(col)) =
                    -fp.hprime_over_scale[kk] * z;
            }
        }
    }

    // denominator coefficients: d x / d f_m = -(1/F) x[k-m]
    if (lin.denominator_order() > 0) {
        iir_filter(fp.x, lin.denominator, filtered);
        for (std::size_t m = 1; m <= lin.denominator_order(); ++m, ++col) {
            for (std::size_t k = 0; k < rows; ++k) {
                const std::size_t kk = k + discard;
                const double z = kk >= m ? filtered[kk - m] : 0.0;
                out.jacobian(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(col)) =
                    fp.hprime_over_scale[kk] * z;
            }
        }
    }

    // output-nonlinearity parameters
    {
        const auto& h = model.output_nonlinearity;
        const std::size_t hp = h.parameter_count();
        if (hp > 0) {
            std::vector<double> grad(hp);
            for (std::size_t k = 0; k < rows; ++k) {
                const std::size_t kk = k + discard;
                const double xn = (fp.x[kk] - model.output_offset) / model.output_scale;
                h.parameter_gradient(xn, grad);
                for (std::size_t p = 0; p < hp; ++p)
                    if (mask[col + p])
                        out.jacobian(static_cast<Eigen::Index>(k),
                                     static_cast<Eigen::Index>(col + p)) = -grad[p];
            }
            col += hp;
        }
    }

    // finite-difference columns (piecewise-linear breakpoints)
    std::vector<double> theta = model.pack();
    for (std::size_t p = 0; p < np; ++p) {
        if (mask[p]) continue;
        const double step = fd_step_for(model, p, theta[p]);
        HWModelMiso pert = model;
        std::vector<double> th = theta;
        th[p] = theta[p] + step;
        pert.unpack(th);
        const std::vector<double> yp = simulate_miso(pert, data);
        th[p] = theta[p] - step;
        pert.unpack(th);
        const std::vector<double> ym = simulate_miso(pert, data);
        for (std::size_t k = 0; k < rows; ++k)
            out.jacobian(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) =
                -(yp[k + discard] - ym[k + discard]) / (2.0 * step);
    }

    if (!out.jacobian.allFinite() || !out.error.allFinite())
        throw NumericalError("jacobian: non-finite entries");
    return out;
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

namespace detail {

Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& err, double w,
                                  double cutoff, int max_rank, int* rank_out) {
    const double sw = std::sqrt(std::max(w, 0.0));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(sw * jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (!(smax > 0.0)) throw NumericalError("gauss_newton_step: zero Jacobian");

    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) >= cutoff * smax) ++rank;
    if (max_rank >= 0) rank = std::min(rank, max_rank);
    rank = std::max(rank, 1);
    if (rank_out) *rank_out = rank;

    const Eigen::VectorXd uty = svd.matrixU().leftCols(rank).transpose() * (sw * err);
    Eigen::VectorXd scaled(rank);
    for (int i = 0; i < rank; ++i) scaled(i) = uty(i) / sv(i);
    return -(svd.matrixV().leftCols(rank) * scaled);
}

Eigen::VectorXd lm_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& err, double w,
                        double lambda) {
    const Eigen::Index np = jac.cols();
    Eigen::MatrixXd a = w * (jac.transpose() * jac);
    a.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = -w * (jac.transpose() * err);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw NumericalError("lm_step: factorization failed");
    Eigen::VectorXd d = ldlt.solve(rhs);
    if (!d.allFinite() || d.size() != np) throw NumericalError("lm_step: non-finite step");
    return d;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Estimation loop
// ---------------------------------------------------------------------------

namespace {

// Applies theta + delta; returns +inf loss when the parameters are invalid
// (e.g. breakpoints crossing) or the simulation diverges.
double try_candidate(HWModelMiso& scratch, const std::vector<double>& theta,
                     const Eigen::VectorXd& delta, const TimeSeries& data,
                     const EstimationConfig& config) {
    std::vector<double> th = theta;
    for (std::size_t i = 0; i < th.size(); ++i) th[i] += delta(static_cast<Eigen::Index>(i));
    try {
        scratch.unpack(th);
    } catch (const ContractError&) {
        return kInf;
    }
    return loss(scratch, data, config);
}

} // namespace

FitResult estimate(const HWModelMiso& initial, const TimeSeries& data,
                   const EstimationConfig& config) {
    config.validate();
    initial.validate();

    FitResult result;
    result.model = initial;
    const double w = config.weight(0, 0);

    double current = loss(result.model, data, config);
    if (!std::isfinite(current)) {
        result.final_loss = current;
        result.termination = Termination::numerical_failure;
        return result;
    }
    result.loss_trace.push_back(current);

    double lambda = config.lm_lambda0;
    int adaptive_rank = -1; // -1: start from the full well-conditioned subspace
    HWModelMiso scratch = result.model;

    try {
        for (int iter = 0; iter < config.max_iterations; ++iter) {
            const JacobianResult jr = jacobian(result.model, data, config);
            const Eigen::VectorXd grad =
                (2.0 / static_cast<double>(jr.error.size())) * w * (jr.jacobian.transpose() * jr.error);
            if (grad.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
                result.termination = Termination::gradient;
                result.final_loss = current;
                return result;
            }

            const std::vector<double> theta = result.model.pack();
            bool accepted = false;
            double next = current;

            switch (config.method) {
                case Method::levenberg_marquardt: {
                    for (int tries = 0; tries < 60 && lambda < 1e14; ++tries) {
                        const Eigen::VectorXd d = detail::lm_step(jr.jacobian, jr.error, w, lambda);
                        const double cand = try_candidate(scratch, theta, d, data, config);
                        if (cand < current) {
                            accepted = true;
                            next = cand;
                            lambda = std::max(lambda * config.lm_decrease, 1e-12);
                            break;
                        }
                        lambda *= config.lm_increase;
                    }
                    break;
                }
                case Method::subspace_gauss_newton: {
                    const Eigen::VectorXd d =
                        detail::gauss_newton_step(jr.jacobian, jr.error, w, config.subspace_cutoff);
                    double alpha = 1.0;
                    for (int tries = 0; tries < 30; ++tries, alpha *= 0.5) {
                        const double cand = try_candidate(scratch, theta, alpha * d, data, config);
                        if (cand < current) {
                            accepted = true;
                            next = cand;
                            break;
                        }
                    }
                    break;
                }
                case Method::adaptive_subspace_gauss_newton: {
                    int full_rank = 0;
                    detail::gauss_newton_step(jr.jacobian, jr.error, w, config.subspace_cutoff, -1,
                                              &full_rank);
                    if (adaptive_rank < 0) adaptive_rank = full_rank;
                    adaptive_rank = std::min(adaptive_rank, full_rank);
                    while (true) {
                        const Eigen::VectorXd d = detail::gauss_newton_step(
                            jr.jacobian, jr.error, w, config.subspace_cutoff, adaptive_rank);
                        const double cand = try_candidate(scratch, theta, d, data, config);
                        if (cand < current) {
                            accepted = true;
                            next = cand;
                            adaptive_rank = std::min(full_rank, adaptive_rank * 2);
                            break;
                        }
                        if (adaptive_rank == 1) {
                            // final fallback: backtrack along the 1-dimensional step
                            Eigen::VectorXd dd = d;
                            for (int tries = 0; tries < 20; ++tries) {
                                dd *= 0.5;
                                const double c2 = try_candidate(scratch, theta, dd, data, config);
                                if (c2 < current) {
                                    accepted = true;
                                    next = c2;
                                    break;
                                }
                            }
                            break;
                        }
                        adaptive_rank = std::max(1, adaptive_rank / 2);
                    }
                    break;
                }
                case Method::steepest_descent: {
                    const Eigen::VectorXd g = w * (jr.jacobian.transpose() * jr.error);
                    const Eigen::VectorXd jg = jr.jacobian * g;
                    const double denom = w * jg.squaredNorm();
                    if (!(denom > 0.0)) throw NumericalError("steepest_descent: flat direction");
                    double eta = g.squaredNorm() / denom; // exact Cauchy step for the quadratic model
                    for (int tries = 0; tries < 40; ++tries, eta *= 0.5) {
                        const double cand = try_candidate(scratch, theta, -eta * g, data, config);
                        if (cand < current) {
                            accepted = true;
                            next = cand;
                            break;
                        }
                    }
                    break;
                }
            }

            if (!accepted) {
                result.termination = Termination::loss_stalled;
                result.final_loss = current;
                return result;
            }

            result.model = scratch;
            current = next;
            result.loss_trace.push_back(current);
            ++result.iterations;

            const std::size_t win = static_cast<std::size_t>(config.stall_window);
            if (result.loss_trace.size() > win) {
                const double past = result.loss_trace[result.loss_trace.size() - 1 - win];
                if (past - current <= config.loss_improvement_tolerance * std::max(1.0, past)) {
                    result.termination = Termination::loss_stalled;
                    result.final_loss = current;
                    return result;
                }
            }
        }
        result.termination = Termination::max_iter;
    } catch (const NumericalError&) {
        result.termination = Termination::numerical_failure;
    }
    result.final_loss = current;
    return result;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

std::size_t StructureSpec::parameter_count() const {
    const std::size_t n_inputs = input_names.size();
    std::size_t per_nl = 0;
    switch (family) {
        case NlFamily::identity: per_nl = 0; break;
        case NlFamily::polynomial: per_nl = static_cast<std::size_t>(nl_degree) + 1; break;
        case NlFamily::piecewise_linear: per_nl = 2 * static_cast<std::size_t>(nl_degree); break;
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network: per_nl = 3 * static_cast<std::size_t>(nl_degree) + 2; break;
    }
    return per_nl * (n_inputs + 1) +
           n_inputs * static_cast<std::size_t>(numerator_order) +
           static_cast<std::size_t>(denominator_order);
}

namespace {

// Least-squares ARX denominators carry no stability guarantee; reflect any
// root outside the unit circle back inside so the starting model simulates.
std::vector<double> stabilize_denominator(const std::vector<double>& den) {
    const std::size_t nf = den.size();
    if (nf == 0) return den;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nf),
                                                      static_cast<Eigen::Index>(nf));
    for (std::size_t m = 0; m < nf; ++m) companion(0, static_cast<Eigen::Index>(m)) = -den[m];
    for (std::size_t m = 1; m < nf; ++m)
        companion(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m - 1)) = 1.0;
    Eigen::VectorXcd roots = companion.eigenvalues();
    bool changed = false;
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        const double mag = std::abs(roots(i));
        if (mag >= 0.995) {
            roots(i) *= 0.99 / mag;
            changed = true;
        }
    }
    if (!changed) return den;
    // rebuild monic coefficients from the stabilized roots
    std::vector<std::complex<double>> poly{1.0};
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        poly.push_back(0.0);
        for (std::size_t j = poly.size() - 1; j >= 1; --j) poly[j] -= roots(i) * poly[j - 1];
    }
    std::vector<double> out(nf);
    for (std::size_t m = 0; m < nf; ++m) out[m] = poly[m + 1].real();
    return out;
}

struct Range {
    double lo, hi;
};

Range observed_range(std::span<const double> v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!(hi - lo > 1e-12)) {
        lo -= 1.0;
        hi += 1.0;
    }
    return {lo, hi};
}

// identity-acting nonlinearity of the requested family over [lo, hi],
// composed with an affine output map y = offset + scale * base(x)
Nonlinearity identity_like(NlFamily family, int degree, Range r, double offset, double scale) {
    switch (family) {
        case NlFamily::identity:
            return Nonlinearity::identity();
        case NlFamily::polynomial: {
            std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
            c[0] = offset;
            c[1] = scale;
            return Nonlinearity::polynomial(std::move(c));
        }
        case NlFamily::piecewise_linear: {
            const int n = std::max(degree, 2);
            std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                xs[static_cast<std::size_t>(i)] =
                    r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
                ys[static_cast<std::size_t>(i)] = offset + scale * xs[static_cast<std::size_t>(i)];
            }
            return Nonlinearity::piecewise_linear(std::move(xs), std::move(ys));
        }
        case NlFamily::sigmoid_network:
        case NlFamily::wavelet_network: {
            const int m = std::max(degree, 1);
            const double span = r.hi - r.lo;
            std::vector<NlUnit> units(static_cast<std::size_t>(m));
            const double dil =
                (family == NlFamily::sigmoid_network ? 4.0 : 2.0) * static_cast<double>(m) / span;
            for (int j = 0; j < m; ++j) {
                units[static_cast<std::size_t>(j)].amplitude = 0.0;
                units[static_cast<std::size_t>(j)].dilation = dil;
                units[static_cast<std::size_t>(j)].translation =
                    r.lo + span * (static_cast<double>(j) + 0.5) / static_cast<double>(m);
            }
            return family == NlFamily::sigmoid_network
                       ? Nonlinearity::sigmoid_network(std::move(units), offset, scale)
                       : Nonlinearity::wavelet_network(std::move(units), offset, scale);
        }
    }
    return Nonlinearity::identity();
}

} // namespace

HWModelMiso initialize(const StructureSpec& spec, const TimeSeries& data) {
    if (spec.input_names.empty()) throw ContractError("initialize: no input channels");
    if (spec.numerator_order < 1) throw ContractError("initialize: numerator order must be >= 1");
    if (spec.denominator_order < 0 || spec.delay < 0)
        throw ContractError("initialize: negative order/delay");

    const std::size_t n = data.length();
    const std::size_t n_in = spec.input_names.size();
    const auto nb = static_cast<std::size_t>(spec.numerator_order);
    const auto nf = static_cast<std::size_t>(spec.denominator_order);
    const auto nk = static_cast<std::size_t>(spec.delay);
    const std::vector<double>& y = data.channel(spec.output_name);

    // ARX regression on mean-removed signals (the operating point would
    // otherwise dominate the least-squares fit); the level comes back through
    // the output-nonlinearity offset below
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    std::vector<double> u_means(n_in, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
        const auto& u = data.channel(spec.input_names[i]);
        for (double v : u) u_means[i] += v;
        u_means[i] /= static_cast<double>(n);
    }

    const std::size_t k0 = std::max(nf, nk + nb - 1) + 1;
    if (k0 + 10 > n) throw ContractError("initialize: not enough data for the requested orders");
    const std::size_t rows = n - k0;
    const std::size_t cols = nf + n_in * nb;

    Eigen::MatrixXd phi(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
    for (std::size_t k = 0; k < rows; ++k) {
        const std::size_t kk = k + k0;
        Eigen::Index c = 0;
        for (std::size_t m = 1; m <= nf; ++m)
            phi(static_cast<Eigen::Index>(k), c++) = -(y[kk - m] - y_mean);
        for (std::size_t i = 0; i < n_in; ++i) {
            const auto& u = data.channel(spec.input_names[i]);
            for (std::size_t j = 0; j < nb; ++j)
                phi(static_cast<Eigen::Index>(k), c++) = u[kk - nk - j] - u_means[i];
        }
        rhs(static_cast<Eigen::Index>(k)) = y[kk] - y_mean;
    }

    LinearBlock lin;
    lin.sample_time = data.sample_time();
    lin.delay = spec.delay;
    lin.numerators.assign(n_in, std::vector<double>(nb, 0.0));
    lin.denominator.assign(nf, 0.0);

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    if (qr.rank() < static_cast<Eigen::Index>(cols)) {
        for (auto& num : lin.numerators) num[0] = 1.0; // unit-gain fallback
    } else {
        const Eigen::VectorXd est = qr.solve(rhs);
        Eigen::Index c = 0;
        for (std::size_t m = 0; m < nf; ++m) lin.denominator[m] = est(c++);
        for (std::size_t i = 0; i < n_in; ++i)
            for (std::size_t j = 0; j < nb; ++j) lin.numerators[i][j] = est(c++);
        lin.denominator = stabilize_denominator(lin.denominator);
    }

    HWModelMiso model;
    model.input_names = spec.input_names;
    model.output_name = spec.output_name;
    model.linear = lin;
    for (std::size_t i = 0; i < n_in; ++i) {
        const Range r = observed_range(data.channel(spec.input_names[i]));
        model.input_nonlinearities.push_back(identity_like(spec.family, spec.nl_degree, r, 0.0, 1.0));
    }
    model.output_nonlinearity = Nonlinearity::identity();
    model.output_offset = 0.0;
    model.output_scale = 1.0;

    if (spec.family != NlFamily::identity) {
        // normalization constants from the linear response with identity input NLs
        HWModelMiso probe = model;
        const std::vector<double> x = simulate_miso(probe, data);
        const Range xr = observed_range(x);
        double x_mean = 0.0;
        for (double v : x) x_mean += v;
        x_mean /= static_cast<double>(x.size());
        const double offset = 0.5 * (xr.hi + xr.lo);
        const double scale = std::max(0.5 * (xr.hi - xr.lo), 1e-9);
        model.output_offset = offset;
        model.output_scale = scale;
        // h((x - o)/s) = x + (y_mean - x_mean): identity on the deviations,
        // shifted back to the measured operating point
        model.output_nonlinearity = identity_like(spec.family, spec.nl_degree, {-1.0, 1.0},
                                                  offset + (y_mean - x_mean), scale);
    }
    model.validate();
    return model;
}

} // namespace ibrid
