#include "ibrid/search.hpp"

#include "ibrid/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace ibrid {

void SearchSpace::validate() const {
    if (families.empty()) throw ContractError("SearchSpace: no nonlinearity families");
    for (NlFamily f : families) {
        const auto it = degree_ranges.find(f);
        if (it == degree_ranges.end() || it->second.first > it->second.second)
            throw ContractError("SearchSpace: missing/empty degree range for " + to_string(f));
    }
    auto check_range = [](std::pair<int, int> r, const char* what) {
        if (r.first > r.second) throw ContractError(std::string("SearchSpace: empty ") + what);
    };
    check_range(numerator_range, "numerator range");
    check_range(denominator_range, "denominator range");
    check_range(delay_range, "delay range");
    if (numerator_range.first < 1) throw ContractError("SearchSpace: n_b must be >= 1");
    if (denominator_range.first < 0 || delay_range.first < 0)
        throw ContractError("SearchSpace: negative orders");
    if (!(fit_threshold > 0.0 && fit_threshold < 100.0))
        throw ContractError("SearchSpace: fit threshold must be in (0, 100)");
    if (!(eps_fpe_rel > 0.0 && eps_fit_abs > 0.0)) throw ContractError("SearchSpace: eps must be > 0");
}

const Candidate& Leaderboard::best() const {
    if (!best_index) throw ContractError("Leaderboard: no best candidate");
    return candidates[*best_index];
}

Method decide_search_algorithm(const StructureSpec& combination, bool after_lm_failure) {
    if (after_lm_failure) return Method::steepest_descent;
    const std::size_t np = combination.parameter_count();
    if (np > 60) {
        const bool unit_network = combination.family == NlFamily::sigmoid_network ||
                                  combination.family == NlFamily::wavelet_network;
        return unit_network ? Method::adaptive_subspace_gauss_newton
                            : Method::subspace_gauss_newton;
    }
    return Method::levenberg_marquardt;
}

const Candidate& compare_and_update(const Candidate& best, const Candidate& challenger,
                                    double eps_fpe_rel, double eps_fit_abs) {
    if (challenger.est_fit > best.est_fit) {
        if (challenger.est_fpe <= best.est_fpe * (1.0 + eps_fpe_rel)) return challenger;
    } else if (challenger.est_fpe < best.est_fpe) {
        if (challenger.est_fit >= best.est_fit - eps_fit_abs) return challenger;
    }
    return best;
}

namespace {

std::vector<StructureSpec> enumerate_grid(const SearchSpace& space,
                                          const std::vector<std::string>& input_names,
                                          const std::string& output_name) {
    std::vector<StructureSpec> grid;
    for (NlFamily family : space.families) {
        const auto [dlo, dhi] = space.degree_ranges.at(family);
        for (int degree = dlo; degree <= dhi; ++degree)
            for (int nb = space.numerator_range.first; nb <= space.numerator_range.second; ++nb)
                for (int nf = space.denominator_range.first; nf <= space.denominator_range.second; ++nf)
                    for (int nk = space.delay_range.first; nk <= space.delay_range.second; ++nk) {
                        StructureSpec s;
                        s.family = family;
                        s.nl_degree = degree;
                        s.numerator_order = nb;
                        s.denominator_order = nf;
                        s.delay = nk;
                        s.input_names = input_names;
                        s.output_name = output_name;
                        grid.push_back(std::move(s));
                    }
    }
    return grid;
}

Candidate fit_candidate(const StructureSpec& structure, std::size_t index,
                        const TimeSeries& est_data, const EstimationConfig& base_config) {
    Candidate cand;
    cand.structure = structure;
    cand.index = index;

    const std::size_t np = structure.parameter_count();
    const std::size_t discard =
        std::max<std::size_t>(static_cast<std::size_t>(std::max(base_config.transient_discard, 0)),
                              static_cast<std::size_t>(structure.denominator_order));

    // structural validity: properness within the declared space and FPE's N > n_p
    if (structure.denominator_order < structure.numerator_order - 1 ||
        est_data.length() <= discard + np) {
        cand.status = "invalid_structure";
        return cand;
    }

    cand.method = decide_search_algorithm(structure);
    EstimationConfig config = base_config;
    config.method = cand.method;

    try {
        const HWModelMiso start = initialize(structure, est_data);
        FitResult fit = estimate(start, est_data, config);
        if (fit.termination == Termination::numerical_failure &&
            cand.method == Method::levenberg_marquardt) {
            cand.method = decide_search_algorithm(structure, /*after_lm_failure=*/true);
            config.method = cand.method;
            fit = estimate(start, est_data, config);
        }
        cand.termination = fit.termination;
        cand.iterations = fit.iterations;
        if (fit.termination == Termination::numerical_failure || !std::isfinite(fit.final_loss)) {
            cand.status = "numerical_failure";
            return cand;
        }

        const std::vector<double> sim = simulate_miso(fit.model, est_data);
        const std::vector<double>& meas = est_data.channel(structure.output_name);
        const std::span<const double> meas_r(meas.data() + discard, meas.size() - discard);
        const std::span<const double> sim_r(sim.data() + discard, sim.size() - discard);
        cand.est_fit = nrmse_fit(meas_r, sim_r);
        std::vector<double> e(meas_r.size());
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = meas_r[k] - sim_r[k];
        cand.est_fpe = fpe(e, np);
        cand.est_loss = fit.final_loss;
        cand.model = std::move(fit.model);
        cand.status = "ok";
    } catch (const Error&) {
        cand.status = "numerical_failure";
        cand.termination = Termination::numerical_failure;
    }
    return cand;
}

void fold_best(Leaderboard& board) {
    board.best_index.reset();
    for (std::size_t i = 0; i < board.candidates.size(); ++i) {
        const Candidate& c = board.candidates[i];
        if (!c.fitted()) continue;
        if (!board.best_index) {
            board.best_index = i;
            continue;
        }
        const Candidate& winner = compare_and_update(board.candidates[*board.best_index], c,
                                                     board.eps_fpe_rel, board.eps_fit_abs);
        board.best_index = winner.index == c.index ? i : *board.best_index;
    }
    if (!board.best_index) return;
    // dominance repair: the epsilon fold can strand a strictly better candidate
    for (;;) {
        const Candidate& best = board.candidates[*board.best_index];
        std::optional<std::size_t> dominator;
        for (std::size_t i = 0; i < board.candidates.size(); ++i) {
            const Candidate& c = board.candidates[i];
            if (c.fitted() && c.est_fit > best.est_fit && c.est_fpe < best.est_fpe) {
                dominator = i;
                break;
            }
        }
        if (!dominator) break;
        board.best_index = dominator;
    }
}

} // namespace

Leaderboard run_search(const SearchSpace& space, const TimeSeries& est_data,
                       const TimeSeries& val_data, const std::string& output_name,
                       const std::vector<std::string>& input_names,
                       const EstimationConfig& est_config, int workers) {
    space.validate();
    est_config.validate();
    if (est_data.sample_time() != val_data.sample_time())
        throw ContractError("run_search: estimation/validation sample_time mismatch");
    for (const auto& name : input_names) {
        if (!est_data.has_channel(name) || !val_data.has_channel(name))
            throw ContractError("run_search: datasets lack input channel '" + name + "'");
    }
    if (!est_data.has_channel(output_name) || !val_data.has_channel(output_name))
        throw ContractError("run_search: datasets lack output channel '" + output_name + "'");

    const std::vector<StructureSpec> grid = enumerate_grid(space, input_names, output_name);

    Leaderboard board;
    board.output_name = output_name;
    board.fit_threshold = space.fit_threshold;
    board.eps_fpe_rel = space.eps_fpe_rel;
    board.eps_fit_abs = space.eps_fit_abs;
    board.candidates.resize(grid.size());

    int n_workers = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::max(1, std::min<int>(n_workers, static_cast<int>(grid.size())));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            board.candidates[i] = fit_candidate(grid[i], i, est_data, est_config);
        }
    };
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    fold_best(board);
    board.above_threshold_count = static_cast<std::size_t>(
        std::count_if(board.candidates.begin(), board.candidates.end(),
                      [&](const Candidate& c) { return c.fitted() && c.est_fit > space.fit_threshold; }));
    return board;
}

// ---------------------------------------------------------------------------
// Validation cascade
// ---------------------------------------------------------------------------

namespace {

// deterministic preference order: repeated extraction of the epsilon-fold best
std::vector<std::size_t> cascade_order(const Leaderboard& board) {
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < board.candidates.size(); ++i)
        if (board.candidates[i].fitted()) remaining.push_back(i);

    std::vector<std::size_t> order;
    order.reserve(remaining.size());
    while (!remaining.empty()) {
        std::size_t best_pos = 0;
        for (std::size_t p = 1; p < remaining.size(); ++p) {
            const Candidate& b = board.candidates[remaining[best_pos]];
            const Candidate& c = board.candidates[remaining[p]];
            const Candidate& w = compare_and_update(b, c, board.eps_fpe_rel, board.eps_fit_abs);
            if (w.index == c.index) best_pos = p;
        }
        // dominance repair within the remaining set
        for (;;) {
            const Candidate& b = board.candidates[remaining[best_pos]];
            bool changed = false;
            for (std::size_t p = 0; p < remaining.size(); ++p) {
                const Candidate& c = board.candidates[remaining[p]];
                if (c.est_fit > b.est_fit && c.est_fpe < b.est_fpe) {
                    best_pos = p;
                    changed = true;
                    break;
                }
            }
            if (!changed) break;
        }
        order.push_back(remaining[best_pos]);
        remaining.erase(remaining.begin() + static_cast<long>(best_pos));
    }
    return order;
}

} // namespace

CascadeResult validation_cascade(const Leaderboard& board, const TimeSeries& val_data,
                                 const CascadeConfig& config) {
    if (board.candidates.empty()) throw ContractError("validation_cascade: empty leaderboard");

    CascadeResult result;
    const std::vector<std::size_t> order = cascade_order(board);

    for (const std::size_t idx : order) {
        const Candidate& cand = board.candidates[idx];
        std::vector<std::string> failures;
        FitReport val_report;
        ResidualReport res_report;
        try {
            const HWModelMiso& model = *cand.model;
            const std::size_t discard = std::max<std::size_t>(
                static_cast<std::size_t>(std::max(config.transient_discard, 0)),
                model.linear.denominator_order());
            const std::vector<double> sim = simulate_miso(model, val_data);
            const std::vector<double>& meas = val_data.channel(model.output_name);
            if (sim.size() <= discard) throw ContractError("validation data shorter than transient");
            const std::span<const double> meas_r(meas.data() + discard, meas.size() - discard);
            const std::span<const double> sim_r(sim.data() + discard, sim.size() - discard);

            std::vector<double> e(meas_r.size());
            double loss_acc = 0.0;
            bool finite = true;
            for (std::size_t k = 0; k < e.size(); ++k) {
                e[k] = meas_r[k] - sim_r[k];
                loss_acc += e[k] * e[k];
                finite = finite && std::isfinite(e[k]);
            }
            const double val_loss = loss_acc / static_cast<double>(e.size());

            val_report.dataset = DatasetLabel::validation;
            val_report.n_p = model.parameter_count();
            val_report.n_samples = e.size();
            val_report.loss = val_loss;

            if (!finite) {
                failures.emplace_back("validation_divergence");
            } else {
                val_report.fit_percent = nrmse_fit(meas_r, sim_r);
                val_report.fpe_value = fpe(e, val_report.n_p);
                if (val_report.fit_percent < config.fit_threshold)
                    failures.emplace_back("validation_fit");
                if (!std::isfinite(val_loss) ||
                    val_loss > config.loss_ratio_max * std::max(cand.est_loss, 1e-300))
                    failures.emplace_back("validation_loss");
                if (!std::isfinite(val_report.fpe_value)) failures.emplace_back("validation_fpe");

                // residual analysis on validation data
                std::vector<double> test_e = e;
                std::size_t input_offset = discard;
                std::optional<std::vector<double>> filter;
                if (config.prewhiten_order > 0) {
                    const PrewhitenResult pw = prewhiten(e, config.prewhiten_order);
                    test_e = pw.filtered;
                    filter = pw.coefficients;
                    input_offset += static_cast<std::size_t>(config.prewhiten_order);
                }
                std::vector<TimeSeries::Channel> inputs;
                for (const auto& name : model.input_names) {
                    const auto& u = val_data.channel(name);
                    inputs.push_back(
                        {name, std::vector<double>(u.begin() + static_cast<long>(input_offset),
                                                   u.end())});
                }
                res_report = correlation_test(test_e, inputs, config.max_lag, config.confidence);
                res_report.prewhitening_filter = std::move(filter);
                if (!res_report.degenerate) {
                    if (!res_report.autocorrelation_pass)
                        failures.emplace_back("residual_autocorrelation");
                    for (const auto& cc : res_report.cross_correlations)
                        if (!cc.pass) {
                            failures.emplace_back("residual_crosscorrelation");
                            break;
                        }
                }
            }
        } catch (const Error& e) {
            failures.emplace_back(std::string("exception: ") + e.what());
        }

        if (failures.empty()) {
            result.winner = cand;
            result.validation_report = val_report;
            result.residual_report = std::move(res_report);
            return result;
        }
        result.rejections.push_back({cand.index, std::move(failures)});
    }

    std::ostringstream log;
    log << "validation_cascade: all " << order.size() << " candidates rejected for output '"
        << board.output_name << "':";
    for (const auto& r : result.rejections) {
        log << "\n  candidate " << r.candidate_index << ":";
        for (const auto& f : r.failed_checks) log << ' ' << f;
    }
    throw ExhaustionError(log.str());
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {
void append_num(std::string& out, double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}
} // namespace

void save_leaderboard(const Leaderboard& board, const std::filesystem::path& path) {
    std::string out =
        "index,family,nl_degree,n_b,n_f,n_k,method,status,termination,iterations,est_fit,est_fpe,"
        "est_loss,is_best\n";
    for (const auto& c : board.candidates) {
        out += std::to_string(c.index);
        out += ',';
        out += to_string(c.structure.family);
        out += ',';
        out += std::to_string(c.structure.nl_degree);
        out += ',';
        out += std::to_string(c.structure.numerator_order);
        out += ',';
        out += std::to_string(c.structure.denominator_order);
        out += ',';
        out += std::to_string(c.structure.delay);
        out += ',';
        out += to_string(c.method);
        out += ',';
        out += c.status;
        out += ',';
        out += c.fitted() ? to_string(c.termination) : std::string("-");
        out += ',';
        out += std::to_string(c.iterations);
        out += ',';
        if (c.fitted()) append_num(out, c.est_fit);
        out += ',';
        if (c.fitted()) append_num(out, c.est_fpe);
        out += ',';
        if (c.fitted()) append_num(out, c.est_loss);
        out += ',';
        out += (board.best_index && *board.best_index == c.index) ? "1" : "0";
        out += '\n';
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ParseError("save_leaderboard: cannot open '" + tmp.string() + "'");
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw ParseError("save_leaderboard: write failed");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ibrid
