#pragma once

#include "ibrid/nonlinearity.hpp"
#include "ibrid/timeseries.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ibrid {

/// Discrete-time rational transfer-function bank at the data sample time: one
/// numerator per input (order n_b, i.e. n_b coefficients), one shared monic
/// denominator (order n_f; the leading 1 is implicit and f_1..f_nf are
/// stored), and a shared input delay n_k in samples.
struct LinearBlock {
    std::vector<std::vector<double>> numerators;
    std::vector<double> denominator; ///< f_1..f_nf (monic 1 implicit)
    int delay = 0;                   ///< n_k >= 0
    double sample_time = 1e-3;

    std::size_t input_count() const { return numerators.size(); }
    std::size_t numerator_order() const { return numerators.empty() ? 0 : numerators.front().size(); }
    std::size_t denominator_order() const { return denominator.size(); }
    std::size_t parameter_count() const {
        return input_count() * numerator_order() + denominator_order();
    }
    void validate() const;

    bool operator==(const LinearBlock&) const = default;
};

/// One MISO Hammerstein-Wiener block: per-input static nonlinearities, the
/// linear dynamic block, an affine normalization of the linear output
/// (recorded at estimation time for conditioning), and the output
/// nonlinearity. theta = [input-NL params | linear params | output-NL params].
struct HWModelMiso {
    std::vector<std::string> input_names;
    std::string output_name;
    std::vector<Nonlinearity> input_nonlinearities;
    LinearBlock linear;
    Nonlinearity output_nonlinearity;
    double output_offset = 0.0; ///< normalization: h is applied to (x - offset) / scale
    double output_scale = 1.0;

    std::size_t parameter_count() const;
    std::vector<double> pack() const;
    void unpack(std::span<const double> theta); ///< throws on size mismatch / invalid params
    void validate() const;

    bool operator==(const HWModelMiso&) const = default;
};

/// The identified MIMO surrogate: three independent MISO blocks producing
/// u_d, u_q and f from the shared input channel set.
struct HWModelMimo {
    std::vector<HWModelMiso> blocks;

    const HWModelMiso& block_for(std::string_view output_name) const;
    void validate() const;

    bool operator==(const HWModelMimo&) const = default;
};

/// Streaming MISO evaluator (zero initial filter state). Feeding one sample
/// per input advances the block by one step; used by both batch simulation
/// and the closed-loop adapter.
class MisoSimulator {
public:
    explicit MisoSimulator(const HWModelMiso& model);
    void reset();
    double step(std::span<const double> inputs);

private:
    const HWModelMiso* model_;
    std::vector<std::vector<double>> w_hist_; // per input, most recent first
    std::vector<double> x_hist_;              // past linear outputs, most recent first
};

/// Batch simulation of one MISO block over named input channels.
std::vector<double> simulate_miso(const HWModelMiso& model, const TimeSeries& inputs);

/// Batch simulation of the full surrogate; returns channels named after each
/// block's output.
TimeSeries simulate_mimo(const HWModelMimo& model, const TimeSeries& inputs);

/// Model artifact persistence (human-readable JSON, atomic write). `metadata`
/// is free-form (fits, FPE, dataset hashes, ...) and is preserved verbatim.
void save_model(const HWModelMimo& model, const std::string& metadata_json,
                const std::filesystem::path& path);
struct LoadedModel {
    HWModelMimo model;
    std::string metadata_json;
};
LoadedModel load_model(const std::filesystem::path& path);

} // namespace ibrid
